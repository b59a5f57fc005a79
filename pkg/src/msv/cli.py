"""Command-line surface: explain one image, score a corpus, rank models, verify.

Exit codes: 0 success, 1 usage, 2 input error, 3 backend error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import Baseline, InputTensor
from .errors import BackendError, InputError, MsvError, ParameterError
from .fixtures import (
    flat_patch_instance,
    overlap_instance,
    single_pixel_instance,
)
from .greedy import GreedyConfig, greedy_msvs
from .metrics import ImageRecord, accuracy_by_count, rank_models, score_image, summarize_records
from .models import (
    BoxBrightnessDetector,
    Classifier,
    ConstantClassifier,
    OverlapEvidenceClassifier,
    PatchEvidenceClassifier,
    SinglePixelClassifier,
)
from .oracle import OracleLimit, enumerate_minimal_sufficient, verify_greedy_against_oracle
from .overlay import render_masked_view, render_overlay
from .report import (
    accuracy_table_to_csv,
    dump_json,
    load_json,
    ranking_pairs_csv,
    ranking_to_dict,
    records_from_csv,
    records_to_csv,
    summary_from_dict,
    summary_to_dict,
)
from .split import SplitStrategy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_VERIFY = 4

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=int, default=16, help="number of split groups")
    p.add_argument("--split", choices=("slic", "voronoi", "grid"), default="slic")
    p.add_argument("--seed", type=int, default=0, help="run seed (split and bootstrap)")
    p.add_argument("--baseline", choices=("mean", "white", "black", "random"), default="mean")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--kmeans-iters", type=int, default=10)
    p.add_argument("--max-views", type=int, default=None)
    p.add_argument("--xi", type=float, default=0.25, help="detection threshold")
    p.add_argument(
        "--tie-break", choices=("low", "high"), default="low", help=argparse.SUPPRESS
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="msv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="compute views for one image")
    p_explain.add_argument("--image", required=True)
    p_explain.add_argument("--model", required=True)
    p_explain.add_argument("--meta", default=None, help="metadata sidecar path")
    p_explain.add_argument("--out", default="msv-explain")
    p_explain.add_argument("--scale", type=int, default=1, help="overlay upscale factor")
    _add_run_flags(p_explain)

    p_batch = sub.add_parser("batch", help="score a corpus of images")
    src = p_batch.add_mutually_exclusive_group(required=True)
    src.add_argument("--images", default=None, help="directory of images")
    src.add_argument("--manifest", default=None, help="CSV manifest: path,label")
    p_batch.add_argument("--model", required=True)
    p_batch.add_argument("--meta", default=None)
    p_batch.add_argument("--out", default="msv-batch")
    p_batch.add_argument("--name", default=None, help="model name in reports")
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.add_argument("--resamples", type=int, default=10000)
    p_batch.add_argument("--subsample", type=int, default=None)
    p_batch.add_argument("--overlays", action="store_true")
    p_batch.add_argument("--include-degenerate", action="store_true")
    _add_run_flags(p_batch)

    p_rank = sub.add_parser("rank", help="rank models from batch outputs")
    p_rank.add_argument("--run", action="append", required=True, help="batch output dir")
    p_rank.add_argument("--out", default="msv-rank")

    p_verify = sub.add_parser("verify", help="run the brute-force oracle suite")
    p_verify.add_argument("--max-n", type=int, default=12)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--fuzz-cases", type=int, default=10)
    p_verify.add_argument(
        "--tie-break", choices=("low", "high"), default="low", help=argparse.SUPPRESS
    )
    return parser


def load_image(path: str | Path) -> InputTensor:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing image: {path}")
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise InputError(f"unreadable image {path}: {exc}")
    return InputTensor(arr)


def content_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def build_synthetic_classifier(spec: dict, xi: float) -> Classifier:
    kind = spec.get("type")
    if kind == "patch_evidence":
        return PatchEvidenceClassifier(
            spec["patches"],
            sharpness=spec.get("sharpness", 4.0),
            noise=spec.get("noise", 0.05),
        )
    if kind == "overlap_evidence":
        return OverlapEvidenceClassifier(
            spec["clauses"],
            sharpness=spec.get("sharpness", 4.0),
            noise=spec.get("noise", 0.05),
        )
    if kind == "single_pixel":
        return SinglePixelClassifier(
            site=spec["site"], threshold=spec.get("threshold", 0.5)
        )
    if kind == "constant":
        return ConstantClassifier(
            class_index=spec.get("class_index", 0), n_classes=spec.get("n_classes", 2)
        )
    if kind == "box_detector":
        return BoxBrightnessDetector(box=tuple(spec["box"]), threshold=xi)
    raise InputError(f"unknown synthetic classifier type {kind!r}")


def load_classifier(model: str, meta: str | None, xi: float) -> tuple[Classifier, tuple | None]:
    """Returns the classifier and, for neural backends, the dataset-mean stats."""
    path = Path(model)
    if not path.exists():
        raise InputError(f"missing model file: {path}")
    if path.suffix == ".json":
        spec = load_json(path)
        if spec.get("kind") != "synthetic_classifier":
            raise InputError(f"{path} is not a synthetic classifier spec")
        return build_synthetic_classifier(spec, xi), None
    from .backend import TorchScriptClassifier

    meta_path = Path(meta) if meta else path.with_suffix(".meta.json")
    backend = TorchScriptClassifier(path, meta_path)
    return backend, backend.spec.mean


def build_baseline(kind: str, seed: int, stats: tuple | None) -> Baseline:
    if kind == "mean":
        return Baseline.dataset_mean(stats)
    if kind == "white":
        return Baseline.white()
    if kind == "black":
        return Baseline.black()
    return Baseline.random_normal(seed=seed)


def build_config(args, stats: tuple | None) -> GreedyConfig:
    if args.split == "slic":
        strategy = SplitStrategy.slic(
            seed=args.seed, compactness=args.compactness, max_kmeans_iters=args.kmeans_iters
        )
    elif args.split == "voronoi":
        strategy = SplitStrategy.voronoi(seed=args.seed)
    else:
        strategy = SplitStrategy.grid(seed=args.seed)
    return GreedyConfig(
        beta=args.beta,
        strategy=strategy,
        baseline=build_baseline(args.baseline, args.seed, stats),
        max_views=args.max_views,
        tie_break=args.tie_break,
    )


def echo_config(args, command: str) -> dict:
    keys = {
        "explain": ["image", "model", "meta", "out", "scale"],
        "batch": [
            "images",
            "manifest",
            "model",
            "meta",
            "out",
            "name",
            "workers",
            "resamples",
            "subsample",
            "overlays",
            "include_degenerate",
        ],
    }[command]
    run_keys = [
        "beta",
        "split",
        "seed",
        "baseline",
        "compactness",
        "kmeans_iters",
        "max_views",
        "xi",
        "tie_break",
    ]
    data = {"schema_version": 1, "kind": "run_config", "command": command}
    for key in keys + run_keys:
        data[key] = getattr(args, key)
    return data


def cmd_explain(args) -> int:
    x = load_image(args.image)
    classifier, stats = load_classifier(args.model, args.meta, args.xi)
    cfg = build_config(args, stats)

    result = greedy_msvs(classifier, x, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    overlay = render_overlay(x, result.msv_set, scale=args.scale)
    overlay.save(out / "overlay.png")
    views_dir = out / "views"
    views_dir.mkdir(exist_ok=True)
    baseline_data = cfg.baseline.materialize(x)
    for i, view in enumerate(result.msv_set.views, start=1):
        img = render_masked_view(x, view, baseline_data, scale=args.scale)
        img.save(views_dir / f"view_{i:02d}.png")

    record = {
        "schema_version": 1,
        "kind": "explanation",
        "image": str(args.image),
        "predicted_class": result.msv_set.predicted_class,
        "remainder_class": result.msv_set.remainder_class,
        "msv_count": result.n_views,
        "degenerate": result.degenerate,
        "query_count": result.trace.total_queries,
        "views": [list(v.indices) for v in result.msv_set.views],
        "view_seeds": list(result.view_seeds),
    }
    dump_json(record, out / "record.json")
    dump_json(echo_config(args, "explain"), out / "config.json")
    if result.degenerate:
        print("warning: degenerate run (baseline keeps the predicted class)", file=sys.stderr)
    print(f"{result.n_views} views for class {result.msv_set.predicted_class} -> {out}")
    return EXIT_OK


def _collect_inputs(args) -> list[tuple[str, Path, int | None]]:
    """(image_id, path, optional label) triples, sorted by id."""
    entries: list[tuple[str, Path, int | None]] = []
    if args.images is not None:
        root = Path(args.images)
        if not root.is_dir():
            raise InputError(f"not a directory: {root}")
        for path in sorted(root.iterdir()):
            if path.suffix.lower() in IMAGE_SUFFIXES:
                entries.append((path.stem, path, None))
    else:
        manifest = Path(args.manifest)
        if not manifest.exists():
            raise InputError(f"missing manifest: {manifest}")
        with manifest.open() as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[0].strip() != "path":
                raise InputError("manifest must start with a 'path[,label]' header")
            for row in reader:
                if not row or not row[0].strip():
                    continue
                path = Path(row[0].strip())
                if not path.is_absolute():
                    path = manifest.parent / path
                label = None
                if len(row) > 1 and row[1].strip():
                    label = int(row[1])
                entries.append((path.stem, path, label))
    entries.sort(key=lambda e: e[0])
    ids = [e[0] for e in entries]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InputError(f"duplicate image ids: {dupes[:5]}")
    return entries


def _config_fingerprint(config: dict) -> dict:
    data = dict(config)
    data.pop("workers", None)
    return data


def cmd_batch(args) -> int:
    classifier, stats = load_classifier(args.model, args.meta, args.xi)
    cfg = build_config(args, stats)
    model_name = args.name or Path(args.model).stem
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    config = echo_config(args, "batch")
    config_path = out / "config.json"
    if config_path.exists():
        previous = load_json(config_path)
        if _config_fingerprint(previous) != _config_fingerprint(config):
            raise InputError(
                f"output dir {out} holds results for a different configuration; "
                "use a fresh --out"
            )

    entries = _collect_inputs(args)
    if not entries:
        print("warning: no images found; writing empty records", file=sys.stderr)
        (out / "records.csv").write_text(records_to_csv([]))
        dump_json(config, config_path)
        return EXIT_OK

    existing: dict[tuple[str, str], ImageRecord] = {}
    records_path = out / "records.csv"
    if records_path.exists():
        for rec in records_from_csv(records_path.read_text()):
            existing[(rec.image_id, rec.content_hash)] = rec

    started = time.perf_counter()
    failures: dict[str, str] = {}
    overlays_dir = out / "overlays"
    if args.overlays:
        overlays_dir.mkdir(exist_ok=True)

    def process(entry):
        image_id, path, label = entry
        digest = content_hash(path)
        cached = existing.get((image_id, digest))
        if cached is not None:
            if label is not None and cached.label != label:
                cached = None
            else:
                return cached
        x = load_image(path)
        result = greedy_msvs(classifier, x, cfg)
        if args.overlays:
            render_overlay(x, result.msv_set).save(overlays_dir / f"{image_id}.png")
        return score_image(
            result.prediction,
            result.msv_set,
            image_id=image_id,
            n_sites=x.n_sites,
            degenerate=result.degenerate,
            query_count=result.trace.total_queries,
            label=label,
            content_hash=digest,
        )

    records: list[ImageRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        futures = {pool.submit(process, entry): entry[0] for entry in entries}
        for future, image_id in futures.items():
            try:
                records.append(future.result())
            except MsvError as exc:
                failures[image_id] = str(exc)
                print(f"warning: {image_id} failed: {exc}", file=sys.stderr)

    records.sort(key=lambda r: r.image_id)
    records_path.write_text(records_to_csv(records))
    dump_json(config, config_path)

    if records:
        summary = summarize_records(
            records,
            model=model_name,
            resamples=args.resamples,
            seed=args.seed,
            subsample_size=args.subsample,
            include_degenerate=args.include_degenerate,
        )
        dump_json(summary_to_dict(summary), out / "summary.json")
        labeled = [r for r in records if r.label is not None]
        if labeled:
            table = accuracy_by_count(labeled, include_degenerate=args.include_degenerate)
            (out / "accuracy_by_count.csv").write_text(accuracy_table_to_csv(table))

    dump_json(
        {
            "kind": "run_meta",
            "wall_time_sec": time.perf_counter() - started,
            "workers": args.workers,
            "n_images": len(entries),
            "n_failed": len(failures),
            "failures": failures,
            "classifier_queries": classifier.query_count,
        },
        out / "run_meta.json",
    )
    print(f"scored {len(records)}/{len(entries)} images -> {out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    if len(args.run) < 2:
        raise InputError("ranking needs at least 2 --run directories")
    summaries = []
    for run_dir in args.run:
        path = Path(run_dir) / "summary.json"
        if not path.exists():
            raise InputError(f"missing batch output: {path}")
        summaries.append(summary_from_dict(load_json(path)))
    for summary in summaries:
        if summary.accuracy is None:
            raise InputError(
                f"batch output for {summary.model} has no accuracy; rerun with labels"
            )
    rankings = rank_models(summaries)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(ranking_to_dict(rankings), out / "ranking.json")
    (out / "pairs.csv").write_text(ranking_pairs_csv(summaries))
    for name, ranking in sorted(rankings.items()):
        rho = f"{ranking.rho:+.3f}" if ranking.defined else "undefined"
        print(f"{name:12s} rho={rho}  best={ranking.ordering[0]}")
    return EXIT_OK


def _verify_checks(args):
    """Yields (name, passed, detail) tuples for the oracle suite."""
    baseline = Baseline.black()
    limit = OracleLimit(max_n=args.max_n)

    x, clf = single_pixel_instance(site=0, n=4)
    minimal = enumerate_minimal_sufficient(clf, x, baseline, limit)
    yield (
        "single-pixel enumeration",
        [v.indices for v in minimal] == [(0,)],
        f"views={[v.indices for v in minimal]}",
    )
    verdict, result = verify_greedy_against_oracle(clf, x, baseline, seed=args.seed, limit=limit)
    yield ("single-pixel greedy", verdict.passed and result.n_views == 1, f"count={result.n_views}")

    for d in (2, 3):
        x, clf, _ = flat_patch_instance(seed=7 + d, n_patches=d, n=12)
        verdict, result = verify_greedy_against_oracle(clf, x, baseline, seed=args.seed, limit=limit)
        yield (
            f"{d}-patch greedy vs enumeration",
            verdict.passed and result.n_views == d,
            f"count={result.n_views} expected={d}",
        )

    x, clf = overlap_instance()
    verdict, result = verify_greedy_against_oracle(clf, x, baseline, seed=args.seed, limit=limit)
    yield (
        "overlapping evidence",
        verdict.passed and result.n_views == 1,
        f"count={result.n_views} expected=1",
    )

    x = InputTensor(np.full(4, 0.7))
    degenerate_result = greedy_msvs(
        ConstantClassifier(0),
        x,
        GreedyConfig(beta=4, strategy=SplitStrategy.grid(seed=args.seed), baseline=baseline),
    )
    yield ("constant classifier flagged degenerate", degenerate_result.degenerate, "")

    x1 = InputTensor(np.array([1.0]))
    one = greedy_msvs(
        SinglePixelClassifier(site=0),
        x1,
        GreedyConfig(beta=4, strategy=SplitStrategy.grid(seed=args.seed), baseline=baseline),
    )
    yield (
        "n=1 single view",
        not one.degenerate and one.n_views == 1 and one.msv_set.views[0].indices == (0,),
        f"count={one.n_views}",
    )

    rng = np.random.default_rng(args.seed)
    fuzz_ok, fuzz_detail = True, ""
    for case in range(args.fuzz_cases):
        d = int(rng.integers(1, 5))
        x, clf, _ = flat_patch_instance(seed=int(rng.integers(0, 2**31)), n_patches=d, n=args.max_n)
        verdict, result = verify_greedy_against_oracle(clf, x, baseline, seed=args.seed, limit=limit)
        if not (verdict.passed and result.n_views == d):
            fuzz_ok = False
            fuzz_detail = f"case {case}: count={result.n_views} expected={d}"
            break
    yield (f"exact-minimality fuzz ({args.fuzz_cases} cases)", fuzz_ok, fuzz_detail)

    x, clf, _ = flat_patch_instance(seed=3, n_patches=3, n=12)
    reference = greedy_msvs(
        clf,
        x,
        GreedyConfig(beta=12, strategy=SplitStrategy.grid(seed=args.seed), baseline=baseline),
    )
    replay = greedy_msvs(
        clf,
        x,
        GreedyConfig(
            beta=12,
            strategy=SplitStrategy.grid(seed=args.seed),
            baseline=baseline,
            tie_break=args.tie_break,
        ),
    )
    yield (
        "determinism replay",
        replay.msv_set.views == reference.msv_set.views,
        "tie-break order changed the result" if args.tie_break != "low" else "",
    )


def cmd_verify(args) -> int:
    failed = 0
    for name, ok, detail in _verify_checks(args):
        status = "ok" if ok else "FAIL"
        suffix = f"  ({detail})" if detail and not ok else ""
        print(f"[{status:4s}] {name}{suffix}")
        if not ok:
            failed += 1
    if failed:
        print(f"{failed} verification check(s) failed", file=sys.stderr)
        return EXIT_VERIFY
    print("all verification checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "explain":
            return cmd_explain(args)
        if args.command == "batch":
            return cmd_batch(args)
        if args.command == "rank":
            return cmd_rank(args)
        return cmd_verify(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except MsvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
