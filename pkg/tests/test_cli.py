import json

import numpy as np
import pytest
from PIL import Image

from msv.cli import main
from msv.fixtures import evidence_slot_grid, patch_instance, slot_image


def save_png(x, path):
    arr = np.clip(x.data, 0, 1)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    Image.fromarray((arr * 255).round().astype(np.uint8)).save(path)


def write_patch_model(path, patches):
    path.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "kind": "synthetic_classifier",
                "type": "patch_evidence",
                "patches": [list(p) for p in patches],
                "noise": 0.05,
            }
        )
    )


@pytest.fixture
def three_patch_setup(tmp_path):
    inst = patch_instance(seed=1, n_patches=3)
    image_path = tmp_path / "img.png"
    save_png(inst.x, image_path)
    model_path = tmp_path / "model.json"
    write_patch_model(model_path, inst.patches)
    return inst, image_path, model_path


def run(argv):
    return main(argv)


class TestExplain:
    def test_three_patch_fixture(self, three_patch_setup, tmp_path, capsys):
        inst, image_path, model_path = three_patch_setup
        out = tmp_path / "out"
        code = run(
            [
                "explain",
                "--image", str(image_path),
                "--model", str(model_path),
                "--baseline", "black",
                "--split", "grid",
                "--out", str(out),
            ]
        )
        assert code == 0
        record = json.loads((out / "record.json").read_text())
        assert record["msv_count"] == 3
        assert not record["degenerate"]
        assert record["remainder_class"] != record["predicted_class"]
        assert (out / "overlay.png").exists()
        views = sorted((out / "views").iterdir())
        assert len(views) == 3
        assert (out / "config.json").exists()

    def test_degenerate_constant_model_warns_but_succeeds(self, tmp_path, capsys):
        inst = patch_instance(seed=2, n_patches=1)
        image_path = tmp_path / "img.png"
        save_png(inst.x, image_path)
        model_path = tmp_path / "const.json"
        model_path.write_text(
            json.dumps({"kind": "synthetic_classifier", "type": "constant", "class_index": 0})
        )
        out = tmp_path / "out"
        code = run(
            ["explain", "--image", str(image_path), "--model", str(model_path),
             "--baseline", "black", "--split", "grid", "--out", str(out)]
        )
        assert code == 0
        assert "degenerate" in capsys.readouterr().err
        assert json.loads((out / "record.json").read_text())["degenerate"]

    def test_missing_model_distinct_exit_no_outputs(self, three_patch_setup, tmp_path, capsys):
        _, image_path, _ = three_patch_setup
        out = tmp_path / "fresh"
        code = run(
            ["explain", "--image", str(image_path), "--model", str(tmp_path / "nope.json"),
             "--out", str(out)]
        )
        assert code == 2
        assert not out.exists()

    def test_unreadable_image(self, three_patch_setup, tmp_path):
        _, _, model_path = three_patch_setup
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"this is not a png")
        code = run(["explain", "--image", str(bad), "--model", str(model_path)])
        assert code == 2

    def test_usage_error_exit_one(self):
        assert run(["explain"]) == 1

    def test_detector_model_with_xi(self, tmp_path):
        slots = evidence_slot_grid()
        x = slot_image(12, 12, slots, [True] * 6)
        image_path = tmp_path / "img.png"
        save_png(x, image_path)
        model_path = tmp_path / "det.json"
        model_path.write_text(
            json.dumps(
                {"kind": "synthetic_classifier", "type": "box_detector", "box": [0, 0, 4, 4]}
            )
        )
        out = tmp_path / "out"
        code = run(
            ["explain", "--image", str(image_path), "--model", str(model_path),
             "--baseline", "black", "--split", "grid", "--xi", "0.25", "--out", str(out)]
        )
        assert code == 0


def build_corpus(tmp_path, n_images=12, with_labels=True, seed=0):
    rng = np.random.default_rng(seed)
    slots = evidence_slot_grid()
    img_dir = tmp_path / "corpus"
    img_dir.mkdir(exist_ok=True)
    rows = ["path,label"]
    for i in range(n_images):
        present = (rng.random(6) < 0.8).tolist()
        if not any(present):
            present[0] = True
        x = slot_image(12, 12, slots, present)
        name = f"img{i:03d}.png"
        save_png(x, img_dir / name)
        label = 1 if with_labels else ""
        rows.append(f"corpus/{name},{label}" if with_labels else f"corpus/{name}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    model_path = tmp_path / "model.json"
    write_patch_model(model_path, slots)
    return manifest, model_path, img_dir


def batch_args(manifest, model, out, workers=1, extra=()):
    return [
        "batch", "--manifest", str(manifest), "--model", str(model),
        "--baseline", "black", "--split", "grid", "--out", str(out),
        "--workers", str(workers), "--resamples", "500", *extra,
    ]


class TestBatch:
    def test_outputs_and_labels(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path)
        out = tmp_path / "run"
        assert run(batch_args(manifest, model, out)) == 0
        records = (out / "records.csv").read_text().splitlines()
        assert len(records) == 13
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sample_size"] + summary["n_degenerate"] == 12
        assert summary["accuracy"] is not None
        assert (out / "accuracy_by_count.csv").exists()
        assert (out / "run_meta.json").exists()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path, n_images=10)
        out1, out4 = tmp_path / "w1", tmp_path / "w4"
        assert run(batch_args(manifest, model, out1, workers=1, extra=("--overlays",))) == 0
        assert run(batch_args(manifest, model, out4, workers=4, extra=("--overlays",))) == 0
        assert (out1 / "records.csv").read_bytes() == (out4 / "records.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out4 / "summary.json").read_bytes()
        overlays1 = sorted((out1 / "overlays").iterdir())
        overlays4 = sorted((out4 / "overlays").iterdir())
        assert [p.name for p in overlays1] == [p.name for p in overlays4]
        for a, b in zip(overlays1, overlays4):
            assert a.read_bytes() == b.read_bytes()

    def test_replay_is_bit_identical(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path, n_images=6)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(batch_args(manifest, model, out1)) == 0
        assert run(batch_args(manifest, model, out2)) == 0
        assert (out1 / "records.csv").read_bytes() == (out2 / "records.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_resume_skips_scored_images(self, tmp_path, capsys):
        manifest, model, img_dir = build_corpus(tmp_path, n_images=6)
        out = tmp_path / "run"
        assert run(batch_args(manifest, model, out)) == 0
        first = (out / "records.csv").read_text()
        # add one new image, rerun into the same dir
        slots = evidence_slot_grid()
        save_png(slot_image(12, 12, slots, [True] * 6), img_dir / "img_extra.png")
        manifest_text = manifest.read_text() + "corpus/img_extra.png,1\n"
        manifest.write_text(manifest_text)
        assert run(batch_args(manifest, model, out)) == 0
        second = (out / "records.csv").read_text()
        assert len(second.splitlines()) == len(first.splitlines()) + 1
        for line in first.splitlines()[1:]:
            assert line in second

    def test_config_mismatch_refused(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path, n_images=4)
        out = tmp_path / "run"
        assert run(batch_args(manifest, model, out)) == 0
        code = run(
            ["batch", "--manifest", str(manifest), "--model", str(model),
             "--baseline", "white", "--split", "grid", "--out", str(out)]
        )
        assert code == 2

    def test_partial_failure_recorded_batch_continues(self, tmp_path, capsys):
        manifest, model, img_dir = build_corpus(tmp_path, n_images=5)
        (img_dir / "img002.png").write_bytes(b"corrupted beyond recognition")
        out = tmp_path / "run"
        assert run(batch_args(manifest, model, out)) == 0
        records = (out / "records.csv").read_text().splitlines()
        assert len(records) == 5  # header + 4 surviving rows
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["n_failed"] == 1
        assert "img002" in meta["failures"]
        assert "img002" in capsys.readouterr().err

    def test_accuracy_table_matches_metrics_module(self, tmp_path):
        from msv.metrics import accuracy_by_count
        from msv.report import accuracy_table_to_csv, records_from_csv

        manifest, model, _ = build_corpus(tmp_path, n_images=8)
        out = tmp_path / "run"
        assert run(batch_args(manifest, model, out)) == 0
        records = records_from_csv((out / "records.csv").read_text())
        expected = accuracy_table_to_csv(accuracy_by_count(records))
        assert (out / "accuracy_by_count.csv").read_text() == expected

    def test_empty_directory_warns(self, tmp_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        model = tmp_path / "model.json"
        write_patch_model(model, [(0, 1)])
        out = tmp_path / "run"
        code = run(
            ["batch", "--images", str(empty), "--model", str(model), "--out", str(out)]
        )
        assert code == 0
        assert "no images" in capsys.readouterr().err
        assert (out / "records.csv").read_text().splitlines()[0].startswith("image_id")


class TestRank:
    def make_runs(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path, n_images=10)
        slots = evidence_slot_grid()
        weak_model = tmp_path / "weak.json"
        write_patch_model(weak_model, slots[:2])
        out_a, out_b = tmp_path / "runA", tmp_path / "runB"
        assert run(batch_args(manifest, model, out_a, extra=("--name", "full"))) == 0
        assert run(batch_args(manifest, weak_model, out_b, extra=("--name", "weak"))) == 0
        return out_a, out_b

    def test_ranking_outputs(self, tmp_path, capsys):
        out_a, out_b = self.make_runs(tmp_path)
        out = tmp_path / "rank"
        code = run(["rank", "--run", str(out_a), "--run", str(out_b), "--out", str(out)])
        assert code == 0
        ranking = json.loads((out / "ranking.json").read_text())
        assert ranking["metrics"]["msv_count"]["ordering"][0] == "full"
        assert (out / "pairs.csv").exists()

    def test_identical_models_tie(self, tmp_path):
        manifest, model, _ = build_corpus(tmp_path, n_images=8)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run(batch_args(manifest, model, out_a, extra=("--name", "m1"))) == 0
        assert run(batch_args(manifest, model, out_b, extra=("--name", "m2"))) == 0
        out = tmp_path / "rank"
        assert run(["rank", "--run", str(out_a), "--run", str(out_b), "--out", str(out)]) == 0
        ranking = json.loads((out / "ranking.json").read_text())
        assert ranking["metrics"]["msv_count"]["ranks"] == [1.5, 1.5]
        assert not ranking["metrics"]["msv_count"]["defined"]

    def test_missing_run_dir_listed(self, tmp_path, capsys):
        out_a, _ = self.make_runs(tmp_path)
        missing = tmp_path / "gone"
        code = run(["rank", "--run", str(out_a), "--run", str(missing), "--out", str(tmp_path / "r")])
        assert code == 2
        assert str(missing) in capsys.readouterr().err


class TestVerify:
    def test_default_suite_passes(self, capsys):
        assert run(["verify", "--fuzz-cases", "4"]) == 0
        out = capsys.readouterr().out
        assert "all verification checks passed" in out

    def test_tie_break_negative_control_fails(self, capsys):
        assert run(["verify", "--fuzz-cases", "2", "--tie-break", "high"]) == 4
        assert "determinism replay" in capsys.readouterr().out
