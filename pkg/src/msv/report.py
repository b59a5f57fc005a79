"""CSV and JSON emission with fixed column order and versioned schemas.

All writers are deterministic: rows are sorted by image id, floats are
serialized with ``repr`` (shortest round-trip form), and JSON keys are
sorted. Wall-clock data never enters these files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .errors import InputError
from .metrics import (
    AccuracyByCountTable,
    ImageRecord,
    MetricRanking,
    MetricSummary,
)

SCHEMA_VERSION = 1

RECORD_COLUMNS = (
    "image_id",
    "content_hash",
    "predicted_class",
    "msv_count",
    "degenerate",
    "confidence",
    "entropy",
    "margin",
    "query_count",
    "n_sites",
    "label",
    "correct",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: Sequence[ImageRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in sorted(records, key=lambda r: r.image_id):
        writer.writerow(
            [
                rec.image_id,
                rec.content_hash,
                rec.predicted_class,
                rec.msv_count,
                _fmt(rec.degenerate),
                _fmt(rec.confidence),
                _fmt(rec.entropy),
                _fmt(rec.margin),
                rec.query_count,
                rec.n_sites,
                _fmt(rec.label),
                _fmt(rec.correct),
            ]
        )
    return buf.getvalue()


def records_from_csv(text: str) -> list[ImageRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if tuple(header) != RECORD_COLUMNS:
        raise InputError(f"unexpected records header: {header}")
    out = []
    for row in reader:
        vals = dict(zip(RECORD_COLUMNS, row))
        out.append(
            ImageRecord(
                image_id=vals["image_id"],
                content_hash=vals["content_hash"],
                predicted_class=int(vals["predicted_class"]),
                msv_count=int(vals["msv_count"]),
                degenerate=vals["degenerate"] == "true",
                confidence=float(vals["confidence"]),
                entropy=float(vals["entropy"]),
                margin=float(vals["margin"]),
                query_count=int(vals["query_count"]),
                n_sites=int(vals["n_sites"]),
                label=int(vals["label"]) if vals["label"] else None,
            )
        )
    return out


def summary_to_dict(summary: MetricSummary) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "batch_summary",
        "model": summary.model,
        "sample_size": summary.sample_size,
        "n_degenerate": summary.n_degenerate,
        "accuracy": summary.accuracy,
        "metrics": {
            name: {
                "mean": summary.means[name],
                "interval_low": summary.intervals[name][0],
                "interval_high": summary.intervals[name][1],
            }
            for name in sorted(summary.means)
        },
    }


def summary_from_dict(data: dict) -> MetricSummary:
    if data.get("kind") != "batch_summary":
        raise InputError("not a batch summary document")
    metrics = data["metrics"]
    return MetricSummary(
        model=data["model"],
        sample_size=int(data["sample_size"]),
        n_degenerate=int(data["n_degenerate"]),
        accuracy=data.get("accuracy"),
        means={name: float(m["mean"]) for name, m in metrics.items()},
        intervals={
            name: (float(m["interval_low"]), float(m["interval_high"]))
            for name, m in metrics.items()
        },
    )


def accuracy_table_to_csv(table: AccuracyByCountTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bucket", "n", "accuracy", "ci_half_width"])
    for row in table.rows:
        writer.writerow([row.bucket, row.n, _fmt(row.accuracy), _fmt(row.ci_half_width)])
    return buf.getvalue()


def ranking_to_dict(rankings: dict[str, MetricRanking]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "ranking",
        "metrics": {
            name: {
                "spearman_rho": None if not r.defined else r.rho,
                "defined": r.defined,
                "ordering": list(r.ordering),
                "ranks": list(r.ranks),
            }
            for name, r in sorted(rankings.items())
        },
    }


def ranking_pairs_csv(summaries: Sequence[MetricSummary]) -> str:
    """Plot-ready (score, accuracy) pairs with interval columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "metric", "score", "interval_low", "interval_high", "accuracy"])
    for summary in sorted(summaries, key=lambda s: s.model):
        for name in sorted(summary.means):
            low, high = summary.intervals[name]
            writer.writerow(
                [
                    summary.model,
                    name,
                    _fmt(summary.means[name]),
                    _fmt(low),
                    _fmt(high),
                    _fmt(summary.accuracy),
                ]
            )
    return buf.getvalue()


def dump_json(data: dict, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"missing file: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}")
