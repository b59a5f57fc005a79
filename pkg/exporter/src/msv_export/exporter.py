"""Export a torchvision classifier to TorchScript plus the msv metadata sidecar.

The exported file and sidecar are exactly what ``msv.backend`` consumes:
a self-contained TorchScript module mapping normalized NCHW float32
batches to logits, and a JSON sidecar with input size, per-channel
normalization statistics, and class count. Every export ends with a
round-trip check: one fixed test image is scored by the source eager
model and by the exported file loaded through the msv backend, and the
export fails (writing nothing) unless the top classes agree and the
probabilities match to 1e-3.

Exports are staged in a temporary directory and moved into place only
after the round-trip check passes, so a failed export leaves no files.
TorchScript archives embed the file's stem and a content id, so the
checksum is reproducible when the same export runs in a fresh process
(which is what the CLI does); re-exports from one long-lived process can
differ in graph-name mangling even though the weights are identical.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from msv import InputTensor
from msv.backend import TorchScriptClassifier, preprocess_batch

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
DEFAULT_INPUT_SIZE = 224
PROB_TOLERANCE = 1e-3

SIDECAR_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1


class ExportError(Exception):
    """The export could not be completed; no files were written."""


@dataclass(frozen=True)
class RoundTripReport:
    """Source-vs-exported agreement on the fixed test image."""

    source_top_class: int
    exported_top_class: int
    max_prob_diff: float

    @property
    def agreed(self) -> bool:
        return (
            self.source_top_class == self.exported_top_class
            and self.max_prob_diff <= PROB_TOLERANCE
        )


@dataclass(frozen=True)
class ExportManifest:
    """What was exported, where, and how it checked out."""

    source: str
    weights: str
    init_seed: int
    model_path: str
    sidecar_path: str
    export_format: str
    torch_version: str
    torchvision_version: str
    n_classes: int
    input_size: int
    sha256: str
    round_trip: RoundTripReport


def fixed_test_image(size: int = 96) -> np.ndarray:
    """The deterministic image every round-trip check scores."""
    rng = np.random.default_rng(20240817)
    ramp = np.linspace(0.1, 0.9, size)
    base = np.stack(
        [
            np.add.outer(ramp, ramp) / 2.0,
            np.add.outer(ramp[::-1], ramp) / 2.0,
            np.add.outer(ramp, ramp[::-1]) / 2.0,
        ],
        axis=2,
    )
    noisy = base + rng.normal(0.0, 0.08, size=base.shape)
    return np.clip(noisy, 0.0, 1.0)


def _build_source_model(identifier: str, weights: str, init_seed: int):
    import torch
    import torchvision

    try:
        builder = torchvision.models.get_model_builder(identifier)
    except ValueError as exc:
        raise ExportError(f"unknown model identifier {identifier!r}: {exc}") from exc

    if weights == "pretrained":
        try:
            weight_enum = torchvision.models.get_model_weights(identifier).DEFAULT
            model = builder(weights=weight_enum)
        except Exception as exc:
            raise ExportError(
                f"could not fetch pretrained weights for {identifier!r} "
                f"(network or cache needed): {exc}"
            ) from exc
        meta = weight_enum.transforms()
        input_size = int(meta.crop_size[0]) if hasattr(meta, "crop_size") else DEFAULT_INPUT_SIZE
        mean = tuple(float(v) for v in getattr(meta, "mean", IMAGENET_MEAN))
        std = tuple(float(v) for v in getattr(meta, "std", IMAGENET_STD))
    elif weights == "random":
        torch.manual_seed(init_seed)
        model = builder(weights=None)
        input_size = DEFAULT_INPUT_SIZE
        mean, std = IMAGENET_MEAN, IMAGENET_STD
    else:
        raise ExportError(f"weights must be 'pretrained' or 'random', got {weights!r}")

    model.eval()
    with torch.inference_mode():
        out = model(torch.zeros(1, 3, input_size, input_size))
    if out.ndim != 2:
        raise ExportError(f"{identifier!r} does not look like a classifier (output {tuple(out.shape)})")
    return model, input_size, mean, std, int(out.shape[1])


def _round_trip(model, model_path: Path, sidecar_path: Path) -> RoundTripReport:
    import torch

    backend = TorchScriptClassifier(model_path, sidecar_path)
    x = InputTensor(fixed_test_image())
    exported = backend.classify_batch([x])[0]

    arrays = preprocess_batch([x], backend.spec)
    with torch.inference_mode():
        logits = model(torch.from_numpy(arrays)).detach().cpu().numpy().astype(np.float64)
    source_scores = np.exp(logits[0] - logits[0].max())
    source_scores /= source_scores.sum()

    return RoundTripReport(
        source_top_class=int(np.argmax(source_scores)),
        exported_top_class=exported.top_class,
        max_prob_diff=float(np.abs(source_scores - exported.scores).max()),
    )


def export_model(
    identifier: str,
    output_dir: str | Path,
    weights: str = "pretrained",
    init_seed: int = 0,
) -> ExportManifest:
    """Export one classifier; returns the manifest (also written as JSON)."""
    import torch
    import torchvision

    model, input_size, mean, std, n_classes = _build_source_model(identifier, weights, init_seed)

    sidecar = {
        "schema_version": SIDECAR_SCHEMA_VERSION,
        "kind": "model_metadata",
        "source": identifier,
        "weights": weights,
        "input_size": [input_size, input_size],
        "normalization": {"mean": list(mean), "std": list(std)},
        "channel_order": "rgb",
        "n_classes": n_classes,
        "output": "logits",
    }

    output_dir = Path(output_dir)
    model_name = f"{identifier}.pt"
    sidecar_name = f"{identifier}.meta.json"
    manifest_name = f"{identifier}.manifest.json"

    with tempfile.TemporaryDirectory() as staging:
        staged_model = Path(staging) / model_name
        staged_sidecar = Path(staging) / sidecar_name
        example = torch.zeros(1, 3, input_size, input_size)
        try:
            with torch.inference_mode():
                scripted = torch.jit.trace(model, example)
            scripted.save(str(staged_model))
        except Exception as exc:
            raise ExportError(f"TorchScript export of {identifier!r} failed: {exc}") from exc
        staged_sidecar.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

        report = _round_trip(model, staged_model, staged_sidecar)
        if not report.agreed:
            raise ExportError(
                f"round-trip mismatch for {identifier!r}: source class "
                f"{report.source_top_class} vs exported {report.exported_top_class}, "
                f"max probability difference {report.max_prob_diff:.2e}"
            )

        output_dir.mkdir(parents=True, exist_ok=True)
        shutil.move(str(staged_model), output_dir / model_name)
        shutil.move(str(staged_sidecar), output_dir / sidecar_name)

    digest = hashlib.sha256((output_dir / model_name).read_bytes()).hexdigest()
    manifest = ExportManifest(
        source=identifier,
        weights=weights,
        init_seed=init_seed,
        model_path=str(output_dir / model_name),
        sidecar_path=str(output_dir / sidecar_name),
        export_format="torchscript",
        torch_version=torch.__version__,
        torchvision_version=torchvision.__version__,
        n_classes=n_classes,
        input_size=input_size,
        sha256=digest,
        round_trip=report,
    )
    payload = {"schema_version": MANIFEST_SCHEMA_VERSION, "kind": "export_manifest"}
    payload.update(asdict(manifest))
    (output_dir / manifest_name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return manifest
