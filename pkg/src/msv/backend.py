"""Neural inference backend: a serialized TorchScript model plus a JSON sidecar.

The sidecar carries what the model file does not: input size, per-channel
normalization statistics (these double as the dataset-mean masking
baseline), channel order, class count, and whether outputs are logits.
Masking always happens in original image space before any resizing or
normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .core import Baseline, InputTensor, Prediction
from .errors import BackendError, InputError
from .models import Classifier, softmax

SIDECAR_KIND = "model_metadata"
SIDECAR_VERSION = 1


@dataclass(frozen=True)
class PreprocessingSpec:
    """Resize + normalization applied identically to original and masked inputs."""

    input_size: tuple[int, int]
    mean: tuple[float, ...]
    std: tuple[float, ...]
    channel_order: str = "rgb"
    output_kind: str = "logits"
    n_classes: int = 1000

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise InputError("normalization mean and std lengths differ")
        if self.channel_order not in ("rgb", "bgr"):
            raise InputError(f"unsupported channel order {self.channel_order!r}")
        if self.output_kind not in ("logits", "probabilities"):
            raise InputError(f"unsupported output kind {self.output_kind!r}")

    @classmethod
    def from_sidecar(cls, path: str | Path) -> "PreprocessingSpec":
        path = Path(path)
        if not path.exists():
            raise InputError(f"missing metadata sidecar: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed sidecar {path}: {exc}")
        if data.get("kind") != SIDECAR_KIND:
            raise InputError(f"sidecar {path} is not model metadata")
        try:
            norm = data["normalization"]
            return cls(
                input_size=tuple(int(v) for v in data["input_size"]),
                mean=tuple(float(v) for v in norm["mean"]),
                std=tuple(float(v) for v in norm["std"]),
                channel_order=data.get("channel_order", "rgb"),
                output_kind=data.get("output", "logits"),
                n_classes=int(data["n_classes"]),
            )
        except KeyError as exc:
            raise InputError(f"sidecar {path} missing key {exc}")

    def dataset_mean_baseline(self) -> Baseline:
        return Baseline.dataset_mean(self.mean)


def preprocess_batch(batch: Sequence[InputTensor], spec: PreprocessingSpec) -> np.ndarray:
    """Resize and normalize already-masked image-space inputs; returns NCHW float32."""
    n_ch = len(spec.mean)
    out = np.empty((len(batch), n_ch, spec.input_size[0], spec.input_size[1]), dtype=np.float32)
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    for i, item in enumerate(batch):
        if not item.is_image:
            raise BackendError("the neural backend takes image inputs")
        arr = np.clip(item.data, 0.0, 1.0)
        if arr.shape[2] == 1 and n_ch == 3:
            arr = np.repeat(arr, 3, axis=2)
        if arr.shape[2] != n_ch:
            raise BackendError(f"input has {arr.shape[2]} channels, model expects {n_ch}")
        img = Image.fromarray((arr * 255).round().astype(np.uint8))
        img = img.resize((spec.input_size[1], spec.input_size[0]), Image.BILINEAR)
        resized = np.asarray(img, dtype=np.float32) / 255.0
        if resized.ndim == 2:
            resized = resized[:, :, None]
        if spec.channel_order == "bgr":
            resized = resized[:, :, ::-1]
        out[i] = ((resized - mean) / std).transpose(2, 0, 1)
    return out


class TorchScriptClassifier(Classifier):
    """Loads a TorchScript file and scores image batches on the CPU.

    ``classify_batch`` is safe to call from worker threads; inference is
    serialized through torch's inference mode with an internal chunk cap.
    """

    def __init__(self, model_path: str | Path, metadata_path: str | Path, batch_cap: int = 32):
        model_path = Path(model_path)
        if not model_path.exists():
            raise InputError(f"missing model file: {model_path}")
        spec = PreprocessingSpec.from_sidecar(metadata_path)
        super().__init__(spec.n_classes)
        self.spec = spec
        self.batch_cap = int(batch_cap)
        try:
            import torch
        except ImportError as exc:
            raise BackendError("the neural backend needs the optional 'torch' dependency") from exc
        self._torch = torch
        try:
            self._model = torch.jit.load(str(model_path), map_location="cpu")
            self._model.eval()
        except Exception as exc:
            raise BackendError(f"failed to load model {model_path}: {exc}") from exc

    def dataset_mean_baseline(self) -> Baseline:
        return self.spec.dataset_mean_baseline()

    def _predict_batch(self, batch):
        torch = self._torch
        arrays = preprocess_batch(batch, self.spec)
        rows = []
        try:
            with torch.inference_mode():
                for start in range(0, len(batch), self.batch_cap):
                    chunk = torch.from_numpy(arrays[start : start + self.batch_cap])
                    output = self._model(chunk)
                    rows.append(output.detach().cpu().numpy())
        except Exception as exc:
            raise BackendError(f"inference failed: {exc}") from exc
        scores = np.concatenate(rows, axis=0).astype(np.float64)
        if scores.ndim != 2 or scores.shape[1] != self.n_classes:
            raise BackendError(
                f"model output shape {scores.shape} does not match {self.n_classes} classes"
            )
        if self.spec.output_kind == "logits":
            probs = softmax(scores)
        else:
            clipped = np.clip(scores, 0.0, None)
            probs = clipped / clipped.sum(axis=1, keepdims=True)
        return [Prediction(row) for row in probs]
