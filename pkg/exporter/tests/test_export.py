import json
import subprocess
import sys

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from msv import InputTensor
from msv.backend import PreprocessingSpec, TorchScriptClassifier
from msv_export import ExportError, export_model, fixed_test_image

MODEL = "squeezenet1_0"


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out = tmp_path_factory.mktemp("export")
    manifest = export_model(MODEL, out, weights="random", init_seed=0)
    return out, manifest


def test_round_trip_acceptance(exported):
    # exported model + sidecar load in the primary backend with top-class
    # agreement and <= 1e-3 probability deviation on the fixed test image
    out, manifest = exported
    assert manifest.round_trip.agreed
    assert manifest.round_trip.source_top_class == manifest.round_trip.exported_top_class
    assert manifest.round_trip.max_prob_diff <= 1e-3
    assert (out / f"{MODEL}.pt").exists()
    assert (out / f"{MODEL}.meta.json").exists()
    assert (out / f"{MODEL}.manifest.json").exists()


def test_checksum_matches_file(exported):
    import hashlib

    out, manifest = exported
    digest = hashlib.sha256((out / f"{MODEL}.pt").read_bytes()).hexdigest()
    assert manifest.sha256 == digest
    written = json.loads((out / f"{MODEL}.manifest.json").read_text())
    assert written["sha256"] == digest
    assert written["round_trip"]["max_prob_diff"] <= 1e-3


def test_sidecar_validates_against_backend_schema(exported):
    out, _ = exported
    spec = PreprocessingSpec.from_sidecar(out / f"{MODEL}.meta.json")
    assert spec.n_classes == 1000
    assert spec.input_size == (224, 224)
    assert spec.output_kind == "logits"


def test_independent_dual_path_comparison(exported):
    # Re-derive the source model from the same seed and compare it against
    # the exported file through the primary backend, end to end.
    out, manifest = exported
    import torchvision

    torch.manual_seed(manifest.init_seed)
    source = torchvision.models.get_model(MODEL, weights=None).eval()

    backend = TorchScriptClassifier(out / f"{MODEL}.pt", out / f"{MODEL}.meta.json")
    x = InputTensor(fixed_test_image())
    exported_pred = backend.classify_batch([x])[0]

    from msv.backend import preprocess_batch

    arrays = preprocess_batch([x], backend.spec)
    with torch.inference_mode():
        logits = source(torch.from_numpy(arrays)).numpy().astype(np.float64)[0]
    probs = np.exp(logits - logits.max())
    probs /= probs.sum()
    assert int(np.argmax(probs)) == exported_pred.top_class
    assert np.abs(probs - exported_pred.scores).max() <= 1e-3


def test_unknown_identifier_writes_nothing(tmp_path):
    out = tmp_path / "fresh"
    with pytest.raises(ExportError, match="identifier"):
        export_model("not_a_real_model_xyz", out, weights="random")
    assert not out.exists()


def test_invalid_weights_mode(tmp_path):
    with pytest.raises(ExportError, match="weights"):
        export_model(MODEL, tmp_path, weights="finetuned")


def test_pretrained_needs_network(tmp_path):
    try:
        export_model(MODEL, tmp_path / "pre", weights="pretrained")
    except ExportError as exc:
        assert "weights" in str(exc)
        assert not (tmp_path / "pre").exists()
    else:
        pytest.skip("network available; pretrained export succeeded")


def _cli_export(out):
    return subprocess.run(
        [
            sys.executable, "-m", "msv_export.cli", MODEL,
            "--out", str(out), "--weights", "random", "--seed", "0",
        ],
        capture_output=True,
        text=True,
    )


def test_reexport_identical_checksum(tmp_path):
    # one export per process, as the CLI runs, is byte-reproducible
    runs = []
    for name in ("a", "b"):
        proc = _cli_export(tmp_path / name)
        assert proc.returncode == 0, proc.stderr
        runs.append(json.loads((tmp_path / name / f"{MODEL}.manifest.json").read_text()))
    assert runs[0]["sha256"] == runs[1]["sha256"]
    bytes_a = (tmp_path / "a" / f"{MODEL}.pt").read_bytes()
    bytes_b = (tmp_path / "b" / f"{MODEL}.pt").read_bytes()
    assert bytes_a == bytes_b


def test_cli_error_exit_code(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "msv_export.cli", "bogus_model", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert "identifier" in proc.stderr
