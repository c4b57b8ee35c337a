"""Checkpoint container: roundtrip fidelity and validation."""
import numpy as np
import pytest

from pulsenet.checkpoint import MAGIC, load_checkpoint, peek_config, save_checkpoint
from pulsenet.resnet import ModelConfig, build_resnet


def _model(seed=0):
    cfg = ModelConfig("complex", 22, 4, 7, 64, 5)
    model = build_resnet(cfg, seed=seed)
    # perturb so we are not round-tripping fresh init values
    for p in model.parameters():
        p.data += 0.01
    for name, buf in model.named_buffers():
        if name.endswith("running_mean"):
            buf += 0.5
    return model


def test_roundtrip_exact(tmp_path):
    model = _model()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    for (n1, a1), (n2, a2) in zip(model.state_arrays(), loaded.state_arrays()):
        assert n1 == n2
        np.testing.assert_array_equal(a1, a2)
    x = (np.random.default_rng(0).standard_normal((2, 64))
         + 1j * np.random.default_rng(1).standard_normal((2, 64))).astype(np.complex64)
    np.testing.assert_array_equal(model.predict_logits(x), loaded.predict_logits(x))


def test_roundtrip_evaluation_identical(tmp_path):
    from pulsenet.augment import AugmentSpec
    from pulsenet.training import evaluate
    from pulsenet.waveforms import ClassSpec, generate_pulse

    model = _model(seed=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    pulses = [
        generate_pulse(ClassSpec(i % 5, "linear-FM-up"), 48, 6.0, seed=i) for i in range(20)
    ]
    r1 = evaluate(model, pulses, AugmentSpec(d=64), repeats=2, seed=9)
    r2 = evaluate(loaded, pulses, AugmentSpec(d=64), repeats=2, seed=9)
    assert r1.to_json() == r2.to_json()


def test_peek_config(tmp_path):
    model = _model()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    cfg = peek_config(path)
    assert cfg == model.cfg


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"XXXX" + b"\0" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_save_is_deterministic(tmp_path):
    m1 = _model(seed=4)
    m2 = _model(seed=4)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(m1, p1)
    save_checkpoint(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes()[:4] == MAGIC
