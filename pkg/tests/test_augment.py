"""Padding/truncation/delay augmentation and the SNR dilution law."""
import math

import numpy as np
import pytest
import scipy.stats

from oracles import mc_window_snr_db
from pulsenet.augment import AugmentSpec, augment_batch, draw_delay, effective_snr_db, fit_to_length
from pulsenet.seeding import rng_from
from pulsenet.waveforms import ClassSpec, generate_pulse, phase_code


def _pulse(n=100, snr=10.0, cid=0, seed=1, kind="linear-FM-up"):
    return generate_pulse(ClassSpec(cid, kind), n, snr, seed=seed)


def test_synchronous_centering_matches_example_geometry():
    # N=2261 into D=5000: centered delay is 1369
    p = _pulse(n=2261, snr=10.8)
    spec = AugmentSpec(d=5000, mode="synchronous")
    u = draw_delay(2261, 5000, spec, rng_from(0))
    assert u == (5000 - 2261) // 2 == 1369
    out = fit_to_length(p, spec, u, seed=0)
    np.testing.assert_array_equal(out[u : u + 2261], p.samples)


def test_explicit_delay_places_pulse():
    # N=2261, D=5000, U=200: pulse occupies samples [200, 2461)
    p = _pulse(n=2261, snr=10.8)
    out = fit_to_length(p, AugmentSpec(d=5000), u=200, seed=3)
    np.testing.assert_array_equal(out[200:2461], p.samples)
    assert not np.any(out[:200] == 0)  # noise, not zero padding


def test_equal_length_identity():
    p = _pulse(n=64)
    out = fit_to_length(p, AugmentSpec(d=64), u=0, seed=0)
    np.testing.assert_array_equal(out, p.samples)
    with pytest.raises(ValueError):
        fit_to_length(p, AugmentSpec(d=64), u=1, seed=0)


def test_truncation_keeps_consecutive_window():
    p = _pulse(n=500)
    out = fit_to_length(p, AugmentSpec(d=200), u=37, seed=0)
    np.testing.assert_array_equal(out, p.samples[37:237])


def test_delay_out_of_range():
    p = _pulse(n=100)
    with pytest.raises(ValueError, match="delay"):
        fit_to_length(p, AugmentSpec(d=150), u=51, seed=0)


def test_padding_noise_matches_pulse_noise_variance():
    p = _pulse(n=1000, snr=0.0)
    out = fit_to_length(p, AugmentSpec(d=41000), u=20000, seed=5)
    pad = np.concatenate([out[:20000], out[21000:]])
    # snr 0 dB -> sigma^2 = 1
    assert np.mean(np.abs(pad) ** 2) == pytest.approx(1.0, rel=0.02)


def test_zero_noise_pulse_pads_with_zeros():
    p = _pulse(n=50, snr=math.inf)
    out = fit_to_length(p, AugmentSpec(d=100), u=25, seed=0)
    assert np.all(out[:25] == 0) and np.all(out[75:] == 0)


def test_effective_snr_values():
    assert effective_snr_db(0.0, 1000, 1000) == pytest.approx(0.0)
    assert effective_snr_db(0.0, 1000, 10000) == pytest.approx(-10.0)
    assert effective_snr_db(10.8, 2261, 5000) == pytest.approx(7.3525, abs=2e-3)
    # truncation leaves the window-average SNR unchanged
    assert effective_snr_db(-3.0, 5000, 1000) == pytest.approx(-3.0)


@pytest.mark.parametrize(
    "n,d,snr",
    [(1000, 10000, 0.0), (2261, 5000, 10.8), (300, 1024, -6.0), (500, 250, 4.0)],
)
def test_mc_window_snr_matches_formula(n, d, snr):
    spec = ClassSpec(0, "linear-FM-up")
    aug = AugmentSpec(d=d, mode="synchronous")
    u = abs(n - d) // 2
    est = mc_window_snr_db(spec, n, d, snr, aug, u, trials=1500, seed0=9)
    assert est == pytest.approx(effective_snr_db(snr, n, d), abs=0.2)


def test_asynchronous_delay_uniform_chi_square():
    # 1e5 draws over |N-D|+1 = 21 bins at significance 0.01
    spec = AugmentSpec(d=120)
    rng = rng_from(77)
    draws = np.array([draw_delay(100, 120, spec, rng) for _ in range(100_000)])
    bins = np.bincount(draws, minlength=21)
    assert len(bins) == 21
    expected = len(draws) / 21
    stat = np.sum((bins - expected) ** 2 / expected)
    crit = scipy.stats.chi2.ppf(0.99, df=20)
    assert stat < crit


def test_synchronous_invariant_to_delay_seed_not_noise():
    p = _pulse(n=80, snr=3.0)
    spec = AugmentSpec(d=120, mode="synchronous")
    u1 = draw_delay(80, 120, spec, rng_from(1))
    u2 = draw_delay(80, 120, spec, rng_from(2))
    assert u1 == u2
    a = fit_to_length(p, spec, u1, seed=10)
    b = fit_to_length(p, spec, u1, seed=11)
    np.testing.assert_array_equal(a[u1 : u1 + 80], b[u1 : u1 + 80])
    assert not np.array_equal(a, b)


def test_augment_batch_shape_and_determinism():
    rng = np.random.default_rng(0)
    pulses = [
        _pulse(n=int(rng.integers(60, 400)), snr=5.0, cid=i % 4, seed=i)
        for i in range(512)
    ]
    spec = AugmentSpec(d=3317, rerandomize=False)
    batch, labels = augment_batch(pulses, spec, epoch_seed=5)
    assert batch.shape == (512, 3317) and batch.dtype == np.complex64
    assert labels.shape == (512,)
    batch2, labels2 = augment_batch(pulses, spec, epoch_seed=5)
    np.testing.assert_array_equal(batch, batch2)
    np.testing.assert_array_equal(labels, labels2)


def test_augment_batch_fresh_seed_changes_padding_only_when_sync():
    p = _pulse(n=100, snr=0.0)
    spec = AugmentSpec(d=160, mode="synchronous")
    b1, _ = augment_batch([p], spec, epoch_seed=1)
    b2, _ = augment_batch([p], spec, epoch_seed=2)
    u = 30  # (160-100)//2
    np.testing.assert_array_equal(b1[0, u : u + 100], b2[0, u : u + 100])
    assert not np.array_equal(b1[0, :u], b2[0, :u])


def test_augment_batch_rejects_empty():
    with pytest.raises(ValueError):
        augment_batch([], AugmentSpec(d=10), 0)


def test_padding_preserves_pulse_bit_for_bit():
    for seed in range(5):
        p = _pulse(n=73, snr=-5.0, seed=seed)
        spec = AugmentSpec(d=200)
        u = draw_delay(73, 200, spec, rng_from(seed))
        out = fit_to_length(p, spec, u, seed=seed + 100)
        np.testing.assert_array_equal(out[u : u + 73], p.samples)
