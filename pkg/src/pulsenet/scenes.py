"""Multi-pulse scenes: noisy superpositions of shifted, scaled pulses.

A scene is L pulses from distinct classes, each placed at its own delay
inside a D-sample window with its own amplitude, plus one layer of
circular complex Gaussian noise over the whole window.  The label is the
K-length multi-hot presence vector.
"""
import dataclasses
import math

import numpy as np

from . import seeding
from .seeding import rng_from
from .waveforms import generate_pulse, minimum_length, noise_sigma


@dataclasses.dataclass
class MultiPulseScene:
    l: int
    class_ids: tuple
    delays: tuple
    scales: tuple
    label: np.ndarray  # (K,) float32 multi-hot
    samples: np.ndarray  # (D,) complex64
    pulse_widths: tuple = ()
    snr_db: float = float("nan")


def superpose(components, d, noise_std, seed, num_classes):
    """Sum scaled, shifted pulses into a d-window and add one noise layer.

    components: list of (Pulse, delay, scale) with distinct classes;
    every pulse must satisfy delay + pulse_width <= d.
    """
    ids = [p.class_id for p, _, _ in components]
    if len(set(ids)) != len(ids):
        raise ValueError(f"component classes must be distinct, got {ids}")
    for pulse, delay, scale in components:
        if delay < 0 or delay + pulse.pulse_width > d:
            raise ValueError(
                f"pulse of width {pulse.pulse_width} at delay {delay} overflows window {d}"
            )
        if scale <= 0:
            raise ValueError(f"scales must be positive, got {scale}")
    acc = np.zeros(d, dtype=np.complex128)
    for pulse, delay, scale in components:
        acc[delay : delay + pulse.pulse_width] += scale * pulse.samples.astype(np.complex128)
    if noise_std > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        noise = rng.standard_normal(2 * d) * (noise_std / math.sqrt(2.0))
        acc += noise[0::2] + 1j * noise[1::2]
    label = np.zeros(num_classes, dtype=np.float32)
    for cid in ids:
        label[cid] = 1.0
    return MultiPulseScene(
        l=len(components),
        class_ids=tuple(ids),
        delays=tuple(int(dl) for _, dl, _ in components),
        scales=tuple(float(s) for _, _, s in components),
        label=label,
        samples=acc.astype(np.complex64),
        pulse_widths=tuple(p.pulse_width for p, _, _ in components),
    )


@dataclasses.dataclass
class SceneConfig:
    d: int
    l_values: tuple = (1, 2, 3, 4)
    pulse_width_range: tuple = (100, 1024)
    scale_range: tuple = (0.5, 2.0)  # log-uniform amplitudes
    snr_range_db: tuple = (-12.0, 12.0)

    def validate(self):
        nmin, nmax = self.pulse_width_range
        if nmax > self.d:
            raise ValueError(
                f"pulse_width_range max {nmax} exceeds window {self.d}; "
                "components must fit without truncation"
            )
        if not all(l >= 0 for l in self.l_values):
            raise ValueError("l_values must be non-negative")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def sample_scene(cfg, specs, rng, l=None):
    """One random scene; l defaults to a uniform draw from cfg.l_values."""
    if l is None:
        l = int(rng.choice(cfg.l_values))
    k = len(specs)
    chosen = rng.choice(k, size=l, replace=False) if l else []
    comps = []
    nmin, nmax = cfg.pulse_width_range
    for cid in chosen:
        spec = specs[cid]
        lo = max(nmin, minimum_length(spec))
        n = int(round(np.exp(rng.uniform(np.log(lo), np.log(nmax)))))
        n = min(max(n, lo), nmax)
        delay = int(rng.integers(0, cfg.d - n + 1))
        s_lo, s_hi = cfg.scale_range
        scale = float(np.exp(rng.uniform(np.log(s_lo), np.log(s_hi))))
        comps.append((generate_pulse(spec, n, math.inf, seed=int(rng.integers(2**62))), delay, scale))
    snr = float(rng.uniform(*cfg.snr_range_db))
    scene = superpose(comps, cfg.d, noise_sigma(snr), seed=int(rng.integers(2**62)), num_classes=k)
    scene.snr_db = snr
    return scene


def sample_scene_batch(cfg, specs, count, seed, l=None):
    """(batch (count, D) complex64, labels (count, K), scenes) deterministic in seed."""
    cfg.validate()
    batch = np.empty((count, cfg.d), dtype=np.complex64)
    labels = np.empty((count, len(specs)), dtype=np.float32)
    scenes = []
    for i in range(count):
        rng = rng_from(seed, seeding.SCENE, i)
        scene = sample_scene(cfg, specs, rng, l=l)
        batch[i] = scene.samples
        labels[i] = scene.label
        scenes.append(scene)
    return batch, labels, scenes
