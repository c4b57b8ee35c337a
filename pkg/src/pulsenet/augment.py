"""Noise-pad / truncate / random-delay augmentation.

A pulse of width N becomes a fixed-length window of D samples:

  * N < D: the pulse sits at offset U, with U leading and D-N-U trailing
    samples of complex Gaussian noise whose variance matches the pulse's
    own noise floor (known from its generation SNR);
  * N > D: keep D consecutive samples starting at index U;
  * N == D: pass through.

Asynchronous mode draws U uniformly on {0..|N-D|}; synchronous mode pins
U = floor(|N-D|/2) (time-centered).  Padding a pulse to P times its width
dilutes its window-averaged SNR by the factor 1/P.
"""
import dataclasses
import math

import numpy as np

from . import seeding
from .waveforms import noise_sigma

MODES = ("asynchronous", "synchronous")


@dataclasses.dataclass
class AugmentSpec:
    d: int
    mode: str = "asynchronous"
    rerandomize: bool = True

    def validate(self):
        if self.d < 1:
            raise ValueError("target length d must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode={self.mode!r}: expected one of {MODES}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def draw_delay(n, d, spec, rng):
    """Delay U for a width-n pulse entering a d-window."""
    span = abs(n - d)
    if spec.mode == "synchronous":
        return span // 2
    return int(rng.integers(0, span + 1))


def fit_to_length(pulse, spec, u, seed):
    """Pad or truncate one pulse to spec.d with delay u.

    `seed` (an int or a SeedSequence) drives the padding noise only.
    """
    spec.validate()
    n, d = pulse.pulse_width, spec.d
    span = abs(n - d)
    if not 0 <= u <= span:
        raise ValueError(f"delay u={u} outside [0, {span}] for N={n}, D={d}")
    if n == d:
        return pulse.samples.copy()
    if n > d:
        return pulse.samples[u : u + d].copy()
    out = np.empty(d, dtype=np.complex64)
    sigma = noise_sigma(pulse.snr_db)
    if sigma > 0.0:
        rng = np.random.Generator(np.random.PCG64(seed))
        noise = rng.standard_normal(2 * (d - n)) * (sigma / math.sqrt(2.0))
        pad = (noise[0::2] + 1j * noise[1::2]).astype(np.complex64)
    else:
        pad = np.zeros(d - n, dtype=np.complex64)
    out[:u] = pad[:u]
    out[u : u + n] = pulse.samples
    out[u + n :] = pad[u:]
    return out


def effective_snr_db(snr_in, n, d):
    """Window-averaged SNR after fitting a width-n pulse into d samples.

    Padding by P = d/n > 1 costs 10*log10(P) dB; truncation keeps the
    per-sample SNR, so the window average is unchanged.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return snr_in + 10.0 * math.log10(min(n, d) / d)


def augment_batch(pulses, spec, epoch_seed):
    """Fit every pulse with independently derived delay and noise.

    Returns (batch complex64 (B, D), labels int64 (B,)).  Deterministic in
    (pulses, spec, epoch_seed); callers that want fresh realizations per
    minibatch pass a fresh epoch_seed (see AugmentSpec.rerandomize).
    """
    spec.validate()
    if not pulses:
        raise ValueError("augment_batch needs a non-empty batch")
    batch = np.empty((len(pulses), spec.d), dtype=np.complex64)
    labels = np.empty(len(pulses), dtype=np.int64)
    for i, pulse in enumerate(pulses):
        ss = seeding.derive(epoch_seed, seeding.BATCH, i)
        delay_seed, noise_seed = ss.spawn(2)
        u = draw_delay(pulse.pulse_width, spec.d, spec, np.random.Generator(np.random.PCG64(delay_seed)))
        batch[i] = fit_to_length(pulse, spec, u, noise_seed)
        labels[i] = pulse.class_id
    return batch, labels
