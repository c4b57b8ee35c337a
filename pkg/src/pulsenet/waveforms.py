"""Synthetic phase-modulated radar pulse families.

Every class is a constant-envelope (unit-modulus) complex baseband
waveform defined by its phase profile: classic binary/polyphase codes
(Barker, Frank, P1-P4), frequency codes (Costas, stepped), FM sweeps and
seeded pseudorandom codes.  Coded families are defined on a fixed chip
grid and stretched to the requested pulse width, so the same class keeps
its structure across widths spanning orders of magnitude.

Noise is circular complex white Gaussian: independent I/Q components with
variance sigma^2/2 each, sigma^2 = mean clean power / 10^(snr_db/10);
clean pulses have unit power, so sigma^2 = 10^(-snr_db/10) exactly.
"""
import dataclasses
import math

import numpy as np

from .seeding import rng_from

MODULATION_KINDS = (
    "unmodulated",
    "linear-FM-up",
    "linear-FM-down",
    "Barker-7",
    "Barker-11",
    "Barker-13",
    "Frank",
    "P1",
    "P2",
    "P3",
    "P4",
    "Costas",
    "binary-PSK-random-fixed-code",
    "quad-PSK-random-fixed-code",
    "stepped-frequency",
    "nonlinear-FM",
    "noise-modulated",
)

BARKER = {
    7: np.array([1, 1, 1, -1, -1, 1, -1], dtype=np.float64),
    11: np.array([1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1], dtype=np.float64),
    13: np.array([1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1], dtype=np.float64),
}

# Welch Costas sequence: 2^k mod 11, k = 0..9
COSTAS_SEQ = np.array([1, 2, 4, 8, 5, 10, 9, 7, 3, 6], dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class ClassSpec:
    class_id: int
    modulation_kind: str
    kind_parameters: tuple = ()

    def params(self):
        return dict(self.kind_parameters)

    def to_dict(self):
        return {
            "class_id": self.class_id,
            "modulation_kind": self.modulation_kind,
            "kind_parameters": dict(self.kind_parameters),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            class_id=int(d["class_id"]),
            modulation_kind=d["modulation_kind"],
            kind_parameters=tuple(sorted(d.get("kind_parameters", {}).items())),
        )


@dataclasses.dataclass
class Pulse:
    samples: np.ndarray  # complex64, length == pulse_width
    class_id: int
    pulse_width: int
    snr_db: float

    def __post_init__(self):
        if len(self.samples) != self.pulse_width:
            raise ValueError(
                f"samples length {len(self.samples)} != pulse_width {self.pulse_width}"
            )


def _stretch_chips(chips, n):
    """Map n samples onto len(chips) equal chip intervals."""
    idx = (np.arange(n) * len(chips)) // n
    return chips[idx]


def _polyphase_chips(kind, p=8):
    i = np.arange(1, p + 1)
    jj, ii = np.meshgrid(i, i, indexing="ij")  # jj = group, ii = within group
    if kind == "Frank":
        phi = 2.0 * np.pi / p * (ii - 1) * (jj - 1)
    elif kind == "P1":
        phi = -np.pi / p * (p - (2 * jj - 1)) * ((jj - 1) * p + (ii - 1))
    elif kind == "P2":
        phi = -np.pi / (2 * p) * (2 * ii - 1 - p) * (2 * jj - 1 - p)
    else:
        raise ValueError(kind)
    return np.exp(1j * phi.reshape(-1))


def minimum_length(spec):
    kind = spec.modulation_kind
    if kind.startswith("Barker-"):
        return int(kind.split("-")[1])
    if kind in ("Frank", "P1", "P2", "P3", "P4"):
        return 64
    if kind == "Costas":
        return len(COSTAS_SEQ)
    if kind in ("binary-PSK-random-fixed-code", "quad-PSK-random-fixed-code"):
        return int(spec.params().get("code_length", 63))
    if kind == "stepped-frequency":
        return int(spec.params().get("steps", 8))
    if kind in ("linear-FM-up", "linear-FM-down", "nonlinear-FM"):
        return 2
    return 1


def phase_code(spec, n):
    """Unit-modulus phase code of class `spec`, length n, deterministic."""
    kind = spec.modulation_kind
    if kind not in MODULATION_KINDS:
        raise ValueError(f"unknown modulation kind {kind!r}")
    n = int(n)
    nmin = minimum_length(spec)
    if n < nmin:
        raise ValueError(
            f"class {spec.class_id} ({kind}) needs pulse width >= {nmin}, got {n}"
        )
    p = spec.params()
    sweep = float(p.get("sweep", 0.4))  # total frequency excursion, cycles/sample
    j = np.arange(n, dtype=np.float64)

    if kind == "unmodulated":
        return np.ones(n, dtype=np.complex128)
    if kind == "linear-FM-up":
        return np.exp(1j * np.pi * sweep * j * j / n)
    if kind == "linear-FM-down":
        return np.exp(-1j * np.pi * sweep * j * j / n)
    if kind.startswith("Barker-"):
        chips = BARKER[int(kind.split("-")[1])].astype(np.complex128)
        return _stretch_chips(chips, n)
    if kind in ("Frank", "P1", "P2"):
        return _stretch_chips(_polyphase_chips(kind), n)
    if kind == "P3":
        nc = 64
        i = np.arange(nc, dtype=np.float64)
        return _stretch_chips(np.exp(1j * np.pi * i * i / nc), n)
    if kind == "P4":
        nc = 64
        i = np.arange(nc, dtype=np.float64)
        return _stretch_chips(np.exp(1j * (np.pi * i * i / nc - np.pi * i)), n)
    if kind == "Costas":
        span = float(p.get("hop_span", 0.8))
        freqs = span * (COSTAS_SEQ - (len(COSTAS_SEQ) + 1) / 2.0) / len(COSTAS_SEQ)
        f = _stretch_chips(freqs, n)
        return np.exp(2j * np.pi * np.cumsum(f))
    if kind == "binary-PSK-random-fixed-code":
        rng = rng_from(int(p.get("code_seed", 1)))
        chips = rng.choice([-1.0, 1.0], int(p.get("code_length", 63))).astype(np.complex128)
        return _stretch_chips(chips, n)
    if kind == "quad-PSK-random-fixed-code":
        rng = rng_from(int(p.get("code_seed", 2)))
        chips = np.exp(0.5j * np.pi * rng.integers(0, 4, int(p.get("code_length", 63))))
        return _stretch_chips(chips, n)
    if kind == "stepped-frequency":
        steps = int(p.get("steps", 8))
        freqs = sweep * (np.arange(steps) - (steps - 1) / 2.0) / max(steps - 1, 1)
        f = _stretch_chips(freqs, n)
        return np.exp(2j * np.pi * np.cumsum(f))
    if kind == "nonlinear-FM":
        f = sweep * (j / n) ** 2  # quadratic sweep, 0 -> sweep
        return np.exp(2j * np.pi * np.cumsum(f))
    if kind == "noise-modulated":
        rng = rng_from(int(p.get("code_seed", 3)))
        step = float(p.get("phase_step", math.pi / 4))
        return np.exp(1j * np.cumsum(rng.uniform(-step, step, n)))
    raise AssertionError(f"unhandled kind {kind}")


def noise_sigma(snr_db):
    """Per-complex-sample noise std for a unit-power clean signal."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(10.0 ** (-snr_db / 10.0))


def generate_pulse(spec, n, snr_db, seed):
    """Phase code plus circular complex white Gaussian noise at snr_db."""
    if not (math.isfinite(snr_db) or (math.isinf(snr_db) and snr_db > 0)):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    clean = phase_code(spec, n)
    sigma = noise_sigma(snr_db)
    if sigma > 0.0:
        rng = rng_from(seed)
        noise = rng.standard_normal(2 * n) * (sigma / math.sqrt(2.0))
        clean = clean + noise[0::2] + 1j * noise[1::2]
    return Pulse(
        samples=clean.astype(np.complex64),
        class_id=spec.class_id,
        pulse_width=n,
        snr_db=float(snr_db),
    )


# ordered so that small-K prefixes stay maximally distinct (the first four
# differ in envelope structure, sweep direction and phase statistics)
_DEFAULT_ORDER = (
    ("unmodulated", ()),
    ("linear-FM-up", ()),
    ("Barker-13", ()),
    ("noise-modulated", (("code_seed", 3),)),
    ("linear-FM-down", ()),
    ("Barker-7", ()),
    ("Barker-11", ()),
    ("Frank", ()),
    ("P1", ()),
    ("P2", ()),
    ("P3", ()),
    ("P4", ()),
    ("Costas", ()),
    ("binary-PSK-random-fixed-code", (("code_seed", 1),)),
    ("quad-PSK-random-fixed-code", (("code_seed", 2),)),
    ("stepped-frequency", ()),
    ("nonlinear-FM", ()),
)


def default_classes(k=17):
    """K distinct ClassSpecs; beyond 17, parameter variants of the base set."""
    specs = []
    for cid in range(k):
        kind, params = _DEFAULT_ORDER[cid % len(_DEFAULT_ORDER)]
        if cid >= len(_DEFAULT_ORDER):
            extra = cid // len(_DEFAULT_ORDER)
            params = dict(params)
            params["sweep"] = 0.4 / (1.0 + 0.5 * extra)
            if "code_seed" in params:
                params["code_seed"] = params["code_seed"] + 1000 * extra
            params = tuple(sorted(params.items()))
        specs.append(ClassSpec(class_id=cid, modulation_kind=kind, kind_parameters=params))
    return specs
