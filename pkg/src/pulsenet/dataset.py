"""Dataset generation and the on-disk record format.

Record file (little-endian, one record per pulse):

    class_id     uint16
    pulse_width  uint32       (N)
    snr_db       float32
    samples      2*N float32  (interleaved I, Q)

The manifest is JSON next to the record file.  Everything is derived from
`master_seed`: record i draws its width, SNR and noise from an RNG keyed by
(master_seed, RECORD, i), and the train/test split from (master_seed,
SPLIT), so regeneration is byte-identical and records can be produced in
parallel.
"""
import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from . import seeding
from .seeding import rng_from
from .waveforms import ClassSpec, Pulse, default_classes, generate_pulse, minimum_length

_HEADER = struct.Struct("<HIf")

MANIFEST_NAME = "manifest.json"
RECORDS_NAME = "records.bin"


@dataclasses.dataclass
class DatasetManifest:
    K: int
    per_class_count: int
    snr_range_db: tuple
    pulse_width_range: tuple
    split_fraction: float
    master_seed: int
    records_file: str = RECORDS_NAME
    classes: list = None  # ClassSpec dicts; defaults to default_classes(K)

    def __post_init__(self):
        if self.classes is None:
            self.classes = [s.to_dict() for s in default_classes(self.K)]

    def validate(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.per_class_count < 1:
            raise ValueError("per_class_count must be >= 1")
        lo, hi = self.snr_range_db
        if not lo <= hi:
            raise ValueError("snr_range_db must be (low, high) with low <= high")
        nmin, nmax = self.pulse_width_range
        if not 1 <= nmin <= nmax:
            raise ValueError("pulse_width_range must be (N_min, N_max) with 1 <= N_min <= N_max")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must be in (0, 1)")
        if len(self.classes) != self.K:
            raise ValueError(f"manifest lists {len(self.classes)} classes, K={self.K}")
        for spec in self.class_specs():
            if minimum_length(spec) > nmax:
                raise ValueError(
                    f"class {spec.class_id} ({spec.modulation_kind}) cannot fit in "
                    f"pulse_width_range {self.pulse_width_range}"
                )
        return self

    def class_specs(self):
        return [ClassSpec.from_dict(d) for d in self.classes]

    def to_json(self):
        d = dataclasses.asdict(self)
        d["snr_range_db"] = list(self.snr_range_db)
        d["pulse_width_range"] = list(self.pulse_width_range)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["snr_range_db"] = tuple(d["snr_range_db"])
        d["pulse_width_range"] = tuple(d["pulse_width_range"])
        return cls(**d).validate()


def _draw_width(rng, nmin, nmax, spec):
    """Log-uniform integer width in [nmin, nmax], raised to the class floor."""
    w = int(round(np.exp(rng.uniform(np.log(nmin), np.log(nmax)))))
    return max(min(w, nmax), nmin, minimum_length(spec))


def _record_pulse(manifest, specs, index):
    """Generate record `index` (class-major order) from the manifest alone."""
    cls = specs[index // manifest.per_class_count]
    rng = rng_from(manifest.master_seed, seeding.RECORD, index)
    n = _draw_width(rng, *manifest.pulse_width_range, cls)
    snr = float(rng.uniform(*manifest.snr_range_db))
    # the noise seed is drawn, not reused, so noise is independent of (n, snr)
    noise_seed = int(rng.integers(0, 2**63 - 1))
    return generate_pulse(cls, n, snr, seed=noise_seed)


def write_record(fh, pulse):
    fh.write(_HEADER.pack(pulse.class_id, pulse.pulse_width, pulse.snr_db))
    inter = np.empty(2 * pulse.pulse_width, dtype="<f4")
    inter[0::2] = pulse.samples.real
    inter[1::2] = pulse.samples.imag
    fh.write(inter.tobytes())


def read_records(path):
    pulses = []
    raw = Path(path).read_bytes()
    off = 0
    while off < len(raw):
        class_id, n, snr = _HEADER.unpack_from(raw, off)
        off += _HEADER.size
        inter = np.frombuffer(raw, dtype="<f4", count=2 * n, offset=off)
        off += 8 * n
        samples = np.empty(n, dtype=np.complex64)
        samples.real = inter[0::2]
        samples.imag = inter[1::2]
        pulses.append(Pulse(samples, class_id, n, float(snr)))
    return pulses


def build_dataset(manifest, out_dir):
    """Write records.bin + manifest.json under out_dir; returns the paths."""
    manifest.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = manifest.class_specs()
    total = manifest.K * manifest.per_class_count
    records_path = out / manifest.records_file
    with open(records_path, "wb") as fh:
        for index in range(total):
            write_record(fh, _record_pulse(manifest, specs, index))
    (out / MANIFEST_NAME).write_text(manifest.to_json())
    return records_path, out / MANIFEST_NAME


def split_indices(manifest):
    """Deterministic random train/test partition from the master seed."""
    total = manifest.K * manifest.per_class_count
    perm = rng_from(manifest.master_seed, seeding.SPLIT).permutation(total)
    n_train = int(round(manifest.split_fraction * total))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclasses.dataclass
class Dataset:
    manifest: DatasetManifest
    pulses: list
    train_indices: np.ndarray
    test_indices: np.ndarray

    @property
    def train_pulses(self):
        return [self.pulses[i] for i in self.train_indices]

    @property
    def test_pulses(self):
        return [self.pulses[i] for i in self.test_indices]


def load_dataset(path):
    """Load a directory produced by build_dataset."""
    path = Path(path)
    manifest = DatasetManifest.from_json((path / MANIFEST_NAME).read_text())
    pulses = read_records(path / manifest.records_file)
    expected = manifest.K * manifest.per_class_count
    if len(pulses) != expected:
        raise ValueError(f"record file holds {len(pulses)} records, manifest says {expected}")
    train, test = split_indices(manifest)
    return Dataset(manifest, pulses, train, test)
