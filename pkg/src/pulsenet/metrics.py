"""Error-rate definitions, the binomial subset/absolute relation, and the
CSV emitters for outcome scatter and multi-pulse curves."""
import csv
import dataclasses
import json

import numpy as np

SCATTER_COLUMNS = ("pulse_width", "snr_db", "L", "correct")
CURVE_COLUMNS = ("L", "e_abs", "e_sub", "k_eabs")


@dataclasses.dataclass
class MetricsReport:
    kind: str  # "ce" | "bce"
    k: int
    repeats: int
    top1_error: float = None
    e_abs: float = None
    e_sub: float = None
    per_sample_outcomes: list = dataclasses.field(default_factory=list)
    # each outcome: (pulse_width, snr_db, L, correct)

    @property
    def n_records(self):
        return len(self.per_sample_outcomes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["per_sample_outcomes"] = [tuple(o) for o in d["per_sample_outcomes"]]
        return cls(**d)


def _check_shapes(preds, labels):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"preds shape {preds.shape} != labels shape {labels.shape}")
    return preds, labels


def absolute_error(preds, labels):
    """Bitwise disagreement over all N*K binary predictions."""
    preds, labels = _check_shapes(preds, labels)
    return float(np.mean(preds != labels))


def subset_error(preds, labels):
    """Fraction of rows whose whole K-bit prediction is not exact."""
    preds, labels = _check_shapes(preds, labels)
    return float(np.mean(np.any(preds != labels, axis=-1)))


def binomial_subset_estimate(e_abs, k):
    """Subset error implied by i.i.d. bit errors at rate e_abs.

    Returns (exact, approximation, gap) where exact = 1 - (1 - e_abs)^k and
    the approximation is k * e_abs.
    """
    if not 0.0 <= e_abs <= 1.0:
        raise ValueError(f"e_abs must be in [0,1], got {e_abs}")
    exact = 1.0 - (1.0 - e_abs) ** k
    approx = k * e_abs
    return exact, approx, approx - exact


@dataclasses.dataclass
class ScatterGrid:
    width_edges: np.ndarray  # decile edges over observed pulse widths
    snr_edges: np.ndarray   # 2 dB bins covering the observed SNR range
    counts: np.ndarray      # (n_width_bins, n_snr_bins)
    errors: np.ndarray      # per-bin error rate, NaN where empty

    def corner_error(self):
        """Error of the shortest-width / lowest-SNR populated corner bin."""
        return self.errors[0, 0]


def outcome_grid(report, snr_bin_db=2.0):
    """Bin outcomes into width deciles x fixed-width SNR bins."""
    if not report.per_sample_outcomes:
        raise ValueError("report has no per-sample outcomes")
    widths = np.array([o[0] for o in report.per_sample_outcomes], dtype=float)
    snrs = np.array([o[1] for o in report.per_sample_outcomes], dtype=float)
    correct = np.array([o[3] for o in report.per_sample_outcomes], dtype=bool)

    width_edges = np.quantile(widths, np.linspace(0.0, 1.0, 11))
    width_edges = np.unique(width_edges)
    lo = np.floor(snrs.min() / snr_bin_db) * snr_bin_db
    hi = np.ceil(snrs.max() / snr_bin_db) * snr_bin_db
    if hi <= lo:
        hi = lo + snr_bin_db
    snr_edges = np.arange(lo, hi + snr_bin_db / 2, snr_bin_db)

    wi = np.clip(np.searchsorted(width_edges, widths, side="right") - 1, 0, len(width_edges) - 2)
    si = np.clip(np.searchsorted(snr_edges, snrs, side="right") - 1, 0, len(snr_edges) - 2)
    counts = np.zeros((len(width_edges) - 1, len(snr_edges) - 1), dtype=int)
    wrong = np.zeros_like(counts)
    np.add.at(counts, (wi, si), 1)
    np.add.at(wrong, (wi, si), ~correct)
    with np.errstate(invalid="ignore"):
        errors = np.where(counts > 0, wrong / np.maximum(counts, 1), np.nan)
    return ScatterGrid(width_edges, snr_edges, counts, errors)


def scatter_rows(report):
    return [
        (int(w), float(s), int(l), int(c)) for (w, s, l, c) in report.per_sample_outcomes
    ]


def write_scatter_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCATTER_COLUMNS)
        writer.writerows(scatter_rows(report))


def multipulse_curve(reports_by_l):
    """Rows (L, e_abs, e_sub, k*e_abs) from per-L BCE reports."""
    rows = []
    for l in sorted(reports_by_l):
        rep = reports_by_l[l]
        rows.append((int(l), rep.e_abs, rep.e_sub, rep.k * rep.e_abs))
    return rows


def write_curve_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        writer.writerows(rows)


def global_error(report):
    correct = np.array([o[3] for o in report.per_sample_outcomes], dtype=bool)
    return float(np.mean(~correct))
