"""Distortion metrics: empirical MSE/SWR, closed-form expectations, BER.

Conventions: empirical_mse is per element (mean squared elementwise
difference). theoretical_mse_fed sums the per-client expectations
alpha_i^2 * delta_i^2 / 12 and is therefore the expected squared distortion
per *block*; divide by the block dimension r to compare against the
per-element measurement (only one direction per client is perturbed, so the
block total spreads over r elements).
"""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MetricUndefinedError, ParameterError
from .lattice import theoretical_mse_dc

__all__ = [
    "DistortionReport",
    "empirical_mse",
    "theoretical_mse_fed",
    "empirical_swr",
    "swr_theorem_diagnostic",
    "bit_error_rate",
    "distortion_report",
    "REPORT_COLUMNS",
    "write_report_csv",
    "write_report_json",
]

REPORT_COLUMNS = ["n", "r", "delta", "alpha", "mse_emp", "mse_theory", "swr_db", "ber"]


@dataclass(frozen=True, slots=True)
class DistortionReport:
    empirical_mse: float
    theoretical_mse: float | None  # per element; None when keys/dimension unknown
    empirical_swr_db: float
    sample_count: int


def _as_pair(original, watermarked):
    s = np.asarray(original, dtype=np.float64).ravel()
    y = np.asarray(watermarked, dtype=np.float64).ravel()
    if s.size != y.size:
        raise ParameterError(f"length mismatch: {s.size} vs {y.size}")
    if s.size == 0:
        raise ParameterError("sequences must be nonempty")
    return s, y


def empirical_mse(original, watermarked) -> float:
    """Mean squared elementwise difference."""
    s, y = _as_pair(original, watermarked)
    return float(np.mean((y - s) ** 2))


def theoretical_mse_fed(keys) -> float:
    """Sum over clients of alpha_i^2 * delta_i^2 / 12 (per-block expectation)."""
    keys = list(keys)
    if not keys:
        raise ParameterError("at least one key is required")
    return float(sum(theoretical_mse_dc(k.dc) for k in keys))


def empirical_swr(original, watermarked) -> float:
    """10 * log10(Var(s) / Var(y - s)) in dB, population variances."""
    s, y = _as_pair(original, watermarked)
    vw = float(np.var(y - s))
    if vw == 0.0:
        raise MetricUndefinedError("watermark variance is zero; SWR undefined")
    vs = float(np.var(s))
    return float("-inf") if vs == 0.0 else 10.0 * np.log10(vs / vw)


def swr_theorem_diagnostic(keys, betas, r: int) -> float:
    """Closed-form SWR diagnostic with caller-measured reduction ratios beta_i.

    Evaluates -20*log10( sum_i alpha_i*beta_i*(sum_j (u_i)_j)^2 / (r^2*||u_i||^2) ).
    beta_i is data dependent, so this is a diagnostic, not a prediction;
    measure SWR with empirical_swr for reporting.
    """
    keys = list(keys)
    betas = [float(b) for b in betas]
    if len(keys) != len(betas):
        raise ParameterError("need one beta per key")
    total = 0.0
    for key, beta in zip(keys, betas):
        if not 0.0 <= beta < key.dc.delta / 2:
            raise ParameterError(f"beta {beta} outside [0, delta/2) for client {key.client_id!r}")
        u = key.require_active()
        total += key.dc.alpha * beta * float(np.sum(u)) ** 2 / (r**2 * float(u @ u))
    if total <= 0.0:
        raise MetricUndefinedError("diagnostic aggregate is not positive; log undefined")
    return -20.0 * float(np.log10(total))


def bit_error_rate(expected: bytes, actual: bytes, bit_length: int) -> float:
    """Fraction of differing bits among the first bit_length bits."""
    if bit_length < 0 or bit_length > 8 * len(expected) or bit_length > 8 * len(actual):
        raise ParameterError("bit_length exceeds the provided byte strings")
    if bit_length == 0:
        return 0.0
    e = np.unpackbits(np.frombuffer(expected, dtype=np.uint8))[:bit_length]
    a = np.unpackbits(np.frombuffer(actual, dtype=np.uint8))[:bit_length]
    return float(np.mean(e != a))


def distortion_report(original, watermarked, keys=None, dimension=None) -> DistortionReport:
    s, y = _as_pair(original, watermarked)
    theory = None
    if keys is not None and dimension:
        theory = theoretical_mse_fed(keys) / dimension
    return DistortionReport(
        empirical_mse=empirical_mse(s, y),
        theoretical_mse=theory,
        empirical_swr_db=empirical_swr(s, y),
        sample_count=int(s.size),
    )


def _fmt(value) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)


def write_report_csv(path, rows):
    """Write report rows (dicts keyed by REPORT_COLUMNS; missing -> empty cell)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in REPORT_COLUMNS])


def write_report_json(path, report: DistortionReport):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
