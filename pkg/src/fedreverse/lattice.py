"""Scalar dithered-coset quantizer with difference contraction.

The message m in [0, 2**bits) selects the coset
Lambda_m = { k*delta + dither + m*delta/2**bits : k integer }. Embedding
quantizes the coefficient onto the selected coset and keeps a contracted
fraction (1 - alpha) of the quantization residual, which is what makes the
operation exactly invertible once the message is known.

All functions accept scalars or numpy arrays (broadcasting l against m) and
do their arithmetic in 64-bit floats regardless of the caller's dtype.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MarginUnsupportedError, ParameterError

__all__ = [
    "DcParams",
    "quantize_coset",
    "embed_dc",
    "extract_dc",
    "recover_dc",
    "theoretical_mse_dc",
    "noise_margin",
]


@dataclass(frozen=True, slots=True)
class DcParams:
    """Coset geometry and contraction strength for one embedding direction.

    delta: coarse lattice spacing, > 0 (weight units).
    alpha: contraction parameter; admissible range [1 - 1/2**bits, 1).
           alpha = 1 is excluded because recovery divides by 1 - alpha.
    bits:  payload bits per embedded coefficient; cosets are spaced
           delta / 2**bits apart.
    dither: secret lattice offset in [0, delta).
    """

    delta: float
    alpha: float
    bits: int = 1
    dither: float = 0.0

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ParameterError(f"delta must be positive and finite, got {self.delta}")
        if not isinstance(self.bits, int) or self.bits < 1:
            raise ParameterError(f"bits must be a positive integer, got {self.bits}")
        if not (1.0 - self.alpha <= 1.0 / 2**self.bits and self.alpha < 1.0):
            raise ParameterError(
                f"alpha must lie in [{1.0 - 1.0 / 2 ** self.bits}, 1), got {self.alpha}"
            )
        if not (0.0 <= self.dither < self.delta):
            raise ParameterError(f"dither must lie in [0, delta), got {self.dither}")

    @property
    def n_messages(self) -> int:
        return 2**self.bits

    @property
    def coset_step(self) -> float:
        return self.delta / 2**self.bits


def _check_message(m, p: DcParams):
    m = np.asarray(m)
    if not np.issubdtype(m.dtype, np.integer):
        raise ParameterError("message values must be integers")
    if np.any(m < 0) or np.any(m >= p.n_messages):
        raise ParameterError(f"message values must lie in [0, {p.n_messages})")
    return m


def quantize_coset(l, m, p: DcParams):
    """Nearest point of coset Lambda_m to l; ties round half-to-even on k."""
    m = _check_message(m, p)
    l = np.asarray(l, dtype=np.float64)
    offset = p.dither + m * p.coset_step
    k = np.rint((l - offset) / p.delta)
    return k * p.delta + offset


def embed_dc(l, m, p: DcParams):
    """Quantize onto Lambda_m and keep (1 - alpha) of the residual.

    |result - Q| <= (1 - alpha) * delta / 2 always holds.
    """
    q = quantize_coset(l, m, p)
    return q + (1.0 - p.alpha) * (np.asarray(l, dtype=np.float64) - q)


def extract_dc(l_y, p: DcParams):
    """Index of the coset closest to l_y; equidistant cosets resolve to the smallest m."""
    l_y = np.asarray(l_y, dtype=np.float64)
    msgs = np.arange(p.n_messages)
    dists = np.abs(l_y[..., None] - quantize_coset(l_y[..., None], msgs, p))
    m_hat = np.argmin(dists, axis=-1)  # first minimum = smallest m
    return m_hat if m_hat.ndim else int(m_hat)


def recover_dc(l_y, p: DcParams):
    """Invert embed_dc: (l_y - alpha * Q_mhat(l_y)) / (1 - alpha).

    Exact (up to f64 rounding) whenever l_y is an untouched embed_dc output
    whose pre-embedding residual was strictly inside the quantization cell.
    """
    l_y = np.asarray(l_y, dtype=np.float64)
    m_hat = np.asarray(extract_dc(l_y, p))
    q = quantize_coset(l_y, m_hat, p)
    return (l_y - p.alpha * q) / (1.0 - p.alpha)


def theoretical_mse_dc(p: DcParams) -> float:
    """Expected squared embedding distortion per coefficient, alpha^2 * delta^2 / 12.

    Assumes the pre-embedding residual is uniform over one lattice cell.
    """
    return p.alpha**2 * p.delta**2 / 12.0


def noise_margin(p: DcParams) -> float:
    """Largest per-direction perturbation that never flips extraction: (2*alpha - 1) * delta / 4.

    Only derived for the two-coset case; bits > 1 is refused rather than guessed.
    """
    if p.bits != 1:
        raise MarginUnsupportedError("noise margin is only defined for bits = 1")
    return (2.0 * p.alpha - 1.0) * p.delta / 4.0
