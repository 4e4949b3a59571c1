"""Seeded attacks on watermarked sequences: additive noise and pruning.

All randomness comes from the package's ChaCha20 stream, so a given
AttackSpec always produces the same output bytes. Pruning is the additive
attack n = -w on the zeroed coordinates, which is what ties it to the
per-direction noise-margin analysis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .prng import ChaChaStream, stream_key

__all__ = ["ATTACK_KINDS", "AttackSpec", "apply_attack"]

ATTACK_KINDS = ("gaussian", "uniform", "prune_smallest", "prune_random")


@dataclass(frozen=True, slots=True)
class AttackSpec:
    """kind + magnitude (sigma / half-width / pruned fraction) + stream seed."""

    kind: str
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ParameterError(f"unknown attack kind {self.kind!r}; choose from {ATTACK_KINDS}")
        if not self.magnitude >= 0:
            raise ParameterError("magnitude must be >= 0")
        if self.kind.startswith("prune") and self.magnitude > 1:
            raise ParameterError("pruning fraction must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in 64 bits")


def apply_attack(watermarked, spec: AttackSpec) -> np.ndarray:
    x = np.asarray(watermarked, dtype=np.float64).ravel().copy()
    if x.size == 0 or spec.magnitude == 0:
        return x
    stream = ChaChaStream(stream_key("fedreverse.attack", spec.seed))
    if spec.kind == "gaussian":
        x += spec.magnitude * stream.gaussian(x.size)
    elif spec.kind == "uniform":
        x += spec.magnitude * (2.0 * stream.uniform(x.size) - 1.0)
    elif spec.kind == "prune_smallest":
        count = int(spec.magnitude * x.size)
        order = np.argsort(np.abs(x), kind="stable")  # ties resolve by index
        x[order[:count]] = 0.0
    else:  # prune_random
        count = int(spec.magnitude * x.size)
        x[stream.shuffled_indices(x.size)[:count]] = 0.0
    return x
