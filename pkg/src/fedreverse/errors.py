"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ParameterError/CapacityError are usage
problems (exit 2), everything else under FedReverseError is a data or
format problem (exit 3). Verification mismatches are signalled by the CLI
itself (exit 4), not by an exception class.
"""


class FedReverseError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FedReverseError, ValueError):
    """A value is outside its admissible domain (bad delta, alpha, bits, ...)."""


class MarginUnsupportedError(FedReverseError):
    """noise_margin called with bits > 1, where no margin formula is available."""


class RankDeficiencyError(FedReverseError):
    """Fewer independent columns than the requested dimension."""

    def __init__(self, independent: int, needed: int):
        super().__init__(f"only {independent} of {needed} columns are linearly independent")
        self.independent = independent
        self.needed = needed


class KeySetError(FedReverseError):
    """Keys missing, non-orthogonal, or inconsistent with the embedding plan."""


class CapacityError(FedReverseError):
    """Payload longer than the available embedding capacity."""

    def __init__(self, bit_length: int, capacity: int, client_id: str = ""):
        who = f" for client {client_id!r}" if client_id else ""
        super().__init__(f"payload of {bit_length} bits exceeds capacity of {capacity} bits per client{who}")
        self.bit_length = bit_length
        self.capacity = capacity


class MetricUndefinedError(FedReverseError):
    """A metric has no defined value (zero watermark variance, log of 0, ...)."""


class ContainerError(FedReverseError):
    """Base class for weight container format problems."""


class BadMagicError(ContainerError):
    """File does not start with the container magic."""


class ManifestError(ContainerError):
    """Container manifest is malformed or inconsistent with the data section."""


class TruncatedError(ContainerError):
    """File ends before the bytes promised by the manifest."""


class PlanDigestError(FedReverseError):
    """Key file digest does not match the one recorded in the plan manifest."""
