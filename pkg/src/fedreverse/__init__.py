"""Multiparty reversible watermarking of floating-point model weights.

Scalar dithered-coset quantization with difference contraction, orthogonal
per-client key generation, block-level multiparty embedding with per-client
extraction and exact all-party recovery, plus distortion metrics, a seeded
attack harness, and a bit-exact weight container format.
"""

from .attacks import ATTACK_KINDS, AttackSpec, apply_attack
from .container import (
    PlanManifest,
    SelectionSpec,
    WeightContainer,
    histogram,
    load_plan,
    load_raw,
    read_container,
    save_plan,
    select_cover,
    write_back,
    write_container,
)
from .errors import (
    BadMagicError,
    CapacityError,
    ContainerError,
    FedReverseError,
    KeySetError,
    ManifestError,
    MarginUnsupportedError,
    MetricUndefinedError,
    ParameterError,
    PlanDigestError,
    RankDeficiencyError,
    TruncatedError,
)
from .estimator import WatermarkEmbedder
from .keygen import (
    ClientKey,
    KeygenConfig,
    KeyMatrix,
    assign_keys,
    combine_partial_keys,
    derive_dither,
    generate_client_keys,
    load_keys,
    master_key_int,
    orthogonalize,
    random_matrix,
    save_keys,
)
from .lattice import (
    DcParams,
    embed_dc,
    extract_dc,
    noise_margin,
    quantize_coset,
    recover_dc,
    theoretical_mse_dc,
)
from .metrics import (
    DistortionReport,
    bit_error_rate,
    distortion_report,
    empirical_mse,
    empirical_swr,
    swr_theorem_diagnostic,
    theoretical_mse_fed,
)
from .multiparty import (
    EmbeddingPlan,
    Payload,
    embed_block,
    embed_payloads,
    extract_block,
    extract_payload,
    plan_for,
    proj_coeff,
    recover_block,
    recover_sequence,
)

__version__ = "0.1.0"
