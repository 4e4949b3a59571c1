"""Orthogonal per-client key material.

The server turns a single big integer into an r x r matrix of quantized
entries, orthogonalizes its columns, and hands each client a contiguous
slice of the resulting orthogonal family. Clients holding more than one
vector combine them linearly into their working direction; every client
additionally carries its own scalar lattice parameters including a secret
dither. Identical inputs give bit-identical keys on every platform.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import KeySetError, ParameterError, RankDeficiencyError
from .lattice import DcParams

__all__ = [
    "KeygenConfig",
    "KeyMatrix",
    "ClientKey",
    "master_key_int",
    "random_matrix",
    "orthogonalize",
    "assign_keys",
    "combine_partial_keys",
    "derive_dither",
    "generate_client_keys",
    "check_pairwise_orthogonal",
    "keymat_digest",
    "save_keys",
    "load_keys",
    "key_file_digest",
]

ORTHO_RTOL = 1e-10         # pairwise-orthogonality acceptance, relative to norms
DEPENDENCE_RTOL = 1e-8     # residual-norm threshold for dropping a dependent column
MAX_REGEN_ATTEMPTS = 64

KEY_FORMAT = "fedreverse-keys/1"


@dataclass(frozen=True, slots=True)
class KeygenConfig:
    """Inputs of the matrix generation step.

    bits_per_entry: B, bits consumed per matrix entry.
    dimension: r, both the matrix size and the embedding block length.
    entry_range: q, a power of two >= 2**B; entries are chunk * q / 2**B.
    key_int: the server's combined random number; must fit in B*r*r bits.
    client_quotas: per-client vector counts n_i with sum n_i = r.
    """

    bits_per_entry: int
    dimension: int
    entry_range: int
    key_int: int
    client_quotas: tuple[int, ...]

    def __post_init__(self):
        b, r, q = self.bits_per_entry, self.dimension, self.entry_range
        if b < 1 or r < 1:
            raise ParameterError("bits_per_entry and dimension must be positive")
        if q < 2**b or q & (q - 1):
            raise ParameterError(f"entry_range must be a power of two >= 2**{b}, got {q}")
        if not 0 <= self.key_int < 2 ** (b * r * r):
            raise ParameterError(f"key_int does not fit in {b * r * r} bits")
        quotas = tuple(int(n) for n in self.client_quotas)
        if any(n < 1 for n in quotas) or sum(quotas) != r:
            raise ParameterError(f"client quotas {quotas} must be positive and sum to r={r}")
        object.__setattr__(self, "client_quotas", quotas)

    @property
    def total_bits(self) -> int:
        return self.bits_per_entry * self.dimension**2


@dataclass(frozen=True, slots=True)
class KeyMatrix:
    """r x r candidate matrix; column j is candidate direction j."""

    entries: np.ndarray  # shape (r, r), float64; entries[:, j] = column j

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ParameterError("key matrix must be square")
        object.__setattr__(self, "entries", e)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j].copy()


@dataclass(frozen=True)
class ClientKey:
    """One client's share: orthogonal partial vectors, a working direction, lattice params."""

    client_id: str
    partial_vectors: tuple = ()
    active_vector: np.ndarray | None = None
    dc: DcParams = field(default_factory=lambda: DcParams(delta=1.0, alpha=0.75))

    def __post_init__(self):
        parts = tuple(np.asarray(v, dtype=np.float64) for v in self.partial_vectors)
        object.__setattr__(self, "partial_vectors", parts)
        if self.active_vector is not None:
            u = np.asarray(self.active_vector, dtype=np.float64)
            if not np.linalg.norm(u) > 0:
                raise ParameterError(f"client {self.client_id!r}: active vector has zero norm")
            object.__setattr__(self, "active_vector", u)

    def require_active(self) -> np.ndarray:
        if self.active_vector is None:
            raise KeySetError(
                f"client {self.client_id!r} holds {len(self.partial_vectors)} partial vectors; "
                "combine them before embedding"
            )
        return self.active_vector


def master_key_int(client_contributions, total_bits: int, bypass: bool = False) -> int:
    """Combine client-sent random byte strings into the matrix seed integer.

    SHA-256 over the 8-byte-big-endian length-prefixed concatenation of the
    contributions, interpreted big-endian and reduced mod 2**total_bits.
    With bypass=True the single contribution is read directly as a
    big-endian integer (used to pin worked examples with a known key).
    """
    contributions = list(client_contributions)
    if not contributions:
        raise ParameterError("at least one contribution is required")
    if bypass:
        if len(contributions) != 1:
            raise ParameterError("bypass mode takes exactly one contribution")
        value = int.from_bytes(contributions[0], "big")
    else:
        h = hashlib.sha256()
        for c in contributions:
            h.update(len(c).to_bytes(8, "big"))
            h.update(c)
        value = int.from_bytes(h.digest(), "big")
    return value % (1 << total_bits)


def random_matrix(cfg: KeygenConfig) -> KeyMatrix:
    """Render key_int as B*r*r bits (MSB first, zero-padded) and slice into columns.

    Column j consumes bit positions [j*r*B, (j+1)*r*B); within a column,
    consecutive B-bit chunks (most-significant bit first) fill entries
    0..r-1, each scaled by q / 2**B.
    """
    b, r, q = cfg.bits_per_entry, cfg.dimension, cfg.entry_range
    bits = format(cfg.key_int, f"0{cfg.total_bits}b")
    scale = q // 2**b
    cols = np.empty((r, r), dtype=np.float64)
    for j in range(r):
        col_bits = bits[j * r * b : (j + 1) * r * b]
        for i in range(r):
            chunk = col_bits[i * b : (i + 1) * b]
            cols[i, j] = int(chunk, 2) * scale
    return KeyMatrix(cols)


def orthogonalize(km: KeyMatrix) -> list[np.ndarray]:
    """Modified Gram-Schmidt over the columns, in order.

    A column whose residual norm drops below DEPENDENCE_RTOL times its
    original norm is linearly dependent; that raises RankDeficiencyError
    carrying the number of independent columns found.
    """
    r = km.dimension
    out: list[np.ndarray] = []
    for j in range(r):
        v = km.column(j)
        original = np.linalg.norm(v)
        for u in out:
            v = v - (u @ v) / (u @ u) * u
        if original == 0 or np.linalg.norm(v) < DEPENDENCE_RTOL * original:
            raise RankDeficiencyError(independent=len(out), needed=r)
        out.append(v)
    return out


def check_pairwise_orthogonal(vectors, rtol: float = ORTHO_RTOL):
    """Raise KeySetError unless all vectors are pairwise orthogonal within rtol."""
    vecs = [np.asarray(v, dtype=np.float64) for v in vectors]
    norms = [np.linalg.norm(v) for v in vecs]
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            if abs(vecs[i] @ vecs[j]) > rtol * norms[i] * norms[j]:
                raise KeySetError(
                    f"vectors {i} and {j} are not orthogonal "
                    f"(|<u_i,u_j>| = {abs(vecs[i] @ vecs[j]):.3e})"
                )


def assign_keys(vectors, quotas, dc_params) -> list[ClientKey]:
    """Hand out contiguous slices of the orthogonal family.

    Client i receives vectors [sum(quotas[:i]), sum(quotas[:i+1])). Single-vector
    clients get it as their active vector; multi-vector clients must combine
    first. dc_params is one DcParams per client; client ids default to
    "1", "2", ... in quota order.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    quotas = list(quotas)
    if sum(quotas) != len(vectors):
        raise ParameterError(f"quotas {quotas} do not sum to the number of vectors {len(vectors)}")
    if len(dc_params) != len(quotas):
        raise ParameterError("need one DcParams per client")
    keys = []
    start = 0
    for i, (n_i, dc) in enumerate(zip(quotas, dc_params)):
        part = tuple(vectors[start : start + n_i])
        keys.append(
            ClientKey(
                client_id=str(i + 1),
                partial_vectors=part,
                active_vector=part[0] if n_i == 1 else None,
                dc=dc,
            )
        )
        start += n_i
    return keys


def combine_partial_keys(partials, coefs) -> np.ndarray:
    """Linear combination sum(coef_k * u_k) of a client's orthogonal partials."""
    partials = [np.asarray(v, dtype=np.float64) for v in partials]
    coefs = [float(c) for c in coefs]
    if not partials or len(partials) != len(coefs):
        raise ParameterError("need the same nonzero number of partials and coefficients")
    if all(c == 0 for c in coefs):
        raise ParameterError("all-zero coefficients would produce a zero key")
    out = np.zeros_like(partials[0])
    for c, u in zip(coefs, partials):
        out += c * u
    return out


def derive_dither(client_secret: bytes, delta: float) -> float:
    """Map a client secret to a dither in [0, delta): SHA-256, first 8 bytes big-endian, scaled."""
    if not delta > 0:
        raise ParameterError("delta must be positive")
    u = int.from_bytes(hashlib.sha256(client_secret).digest()[:8], "big")
    return (u / 2**64) * delta


def _combination_coefs(client_id: str, count: int) -> list[int]:
    # deterministic stand-in for Algorithm-2-style random coefficients
    coefs = []
    for k in range(count):
        digest = hashlib.sha256(f"fedreverse-coef:{client_id}:{k}".encode()).digest()
        coefs.append(1 + int.from_bytes(digest[:4], "big") % 255)
    return coefs


def generate_client_keys(cfg: KeygenConfig, dc_params, client_secrets=None):
    """Full pipeline: matrix -> orthogonalize -> assign -> combine -> dither.

    On rank deficiency the matrix is regenerated with key_int + 1 (mod the
    bit budget), up to MAX_REGEN_ATTEMPTS times. Returns (keys, key_matrix).
    dc_params: one DcParams per client; its dither is overridden when
    client_secrets (one byte string per client) are provided.
    """
    if len(dc_params) != len(cfg.client_quotas):
        raise ParameterError("need one DcParams per client")
    km = None
    attempt_cfg = cfg
    last_err: RankDeficiencyError | None = None
    for _ in range(MAX_REGEN_ATTEMPTS):
        km = random_matrix(attempt_cfg)
        try:
            vectors = orthogonalize(km)
            break
        except RankDeficiencyError as err:
            last_err = err
            attempt_cfg = replace(
                attempt_cfg, key_int=(attempt_cfg.key_int + 1) % (1 << cfg.total_bits)
            )
    else:
        raise RankDeficiencyError(last_err.independent, last_err.needed)

    if client_secrets is not None:
        if len(client_secrets) != len(dc_params):
            raise ParameterError("need one secret per client")
        dc_params = [
            replace(dc, dither=derive_dither(secret, dc.delta))
            for dc, secret in zip(dc_params, client_secrets)
        ]

    keys = assign_keys(vectors, cfg.client_quotas, dc_params)
    finalized = []
    for key in keys:
        if key.active_vector is None:
            coefs = _combination_coefs(key.client_id, len(key.partial_vectors))
            key = replace(key, active_vector=combine_partial_keys(key.partial_vectors, coefs))
        finalized.append(key)
    return finalized, km


def keymat_digest(km: KeyMatrix) -> str:
    """SHA-256 of the matrix serialized column by column as little-endian f64."""
    return hashlib.sha256(km.entries.tobytes(order="F")).hexdigest()


def save_keys(path, keys, cfg: KeygenConfig | None = None):
    """Write the key file (JSON). Vector floats round-trip exactly."""
    doc = {
        "format": KEY_FORMAT,
        "r": cfg.dimension if cfg else len(keys[0].require_active()),
        "B": cfg.bits_per_entry if cfg else None,
        "q": cfg.entry_range if cfg else None,
        "clients": [
            {
                "id": k.client_id,
                "quota": len(k.partial_vectors),
                "partial_vectors": [list(map(float, v)) for v in k.partial_vectors],
                "active_vector": list(map(float, k.require_active())),
                "delta": k.dc.delta,
                "alpha": k.dc.alpha,
                "bits": k.dc.bits,
                "dither": k.dc.dither,
            }
            for k in keys
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_keys(path) -> list[ClientKey]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != KEY_FORMAT:
        raise KeySetError(f"not a {KEY_FORMAT} file: {path}")
    keys = []
    for c in doc["clients"]:
        keys.append(
            ClientKey(
                client_id=c["id"],
                partial_vectors=tuple(np.asarray(v, dtype=np.float64) for v in c["partial_vectors"]),
                active_vector=np.asarray(c["active_vector"], dtype=np.float64),
                dc=DcParams(delta=c["delta"], alpha=c["alpha"], bits=c["bits"], dither=c["dither"]),
            )
        )
    return keys


def key_file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
