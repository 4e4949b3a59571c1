"""Block-level multiparty embedding, per-client extraction, exact recovery.

A flat cover sequence is split into consecutive blocks of r elements (any
short tail is left untouched and copied verbatim on recovery). Inside each
block every client perturbs only the signed length of the block along its
own unit direction; because the directions are pairwise orthogonal the
clients never interfere, the out-of-span residual is preserved bit for bit,
and recovery with the complete key set cancels every perturbation exactly.

Block k carries bit k of every client's payload (most-significant bit
first); blocks past a client's bit_length carry padding zeros for that
client, so embedding always perturbs every block of the plan.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, KeySetError, ParameterError
from .keygen import ClientKey, check_pairwise_orthogonal
from .lattice import embed_dc, extract_dc, recover_dc

__all__ = [
    "EmbeddingPlan",
    "Payload",
    "proj_coeff",
    "embed_block",
    "extract_block",
    "recover_block",
    "embed_payloads",
    "extract_payload",
    "recover_sequence",
    "plan_for",
    "payload_bits",
    "pack_bits",
]


@dataclass(frozen=True, slots=True)
class Payload:
    """One client's message: raw bytes plus how many leading bits count."""

    client_id: str
    data: bytes = b""
    bit_length: int | None = None  # default: all bits of data

    def __post_init__(self):
        n = 8 * len(self.data) if self.bit_length is None else int(self.bit_length)
        if n < 0 or n > 8 * len(self.data):
            raise ParameterError(f"bit_length {self.bit_length} exceeds payload data size")
        object.__setattr__(self, "bit_length", n)


@dataclass(frozen=True, slots=True)
class EmbeddingPlan:
    """Everything needed to make embed/extract/recover deterministic."""

    dimension: int
    num_blocks: int
    client_order: tuple[str, ...]
    selection: object | None = None  # SelectionSpec when driven from a container

    def __post_init__(self):
        if self.dimension < 1 or self.num_blocks < 0:
            raise ParameterError("dimension must be >= 1 and num_blocks >= 0")
        order = tuple(self.client_order)
        if len(set(order)) != len(order):
            raise ParameterError("duplicate client ids in plan")
        if len(order) > self.dimension:
            raise ParameterError(
                f"{len(order)} clients exceed the block dimension r={self.dimension}"
            )
        object.__setattr__(self, "client_order", order)


def plan_for(cover_length: int, dimension: int, keys, selection=None) -> EmbeddingPlan:
    """Plan over a flat cover: maximal whole blocks, keys in the given order."""
    return EmbeddingPlan(
        dimension=dimension,
        num_blocks=cover_length // dimension,
        client_order=tuple(k.client_id for k in keys),
        selection=selection,
    )


def proj_coeff(s, u):
    """Signed Euclidean length of s along u: <s, u> / ||u||."""
    u = np.asarray(u, dtype=np.float64)
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise ParameterError("direction vector must be nonzero")
    return np.asarray(s, dtype=np.float64) @ u / norm


def _unit_directions(keys, dimension: int) -> np.ndarray:
    if len(keys) > dimension:
        raise KeySetError(f"{len(keys)} clients exceed the block dimension r={dimension}")
    vecs = []
    for k in keys:
        u = k.require_active()
        if u.shape != (dimension,):
            raise KeySetError(
                f"client {k.client_id!r} key has dimension {u.shape[0]}, plan has r={dimension}"
            )
        vecs.append(u)
    check_pairwise_orthogonal(vecs)
    units = np.stack(vecs)
    return units / np.linalg.norm(units, axis=1, keepdims=True)


def _embed_blocks(blocks: np.ndarray, bits: np.ndarray, keys, units: np.ndarray) -> np.ndarray:
    coeffs = blocks @ units.T
    shifted = np.empty_like(coeffs)
    for i, key in enumerate(keys):
        shifted[:, i] = embed_dc(coeffs[:, i], bits[:, i], key.dc)
    return blocks + (shifted - coeffs) @ units


def _recover_blocks(blocks: np.ndarray, keys, units: np.ndarray) -> np.ndarray:
    coeffs = blocks @ units.T
    restored = np.empty_like(coeffs)
    for i, key in enumerate(keys):
        restored[:, i] = recover_dc(coeffs[:, i], key.dc)
    return blocks + (restored - coeffs) @ units


def embed_block(s, bits, keys) -> np.ndarray:
    """Embed one message per client into a single r-element block."""
    s = np.asarray(s, dtype=np.float64)
    units = _unit_directions(keys, s.shape[0])
    bits = np.asarray(bits, dtype=np.int64).reshape(1, len(keys))
    return _embed_blocks(s.reshape(1, -1), bits, keys, units)[0]


def extract_block(y, key: ClientKey) -> int:
    """Decode this client's message from one block."""
    return int(extract_dc(proj_coeff(y, key.require_active()), key.dc))


def recover_block(y, keys) -> np.ndarray:
    """Undo every client's perturbation; needs the complete key set."""
    y = np.asarray(y, dtype=np.float64)
    units = _unit_directions(keys, y.shape[0])
    return _recover_blocks(y.reshape(1, -1), keys, units)[0]


def payload_bits(payload: Payload, num_blocks: int) -> np.ndarray:
    """First bit_length bits of the payload (MSB-first), zero-padded to num_blocks."""
    if payload.bit_length > num_blocks:
        raise CapacityError(payload.bit_length, num_blocks, payload.client_id)
    bits = np.zeros(num_blocks, dtype=np.int64)
    if payload.bit_length:
        raw = np.unpackbits(np.frombuffer(payload.data, dtype=np.uint8))
        bits[: payload.bit_length] = raw[: payload.bit_length]
    return bits


def pack_bits(bits) -> bytes:
    """Pack a 0/1 sequence MSB-first into bytes, zero-padding the final byte."""
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits).tobytes() if bits.size else b""


def _keys_by_plan(plan: EmbeddingPlan, keys) -> list[ClientKey]:
    by_id = {k.client_id: k for k in keys}
    if len(by_id) != len(list(keys)):
        raise KeySetError("duplicate client ids in key list")
    if set(by_id) != set(plan.client_order):
        missing = sorted(set(plan.client_order) - set(by_id))
        extra = sorted(set(by_id) - set(plan.client_order))
        raise KeySetError(f"key set does not match plan (missing {missing}, extra {extra})")
    return [by_id[cid] for cid in plan.client_order]


def _split(cover, plan: EmbeddingPlan):
    cover = np.asarray(cover, dtype=np.float64).ravel()
    body = plan.dimension * plan.num_blocks
    if cover.size < body:
        raise ParameterError(f"cover of {cover.size} elements is shorter than the plan ({body})")
    return cover, cover[:body].reshape(plan.num_blocks, plan.dimension), cover[body:]


def embed_payloads(cover, plan: EmbeddingPlan, payloads, keys) -> np.ndarray:
    """Embed every client's payload across all blocks of the plan.

    payloads: Payload objects; clients of the plan without one embed all
    padding zeros. Returns a new flat sequence; the tail beyond the last
    whole block is copied untouched.
    """
    ordered = _keys_by_plan(plan, keys)
    by_id = {}
    for p in payloads:
        if p.client_id in by_id:
            raise ParameterError(f"duplicate payload for client {p.client_id!r}")
        if p.client_id not in plan.client_order:
            raise KeySetError(f"payload for unknown client {p.client_id!r}")
        by_id[p.client_id] = p
    cover, blocks, tail = _split(cover, plan)
    if plan.num_blocks == 0:
        return cover.copy()
    bits = np.stack(
        [
            payload_bits(by_id.get(cid, Payload(cid)), plan.num_blocks)
            for cid in plan.client_order
        ],
        axis=1,
    )
    units = _unit_directions(ordered, plan.dimension)
    out = np.concatenate([_embed_blocks(blocks, bits, ordered, units).ravel(), tail])
    return out


def extract_payload(watermarked, plan: EmbeddingPlan, key: ClientKey, bit_length: int) -> bytes:
    """Decode the first bit_length bits of one client's payload, packed MSB-first."""
    if bit_length > plan.num_blocks:
        raise CapacityError(bit_length, plan.num_blocks, key.client_id)
    if bit_length == 0:
        return b""
    _, blocks, _ = _split(watermarked, plan)
    coeffs = blocks @ (key.require_active() / np.linalg.norm(key.require_active()))
    bits = np.asarray(extract_dc(coeffs, key.dc))[:bit_length]
    return pack_bits(bits)


def recover_sequence(watermarked, plan: EmbeddingPlan, keys) -> np.ndarray:
    """Restore the original cover; refuses to run without the exact key set."""
    ordered = _keys_by_plan(plan, keys)
    cover, blocks, tail = _split(watermarked, plan)
    if plan.num_blocks == 0:
        return cover.copy()
    units = _unit_directions(ordered, plan.dimension)
    return np.concatenate([_recover_blocks(blocks, ordered, units).ravel(), tail])
