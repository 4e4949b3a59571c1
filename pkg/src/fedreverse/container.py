"""Bit-exact weight container (FRWC1), cover selection, plan manifests.

FRWC1 layout:

    magic   b"FRWC1\\n"
    length  8-byte little-endian size of the manifest JSON
    manifest UTF-8 JSON: {"tensors": [{"name", "dtype", "shape",
             "byte_offset", "byte_length"}, ...]} - canonical form (sorted
             object keys, compact separators, tensor entries sorted by name,
             offsets relative to the data section and tightly packed)
    data    raw little-endian tensor bytes

dtype is "f32" or "f64"; data is row-major. Containers are value-semantic:
write_back returns a new container and never mutates its input.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ManifestError,
    ParameterError,
    PlanDigestError,
    TruncatedError,
)
from .multiparty import EmbeddingPlan
from .prng import ChaChaStream

__all__ = [
    "MAGIC",
    "WeightContainer",
    "read_container",
    "write_container",
    "container_bytes",
    "SelectionSpec",
    "select_cover",
    "write_back",
    "histogram",
    "PlanManifest",
    "save_plan",
    "load_plan",
    "load_raw",
    "check_key_digest",
]

MAGIC = b"FRWC1\n"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_DTYPE_NAMES = {v: k for k, v in _DTYPES.items()}
PLAN_FORMAT = "fedreverse-plan/1"


@dataclass(frozen=True)
class WeightContainer:
    """Named flat tensors with dtype and shape; the cover source."""

    tensors: dict  # name -> np.ndarray (little-endian f32/f64, row-major)

    def __post_init__(self):
        clean = {}
        for name, arr in self.tensors.items():
            arr = np.ascontiguousarray(arr)
            if arr.dtype.newbyteorder("<") not in _DTYPE_NAMES:
                raise ParameterError(f"tensor {name!r}: dtype must be f32 or f64, got {arr.dtype}")
            clean[str(name)] = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        object.__setattr__(self, "tensors", clean)

    def tensor(self, name: str) -> np.ndarray:
        if name not in self.tensors:
            raise ParameterError(f"no tensor named {name!r}; have {sorted(self.tensors)}")
        return self.tensors[name]


def container_bytes(container: WeightContainer) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(container.tensors):
        arr = container.tensors[name]
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": _DTYPE_NAMES[arr.dtype.newbyteorder("<")],
                "shape": list(arr.shape),
                "byte_offset": offset,
                "byte_length": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"tensors": entries}, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + len(manifest).to_bytes(8, "little") + manifest + b"".join(blobs)


def write_container(container: WeightContainer, path):
    with open(path, "wb") as fh:
        fh.write(container_bytes(container))


def read_container(path) -> WeightContainer:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: not an FRWC1 container")
    if len(raw) < len(MAGIC) + 8:
        raise TruncatedError(f"{path}: missing manifest length")
    mlen = int.from_bytes(raw[len(MAGIC) : len(MAGIC) + 8], "little")
    mstart = len(MAGIC) + 8
    if len(raw) < mstart + mlen:
        raise TruncatedError(f"{path}: manifest shorter than its declared length")
    try:
        manifest = json.loads(raw[mstart : mstart + mlen].decode("utf-8"))
        entries = manifest["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as err:
        raise ManifestError(f"{path}: malformed manifest ({err})") from err
    data = raw[mstart + mlen :]
    tensors = {}
    for e in entries:
        try:
            name, dtype, shape = e["name"], e["dtype"], tuple(int(d) for d in e["shape"])
            off, length = int(e["byte_offset"]), int(e["byte_length"])
        except (KeyError, TypeError, ValueError) as err:
            raise ManifestError(f"{path}: bad tensor entry ({err})") from err
        if dtype not in _DTYPES:
            raise ManifestError(f"{path}: tensor {name!r} has unknown dtype {dtype!r}")
        np_dtype = _DTYPES[dtype]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if any(d <= 0 for d in shape) or length != count * np_dtype.itemsize:
            raise ManifestError(
                f"{path}: tensor {name!r} byte_length {length} inconsistent with shape {shape}"
            )
        if off < 0 or off + length > len(data):
            raise TruncatedError(f"{path}: tensor {name!r} data out of bounds")
        if name in tensors:
            raise ManifestError(f"{path}: duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(data[off : off + length], dtype=np_dtype).reshape(shape)
    return WeightContainer(tensors)


def load_raw(path, dtype: str, shape, name: str = "weights") -> WeightContainer:
    """One-line importer for a raw little-endian float file."""
    if dtype not in _DTYPES:
        raise ParameterError(f"dtype must be f32 or f64, got {dtype!r}")
    with open(path, "rb") as fh:
        arr = np.frombuffer(fh.read(), dtype=_DTYPES[dtype])
    shape = tuple(int(d) for d in shape)
    if arr.size != int(np.prod(shape, dtype=np.int64)):
        raise ManifestError(f"{path}: {arr.size} values do not fill shape {shape}")
    return WeightContainer({name: arr.reshape(shape)})


@dataclass(frozen=True, slots=True)
class SelectionSpec:
    """Which elements of which tensor form the cover sequence."""

    tensor_name: str
    count: int
    permute: bool = False
    location_seed: bytes = bytes(32)

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError("count must be positive")
        if len(self.location_seed) != 32:
            raise ParameterError("location_seed must be exactly 32 bytes")


def select_cover(container: WeightContainer, spec: SelectionSpec):
    """Cover values (as f64) plus their flat indices into the tensor.

    permute=False takes indices 0..count-1; permute=True takes the first
    count entries of the Fisher-Yates shuffle driven by the ChaCha20 stream
    keyed with location_seed (see prng module for the exact algorithm).
    """
    flat = container.tensor(spec.tensor_name).ravel()
    if spec.count > flat.size:
        raise ParameterError(
            f"count {spec.count} exceeds tensor {spec.tensor_name!r} size {flat.size}"
        )
    if spec.permute:
        indices = ChaChaStream(spec.location_seed).shuffled_indices(flat.size)[: spec.count]
    else:
        indices = np.arange(spec.count, dtype=np.int64)
    return flat[indices].astype(np.float64), indices


def write_back(container: WeightContainer, tensor_name: str, indices, values) -> WeightContainer:
    """New container with values written at flat indices (cast to the tensor dtype)."""
    indices = np.asarray(indices, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if indices.size != values.size:
        raise ParameterError(f"{indices.size} indices but {values.size} values")
    arr = container.tensor(tensor_name)
    if indices.size and (indices.min() < 0 or indices.max() >= arr.size):
        raise ParameterError("index out of range")
    flat = arr.ravel().copy()
    flat[indices] = values.astype(flat.dtype)  # round-to-nearest-even for f32
    tensors = dict(container.tensors)
    tensors[tensor_name] = flat.reshape(arr.shape)
    return WeightContainer(tensors)


def histogram(values, num_bins: int, value_range=None):
    """Equal-width bin counts and edges; right-open bins, last bin closed."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ParameterError("cannot histogram an empty sequence")
    if num_bins < 1:
        raise ParameterError("num_bins must be >= 1")
    counts, edges = np.histogram(values, bins=num_bins, range=value_range)
    return counts, edges


@dataclass(frozen=True, slots=True)
class PlanManifest:
    """Replayable record of one embedding run over a container."""

    selection: SelectionSpec
    dimension: int
    num_blocks: int
    tail_length: int
    clients: tuple  # ((client_id, bit_length), ...) in embedding order
    key_digest: str

    def __post_init__(self):
        if self.dimension * self.num_blocks + self.tail_length != self.selection.count:
            raise ParameterError(
                "r*num_blocks + tail_length must equal the selection count "
                f"({self.dimension}*{self.num_blocks}+{self.tail_length} != {self.selection.count})"
            )
        object.__setattr__(
            self, "clients", tuple((str(c), int(b)) for c, b in self.clients)
        )

    def embedding_plan(self) -> EmbeddingPlan:
        return EmbeddingPlan(
            dimension=self.dimension,
            num_blocks=self.num_blocks,
            client_order=tuple(cid for cid, _ in self.clients),
            selection=self.selection,
        )

    def bit_length_of(self, client_id: str) -> int:
        for cid, bits in self.clients:
            if cid == client_id:
                return bits
        raise ParameterError(f"client {client_id!r} not in plan")


def save_plan(path, plan: PlanManifest):
    doc = {
        "format": PLAN_FORMAT,
        "selection": {
            "tensor": plan.selection.tensor_name,
            "count": plan.selection.count,
            "permute": plan.selection.permute,
            "location_seed": plan.selection.location_seed.hex(),
        },
        "dimension": plan.dimension,
        "num_blocks": plan.num_blocks,
        "tail_length": plan.tail_length,
        "clients": [{"id": cid, "bit_length": bits} for cid, bits in plan.clients],
        "key_digest": plan.key_digest,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_plan(path) -> PlanManifest:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != PLAN_FORMAT:
        raise ManifestError(f"not a {PLAN_FORMAT} file: {path}")
    sel = doc["selection"]
    return PlanManifest(
        selection=SelectionSpec(
            tensor_name=sel["tensor"],
            count=sel["count"],
            permute=sel["permute"],
            location_seed=bytes.fromhex(sel["location_seed"]),
        ),
        dimension=doc["dimension"],
        num_blocks=doc["num_blocks"],
        tail_length=doc["tail_length"],
        clients=tuple((c["id"], c["bit_length"]) for c in doc["clients"]),
        key_digest=doc["key_digest"],
    )


def check_key_digest(plan: PlanManifest, key_path):
    """Refuse to proceed when the key file differs from the one used at embed time."""
    digest = hashlib.sha256(open(key_path, "rb").read()).hexdigest()
    if digest != plan.key_digest:
        raise PlanDigestError(
            f"key file digest {digest[:12]}... does not match plan {plan.key_digest[:12]}..."
        )
