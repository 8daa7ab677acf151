"""Weight stores: seeded initialisation and the SFRW binary format.

File layout (little-endian)::

    b"SFRW"  u32 version=1  u32 entry_count
    per entry: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], f32 values
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arch import layers as L
from .arch.graph import NetworkGraph
from .errors import (
    BadMagicError,
    MissingWeightError,
    TruncatedFileError,
    VersionMismatchError,
    WeightShapeError,
    WeightsError,
)

__all__ = [
    "MAGIC",
    "VERSION",
    "WeightStore",
    "param_shapes",
    "init_weights",
    "save_weights",
    "load_weights",
    "write_tensors",
    "read_tensors",
]

MAGIC = b"SFRW"
VERSION = 1
BN_FIELDS = ("gamma", "beta", "mean", "var")


def param_shapes(spec: L.Spec) -> dict[str, tuple[int, ...]]:
    """Tensor shapes a primitive layer needs, keyed by tensor name."""
    if isinstance(spec, L.StandardConv):
        return {"weight": (spec.out_ch, spec.in_ch, spec.k_h, spec.k_w)}
    if isinstance(spec, L.DepthwiseConv):
        return {"weight": (spec.out_ch, 1, spec.k_h, spec.k_w)}
    if isinstance(spec, L.PointwiseConv):
        return {"weight": (spec.out_ch, spec.in_ch, 1, 1)}
    if isinstance(spec, L.TransposedConv):
        return {"weight": (spec.out_ch, spec.in_ch, spec.k, spec.k)}
    if isinstance(spec, L.BatchNorm):
        return {f: (spec.channels,) for f in BN_FIELDS}
    return {}


def _learnable(tensor_name: str) -> bool:
    # running statistics are buffers, not parameters
    return tensor_name not in ("mean", "var")


@dataclass
class WeightStore:
    """``{lowered node name: {tensor name: float32 array}}``."""

    tensors: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def __getitem__(self, node):
        try:
            return self.tensors[node]
        except KeyError:
            raise MissingWeightError(node) from None

    def __contains__(self, node):
        return node in self.tensors

    def __eq__(self, other):
        if not isinstance(other, WeightStore) or self.tensors.keys() != other.tensors.keys():
            return False
        for node, named in self.tensors.items():
            theirs = other.tensors[node]
            if named.keys() != theirs.keys():
                return False
            for k, v in named.items():
                if v.shape != theirs[k].shape or v.tobytes() != theirs[k].tobytes():
                    return False
        return True

    def param_count(self, node: str | None = None) -> int:
        nodes = [node] if node is not None else list(self.tensors)
        return sum(
            arr.size
            for n in nodes
            for name, arr in self.tensors.get(n, {}).items()
            if _learnable(name)
        )

    def flat(self) -> dict[str, np.ndarray]:
        return {f"{n}.{t}": a for n, named in self.tensors.items() for t, a in named.items()}

    @classmethod
    def from_flat(cls, flat: dict[str, np.ndarray]) -> "WeightStore":
        store = cls()
        for key, arr in flat.items():
            node, _, tensor = key.rpartition(".")
            if not node:
                raise WeightsError(f"weight entry {key!r} lacks a '<node>.<tensor>' name")
            store.tensors.setdefault(node, {})[tensor] = arr
        return store

    def check_against(self, graph: NetworkGraph) -> None:
        """Raise if any parameterised node of ``graph`` lacks a correctly sized tensor."""
        for name in graph.order():
            for tensor, shape in param_shapes(graph.nodes[name].spec).items():
                arr = self.tensors.get(name, {}).get(tensor)
                if arr is None:
                    raise MissingWeightError(f"{name}.{tensor}")
                if tuple(arr.shape) != shape:
                    raise WeightShapeError(
                        f"{name}.{tensor}: expected shape {shape}, file has {tuple(arr.shape)}"
                    )
        extra = sorted(set(self.tensors) - set(graph.nodes))
        if extra:
            raise WeightShapeError(f"weights for nodes absent from graph: {extra[:5]}")


def init_weights(graph: NetworkGraph, seed: int) -> WeightStore:
    """Deterministic initialisation of a lowered graph.

    Conv kernels are uniform in ``[-b, b]`` with ``b = sqrt(6 / fan_in)``,
    ``fan_in = k_h * k_w * in_maps_per_group``; batch norm starts as the
    identity (gamma 1, beta 0, mean 0, var 1).
    """
    if not graph.is_lowered:
        raise ValueError("init_weights needs a lowered graph")
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name in graph.order():
        shapes = param_shapes(graph.nodes[name].spec)
        if not shapes:
            continue
        if "weight" in shapes:
            shape = shapes["weight"]
            bound = math.sqrt(6.0 / (shape[1] * shape[2] * shape[3]))
            store.tensors[name] = {
                "weight": rng.uniform(-bound, bound, size=shape).astype(np.float32)
            }
        else:
            (c,) = shapes["gamma"]
            store.tensors[name] = {
                "gamma": np.ones(c, np.float32),
                "beta": np.zeros(c, np.float32),
                "mean": np.zeros(c, np.float32),
                "var": np.ones(c, np.float32),
            }
    return store


def write_tensors(tensors: dict[str, np.ndarray], path) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WeightsError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr, dtype=np.float32)
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(arr.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_tensors(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedFileError(f"{path}: truncated at byte {pos} (needed {n} more)")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4) != MAGIC:
        raise BadMagicError(f"{path}: not an SFRW weights file (bad magic)")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")
    out = {}
    for _ in range(count):
        (n,) = struct.unpack("<H", take(2))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = math.prod(dims)
        arr = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float32).reshape(dims)
        out[name] = arr
    if pos != len(data):
        raise WeightsError(f"{path}: {len(data) - pos} trailing bytes after last entry")
    return out


def save_weights(store: WeightStore, path) -> None:
    write_tensors(store.flat(), path)


def load_weights(path, graph: NetworkGraph | None = None) -> WeightStore:
    """Read an SFRW file; with ``graph`` also check it covers every layer."""
    store = WeightStore.from_flat(read_tensors(path))
    if graph is not None:
        store.check_against(graph)
    return store
