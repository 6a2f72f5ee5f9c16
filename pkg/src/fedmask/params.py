"""Dense parameter containers.

A :class:`ParamSet` is an ordered mapping of layer name to a 2-D float64
array. Bias vectors are stored as ``1 x d`` matrices so that every layer is
a matrix and masking applies uniformly.

Checkpoint layout (all integers little-endian)::

    magic      4 bytes   b"FMPS"
    version    uint32    1
    n_layers   uint32
    per layer:
      name_len uint32
      name     name_len bytes, UTF-8
      rows     uint32
      cols     uint32
      values   rows*cols float64, little-endian, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

_MAGIC = b"FMPS"
_VERSION = 1


class ShapeMismatchError(ValueError):
    pass


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"layer {name!r}: expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"layer {name!r} contains non-finite values")
    arr.flags.writeable = False
    return arr


class ParamSet(Mapping[str, np.ndarray]):
    """Immutable ordered collection of named real-valued matrices."""

    __slots__ = ("_layers",)

    def __init__(self, layers: Iterable[tuple[str, np.ndarray]] | Mapping[str, np.ndarray] = ()):
        items = layers.items() if isinstance(layers, Mapping) else layers
        built: dict[str, np.ndarray] = {}
        for name, values in items:
            if name in built:
                raise ValueError(f"duplicate layer name {name!r}")
            built[name] = _frozen(values, name)
        self._layers = built

    @classmethod
    def _wrap(cls, layers: dict[str, np.ndarray]) -> "ParamSet":
        # Trusted constructor: arrays are already float64 and freshly allocated.
        out = cls.__new__(cls)
        for name, arr in layers.items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"layer {name!r} contains non-finite values")
            arr.flags.writeable = False
        out._layers = layers
        return out

    def __getitem__(self, name: str) -> np.ndarray:
        return self._layers[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._layers)

    def __len__(self) -> int:
        return len(self._layers)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}:{v.shape[0]}x{v.shape[1]}" for k, v in self._layers.items())
        return f"ParamSet({shapes})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self.compatible(other) and all(
            np.array_equal(self[k], other[k]) for k in self
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def shapes(self) -> list[tuple[str, tuple[int, int]]]:
        return [(k, v.shape) for k, v in self._layers.items()]

    def compatible(self, other: "ParamSet") -> bool:
        return self.shapes == other.shapes

    def copy_arrays(self) -> dict[str, np.ndarray]:
        """Writable copies of every layer, in order."""
        return {k: v.copy() for k, v in self._layers.items()}

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self._layers.values()]) if self._layers else np.zeros(0)


def check_compatible(a: ParamSet, b: ParamSet) -> None:
    """Raise ShapeMismatchError naming the first offending layer."""
    names_a, names_b = list(a), list(b)
    for i in range(max(len(names_a), len(names_b))):
        na = names_a[i] if i < len(names_a) else None
        nb = names_b[i] if i < len(names_b) else None
        if na != nb:
            raise ShapeMismatchError(f"layer mismatch at position {i}: {na!r} vs {nb!r}")
        if a[na].shape != b[nb].shape:
            raise ShapeMismatchError(
                f"layer {na!r}: shape {a[na].shape} vs {b[nb].shape}"
            )


def elementwise_combine(a: ParamSet, b: ParamSet, op: str, alpha: float = 1.0) -> ParamSet:
    """Combine two shape-compatible ParamSets layer by layer.

    ``op`` is one of ``"add"`` (a + b), ``"sub"`` (a - b) or ``"scale-add"``
    (a + alpha * b).
    """
    check_compatible(a, b)
    if op == "add":
        fn = np.add
    elif op == "sub":
        fn = np.subtract
    elif op == "scale-add":
        def fn(x, y):
            return x + alpha * y
    else:
        raise ValueError(f"unknown op {op!r}")
    return ParamSet._wrap({k: fn(a[k], b[k]) for k in a})


def add(a: ParamSet, b: ParamSet) -> ParamSet:
    return elementwise_combine(a, b, "add")


def sub(a: ParamSet, b: ParamSet) -> ParamSet:
    return elementwise_combine(a, b, "sub")


def scale_add(a: ParamSet, b: ParamSet, alpha: float) -> ParamSet:
    return elementwise_combine(a, b, "scale-add", alpha)


def numel(p: ParamSet) -> int:
    return sum(v.shape[0] * v.shape[1] for v in p.values())


def to_bytes(p: ParamSet) -> bytes:
    parts = [_MAGIC, struct.pack("<II", _VERSION, len(p))]
    for name, arr in p.items():
        raw = name.encode("utf-8")
        rows, cols = arr.shape
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<II", rows, cols))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(buf: bytes) -> ParamSet:
    if buf[:4] != _MAGIC:
        raise ValueError("not a parameter checkpoint (bad magic)")
    version, n_layers = struct.unpack_from("<II", buf, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    layers = []
    try:
        for _ in range(n_layers):
            (name_len,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + name_len].decode("utf-8")
            off += name_len
            rows, cols = struct.unpack_from("<II", buf, off)
            off += 8
            nbytes = rows * cols * 8
            if off + nbytes > len(buf):
                raise ValueError(f"truncated checkpoint in layer {name!r}")
            values = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=off)
            off += nbytes
            layers.append((name, values.reshape(rows, cols)))
    except struct.error as exc:
        raise ValueError("truncated checkpoint") from exc
    if off != len(buf):
        raise ValueError(f"{len(buf) - off} trailing bytes after last layer")
    return ParamSet(layers)


def save(p: ParamSet, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(p))


def load(path: str | Path) -> ParamSet:
    return from_bytes(Path(path).read_bytes())
