"""Random and top-k selective masking of client uploads.

``gamma`` is the fraction of each layer's entries that is *kept* (sent).
Each layer keeps ``k = round_half_up(gamma * numel)`` entries, clamped to
``[0, numel]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamSet, check_compatible
from .sampling import round_half_up

MASK_KINDS = ("none", "random", "selective")
FILL_MODES = ("zero", "server-fill")


@dataclass(frozen=True)
class MaskingPolicy:
    kind: str = "none"
    gamma: float = 1.0
    fill: str = "zero"

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown masking kind {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.fill not in FILL_MODES:
            raise ValueError(f"unknown fill mode {self.fill!r}")


@dataclass(frozen=True, eq=False)
class LayerMask:
    rows: int
    cols: int
    kept: np.ndarray  # sorted flat (row-major) indices

    @property
    def k(self) -> int:
        return int(self.kept.size)

    def dense(self) -> np.ndarray:
        m = np.zeros(self.rows * self.cols, dtype=bool)
        m[self.kept] = True
        return m.reshape(self.rows, self.cols)

    def kept_cells(self) -> set[tuple[int, int]]:
        return {divmod(int(i), self.cols) for i in self.kept}


def keep_count(size: int, gamma: float) -> int:
    return max(0, min(size, round_half_up(gamma * size)))


def random_mask(rows: int, cols: int, gamma: float, seed) -> LayerMask:
    size = rows * cols
    k = keep_count(size, gamma)
    kept = np.random.default_rng(seed).choice(size, size=k, replace=False)
    return LayerMask(rows, cols, np.sort(kept))


def selective_mask(w_old: np.ndarray, w_new: np.ndarray, gamma: float) -> LayerMask:
    """Keep the ``k`` entries with the largest ``|w_new - w_old|``.

    Ties are broken towards the lowest row-major index.
    """
    w_old = np.asarray(w_old, dtype=np.float64)
    w_new = np.asarray(w_new, dtype=np.float64)
    if w_old.shape != w_new.shape:
        raise ValueError(f"shape mismatch: {w_old.shape} vs {w_new.shape}")
    rows, cols = w_new.shape
    diff = np.abs(w_new - w_old).ravel()
    k = keep_count(diff.size, gamma)
    # stable sort on the negated magnitude keeps equal values in index order
    kept = np.argsort(-diff, kind="stable")[:k]
    return LayerMask(rows, cols, np.sort(kept))


def apply_mask(w_new: np.ndarray, mask: LayerMask, fill: str = "zero",
               w_global: np.ndarray | None = None) -> np.ndarray:
    """Keep masked-in entries of ``w_new``; fill the rest with 0 or ``w_global``."""
    w_new = np.asarray(w_new, dtype=np.float64)
    if w_new.shape != (mask.rows, mask.cols):
        raise ValueError(f"mask shape {(mask.rows, mask.cols)} does not match {w_new.shape}")
    if fill == "zero":
        out = np.zeros_like(w_new)
    elif fill == "server-fill":
        if w_global is None:
            raise ValueError("server-fill requires w_global")
        w_global = np.asarray(w_global, dtype=np.float64)
        if w_global.shape != w_new.shape:
            raise ValueError(f"w_global shape {w_global.shape} does not match {w_new.shape}")
        out = w_global.copy()
    else:
        raise ValueError(f"unknown fill mode {fill!r}")
    flat_out = out.reshape(-1)
    flat_out[mask.kept] = w_new.reshape(-1)[mask.kept]
    return out


def mask_model(old: ParamSet, new: ParamSet, policy: MaskingPolicy, seed=0) -> tuple[ParamSet, int]:
    """Mask every layer of ``new`` and count the scalars that would be sent.

    ``old`` is the global model the client started from; it drives the
    selective ranking and supplies server-fill values.
    """
    check_compatible(old, new)
    if policy.kind == "none":
        return new, sum(v.size for v in new.values())
    out = {}
    sent = 0
    for i, name in enumerate(new):
        rows, cols = new[name].shape
        if policy.kind == "random":
            mask = random_mask(rows, cols, policy.gamma, np.random.SeedSequence([seed, i]))
        else:
            mask = selective_mask(old[name], new[name], policy.gamma)
        out[name] = apply_mask(new[name], mask, policy.fill, old[name])
        sent += mask.k
    return ParamSet._wrap(out), sent
