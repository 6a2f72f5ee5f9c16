"""Client sampling: static rate, exponentially decaying rate, and selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SamplingSchedule:
    """Sampling configuration.

    ``t0`` shifts the exponent index: with ``t0=0`` the first round samples at
    the full initial rate ``C``; with ``t0=1`` the first round is already
    decayed by ``exp(-beta)``.
    """

    kind: str = "static"  # "static" | "dynamic"
    C: float = 1.0
    beta: float = 0.0
    min_clients: int = 2
    t0: int = 0

    def __post_init__(self):
        if self.kind not in ("static", "dynamic"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if not 0.0 < self.C <= 1.0:
            raise ValueError(f"C must be in (0, 1], got {self.C}")
        if not self.beta >= 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.min_clients < 1:
            raise ValueError("min_clients must be >= 1")
        if self.t0 not in (0, 1):
            raise ValueError("t0 must be 0 or 1")


def rate_at(s: SamplingSchedule, round: int) -> float:
    if round < 0:
        raise ValueError("round must be non-negative")
    if s.kind == "static":
        return s.C
    return s.C * math.exp(-s.beta * (round + s.t0))


def clients_at(s: SamplingSchedule, round: int, num_clients: int) -> int:
    if num_clients < s.min_clients:
        raise ValueError(f"num_clients={num_clients} is below min_clients={s.min_clients}")
    m = round_half_up(rate_at(s, round) * num_clients)
    return max(s.min_clients, min(m, num_clients))


def select_clients(m: int, num_clients: int, seed: int) -> list[int]:
    """Uniformly sample ``m`` distinct client ids, returned in ascending order."""
    if not 1 <= m <= num_clients:
        raise ValueError(f"cannot select {m} of {num_clients} clients")
    rng = np.random.default_rng(seed)
    return sorted(rng.choice(num_clients, size=m, replace=False).tolist())
