"""Federated averaging of client models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamSet, check_compatible

AGG_MODES = ("weighted", "uniform", "paper-literal")


@dataclass(frozen=True)
class ClientUpdate:
    client_id: int
    params: ParamSet
    n_samples: int
    transmitted_scalars: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"client {self.client_id}: n_samples must be >= 1")


def fedavg(updates: list[ClientUpdate], mode: str = "weighted") -> ParamSet:
    """Average client models.

    Modes:
      weighted       sum_i (n_i / n) * theta_i, n summed over the given clients
      uniform        (1 / m) * sum_i theta_i
      paper-literal  (1 / m) * sum_i (n_i / n) * theta_i; shrinks the model by
                     roughly 1/m each round and exists for fidelity experiments

    Updates are summed in ascending ``client_id`` order so the result does not
    depend on list order.
    """
    if not updates:
        raise ValueError("fedavg needs at least one update")
    if mode not in AGG_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    ordered = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate client ids in update list")
    ref = ordered[0].params
    for u in ordered[1:]:
        check_compatible(ref, u.params)

    m = len(ordered)
    n_total = sum(u.n_samples for u in ordered)
    if mode == "uniform":
        weights = [1.0 / m] * m
    else:
        weights = [u.n_samples / n_total for u in ordered]

    out = {}
    for name in ref:
        acc = np.zeros_like(ref[name])
        for w, u in zip(weights, ordered):
            acc += w * u.params[name]
        if mode == "paper-literal":
            acc /= m
        out[name] = acc
    return ParamSet._wrap(out)
