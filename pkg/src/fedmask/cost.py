"""Upload/download accounting.

The cost unit is one full-model transmission between one client and the
server. ``analytic_cost`` and ``normalized_upload_cost`` both report the mean
per-round upload, as a fraction of "every client uploads the full model".
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class CostLedger:
    model_numel: int
    num_clients: int
    uploaded_scalars: int = 0
    downloaded_scalars: int = 0

    def __post_init__(self):
        if self.model_numel < 1 or self.num_clients < 1:
            raise ValueError("model_numel and num_clients must be positive")

    def record_upload(self, scalars: int) -> None:
        if scalars < 0:
            raise ValueError("negative upload")
        self.uploaded_scalars += scalars

    def record_download(self, scalars: int) -> None:
        if scalars < 0:
            raise ValueError("negative download")
        self.downloaded_scalars += scalars

    def cohort_uploads(self) -> float:
        """Total uploads so far, in units of one full-cohort full-model round."""
        return self.uploaded_scalars / (self.model_numel * self.num_clients)


def analytic_cost(C: float, beta: float, gamma: float, R: int, t0: int = 0) -> float:
    """``(gamma / R) * sum_t C * exp(-beta * t)`` over R rounds starting at ``t0``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    total = math.fsum(C * math.exp(-beta * t) for t in range(t0, t0 + R))
    return gamma / R * total


def normalized_upload_cost(ledger: CostLedger, R: int) -> float:
    if R < 1:
        raise ValueError("R must be >= 1")
    return ledger.uploaded_scalars / (ledger.model_numel * ledger.num_clients * R)
