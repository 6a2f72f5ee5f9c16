"""Server loop: sample clients, train locally, mask, aggregate, evaluate.

Every random draw comes from a seed built by :func:`mix_seed` out of the
global seed, a stream tag and the (round, client) coordinates, so results do
not depend on how many client tasks run at once.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import data as data_mod
from .aggregation import AGG_MODES, ClientUpdate, fedavg
from .cost import CostLedger
from .masking import MaskingPolicy, mask_model
from .model import ModelSpec, TrainConfig, evaluate, init_model, local_train_with_loss
from .params import ParamSet, numel
from .sampling import SamplingSchedule, clients_at, rate_at, select_clients

log = logging.getLogger(__name__)

METRICS_HEADER = [
    "round", "sample_rate", "m", "train_loss", "test_loss", "test_acc",
    "uploaded", "downloaded", "cum_cost",
]

_MASK64 = (1 << 64) - 1

# stream tags for mix_seed
DATA, SPLIT, PARTITION, INIT, SELECT, TRAIN, MASK, DROP = range(1, 9)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed: ``h = splitmix64(h ^ part)`` per part."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (p & _MASK64))
    return h


class NumericalError(RuntimeError):
    def __init__(self, round: int, detail: str):
        super().__init__(f"round {round}: {detail}")
        self.round = round


@dataclass(frozen=True)
class DataConfig:
    source: str = "blobs"  # "blobs" | "csv"
    n: int = 2000
    dim: int = 10
    classes: int = 4
    spread: float = 1.0
    separation: float = 3.0
    path: Optional[str] = None
    test_path: Optional[str] = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.source not in ("blobs", "csv"):
            raise ValueError(f"unknown data source {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ValueError("data.path is required for csv source")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "logreg"
    hidden_dim: Optional[int] = None
    activation: str = "relu"

    def spec(self, input_dim: int, num_classes: int) -> ModelSpec:
        return ModelSpec(self.kind, input_dim, num_classes,
                         self.hidden_dim if self.kind == "mlp" else None, self.activation)


@dataclass(frozen=True)
class RunConfig:
    rounds: int
    num_clients: int = 10
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampling: SamplingSchedule = field(default_factory=SamplingSchedule)
    masking: MaskingPolicy = field(default_factory=MaskingPolicy)
    agg_mode: str = "weighted"
    eval_every: int = 1
    seed: int = 0
    dropout: float = 0.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.num_clients < self.sampling.min_clients:
            raise ValueError(
                f"num_clients={self.num_clients} is below sampling.min_clients={self.sampling.min_clients}"
            )
        if self.agg_mode not in AGG_MODES:
            raise ValueError(f"unknown aggregation mode {self.agg_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class RoundRecord:
    round: int
    sample_rate: float
    m: int
    selected: list[int]
    train_loss: float
    test_loss: Optional[float]
    test_acc: Optional[float]
    uploaded: int
    downloaded: int
    cum_cost: float
    dropped: list[int] = field(default_factory=list)


@dataclass
class RunResult:
    config: RunConfig
    records: list[RoundRecord]
    params: ParamSet
    ledger: CostLedger


def load_data(cfg: RunConfig) -> tuple[data_mod.Dataset, data_mod.Dataset]:
    d = cfg.data
    if d.source == "blobs":
        full = data_mod.generate_blobs(d.n, d.dim, d.classes, d.spread,
                                       seed=mix_seed(cfg.seed, DATA), separation=d.separation)
        return data_mod.train_test_split(full, d.test_fraction, mix_seed(cfg.seed, SPLIT))
    train = data_mod.load_csv(d.path)
    if d.test_path:
        test = data_mod.load_csv(d.test_path)
        k = max(train.num_classes, test.num_classes)
        train = data_mod.Dataset(train.features, train.labels, k)
        test = data_mod.Dataset(test.features, test.labels, k)
        if train.dim != test.dim:
            raise ValueError(f"train has {train.dim} features, test has {test.dim}")
        return train, test
    return data_mod.train_test_split(train, d.test_fraction, mix_seed(cfg.seed, SPLIT))


ShardHook = Callable[[int, int, np.ndarray], None]


def simulate(cfg: RunConfig, workers: int = 1, hook: Optional[ShardHook] = None) -> RunResult:
    """Run ``cfg.rounds`` rounds of federated training.

    ``workers`` client updates run concurrently in a thread pool. ``hook`` is
    called as ``hook(round, client_id, shard)`` before each local training
    job, for instrumentation.
    """
    train, test = load_data(cfg)
    M = cfg.num_clients
    shards = data_mod.partition_iid(len(train), M, mix_seed(cfg.seed, PARTITION))
    spec = cfg.model.spec(train.dim, train.num_classes)
    global_params = init_model(spec, mix_seed(cfg.seed, INIT))
    size = numel(global_params)
    ledger = CostLedger(size, M)
    records: list[RoundRecord] = []

    def client_job(theta: ParamSet, t: int, cid: int):
        shard = shards[cid]
        if hook is not None:
            hook(t, cid, shard)
        local, loss = local_train_with_loss(theta, train, shard, cfg.train,
                                            mix_seed(cfg.seed, TRAIN, t, cid), spec)
        masked, sent = mask_model(theta, local, cfg.masking, seed=mix_seed(cfg.seed, MASK, t, cid))
        return ClientUpdate(cid, masked, len(shard), sent), loss

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for t in range(cfg.rounds):
            c = rate_at(cfg.sampling, t)
            m = clients_at(cfg.sampling, t, M)
            selected = select_clients(m, M, mix_seed(cfg.seed, SELECT, t))
            dropped = []
            if cfg.dropout > 0:
                dropped = [cid for cid in selected
                           if np.random.default_rng(mix_seed(cfg.seed, DROP, t, cid)).random() < cfg.dropout]
            active = [cid for cid in selected if cid not in dropped]

            down = m * size
            ledger.record_download(down)
            try:
                if pool is None:
                    results = [client_job(global_params, t, cid) for cid in active]
                else:
                    results = list(pool.map(lambda cid: client_job(global_params, t, cid), active))
            except FloatingPointError as exc:
                raise NumericalError(t, str(exc)) from exc

            updates = [u for u, _ in results]
            losses = [l for _, l in results]
            up = sum(u.transmitted_scalars for u in updates)
            ledger.record_upload(up)
            if updates:
                try:
                    global_params = fedavg(updates, cfg.agg_mode)
                except FloatingPointError as exc:
                    raise NumericalError(t, str(exc)) from exc
            train_loss = math.fsum(losses) / len(losses) if losses else float("nan")
            if losses and not math.isfinite(train_loss):
                raise NumericalError(t, f"non-finite training loss {train_loss}")

            test_loss = test_acc = None
            if (t + 1) % cfg.eval_every == 0 or t == cfg.rounds - 1:
                test_loss, test_acc = evaluate(global_params, test, spec)
                if not math.isfinite(test_loss):
                    raise NumericalError(t, f"non-finite test loss {test_loss}")
            records.append(RoundRecord(
                round=t, sample_rate=c, m=m, selected=selected, train_loss=train_loss,
                test_loss=test_loss, test_acc=test_acc, uploaded=up, downloaded=down,
                cum_cost=ledger.cohort_uploads(), dropped=dropped,
            ))
            log.debug("round %d: c=%.4f m=%d acc=%s", t, c, m, test_acc)
    finally:
        if pool is not None:
            pool.shutdown()
    return RunResult(cfg, records, global_params, ledger)


def run(cfg: RunConfig, workers: int = 1, hook: Optional[ShardHook] = None) -> list[RoundRecord]:
    return simulate(cfg, workers, hook).records


SWEEP_AXES = ("beta", "gamma", "C")


def with_axis(base: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "beta":
        return replace(base, sampling=replace(base.sampling, beta=value))
    if axis == "C":
        return replace(base, sampling=replace(base.sampling, C=value))
    if axis == "gamma":
        return replace(base, masking=replace(base.masking, gamma=value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep(base: RunConfig, axis: str, values, workers: int = 1) -> list[tuple[float, RunResult]]:
    """One run per value; all other settings (and therefore all seeds) shared."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    configs = [with_axis(base, axis, v) for v in values]
    return [(v, simulate(c, workers)) for v, c in zip(values, configs)]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def metrics_csv(records: list[RoundRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in records:
        w.writerow([_fmt(getattr(r, k)) for k in METRICS_HEADER])
    return buf.getvalue()


def config_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def sidecar_json(cfg: RunConfig, records: list[RoundRecord], extra: Optional[dict] = None) -> str:
    doc = {
        "config": config_dict(cfg),
        "rounds": [
            {"round": r.round, "m": r.m, "selected": r.selected, "dropped": r.dropped}
            for r in records
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_outputs(result: RunResult, out_dir: str | Path, extra: Optional[dict] = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(result.records), encoding="utf-8")
    (out / "run.json").write_text(sidecar_json(result.config, result.records, extra), encoding="utf-8")
