"""Federated averaging simulator with dynamic client sampling and selective masking."""

from .aggregation import ClientUpdate, fedavg
from .cost import CostLedger, analytic_cost, normalized_upload_cost
from .data import Dataset, generate_blobs, load_csv, partition_iid, save_csv
from .engine import DataConfig, ModelConfig, RoundRecord, RunConfig, run, simulate, sweep
from .masking import LayerMask, MaskingPolicy, apply_mask, mask_model, random_mask, selective_mask
from .model import ModelSpec, TrainConfig, evaluate, init_model, local_train, loss_and_grad
from .params import ParamSet, elementwise_combine, numel
from .sampling import SamplingSchedule, clients_at, rate_at, select_clients

__version__ = "0.1.0"
