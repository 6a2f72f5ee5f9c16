"""Command-line front end: ``fedmask run | sweep | cost``.

Config files are flat ``key = value`` text; ``#`` starts a comment. Every key
except ``rounds`` has a default, and the fully resolved config is written to
each output directory as ``config.txt``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from . import params as params_mod
from .cost import analytic_cost
from .data import DataError
from .engine import (
    SWEEP_AXES, DataConfig, ModelConfig, NumericalError, RunConfig, RunResult, simulate,
    write_outputs,
)
from .masking import FILL_MODES, MASK_KINDS, MaskingPolicy
from .model import TrainConfig
from .aggregation import AGG_MODES
from .sampling import SamplingSchedule

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class Key:
    type: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    hint: str = ""


def _choice(*opts):
    return lambda v: v in opts


def _opt_str(s: str) -> Optional[str]:
    return s or None


def _opt_int(s: str) -> Optional[int]:
    return int(s) if s else None


SCHEMA: dict[str, Key] = {
    "rounds": Key(int, REQUIRED, lambda v: v >= 1, ">= 1"),
    "seed": Key(int, 0, lambda v: v >= 0, ">= 0"),
    "clients": Key(int, 10, lambda v: v >= 1, ">= 1"),
    "eval_every": Key(int, 1, lambda v: v >= 1, ">= 1"),
    "dropout": Key(float, 0.0, lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
    "data.source": Key(str, "blobs", _choice("blobs", "csv"), "blobs|csv"),
    "data.n": Key(int, 2000, lambda v: v >= 2, ">= 2"),
    "data.dim": Key(int, 10, lambda v: v >= 1, ">= 1"),
    "data.classes": Key(int, 4, lambda v: v >= 1, ">= 1"),
    "data.spread": Key(float, 1.0, lambda v: v >= 0, ">= 0"),
    "data.separation": Key(float, 3.0, lambda v: v > 0, "> 0"),
    "data.path": Key(_opt_str, None),
    "data.test_path": Key(_opt_str, None),
    "data.test_fraction": Key(float, 0.2, lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "model.kind": Key(str, "logreg", _choice("logreg", "mlp"), "logreg|mlp"),
    "model.hidden": Key(_opt_int, None, lambda v: v is None or v >= 1, ">= 1"),
    "model.activation": Key(str, "relu", _choice("relu", "tanh"), "relu|tanh"),
    "train.epochs": Key(int, 1, lambda v: v >= 1, ">= 1"),
    "train.batch_size": Key(int, 32, lambda v: v >= 1, ">= 1"),
    "train.lr": Key(float, 0.1, lambda v: v > 0, "> 0"),
    "sampling.kind": Key(str, "static", _choice("static", "dynamic"), "static|dynamic"),
    "sampling.C": Key(float, 1.0, lambda v: 0.0 < v <= 1.0, "in (0, 1]"),
    "sampling.beta": Key(float, 0.0, lambda v: v >= 0, ">= 0"),
    "sampling.min_clients": Key(int, 2, lambda v: v >= 1, ">= 1"),
    "sampling.t0": Key(int, 0, _choice(0, 1), "0|1"),
    "masking.kind": Key(str, "none", _choice(*MASK_KINDS), "|".join(MASK_KINDS)),
    "masking.gamma": Key(float, 1.0, lambda v: 0.0 <= v <= 1.0, "in [0, 1]"),
    "masking.fill": Key(str, "zero", _choice(*FILL_MODES), "|".join(FILL_MODES)),
    "agg.mode": Key(str, "weighted", _choice(*AGG_MODES), "|".join(AGG_MODES)),
}


def parse_pairs(lines, source: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        raw[key] = value
    return raw


def resolve(raw: dict[str, str]) -> dict[str, Any]:
    """Type-convert, default and range-check every schema key."""
    out = {}
    for key, spec in SCHEMA.items():
        if key in raw:
            try:
                value = spec.type(raw[key])
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw[key]!r}") from None
        elif spec.default is REQUIRED:
            raise ConfigError(key, "required key is missing")
        else:
            value = spec.default
        if spec.check is not None and not spec.check(value):
            raise ConfigError(key, f"value {value!r} out of range ({spec.hint})")
        out[key] = value
    if out["data.source"] == "csv" and not out["data.path"]:
        raise ConfigError("data.path", "required when data.source = csv")
    if out["model.kind"] == "mlp" and out["model.hidden"] is None:
        raise ConfigError("model.hidden", "required when model.kind = mlp")
    if out["clients"] < out["sampling.min_clients"]:
        raise ConfigError("clients", f"must be >= sampling.min_clients ({out['sampling.min_clients']})")
    return out


def build_config(v: dict[str, Any]) -> RunConfig:
    return RunConfig(
        rounds=v["rounds"],
        num_clients=v["clients"],
        data=DataConfig(
            source=v["data.source"], n=v["data.n"], dim=v["data.dim"], classes=v["data.classes"],
            spread=v["data.spread"], separation=v["data.separation"], path=v["data.path"],
            test_path=v["data.test_path"], test_fraction=v["data.test_fraction"],
        ),
        model=ModelConfig(v["model.kind"], v["model.hidden"], v["model.activation"]),
        train=TrainConfig(v["train.epochs"], v["train.batch_size"], v["train.lr"]),
        sampling=SamplingSchedule(v["sampling.kind"], v["sampling.C"], v["sampling.beta"],
                                  v["sampling.min_clients"], v["sampling.t0"]),
        masking=MaskingPolicy(v["masking.kind"], v["masking.gamma"], v["masking.fill"]),
        agg_mode=v["agg.mode"],
        eval_every=v["eval_every"],
        seed=v["seed"],
        dropout=v["dropout"],
    )


def format_resolved(v: dict[str, Any]) -> str:
    lines = []
    for key in SCHEMA:
        value = v[key]
        lines.append(f"{key} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"


def load_config(path: str, overrides: list[str], seed: Optional[int]) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from None
    raw = parse_pairs(text.splitlines(), str(path))
    raw.update(parse_pairs(overrides, "--set"))
    if seed is not None:
        raw["seed"] = str(seed)
    return resolve(raw)


def _run_one(values: dict[str, Any], out_dir: Path, workers: int) -> RunResult:
    cfg = build_config(values)
    result = simulate(cfg, workers=workers)
    write_outputs(result, out_dir, extra={"resolved": values})
    (out_dir / "config.txt").write_text(format_resolved(values), encoding="utf-8")
    params_mod.save(result.params, out_dir / "model.bin")
    return result


def cmd_run(args) -> int:
    values = load_config(args.config, args.set, args.seed)
    out = Path(args.out)
    result = _run_one(values, out, args.workers)
    last = result.records[-1]
    print(f"rounds={len(result.records)} test_acc={last.test_acc:.4f} cum_cost={last.cum_cost:.4f} -> {out}")
    return EXIT_OK


_AXIS_KEYS = {"beta": "sampling.beta", "gamma": "masking.gamma", "C": "sampling.C"}


def cmd_sweep(args) -> int:
    values = load_config(args.config, args.set, args.seed)
    if not args.values:
        raise ConfigError("values", "sweep needs at least one value")
    key = _AXIS_KEYS[args.axis]
    points = []
    for text in args.values:
        resolved = resolve({**{k: _unparse(v) for k, v in values.items()}, key: text})
        points.append((text, resolved))
    out = Path(args.out)
    rows = []
    for text, resolved in points:
        result = _run_one(resolved, out / f"{args.axis}={text}", args.workers)
        last = result.records[-1]
        rows.append([text, last.round, _num(last.test_acc), _num(last.test_loss), _num(last.cum_cost),
                     result.ledger.uploaded_scalars, result.ledger.downloaded_scalars])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([args.axis, "final_round", "test_acc", "test_loss", "cum_cost", "uploaded", "downloaded"])
    w.writerows(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_resolved(values), encoding="utf-8")
    (out / "summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _unparse(v) -> str:
    return "" if v is None else str(v)


def _num(x) -> str:
    return "" if x is None else repr(x)


def cmd_cost(args) -> int:
    f = analytic_cost(args.C, args.beta, args.gamma, args.R, args.t0)
    print(f"{f:.6f}")
    if args.cumulative:
        print(f"{f * args.R:.6f}")
    return EXIT_OK


def _t0(s: str) -> int:
    v = int(s)
    if v not in (0, 1):
        raise argparse.ArgumentTypeError("t0 must be 0 or 1")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedmask", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="flat key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--seed", type=int, default=None, help="override the global seed")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--workers", type=_positive_int, default=1,
                        help="concurrent client updates per round")

    sp = sub.add_parser("run", help="run one simulation")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run once per value of one axis")
    common(sp)
    sp.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sp.add_argument("--values", nargs="*", default=[], help="axis values")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("cost", help="analytic mean per-round upload cost")
    sp.add_argument("C", type=float)
    sp.add_argument("beta", type=float)
    sp.add_argument("gamma", type=float)
    sp.add_argument("R", type=_positive_int)
    sp.add_argument("t0", type=_t0, nargs="?", default=0)
    sp.add_argument("--cumulative", action="store_true", help="also print R * cost")
    sp.set_defaults(func=cmd_cost)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fedmask: invalid config key {exc.key!r}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError) as exc:
        print(f"fedmask: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"fedmask: numerical failure at {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
