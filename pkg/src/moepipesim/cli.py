"""Command-line front end: config loading, subcommands, report serialization.

Subcommands:

    memory    closed-form memory report (JSON and/or aligned table)
    plan      analytical strategy ranking for one configuration
    simulate  run one pipeline simulation, export the timeline
    search    run an adaptive-granularity workload, emit per-iteration rows
    sweep     grid over batch sizes / partition counts / strategies -> CSV

Configuration comes from an optional JSON file (--config) plus flags, flags
winning.  All durations serialize as integer microseconds; memory is
reported in element counts and bytes side by side.  Errors print one JSON
object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from . import autotune, costmodel, memmodel
from .core import (
    STREAMS,
    BatchSpec,
    HardwareProfile,
    ModelSpec,
    ReuseStrategy,
    SlowdownTable,
    micro_batch_size,
)
from .pipesim import (
    BOTH,
    build_schedule,
    memory_components,
    simulate,
    write_trace,
)
from .pipesim.export import us

PRESETS: dict[str, dict[str, int]] = {
    "moe-gpt3-s": {"model_dim": 768, "hidden_dim": 3072, "num_experts": 64},
    "moe-gpt3-xl": {"model_dim": 2048, "hidden_dim": 8192, "num_experts": 64},
    "moe-bert-l": {"model_dim": 1024, "hidden_dim": 4096, "num_experts": 64},
}

# Desk-scale stand-in for an unprofiled cluster: compute in GeMM
# element-operations/s, bandwidths in elements/s, interference factors
# chosen so communication contends with compute and harder with copies.
DEFAULT_HARDWARE: dict[str, Any] = {
    "w_comp": 1.5e14,
    "w_comm": 1.25e10,
    "w_mem": 8.0e9,
    "slowdown": {
        "mu_comp": 0.8,
        "mu_mem": 0.8,
        "mu_all": 0.6,
        "eta_comm": 0.8,
        "eta_all": 0.7,
    },
    "launch_overhead": 1.0e-5,
    "compute_saturation": 2048,
}


class CliUsageError(ValueError):
    """Bad command line; reported as JSON on stderr."""


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(message)
        self.path = path


_SLOWDOWN_KEYS = {
    "mu_comp", "mu_mem", "mu_all",
    "sigma_comm", "sigma_mem", "sigma_all",
    "eta_comm", "eta_comp", "eta_all",
}
_ALLOWED = {
    "model": {"preset", "model_dim", "hidden_dim", "num_experts", "num_nodes",
              "element_bytes"},
    "hardware": {"w_comp", "w_comm", "w_mem", "slowdown", "launch_overhead",
                 "launch_overhead_overrides", "compute_saturation"},
    "batch": {"tokens", "workload"},
    "workload": {"seed", "iterations", "b_min", "b_max", "distribution", "step",
                 "tail_exponent"},
    "pipeline": {"n", "candidates", "trials_per_candidate", "min_micro_batch"},
    "output": {"path", "trace_format"},
}
_TOP_KEYS = {"model", "hardware", "batch", "pipeline", "strategy", "reuse",
             "direction", "seed", "output"}


def _reject_unknown(section: Mapping[str, Any], allowed: set[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", path=f"{path}.{key}" if path else key)


def _int_or_error(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {value!r}", path=path)
    return value


@dataclass
class ExperimentConfig:
    spec: ModelSpec
    hardware: HardwareProfile
    tokens: int | None = None
    workload: dict[str, Any] | None = None
    partitions: int | None = None
    adaptive: bool = False
    candidates: tuple[int, ...] = (1, 2, 4, 8, 16)
    trials_per_candidate: int = 1
    min_micro_batch: int = 1
    strategy_name: str = "none"
    reuse: bool = False
    direction: str = BOTH
    seed: int | None = None
    out_path: str | None = None
    trace_format: str = "jsonl"

    def strategy(self) -> ReuseStrategy:
        if self.strategy_name == "auto":
            raise ConfigError("strategy 'auto' must be resolved before use", path="strategy")
        try:
            return ReuseStrategy.by_name(self.strategy_name)
        except KeyError as exc:
            raise ConfigError(str(exc), path="strategy") from None


def _build_model(section: Mapping[str, Any]) -> ModelSpec:
    _reject_unknown(section, _ALLOWED["model"], "model")
    fields: dict[str, Any] = {}
    preset = section.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}",
                path="model.preset",
            )
        fields.update(PRESETS[preset])
    for key in ("model_dim", "hidden_dim", "num_experts", "num_nodes", "element_bytes"):
        if key in section:
            fields[key] = section[key]
    if not fields.keys() - {"num_nodes", "element_bytes"}:
        raise ConfigError(
            "a model is required (--preset, or model.preset/model dimensions)",
            path="model",
        )
    fields.setdefault("num_nodes", 8)
    try:
        return ModelSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path="model") from None


def _build_hardware(section: Mapping[str, Any]) -> HardwareProfile:
    _reject_unknown(section, _ALLOWED["hardware"], "hardware")
    merged = dict(DEFAULT_HARDWARE)
    merged.update(section)
    slow = merged.get("slowdown", {})
    if not isinstance(slow, Mapping):
        raise ConfigError("slowdown must be an object of named factors",
                          path="hardware.slowdown")
    _reject_unknown(slow, _SLOWDOWN_KEYS, "hardware.slowdown")
    try:
        table = SlowdownTable.from_factors(**slow)
    except ValueError as exc:
        raise ConfigError(str(exc), path="hardware.slowdown") from None
    for key in ("w_comp", "w_comm", "w_mem"):
        value = merged[key]
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"{key} must be a positive number, got {value!r}",
                              path=f"hardware.{key}")
    try:
        return HardwareProfile(
            w_comp=float(merged["w_comp"]),
            w_comm=float(merged["w_comm"]),
            w_mem=float(merged["w_mem"]),
            slowdown=table,
            launch_overhead=float(merged.get("launch_overhead", 0.0)),
            launch_overhead_overrides=merged.get("launch_overhead_overrides", {}),
            compute_saturation=int(merged.get("compute_saturation", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path="hardware") from None


def _read_raw(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return raw


def load_config(path: str | None, raw: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Parse and validate a JSON config; unknown keys are rejected by path."""
    if raw is None:
        raw = _read_raw(path)
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be an object")
    _reject_unknown(raw, _TOP_KEYS, "")

    hardware = _build_hardware(raw.get("hardware", {}))

    batch = raw.get("batch", {})
    _reject_unknown(batch, _ALLOWED["batch"], "batch")
    tokens = None
    workload = None
    if "tokens" in batch:
        tokens = batch["tokens"]
        if not isinstance(tokens, int) or tokens < 1:
            raise ConfigError(f"tokens must be a positive integer, got {tokens!r}",
                              path="batch.tokens")
    if "workload" in batch:
        _reject_unknown(batch["workload"], _ALLOWED["workload"], "batch.workload")
        workload = dict(batch["workload"])

    pipeline = raw.get("pipeline", {})
    _reject_unknown(pipeline, _ALLOWED["pipeline"], "pipeline")
    partitions = None
    adaptive = False
    n = pipeline.get("n")
    if n == "adaptive":
        adaptive = True
    elif n is not None:
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"n must be a positive integer or 'adaptive', got {n!r}",
                              path="pipeline.n")
        partitions = n

    strategy_name = "none"
    if "strategy" in raw:
        strategy_name = str(raw["strategy"]).lower()
        if strategy_name not in {"none", "s1", "s2", "s3", "s4", "auto"}:
            raise ConfigError(f"unknown strategy {raw['strategy']!r}", path="strategy")
    if "reuse" in raw and not isinstance(raw["reuse"], bool):
        raise ConfigError("reuse must be a boolean", path="reuse")
    if "direction" in raw and raw["direction"] not in ("forward", "backward", "both"):
        raise ConfigError(f"bad direction {raw['direction']!r}", path="direction")
    output = raw.get("output", {})
    _reject_unknown(output, _ALLOWED["output"], "output")
    if "trace_format" in output and output["trace_format"] not in ("jsonl", "trace-event"):
        raise ConfigError(f"bad trace_format {output['trace_format']!r}",
                          path="output.trace_format")

    cfg = ExperimentConfig(
        spec=_build_model(raw.get("model", {})),
        hardware=hardware,
        tokens=tokens,
        workload=workload,
        partitions=partitions,
        adaptive=adaptive,
        strategy_name=strategy_name,
        reuse=raw.get("reuse", False),
        direction=raw.get("direction", BOTH),
        seed=_int_or_error(raw["seed"], "seed") if "seed" in raw else None,
        out_path=str(output["path"]) if "path" in output else None,
        trace_format=output.get("trace_format", "jsonl"),
    )
    if "candidates" in pipeline:
        cands = pipeline["candidates"]
        if (not isinstance(cands, list) or not cands
                or not all(isinstance(c, int) and c >= 1 for c in cands)):
            raise ConfigError("candidates must be a non-empty list of positive "
                              "integers", path="pipeline.candidates")
        cfg.candidates = tuple(cands)
    for key in ("trials_per_candidate", "min_micro_batch"):
        if key in pipeline:
            value = pipeline[key]
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key} must be a positive integer, got {value!r}",
                                  path=f"pipeline.{key}")
            setattr(cfg, key, value)
    return cfg


def _merge_flags(raw: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    """Overlay command-line flags onto the raw config mapping (flags win)."""
    merged = {key: (dict(value) if isinstance(value, Mapping) else value)
              for key, value in raw.items()}
    if getattr(args, "preset", None):
        merged.setdefault("model", {})["preset"] = args.preset
    if getattr(args, "batch", None) is not None:
        merged.setdefault("batch", {})["tokens"] = args.batch
    if getattr(args, "n", None) is not None:
        value: Any = args.n
        if value != "adaptive":
            try:
                value = int(value)
            except ValueError:
                raise CliUsageError(f"--n must be an integer or 'adaptive', got {args.n!r}")
        merged.setdefault("pipeline", {})["n"] = value
    if getattr(args, "strategy", None):
        merged["strategy"] = args.strategy
    if getattr(args, "reuse", False):
        merged["reuse"] = True
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    if getattr(args, "out", None):
        merged.setdefault("output", {})["path"] = args.out
    if getattr(args, "trace_format", None):
        merged.setdefault("output", {})["trace_format"] = args.trace_format
    if getattr(args, "direction", None):
        merged["direction"] = args.direction
    return merged


def _require(cfg: ExperimentConfig, tokens: bool = False, partitions: bool = False) -> None:
    if tokens and cfg.tokens is None:
        raise ConfigError("a batch size is required (--batch or batch.tokens)",
                          path="batch.tokens")
    if partitions and cfg.partitions is None:
        raise ConfigError("a partition count is required (--n or pipeline.n)",
                          path="pipeline.n")


def _resolve_auto(cfg: ExperimentConfig, tokens: int, partitions: int) -> ReuseStrategy:
    if cfg.strategy_name != "auto":
        return cfg.strategy()
    b = micro_batch_size(tokens, partitions)
    return costmodel.select_strategy(cfg.spec, cfg.hardware, b).strategy


def _emit(payload: str, out_path: str | None) -> None:
    print(payload)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(payload if payload.endswith("\n") else payload + "\n")


def cmd_memory(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    _require(cfg, tokens=True, partitions=True)
    report = memmodel.build_report(cfg.spec, cfg.tokens, cfg.partitions, reuse=cfg.reuse)
    body = dict(report.to_dict())
    body.update({
        "model": {"model_dim": cfg.spec.model_dim, "hidden_dim": cfg.spec.hidden_dim,
                  "num_experts": cfg.spec.num_experts, "num_nodes": cfg.spec.num_nodes},
        "tokens": cfg.tokens,
        "partitions": cfg.partitions,
        "reuse": cfg.reuse,
    })
    if args.format in ("json", "both"):
        _emit(json.dumps(body, sort_keys=True, indent=2), cfg.out_path)
    if args.format in ("table", "both"):
        print(report.as_table())
    return 0


def cmd_plan(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    _require(cfg, tokens=True, partitions=True)
    b = micro_batch_size(cfg.tokens, cfg.partitions)
    selection = costmodel.select_strategy(cfg.spec, cfg.hardware, b)
    body = selection.to_dict()
    body.update({"tokens": cfg.tokens, "partitions": cfg.partitions, "micro_batch": b})
    _emit(json.dumps(body, sort_keys=True, indent=2), cfg.out_path)
    return 0


def cmd_simulate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    _require(cfg, tokens=True, partitions=True)
    strategy = _resolve_auto(cfg, cfg.tokens, cfg.partitions)
    reuse = cfg.reuse and strategy.saves_memory and cfg.partitions >= 2
    dag = build_schedule(cfg.spec, BatchSpec(cfg.tokens, cfg.partitions), strategy,
                         reuse_enabled=reuse, direction=cfg.direction)
    trace = simulate(dag, cfg.hardware)
    mem = memory_components(trace)
    body = {
        "strategy": strategy.name,
        "reuse": reuse,
        "direction": cfg.direction,
        "tokens": cfg.tokens,
        "partitions": cfg.partitions,
        "ops": dag.n_ops,
        "makespan_us": us(trace.makespan),
        "busy_us": {s: us(trace.busy_time(s)) for s in STREAMS},
        "memory": mem.to_dict(),
    }
    print(json.dumps(body, sort_keys=True, indent=2))
    if cfg.out_path:
        write_trace(trace, cfg.out_path, cfg.trace_format)
    return 0


def cmd_search(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    workload_cfg = dict(cfg.workload or {})
    if args.iterations is not None:
        workload_cfg["iterations"] = args.iterations
    if args.b_min is not None:
        workload_cfg["b_min"] = args.b_min
    if args.b_max is not None:
        workload_cfg["b_max"] = args.b_max
    if args.step is not None:
        workload_cfg["step"] = args.step
    if args.distribution is not None:
        workload_cfg["distribution"] = args.distribution
    if cfg.seed is not None:
        workload_cfg["seed"] = cfg.seed
    missing = {"iterations", "b_min", "b_max"} - set(workload_cfg)
    if missing:
        raise ConfigError(f"workload needs {sorted(missing)}", path="batch.workload")
    workload_cfg.setdefault("seed", 0)
    try:
        batches = autotune.generate_workload(**workload_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path="batch.workload") from None

    if cfg.strategy_name == "auto":
        probe_b = micro_batch_size(workload_cfg["b_max"], max(cfg.candidates))
        strategy = costmodel.select_strategy(cfg.spec, cfg.hardware, probe_b).strategy
    else:
        strategy = cfg.strategy()
    budget = autotune.TrialBudget(
        candidates=tuple(cfg.candidates),
        trials_per_candidate=cfg.trials_per_candidate,
        adapter=autotune.simulator_adapter(direction=cfg.direction,
                                           reuse=cfg.reuse and strategy.saves_memory),
        min_micro_batch=cfg.min_micro_batch,
    )
    controller = autotune.AdaptiveController(cfg.spec, cfg.hardware, strategy, budget)

    span_cache: dict[tuple[int, int], float] = {}
    rows = []
    for it, tokens in enumerate(batches):
        before = controller.stats.trials
        n = controller.adaptive_granularity(tokens)
        key = (tokens, n)
        if key not in span_cache:
            span_cache[key] = budget.adapter(cfg.spec, cfg.hardware, strategy, tokens, n)
        rows.append({
            "iter": it,
            "B": tokens,
            "n": n,
            "trials_run": controller.stats.trials - before,
            "makespan_us": us(span_cache[key]),
        })
    lines = "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n"
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            fh.write(lines)
    summary = {
        "iterations": len(batches),
        "strategy": strategy.name,
        "total_trials": controller.stats.trials,
        "total_searches": controller.stats.searches,
        "cache_hit_rate": controller.stats.hit_rate,
        "ranges": [{"lo": lo, "hi": hi, "n": n} for lo, hi, n in controller.index.ranges],
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


SWEEP_COLUMNS = [
    "model_dim", "hidden_dim", "num_experts", "tokens", "partitions", "strategy",
    "reuse", "micro_batch", "makespan_us", "peak_total_elements",
    "peak_activations_elements", "peak_buffers_elements", "host_elements",
]


def cmd_sweep(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    batches = [int(x) for x in args.batches.split(",")] if args.batches else [cfg.tokens]
    ns = [int(x) for x in args.ns.split(",")] if args.ns else [cfg.partitions]
    strategies = (args.strategies.split(",") if args.strategies
                  else [cfg.strategy_name])
    if any(b is None for b in batches) or any(n is None for n in ns):
        raise ConfigError("sweep needs --batches/--ns or batch.tokens/pipeline.n")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for tokens in batches:
        for n in ns:
            for name in strategies:
                strategy = ReuseStrategy.by_name(name)
                reuse = strategy.saves_memory and n >= 2
                dag = build_schedule(cfg.spec, BatchSpec(tokens, n), strategy,
                                     reuse_enabled=reuse, direction=cfg.direction)
                trace = simulate(dag, cfg.hardware)
                mem = memory_components(trace)
                writer.writerow({
                    "model_dim": cfg.spec.model_dim,
                    "hidden_dim": cfg.spec.hidden_dim,
                    "num_experts": cfg.spec.num_experts,
                    "tokens": tokens,
                    "partitions": n,
                    "strategy": strategy.name,
                    "reuse": int(reuse),
                    "micro_batch": micro_batch_size(tokens, n),
                    "makespan_us": us(trace.makespan),
                    "peak_total_elements": mem.total,
                    "peak_activations_elements": mem.activations,
                    "peak_buffers_elements": mem.buffers,
                    "host_elements": mem.host,
                })
    payload = buf.getvalue()
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliUsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="model preset")
    p.add_argument("--batch", type=int, help="batch size in tokens")
    p.add_argument("--n", help="partition count, or 'adaptive'")
    p.add_argument("--strategy", choices=["none", "s1", "s2", "s3", "s4", "auto"])
    p.add_argument("--reuse", action="store_true", help="enable memory reuse")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path for the main artifact")
    p.add_argument("--trace-format", choices=["jsonl", "trace-event"], dest="trace_format")
    p.add_argument("--direction", choices=["forward", "backward", "both"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moepipesim",
                     description="MoE pipeline memory/cost planner and simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("memory", help="closed-form memory report")
    _add_common(p)
    p.add_argument("--format", choices=["json", "table", "both"], default="json")
    p.set_defaults(func=cmd_memory)

    p = sub.add_parser("plan", help="analytical strategy ranking")
    _add_common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="simulate one configuration")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("search", help="adaptive granularity over a workload")
    _add_common(p)
    p.add_argument("--iterations", type=int)
    p.add_argument("--b-min", type=int, dest="b_min")
    p.add_argument("--b-max", type=int, dest="b_max")
    p.add_argument("--step", type=int)
    p.add_argument("--distribution", choices=["uniform", "zipf"])
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="grid sweep to CSV")
    _add_common(p)
    p.add_argument("--batches", help="comma-separated batch sizes")
    p.add_argument("--ns", help="comma-separated partition counts")
    p.add_argument("--strategies", help="comma-separated strategy names")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        raw = _read_raw(getattr(args, "config", None))
        cfg = load_config(None, _merge_flags(raw, args))
        return args.func(cfg, args)
    except CliUsageError as exc:
        _print_error("usage", str(exc))
        return 2
    except ConfigError as exc:
        _print_error("config", str(exc), path=exc.path)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        _print_error(type(exc).__name__, str(exc))
        return 1


def _print_error(kind: str, message: str, path: str = "") -> None:
    body = {"error": kind, "message": message}
    if path:
        body["path"] = path
    print(json.dumps(body, sort_keys=True), file=sys.stderr)


# JSON-schema documents for the emitted reports; tests validate round trips
# against these.
_NONNEG_INT = {"type": "integer", "minimum": 0}
_BREAKDOWN = {
    "type": "object",
    "required": ["t_comp", "t_comm", "t_mem", "c_total", "direction"],
    "properties": {
        "t_comp": {"type": "number"}, "t_comm": {"type": "number"},
        "t_mem": {"type": "number"}, "c_total": {"type": "number"},
        "direction": {"enum": ["forward", "backward"]},
    },
    "additionalProperties": False,
}
REPORT_SCHEMAS: dict[str, dict] = {
    "memory": {
        "type": "object",
        "required": ["model_states_elements", "activations_elements",
                     "buffers_elements", "total_elements", "total_bytes",
                     "tokens", "partitions", "reuse"],
        "properties": {
            "model_states_elements": _NONNEG_INT,
            "activations_elements": _NONNEG_INT,
            "buffers_elements": _NONNEG_INT,
            "total_elements": _NONNEG_INT,
            "model_states_bytes": _NONNEG_INT,
            "activations_bytes": _NONNEG_INT,
            "buffers_bytes": _NONNEG_INT,
            "total_bytes": _NONNEG_INT,
            "saving_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "tokens": {"type": "integer", "minimum": 1},
            "partitions": {"type": "integer", "minimum": 1},
            "reuse": {"type": "boolean"},
            "model": {"type": "object"},
        },
        "additionalProperties": False,
    },
    "plan": {
        "type": "object",
        "required": ["chosen", "alpha", "beta", "strategies", "tokens",
                     "partitions", "micro_batch"],
        "properties": {
            "chosen": {"enum": ["s1", "s2", "s3", "s4"]},
            "total": {"type": "number"},
            "alpha": {"type": "number"},
            "beta": {"type": "number"},
            "tokens": {"type": "integer"},
            "partitions": {"type": "integer"},
            "micro_batch": {"type": "integer"},
            "strategies": {
                "type": "object",
                "patternProperties": {
                    "^(none|s[1-4])$": {
                        "type": "object",
                        "required": ["forward", "backward", "total"],
                        "properties": {
                            "forward": _BREAKDOWN,
                            "backward": _BREAKDOWN,
                            "total": {"type": "number"},
                        },
                        "additionalProperties": False,
                    },
                },
                "additionalProperties": False,
            },
        },
        "additionalProperties": False,
    },
    "simulate": {
        "type": "object",
        "required": ["strategy", "reuse", "direction", "tokens", "partitions",
                     "ops", "makespan_us", "busy_us", "memory"],
        "properties": {
            "strategy": {"enum": ["none", "s1", "s2", "s3", "s4"]},
            "reuse": {"type": "boolean"},
            "direction": {"enum": ["forward", "backward", "both"]},
            "tokens": {"type": "integer"},
            "partitions": {"type": "integer"},
            "ops": _NONNEG_INT,
            "makespan_us": _NONNEG_INT,
            "busy_us": {
                "type": "object",
                "required": list(STREAMS),
                "additionalProperties": _NONNEG_INT,
            },
            "memory": {
                "type": "object",
                "required": ["model_states_elements", "activations_elements",
                             "buffers_elements", "total_elements", "host_elements",
                             "total_bytes", "host_bytes"],
                "additionalProperties": _NONNEG_INT,
            },
        },
        "additionalProperties": False,
    },
    "search_row": {
        "type": "object",
        "required": ["iter", "B", "n", "trials_run", "makespan_us"],
        "properties": {
            "iter": _NONNEG_INT,
            "B": {"type": "integer", "minimum": 1},
            "n": {"type": "integer", "minimum": 1},
            "trials_run": _NONNEG_INT,
            "makespan_us": _NONNEG_INT,
        },
        "additionalProperties": False,
    },
    "search_summary": {
        "type": "object",
        "required": ["iterations", "strategy", "total_trials", "total_searches",
                     "cache_hit_rate", "ranges"],
        "properties": {
            "iterations": _NONNEG_INT,
            "strategy": {"type": "string"},
            "total_trials": _NONNEG_INT,
            "total_searches": _NONNEG_INT,
            "cache_hit_rate": {"type": "number", "minimum": 0, "maximum": 1},
            "ranges": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["lo", "hi", "n"],
                    "additionalProperties": {"type": "integer"},
                },
            },
        },
        "additionalProperties": False,
    },
}


if __name__ == "__main__":
    sys.exit(main())
