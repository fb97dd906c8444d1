"""Command line entry point: simulate, generate, train, predict, evaluate, bench.

Exit codes: 0 success, 2 usage / invalid configuration, 3 simulation
failure, 4 I/O failure, 5 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dataset import CorpusSettings, NoiseConfig, build_corpus, read_corpus, select, write_corpus
from .domain import MODES, DischargeSession, DrivingMode
from .evaluation import build_predictors, emit_figure_data, evaluate
from .hybrid import fit_residual_model, predict
from .network import ConfigurationError, ResidualModel, TrainConfig, TrainingDivergedError
from .physics import simulate
from .trip import PHASE_LAYOUTS, synthesize_trajectory

EXIT_USAGE, EXIT_SIMULATION, EXIT_IO, EXIT_DIVERGED = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _positive_float(name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {text}")
        return value
    return parse


def _positive_int(name):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {text}")
        return value
    return parse


def _fraction(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("batch sizes must be positive integers")
    return values


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration (flags override it)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--n-steps", type=_positive_int("--n-steps"), help="time steps per trip (default 1000)")
    p.add_argument("--kappa", type=float, help="velocity perturbation scale (default 0.05)")
    p.add_argument("--layout", choices=PHASE_LAYOUTS, help="phase layout (default contiguous)")
    p.add_argument("--cycles", type=_positive_int("--cycles"), help="arcs per trip for the cycles layout")
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")


def _add_session(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distance", type=_positive_float("--distance"), required=True, help="trip distance, km")
    p.add_argument("--velocity", type=_positive_float("--velocity"), required=True, help="mean velocity, km/h")
    p.add_argument("--mode", choices=[m.value for m in MODES], default="normal")
    p.add_argument("--soc", type=_fraction, default=0.8, help="initial state of charge")
    p.add_argument("--temp", type=float, default=20.0, help="ambient temperature, degC")
    p.add_argument("--time-of-day", type=float, default=12.0, help="hours in [0, 24)")
    p.add_argument("--grade", type=float, default=0.0, help="road grade angle, rad")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ev-discharge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="physics simulation of one trip")
    _add_common(p)
    _add_session(p)
    p.add_argument("--soc-csv", type=Path, help="write the SoC trajectory (time_s, soc) here")

    p = sub.add_parser("generate", help="build a synthetic trip corpus")
    _add_common(p)
    p.add_argument("--n-trips", type=int, default=None, help="number of trips (default 1500)")
    p.add_argument("--out", type=Path, help="corpus CSV path (sidecar JSON written next to it)")
    p.add_argument("--structured-fraction", type=_fraction)
    for key in ("terrain", "traffic", "driver", "weather"):
        p.add_argument(f"--sigma-{key}", type=float)
    p.add_argument("--jobs", type=_positive_int("--jobs"), default=1)

    p = sub.add_parser("train", help="train the residual network on a corpus")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--model", type=Path, help="output model file")
    p.add_argument("--log", type=Path, help="training log CSV (default: <model>.log.csv)")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--dropout", type=float)

    p = sub.add_parser("predict", help="hybrid prediction for one trip")
    _add_common(p)
    _add_session(p)
    p.add_argument("--model", type=Path, help="residual model; physics only when omitted")

    p = sub.add_parser("evaluate", help="comparison tables and figure data for a corpus")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--ablation", action="store_true", help="add the feature ablation (retrains several nets)")

    p = sub.add_parser("bench", help="latency of physics, residual and hybrid paths")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--batch-sizes", type=_int_list, default=[1, 20])
    p.add_argument("--min-trips", type=int, default=100)
    return parser


def _run_config(args) -> RunConfig:
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except FileNotFoundError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid config {args.config}: {exc}", EXIT_USAGE) from exc
    overrides = {}
    for flag, key in (("seed", "seed"), ("n_steps", "n_steps"), ("kappa", "kappa"),
                      ("layout", "phase_layout"), ("cycles", "phase_cycles")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    try:
        return replace(cfg, **overrides)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc


def _path(args, cfg: RunConfig, attr: str, key: str, default: Optional[str] = None) -> Optional[Path]:
    value = getattr(args, attr, None)
    if value is not None:
        return Path(value)
    if cfg.paths.get(key):
        return Path(cfg.paths[key])
    return Path(default) if default else None


def _session(args) -> DischargeSession:
    try:
        return DischargeSession(
            initial_soc=args.soc, distance=args.distance, mean_velocity=args.velocity,
            mode=DrivingMode.parse(args.mode), ambient_temp=args.temp,
            time_of_day=args.time_of_day, grade_angle=args.grade,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc


def _emit(obj, args, text: Optional[str] = None) -> None:
    if args.json or text is None:
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        print(text)


def _load_records(path: Optional[Path]):
    if path is None:
        raise CliError("a corpus path is required (--corpus or paths.corpus in the config)", EXIT_USAGE)
    try:
        return read_corpus(path)
    except OSError as exc:
        raise CliError(f"cannot read corpus {path}: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError) as exc:
        raise CliError(f"malformed corpus {path}: {exc}", EXIT_USAGE) from exc


def _load_model(path: Optional[Path]) -> Optional[ResidualModel]:
    if path is None:
        return None
    try:
        return ResidualModel.load(path)
    except OSError as exc:
        raise CliError(f"cannot read model {path}: {exc}", EXIT_IO) from exc
    except (ConfigurationError, ValueError, KeyError) as exc:
        raise CliError(f"invalid model {path}: {exc}", EXIT_USAGE) from exc


def _write_json(path: Path, obj) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    session = _session(args)
    profile = cfg.profile_for(session.mode)
    seed = cfg.seed if cfg.seed is not None else 0
    try:
        trajectory = synthesize_trajectory(
            session, cfg.n_steps, np.random.default_rng(seed), profile=profile,
            kappa=cfg.kappa, layout=cfg.phase_layout, n_cycles=cfg.phase_cycles,
        )
        result = simulate(session, cfg.vehicle, trajectory, profile=profile)
    except (ValueError, ArithmeticError) as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_SIMULATION) from exc
    if args.soc_csv:
        try:
            result.write_soc_csv(args.soc_csv)
        except OSError as exc:
            raise CliError(f"cannot write {args.soc_csv}: {exc}", EXIT_IO) from exc
    out = result.to_dict()
    out["session"] = session.to_dict()
    out["seed"] = seed
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_generate(args) -> int:
    cfg = _run_config(args)
    if cfg.seed is None:
        raise CliError("generate needs a seed (--seed or \"seed\" in the config)", EXIT_USAGE)
    n_trips = args.n_trips if args.n_trips is not None else 1500
    if n_trips < 10:
        raise CliError(f"--n-trips must be >= 10, got {n_trips}", EXIT_USAGE)
    noise = cfg.noise
    noise_overrides = {f"sigma_{k}": getattr(args, f"sigma_{k}") for k in ("terrain", "traffic", "driver", "weather")
                       if getattr(args, f"sigma_{k}") is not None}
    if args.structured_fraction is not None:
        noise_overrides["structured_fraction"] = args.structured_fraction
    try:
        noise = replace(noise, **noise_overrides)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    out = _path(args, cfg, "out", "corpus", "corpus.csv")
    settings = CorpusSettings(
        n_trips=n_trips, seed=cfg.seed, noise=noise, vehicle=cfg.vehicle, n_steps=cfg.n_steps,
        kappa=cfg.kappa, layout=cfg.phase_layout, n_cycles=cfg.phase_cycles, profiles=cfg.profiles,
    )
    try:
        records = build_corpus(settings=settings, jobs=args.jobs)
    except (ValueError, RuntimeError) as exc:
        raise CliError(f"corpus generation failed: {exc}", EXIT_SIMULATION) from exc
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_corpus(records, out, settings)
    except OSError as exc:
        raise CliError(f"cannot write corpus {out}: {exc}", EXIT_IO) from exc

    splits = Counter(r.split for r in records)
    modes = Counter(r.session.mode.value for r in records)
    summary = {"corpus": str(out), "n_trips": len(records), "splits": dict(splits), "modes": dict(modes)}
    text = (f"wrote {len(records)} trips to {out}\n"
            f"splits: " + ", ".join(f"{k}={splits[k]}" for k in ("train", "val", "test")) + "\n"
            f"modes:  " + ", ".join(f"{m.value}={modes[m.value]}" for m in MODES))
    _emit(summary, args, text)
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    if cfg.seed is None:
        raise CliError("train needs a seed (--seed or \"seed\" in the config)", EXIT_USAGE)
    records = _load_records(_path(args, cfg, "corpus", "corpus"))
    missing = [s for s in ("train", "val", "test") if not select(records, s)]
    if missing:
        raise CliError(f"corpus is missing split(s): {', '.join(missing)}", EXIT_USAGE)
    overrides = {"seed": cfg.seed}
    for flag, key in (("lr", "lr0"), ("batch_size", "batch_size"), ("max_epochs", "max_epochs"),
                      ("patience", "patience"), ("weight_decay", "weight_decay"), ("dropout", "dropout")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    try:
        train_cfg = replace(cfg.train, **overrides)
    except ValueError as exc:
        raise CliError(f"invalid training configuration: {exc}", EXIT_USAGE) from exc
    try:
        model, log = fit_residual_model(records, train_cfg)
    except TrainingDivergedError as exc:
        raise CliError(f"training diverged: {exc}", EXIT_DIVERGED) from exc

    model_path = _path(args, cfg, "model", "model", "model.json")
    log_path = args.log or model_path.with_name(model_path.stem + ".log.csv")
    try:
        model_path.parent.mkdir(parents=True, exist_ok=True)
        model.save(model_path)
        log.write_csv(log_path)
    except OSError as exc:
        raise CliError(f"cannot write model output: {exc}", EXIT_IO) from exc
    summary = {
        "model": str(model_path),
        "log": str(log_path),
        "n_parameters": model.net.n_parameters,
        "best_epoch": log.best_epoch,
        "stopped_epoch": log.stopped_epoch,
        "early_stopped": log.early_stopped,
        "final_train_loss": log.train_loss[log.best_epoch],
        "final_val_loss": log.best_val_loss,
    }
    text = (f"saved {model_path} ({model.net.n_parameters} parameters)\n"
            f"stopped at epoch {log.stopped_epoch} (best epoch {log.best_epoch}, "
            f"{'early stop' if log.early_stopped else 'max epochs'})\n"
            f"train loss {summary['final_train_loss']:.6g}  val loss {summary['final_val_loss']:.6g}")
    _emit(summary, args, text)
    return 0


def cmd_predict(args) -> int:
    cfg = _run_config(args)
    session = _session(args)
    model = _load_model(_path(args, cfg, "model", "model"))
    try:
        pred = predict(
            session, cfg.vehicle, model, cfg.n_steps, cfg.seed if cfg.seed is not None else 0,
            kappa=cfg.kappa, layout=cfg.phase_layout, n_cycles=cfg.phase_cycles,
            profile=cfg.profile_for(session.mode),
        )
    except ConfigurationError as exc:
        raise CliError(f"model does not fit the feature layout: {exc}", EXIT_USAGE) from exc
    except (ValueError, ArithmeticError) as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_SIMULATION) from exc
    print(json.dumps(pred.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    records = _load_records(_path(args, cfg, "corpus", "corpus"))
    if not select(records, "test"):
        raise CliError("corpus has no test split", EXIT_USAGE)
    model = _load_model(_path(args, cfg, "model", "model"))
    out_dir = _path(args, cfg, "out_dir", "report_dir", "report")
    seed = cfg.seed if cfg.seed is not None else 0
    ablation_cfg = None
    if args.ablation:
        base = model.train_config if model is not None and model.train_config else cfg.train
        ablation_cfg = replace(base, seed=cfg.seed) if cfg.seed is not None else base
    try:
        report = evaluate(records, model, ablation_config=ablation_cfg)
    except TrainingDivergedError as exc:
        raise CliError(f"ablation training diverged: {exc}", EXIT_DIVERGED) from exc
    try:
        paths = report.write(out_dir)
        figures = emit_figure_data(
            select(records, "test"), out_dir / "figures", build_predictors(records, model),
            vehicle=cfg.vehicle, n_steps=cfg.n_steps, seed=seed,
        )
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_IO) from exc
    effective = cfg.to_dict()
    effective["seed"] = seed
    _write_json(out_dir / "effective_config.json", effective)
    if model is None:
        print("notice: no model supplied; hybrid rows omitted", file=sys.stderr)
    summary = {"report": {k: str(v) for k, v in paths.items()}, "figures": {k: str(v) for k, v in figures.items()},
               "comparison": {k: v.to_dict() for k, v in report.comparison.items()}}
    _emit(summary, args, report.to_text().rstrip())
    return 0


def cmd_bench(args) -> int:
    from .bench import benchmark

    cfg = _run_config(args)
    records = _load_records(_path(args, cfg, "corpus", "corpus"))
    test = select(records, "test") or list(records)
    if len(test) < max(1, args.min_trips):
        raise CliError(f"bench needs at least {args.min_trips} test trips, corpus has {len(test)}", EXIT_USAGE)
    model = _load_model(_path(args, cfg, "model", "model"))
    if model is None:
        raise CliError("bench needs --model", EXIT_USAGE)
    result = benchmark(model, test, vehicle=cfg.vehicle, n_steps=cfg.n_steps,
                       batch_sizes=args.batch_sizes, seed=cfg.seed if cfg.seed is not None else 0)
    lines = [f"latency over {result['n_trips']} trips, {result['n_steps']} steps each (informational)"]
    for key in ("physics", "ml", "hybrid"):
        s = result[key]
        lines.append(f"  {key:<8} p50 {s['p50_ms']:.4f} ms   p95 {s['p95_ms']:.4f} ms")
    for size, s in result["batch_per_trip"].items():
        if s.get("n"):
            lines.append(f"  batch {size:>4}: per trip p50 {s['p50_ms']:.4f} ms   p95 {s['p95_ms']:.4f} ms")
        else:
            lines.append(f"  batch {size:>4}: not enough trips")
    _emit(result, args, "\n".join(lines))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
