"""Command-line front end.

    cwarmijo <run|sweep|check|basin|remark|claim6> --config PATH
             [--seed N] [--out DIR] [--format csv|json-lines]

Flags override values from the config file; the subcommand sets the
experiment kind. Exit status is 1 when an invariant check finds a violation
and 2 on configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    claim6_dichotomy_check,
    convergence_basin_experiment,
    example_smoothness_model,
    example_smoothness_model_2d,
    line_search_property_suite,
    remark_inequality_experiment,
)
from .config import ConfigError, ExperimentConfig, config_from_dict, serialize_config, tomllib
from .objective import SeparableObjective, build_objective
from .optimizers import Method, run_method
from .output import report_summary, trajectory_summary, write_outcomes, write_summary, write_trajectory

log = logging.getLogger("cwarmijo")

SUBCOMMANDS = {
    "run": "single",
    "sweep": "sweep",
    "check": "invariants",
    "basin": "basin",
    "remark": "remark-check",
    "claim6": "claim6",
}


@dataclass
class RunManifest:
    config: dict
    version: str
    runs: list[dict] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    exit_status: int = 0


def _ext(cfg: ExperimentConfig) -> str:
    return "csv" if cfg.format == "csv" else "jsonl"


def _trajectory_run(cfg: ExperimentConfig, z0, label: str, out: Path, manifest: RunManifest) -> dict:
    f = build_objective(cfg.objective.name, cfg.objective.lambdas, cfg.objective.lambdas2)
    method = Method(cfg.method)
    model = models = None
    if method in (Method.GDNEW, Method.CW_GDNEW):
        if not cfg.objective.name.startswith("example-g"):
            raise ConfigError([f"method: {method.value} needs a smoothness model; only example-g objectives have one"])
        one = example_smoothness_model(cfg.model.shrink, cfg.model.L0)
        models = (one, one)
        model = example_smoothness_model_2d(cfg.model.shrink, cfg.model.L0) if f.dimension > 1 else one
    if method.coordinatewise and not isinstance(f, SeparableObjective):
        raise ConfigError([f"method: {method.value} needs a separable objective"])
    if len(z0) != f.dimension:
        raise ConfigError([f"initial point has length {len(z0)}, objective dimension is {f.dimension}"])
    t0 = time.perf_counter()
    traj = run_method(method, f, z0, cfg.params(), cfg.stopping.rule(), model=model, models=models, stride=cfg.stride)
    elapsed = time.perf_counter() - t0
    path = write_trajectory(traj, out / f"{label}.{_ext(cfg)}", cfg.format)
    manifest.runs.append({"name": label, "wall_clock": elapsed, "files": [path.name]})
    manifest.files.append(path.name)
    return trajectory_summary(traj, run=label, z0=list(map(float, z0)))


def _experiment_files(cfg, report, out: Path, manifest: RunManifest, elapsed: float) -> None:
    path = write_outcomes(report.outcomes, out / f"outcomes.{_ext(cfg)}", cfg.format)
    manifest.runs.append({"name": report.kind, "wall_clock": elapsed, "files": [path.name]})
    manifest.files.append(path.name)


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Dispatch on ``cfg.kind``, write outputs into ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=cfg.model_dump(mode="json"), version=__version__)
    summary: list[dict] = []
    exp = cfg.experiment

    if cfg.kind == "single":
        summary.append(_trajectory_run(cfg, cfg.objective.z0, "trajectory", out, manifest))
    elif cfg.kind == "sweep":
        lo = np.array([b[0] for b in exp.init_box])
        hi = np.array([b[1] for b in exp.init_box])
        for i in range(exp.sample_count):
            z0 = np.random.default_rng([cfg.seed, i]).uniform(lo, hi)
            summary.append(_trajectory_run(cfg, z0, f"trajectory_{i:05d}", out, manifest))
        counts: dict[str, int] = {}
        for s in summary:
            counts[s["verdict"]] = counts.get(s["verdict"], 0) + 1
        summary.append({"type": "aggregate", "kind": "sweep", "sample_count": exp.sample_count, "verdict_counts": dict(sorted(counts.items()))})
    elif cfg.kind == "basin":
        t0 = time.perf_counter()
        report = convergence_basin_experiment(
            method=Method(cfg.method).value,
            objective=cfg.objective.name,
            sample_count=exp.sample_count,
            init_box=exp.init_box,
            base_params=cfg.params(),
            spread=exp.randomize,
            seed=cfg.seed,
            stop=cfg.stopping.rule(),
            shrink=cfg.model.shrink,
            L0=cfg.model.L0,
            hessian_step=exp.hessian_step,
            hessian_tol=exp.hessian_tol,
            workers=cfg.workers,
            lambdas=cfg.objective.lambdas,
            lambdas2=cfg.objective.lambdas2,
        )
        _experiment_files(cfg, report, out, manifest, time.perf_counter() - t0)
        summary.append(report_summary(report))
    elif cfg.kind == "claim6":
        t0 = time.perf_counter()
        report = claim6_dichotomy_check(
            sample_count=exp.sample_count,
            seed=cfg.seed,
            base_params=cfg.params(),
            spread=exp.randomize,
            init_box=exp.init_box,
            stop=cfg.stopping.rule(),
            shrink=cfg.model.shrink,
            L0=cfg.model.L0,
            workers=cfg.workers,
        )
        _experiment_files(cfg, report, out, manifest, time.perf_counter() - t0)
        summary.append(report_summary(report))
        if report.extra["anomalies"]:
            manifest.exit_status = 1
    elif cfg.kind in ("remark-check", "invariants"):
        t0 = time.perf_counter()
        remark = remark_inequality_experiment(exp.sample_count, cfg.seed)
        manifest.runs.append({"name": "remark", "wall_clock": time.perf_counter() - t0, "files": []})
        summary.append(
            {
                "type": "property",
                "name": "remark_max_inequality",
                "violations": len(remark.violations),
                "passed": remark.passed,
                "instances": remark.instances,
                "exhausted": remark.exhausted,
                "exceeds_min": remark.exceeds_min,
                "exceeds_min_frequency": remark.exceeds_min_frequency,
                "violating_instances": remark.violations,
            }
        )
        if not remark.passed:
            manifest.exit_status = 1
        if cfg.kind == "invariants":
            t0 = time.perf_counter()
            fails = line_search_property_suite(exp.sample_count, cfg.seed)
            manifest.runs.append({"name": "line_search_properties", "wall_clock": time.perf_counter() - t0, "files": []})
            for name, count in fails.items():
                summary.append({"type": "property", "name": name, "violations": count, "passed": count == 0})
                if count:
                    manifest.exit_status = 1
    else:  # pragma: no cover - guarded by the config schema
        raise ConfigError([f"kind: unknown experiment kind {cfg.kind!r}"])

    spath = write_summary(summary, out / "summary.jsonl")
    manifest.files.append(spath.name)
    (out / "config.toml").write_text(serialize_config(cfg))
    manifest.files.append("config.toml")
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cwarmijo", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--format", choices=("csv", "json-lines"))
        p.add_argument("--workers", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = tomllib.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read {args.config}: {exc.strerror}"]) from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{args.config}: parse error: {exc}"]) from None
    data["kind"] = SUBCOMMANDS[args.command]
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output_dir"] = str(args.out)
    if args.format is not None:
        data["format"] = args.format
    if args.workers is not None:
        data["workers"] = args.workers
    return config_from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
        manifest = run_experiment(cfg)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(Path(cfg.output_dir) / "summary.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            log.info("%s", rec)
    print(f"wrote {len(manifest.files)} files to {cfg.output_dir} (exit {manifest.exit_status})")
    return manifest.exit_status


if __name__ == "__main__":
    sys.exit(main())
