"""Command-line pipeline: simulate, moments, diagnose, reproduce-example.

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 verdict mismatch in reproduce-example.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as artifacts
from .carma import CarmaModel, simulate_euler, simulate_exact
from .diagnostics import analyze_series, sample_autocorrelation
from .errors import NumericalError, ValidationError
from .measure import SubordinatorSpec, simulate_subordinator
from .moments import output_autocov, output_mean

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_VERDICT = 4

DEFAULT_SEED = 7


@dataclass(eq=False)
class ExperimentConfig:
    """Everything one run needs: driving spec, model, grids, analysis knobs."""

    subordinator: SubordinatorSpec
    carma: CarmaModel
    delta: float = 1.0
    method: str = "exact"
    euler_h: float = 0.025
    burn_in_periods: int = 10
    smoothing_m: int = 40
    alpha: float = 0.01
    detrend: bool = True
    lags: list = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0])
    seed: int = DEFAULT_SEED
    output_dir: str = "out"

    def __post_init__(self):
        if self.delta <= 0 or not np.isfinite(self.delta):
            raise ValidationError("sampling.delta must be positive")
        if self.method not in ("exact", "euler"):
            raise ValidationError("sampling.method must be 'exact' or 'euler'")
        if self.euler_h <= 0:
            raise ValidationError("sampling.euler_h must be positive")
        if self.burn_in_periods < 0 or int(self.burn_in_periods) != self.burn_in_periods:
            raise ValidationError("burn_in_periods must be a nonnegative integer")
        n = self.subordinator.horizon / self.delta
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValidationError(
                "horizon_periods * period / delta must be a positive integer")
        if int(self.seed) != self.seed:
            raise ValidationError("seed must be an integer")
        self.seed = int(self.seed)

    @property
    def n_samples(self) -> int:
        return int(round(self.subordinator.horizon / self.delta))

    def sample_times(self) -> np.ndarray:
        return self.delta * np.arange(1, self.n_samples + 1)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        for key in ("subordinator", "carma"):
            if key not in doc:
                raise ValidationError(f"config.{key} is required")
        sampling = doc.get("sampling", {})
        diag = doc.get("diagnostics", {})
        mom = doc.get("moments", {})
        return cls(
            subordinator=SubordinatorSpec.from_dict(doc["subordinator"]),
            carma=CarmaModel.from_dict(doc["carma"]),
            delta=float(sampling.get("delta", 1.0)),
            method=sampling.get("method", "exact"),
            euler_h=float(sampling.get("euler_h", 0.025)),
            burn_in_periods=int(doc.get("burn_in_periods", 10)),
            smoothing_m=int(diag.get("smoothing_m", 40)),
            alpha=float(diag.get("alpha", 0.01)),
            detrend=bool(diag.get("detrend", True)),
            lags=[float(v) for v in mom.get("lags", [0.0, 1.0, 2.0, 3.0])],
            seed=doc.get("seed", DEFAULT_SEED),
            output_dir=doc.get("output_dir", "out"),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with Path(path).open() as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "subordinator": self.subordinator.to_dict(),
            "carma": self.carma.to_dict(),
            "sampling": {"delta": self.delta, "method": self.method,
                         "euler_h": self.euler_h},
            "burn_in_periods": self.burn_in_periods,
            "diagnostics": {"smoothing_m": self.smoothing_m, "alpha": self.alpha,
                            "detrend": self.detrend},
            "moments": {"lags": list(self.lags)},
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def example_config_dict(stationary_control: bool = False) -> dict:
    """The pinned showcase configuration (periodic 7-piece intensity, normal
    jumps, CARMA(3,2)); the stationary control flattens the intensity to one
    constant-rate piece with the same total mass."""
    partition = ({"lengths": [12.0], "masses": [46.0]} if stationary_control
                 else {"lengths": [2.0, 2.0, 2.0, 2.0, 1.0, 1.0, 2.0],
                       "masses": [6.0, 4.0, 2.0, 10.0, 4.0, 8.0, 12.0]})
    return {
        "subordinator": {
            "gamma": 0.0,
            "partition": partition,
            "jumps": {"family": "normal", "params": {"mean": 3.0, "var": 1.0}},
            "horizon_periods": 40,
            "require_subordinator": False,
        },
        "carma": {"roots": [[-1.0, 0.0], [-2.0, -1.0], [-2.0, 1.0]],
                  "b": [0.5, 2.0, 1.0]},
        "sampling": {"delta": 1.0, "method": "exact", "euler_h": 0.025},
        "burn_in_periods": 10,
        "diagnostics": {"smoothing_m": 40, "alpha": 0.01, "detrend": True},
        "moments": {"lags": [0.0, 1.0, 2.0, 3.0]},
        "seed": DEFAULT_SEED,
        "output_dir": "out",
    }


def _seed_children(seed: int, count: int):
    return np.random.SeedSequence(seed).spawn(count)


def _simulate_one(config: ExperimentConfig, path_seed, burn_seed):
    spec = config.subordinator
    path = simulate_subordinator(spec, path_seed)
    ts = config.sample_times()
    if config.method == "euler":
        traj = simulate_euler(config.carma, path, config.euler_h, ts,
                              config.burn_in_periods, spec, burn_seed)
    else:
        traj = simulate_exact(config.carma, path, ts,
                              config.burn_in_periods, spec, burn_seed)
    return path, traj


def cmd_simulate(config: ExperimentConfig, out_dir, n_paths: int = 1) -> list:
    """Write subordinator.csv and trajectory.csv (indexed when n_paths > 1)."""
    if n_paths < 1:
        raise ValidationError("--paths must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    children = _seed_children(config.seed, 2 * n_paths)
    written = []
    for k in range(n_paths):
        suffix = "" if n_paths == 1 else f"_{k:04d}"
        path, traj = _simulate_one(config, children[2 * k], children[2 * k + 1])
        written.append(artifacts.write_subordinator_csv(
            path, out / f"subordinator{suffix}.csv"))
        written.append(artifacts.write_trajectory_csv(
            traj, out / f"trajectory{suffix}.csv"))
    return written


def cmd_moments(config: ExperimentConfig, out_dir) -> list:
    """Write mean.csv (phase grid) and autocov.csv (phase x lag grid)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = config.subordinator
    kappa = spec.jumps.kappa
    beta = spec.jumps.beta
    T = spec.partition.period
    phases = config.delta * np.arange(int(round(T / config.delta)))
    means = [output_mean(config.carma, spec.partition, spec.gamma, kappa, s)
             for s in phases]
    variances = [output_autocov(config.carma, spec.partition, beta, s, 0.0)
                 for s in phases]
    records = [(s, lag, output_autocov(config.carma, spec.partition, beta, s, lag))
               for s in phases for lag in config.lags]
    return [artifacts.write_mean_csv(phases, means, variances, out / "mean.csv"),
            artifacts.write_autocov_csv(records, out / "autocov.csv")]


def cmd_diagnose(config: ExperimentConfig | None, out_dir, series=None,
                 detrend: bool | None = None) -> tuple:
    """Analyze a simulated (or provided) series; write coherence.csv,
    acf.csv, and verdict.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if series is None:
        if config is None:
            raise ValidationError("diagnose needs a config or a series file")
        children = _seed_children(config.seed, 2)
        _, traj = _simulate_one(config, children[0], children[1])
        series = traj.outputs
    series = np.asarray(series, dtype=float)
    smoothing_m = config.smoothing_m if config else 40
    alpha = config.alpha if config else 0.01
    if detrend is None:
        detrend = config.detrend if config else True
    grid, verdict = analyze_series(series, smoothing_m, alpha, detrend=detrend)
    max_lag = min(series.size - 1, 3 * smoothing_m)
    acf = sample_autocorrelation(series, max_lag)
    files = [artifacts.write_coherence_csv(grid, out / "coherence.csv"),
             artifacts.write_acf_csv(acf, out / "acf.csv"),
             artifacts.write_json(out / "verdict.json", verdict.to_dict())]
    return verdict, files


def cmd_reproduce_example(out_dir, seed: int | None = None,
                          stationary_control: bool = False) -> tuple:
    """Run the pinned example end to end and check its expected verdict.

    Returns (verdict, ok): ok means PC with period 12 and leading line
    offset 40 (or Stationary for the control run).
    """
    doc = example_config_dict(stationary_control)
    if seed is not None:
        doc["seed"] = int(seed)
    config = ExperimentConfig.from_dict(doc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cmd_simulate(config, out)
    cmd_moments(config, out)
    verdict, _ = cmd_diagnose(config, out)
    if stationary_control:
        ok = verdict.kind == "Stationary"
    else:
        ok = (verdict.kind == "PC" and verdict.period == 12
              and len(verdict.line_offsets) > 0 and verdict.line_offsets[0] == 40)
    return verdict, ok


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slcarma",
        description="Simulate and diagnose CARMA processes driven by "
                    "periodic-intensity compound-Poisson subordinators")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write subordinator and trajectory CSVs")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None)
    sim.add_argument("--paths", type=int, default=1)

    mom = sub.add_parser("moments", help="write closed-form mean/autocovariance CSVs")
    mom.add_argument("--config", required=True)
    mom.add_argument("--out", default=None)

    diag = sub.add_parser("diagnose", help="coherence analysis and verdict")
    diag.add_argument("--config", default=None)
    diag.add_argument("--series", default=None,
                      help="CSV with a Y column (skips simulation)")
    diag.add_argument("--seed", type=int, default=None)
    diag.add_argument("--out", default=None)
    diag.add_argument("--no-detrend", action="store_true")

    rep = sub.add_parser("reproduce-example",
                         help="pinned periodic example; exit 4 unless the "
                              "expected verdict is reproduced")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--out", default="out")
    rep.add_argument("--stationary-control", action="store_true")
    return parser


def _load_config(args) -> ExperimentConfig | None:
    if getattr(args, "config", None) is None:
        return None
    config = ExperimentConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = int(args.seed)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            config = _load_config(args)
            out = args.out or config.output_dir
            files = cmd_simulate(config, out, n_paths=args.paths)
            print(f"wrote {len(files)} files to {out}")
            return EXIT_OK
        if args.command == "moments":
            config = _load_config(args)
            out = args.out or config.output_dir
            cmd_moments(config, out)
            print(f"wrote mean.csv and autocov.csv to {out}")
            return EXIT_OK
        if args.command == "diagnose":
            config = _load_config(args)
            if config is None and args.series is None:
                print("diagnose needs --config or --series", file=sys.stderr)
                return EXIT_VALIDATION
            series = artifacts.read_series_csv(args.series) if args.series else None
            out = args.out or (config.output_dir if config else "out")
            detrend = False if args.no_detrend else None
            verdict, _ = cmd_diagnose(config, out, series=series, detrend=detrend)
            print(f"verdict: {verdict.kind}"
                  + (f" period={verdict.period}" if verdict.period else ""))
            return EXIT_OK
        if args.command == "reproduce-example":
            verdict, ok = cmd_reproduce_example(args.out, seed=args.seed,
                                                stationary_control=args.stationary_control)
            expected = "Stationary" if args.stationary_control else "PC(12)"
            print(f"verdict: {verdict.kind}"
                  + (f" period={verdict.period}" if verdict.period else "")
                  + f" (expected {expected})")
            return EXIT_OK if ok else EXIT_VERDICT
        raise ValidationError(f"unknown command {args.command}")
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
