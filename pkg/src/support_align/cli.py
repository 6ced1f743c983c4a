"""Command-line entry point.

    support-align divergence P.csv Q.csv [--beta B ...] [--metric abs|sq]
    support-align beta-shift|mixture2d|history-ablation|sliced-counterexample
        [--config cfg.json] [--seed N] [--out DIR]

Experiments print a JSON result record and, with ``--out``, write it to
``result.json`` next to the training traces. Exit codes: 0 success, 1 a
built-in metric check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .asa import AlignmentMode, TrainConfig
from .supportdiv import hausdorff, ssd_discrete
from .transport1d import GroundMetric, nn_assignment_1d, relaxed_ot_1d, wasserstein1_1d

EXPERIMENTS = ("beta-shift", "mixture2d", "history-ablation", "sliced-counterexample")


class InputError(Exception):
    """Malformed user input; reported with exit code 2."""


# ---------------------------------------------------------------- divergence


def read_points(path) -> np.ndarray:
    """Read one point per row; every row must have the same number of coordinates."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    rows, width = [], None
    with handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: cannot parse {','.join(row)!r} as numbers") from None
            if not all(math.isfinite(v) for v in values):
                raise InputError(f"{path}:{lineno}: non-finite coordinate")
            if width is not None and len(values) != width:
                raise InputError(f"{path}:{lineno}: expected {width} coordinates, found {len(values)}")
            width = len(values)
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no points")
    return np.array(rows)


def _parse_beta(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a non-negative integer or 'inf', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("beta must be non-negative")
    return value


def divergence_report(p: np.ndarray, q: np.ndarray, betas, metric: GroundMetric) -> list[tuple[str, float]]:
    if p.shape[1] != q.shape[1]:
        raise InputError(f"dimension mismatch: {p.shape[1]} vs {q.shape[1]}")
    out = [("ssd", ssd_discrete(p, q)), ("hausdorff", hausdorff(p, q))]
    if p.shape[1] == 1 and len(p) == len(q):
        a, b = p[:, 0], q[:, 0]
        out.append(("wasserstein", wasserstein1_1d(a, b, metric)[0]))
        for beta in betas:
            cost = nn_assignment_1d(a, b, metric)[0] if beta == math.inf else relaxed_ot_1d(a, b, beta, metric)[0]
            label = "inf" if beta == math.inf else str(beta)
            out.append((f"relaxed[beta={label}]", cost))
    return out


def cmd_divergence(args) -> int:
    p, q = read_points(args.p), read_points(args.q)
    for name, value in divergence_report(p, q, args.beta, GroundMetric.parse(args.metric)):
        print(f"{name} {value:.12g}")
    return 0


# ---------------------------------------------------------------- configs


@dataclasses.dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    modes: list[str] = dataclasses.field(default_factory=lambda: ["support-abs"])
    train: dict = dataclasses.field(default_factory=dict)
    history_by_mode: dict = dataclasses.field(default_factory=dict)
    eval_samples: int | None = None
    theta_init: float = ex.BETA_THETA_INIT
    alpha: float = 1.5
    history_sizes: list[int] = dataclasses.field(default_factory=lambda: [0, 1000])
    ablation_problem: str = "beta-shift"
    n_samples: int = 2000
    n_directions: int = 64
    repeats: int = 1
    checks: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InputError(f"unknown experiment {self.experiment!r}")
        if not self.modes:
            raise InputError("at least one mode is required")
        try:
            for m in self.modes:
                AlignmentMode.parse(m)
            self.train_config(self.modes[0])
        except (ValueError, TypeError) as exc:
            raise InputError(str(exc)) from None
        if self.ablation_problem not in ex.ABLATION_PROBLEMS:
            raise InputError(f"ablation_problem must be one of {', '.join(ex.ABLATION_PROBLEMS)}")
        if self.alpha < 0:
            raise InputError("alpha must be non-negative")
        if not isinstance(self.repeats, int) or self.repeats < 1:
            raise InputError("repeats must be a positive integer")
        if any(not isinstance(n, int) or n < 0 for n in self.history_sizes):
            raise InputError("history sizes must be non-negative integers")

    def train_config(self, mode: str, seed: int | None = None) -> TrainConfig:
        fields = {**self.train, "seed": self.seed if seed is None else seed}
        if mode in self.history_by_mode:
            fields["history_size"] = self.history_by_mode[mode]
        return TrainConfig(**fields)

    def canonical(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(experiment: str, path, seed: int | None) -> ExperimentConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a JSON object")
    if raw.get("experiment", experiment) != experiment:
        raise InputError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    raw["experiment"] = experiment
    if seed is not None:
        raw["seed"] = seed
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------- experiments


def _check(checks: dict, name: str, ok: bool) -> None:
    checks[name] = bool(ok)


def run_beta_shift(cfg: ExperimentConfig, out: Path | None) -> tuple[dict, dict]:
    metrics, checks = {}, {}
    n_eval = cfg.eval_samples or 10_000
    for mode in cfg.modes:
        train = cfg.train_config(mode)
        trace, theta = ex.run_beta_shift(train, AlignmentMode.parse(mode), cfg.theta_init, n_eval)
        _write_trace(out, f"beta-shift_{mode}", trace)
        final = trace.final
        metrics[mode] = {"D_W": final["D_W_eval"], "D_ssd": final["D_ssd_eval"], "theta": theta}
        kind = AlignmentMode.parse(mode).kind
        if train.steps == 0:
            _check(checks, f"{mode}: initial D_W", abs(final["D_W_eval"] - 11.12) <= 0.1 * 11.12)
            _check(checks, f"{mode}: initial D_ssd", abs(final["D_ssd_eval"] - 14.9) <= 0.1 * 14.9)
        elif kind == "support":
            _check(checks, f"{mode}: D_ssd < 1e-3", final["D_ssd_eval"] < 1e-3)
            _check(checks, f"{mode}: D_W > 1e-2", final["D_W_eval"] > 1e-2)
        elif kind == "distribution":
            _check(checks, f"{mode}: D_W < 1e-2", final["D_W_eval"] < 1e-2)
    return metrics, checks


def run_mixture(cfg: ExperimentConfig, out: Path | None) -> tuple[dict, dict]:
    """Final divergences averaged over ``repeats`` consecutive seeds per mode."""
    keys = ("D_W_eval", "D_ssd_eval", "push_D_W", "push_D_ssd")
    metrics, checks = {}, {}
    for mode in cfg.modes:
        finals = []
        for seed in range(cfg.seed, cfg.seed + cfg.repeats):
            trace, _ = ex.run_mixture2d(cfg.train_config(mode, seed), AlignmentMode.parse(mode), cfg.alpha,
                                        cfg.eval_samples or 2000)
            suffix = f"_seed{seed}" if cfg.repeats > 1 else ""
            _write_trace(out, f"mixture2d_{mode}{suffix}", trace)
            finals.append(trace.final)
        metrics[mode] = {k: float(np.mean([f[k] for f in finals])) for k in keys}
        if cfg.repeats > 1:
            metrics[mode]["per_seed"] = [{k: f[k] for k in keys} for f in finals]
    support = [m for m in cfg.modes if m.startswith("support")]
    dist = [m for m in cfg.modes if m.startswith("distribution")]
    if support and dist:
        s, d = metrics[support[0]], metrics[dist[0]]
        _check(checks, "support D_W >= 3x distribution D_W", s["D_W_eval"] >= 3 * d["D_W_eval"])
        _check(checks, "support D_ssd <= 2x distribution D_ssd", s["D_ssd_eval"] <= 2 * d["D_ssd_eval"])
    return metrics, checks


def run_ablation(cfg: ExperimentConfig, out: Path | None) -> tuple[dict, dict]:
    mode = cfg.modes[0]
    result = ex.run_history_ablation(cfg.train_config(mode), AlignmentMode.parse(mode), cfg.history_sizes,
                                     cfg.ablation_problem, cfg.alpha, cfg.eval_samples)
    checks = {}
    sizes = sorted(cfg.history_sizes)
    if len(sizes) >= 2:
        lo, hi = result[str(sizes[0])], result[str(sizes[-1])]
        _check(checks, f"push D_W at {sizes[-1]} >= 2x at {sizes[0]}", hi["push_D_W"] >= 2 * lo["push_D_W"])
        _check(checks, f"push D_ssd at {sizes[-1]} < 5% of unaligned",
               hi["push_D_ssd"] < 0.05 * result["baseline"]["push_D_ssd"])
    return result, checks


def run_sliced(cfg: ExperimentConfig, out: Path | None) -> tuple[dict, dict]:
    result = ex.run_sliced_counterexample(cfg.n_samples, cfg.n_directions, cfg.seed)
    checks = {}
    _check(checks, "sliced max <= 0.05", result["sliced_max"] <= 0.05)
    _check(checks, "2D ssd >= 0.1", result["ssd_2d"] >= 0.1)
    return result, checks


RUNNERS = {
    "beta-shift": run_beta_shift,
    "mixture2d": run_mixture,
    "history-ablation": run_ablation,
    "sliced-counterexample": run_sliced,
}


def _write_trace(out: Path | None, name: str, trace) -> None:
    if out is not None:
        (out / f"{name}_trace.csv").write_text(trace.to_csv())


def cmd_experiment(args) -> int:
    cfg = load_config(args.command, args.config, args.seed)
    out = None
    if args.out is not None:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"{out}: {exc.strerror}") from None
    start = time.perf_counter()
    metrics, checks = RUNNERS[args.command](cfg, out)
    record = {
        "experiment": cfg.experiment,
        "config_hash": cfg.digest(),
        "config": cfg.canonical(),
        "metrics": metrics,
        "checks": checks,
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    if out is not None:
        (out / "result.json").write_text(text + "\n")
    if cfg.checks and not all(checks.values()):
        failed = [k for k, v in checks.items() if not v]
        print("failed checks: " + "; ".join(failed), file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="support-align", description="Support alignment experiments and divergences.")
    sub = parser.add_subparsers(dest="command", required=True)

    div = sub.add_parser("divergence", help="divergences between two CSV point sets")
    div.add_argument("p", help="CSV file, one point per row")
    div.add_argument("q", help="CSV file, one point per row")
    div.add_argument("--beta", type=_parse_beta, action="append", default=[],
                     help="assignment tolerance for 1D relaxed costs (repeatable; 'inf' for nearest neighbour)")
    div.add_argument("--metric", default="absolute", choices=["absolute", "abs", "squared", "sq"])

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="directory for traces and result.json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "divergence":
            return cmd_divergence(args)
        return cmd_experiment(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
