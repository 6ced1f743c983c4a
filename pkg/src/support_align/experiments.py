"""Desk-scale experiments: shifted Beta toy, 2D Gaussian mixtures under label
shift, history-size ablation, and the disk/annulus slicing counterexample."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .analytic import beta_shift_family, beta_source
from .asa import (
    AlignmentMode,
    AlignmentProblem,
    IdentityMap,
    ResidualMLPMap,
    ShiftMap,
    TrainConfig,
    TrainingState,
    TrainingTrace,
    run_training,
)
from .supportdiv import (
    distance_to_annulus,
    sample_annulus,
    sample_disk,
    sliced_ssd,
    ssd_continuous_mc,
    ssd_discrete,
)
from .transport1d import GroundMetric, nn_assignment_1d, wasserstein1_1d

__all__ = [
    "BETA_THETA_INIT",
    "beta_shift_problem",
    "beta_shift_divergences",
    "run_beta_shift",
    "mixture_weights",
    "MixtureSpec",
    "mixture2d_problem",
    "normalize_embedding",
    "embedding_divergences",
    "run_mixture2d",
    "pushforward_divergences",
    "ABLATION_PROBLEMS",
    "run_history_ablation",
    "run_sliced_counterexample",
]

BETA_THETA_INIT = -3.0
_EVAL_SEED = 12345


# ---------------------------------------------------------------- beta shift


def beta_shift_problem(theta_init: float = BETA_THETA_INIT) -> AlignmentProblem:
    """Fixed ``Beta(4, 2)`` against ``Beta(2, 4) + theta`` with a learnable scalar shift."""
    sample_p, _ = beta_source()
    sample_q, _ = beta_shift_family(0.0)
    return AlignmentProblem(
        dim=1,
        sample_source=sample_p,
        sample_target=sample_q,
        source_map=IdentityMap(),
        target_map=ShiftMap([theta_init]),
    )


def beta_shift_divergences(theta: float, n_eval: int = 10_000, seed: int = _EVAL_SEED) -> dict:
    """Squared-metric transport cost and support divergence for a given shift.

    The transport cost uses sorted empirical samples; the support divergence is
    a Monte Carlo average of squared distances to the true supports.
    """
    sample_p, supp_p = beta_source()
    sample_q, supp_q = beta_shift_family(theta)
    rng = np.random.default_rng(seed)
    xp, xq = sample_p(rng, n_eval), sample_q(rng, n_eval)
    d_w = wasserstein1_1d(xp, xq, GroundMetric.SQUARED)[0]
    d_ssd, _ = ssd_continuous_mc(sample_p, sample_q, supp_p, supp_q, n_eval, seed + 1, GroundMetric.SQUARED)
    return {"D_W_eval": d_w, "D_ssd_eval": d_ssd}


def run_beta_shift(config: TrainConfig, mode: AlignmentMode, theta_init: float = BETA_THETA_INIT,
                   n_eval: int = 10_000) -> tuple[TrainingTrace, float]:
    """Train the shift; checkpoints report observable-space divergences, the
    shift itself, and divergences between discriminator logits."""
    problem = beta_shift_problem(theta_init)
    eval_rng = np.random.default_rng(_EVAL_SEED + 2)
    xp, xq = problem.sample(eval_rng, n_eval)

    def evaluate(state: TrainingState) -> dict:
        theta = float(problem.target_map.theta[0])
        zp, zq = problem.features(xp, xq)
        return {**beta_shift_divergences(theta, n_eval), "theta": theta, **pushforward_divergences(state, zp, zq)}

    trace, _ = run_training(config, mode, problem, evaluate)
    return trace, float(problem.target_map.theta[0])


# ---------------------------------------------------------------- 2D mixtures


def mixture_weights(n_components: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Weights proportional to ``rank ** -alpha`` under a random rank permutation."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    ranks = rng.permutation(n_components) + 1
    w = ranks.astype(float) ** -alpha
    return w / w.sum()


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian clusters on a circle; the target copy is translated."""

    n_components: int = 3
    radius: float = 1.5
    std: float = 0.5
    offset: tuple[float, float] = (2.0, 1.0)

    def centers(self) -> np.ndarray:
        ang = 2.0 * math.pi * np.arange(self.n_components) / self.n_components + math.pi / 2
        return self.radius * np.column_stack([np.cos(ang), np.sin(ang)])

    def sampler(self, weights, translate: bool):
        centers = self.centers() + (np.asarray(self.offset) if translate else 0.0)
        weights = np.asarray(weights, dtype=float)
        std = self.std

        def sample(rng: np.random.Generator, n: int) -> np.ndarray:
            labels = rng.choice(len(weights), size=n, p=weights)
            return centers[labels] + std * rng.standard_normal((n, 2))

        return sample


def mixture2d_problem(alpha: float, seed: int, spec: MixtureSpec = MixtureSpec(),
                      map_hidden: tuple[int, ...] = (64, 64), map_activation: str = "tanh") -> AlignmentProblem:
    """Balanced source clusters (fixed) against translated, imbalanced target
    clusters passed through a learnable residual MLP."""
    map_seq, weight_seq = np.random.SeedSequence([seed, 1]).spawn(2)
    balanced = np.full(spec.n_components, 1.0 / spec.n_components)
    target_w = mixture_weights(spec.n_components, alpha, np.random.default_rng(weight_seq))
    return AlignmentProblem(
        dim=2,
        sample_source=spec.sampler(balanced, translate=False),
        sample_target=spec.sampler(target_w, translate=True),
        source_map=IdentityMap(),
        target_map=ResidualMLPMap(2, map_hidden, np.random.default_rng(map_seq), map_activation),
    )


def normalize_embedding(zp: np.ndarray, zq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center both sets jointly and rescale so the average norm is 1."""
    both = np.vstack([zp, zq])
    center = both.mean(axis=0)
    scale = np.mean(np.linalg.norm(both - center, axis=1))
    if scale == 0:
        return zp - center, zq - center
    return (zp - center) / scale, (zq - center) / scale


def embedding_divergences(zp: np.ndarray, zq: np.ndarray) -> dict:
    """Normalized-embedding transport cost (exact assignment) and support divergence."""
    if len(zp) != len(zq):
        raise ValueError("embedding transport cost needs equal sample counts")
    zp, zq = normalize_embedding(zp, zq)
    cost = np.linalg.norm(zp[:, None, :] - zq[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return {"D_W_eval": float(cost[rows, cols].mean()), "D_ssd_eval": ssd_discrete(zp, zq)}


def pushforward_divergences(state: TrainingState, zp: np.ndarray, zq: np.ndarray) -> dict:
    """Divergences between discriminator logits of two equal-size feature sets."""
    out = state.disc.forward(np.vstack([zp, zq]))[:, 0]
    lp, lq = out[:len(zp)], out[len(zp):]
    ssd = nn_assignment_1d(lp, lq)[0] + nn_assignment_1d(lq, lp)[0]
    return {"push_D_W": wasserstein1_1d(lp, lq)[0], "push_D_ssd": ssd}


def run_mixture2d(config: TrainConfig, mode: AlignmentMode, alpha: float, n_eval: int = 2000,
                  spec: MixtureSpec = MixtureSpec(), map_hidden: tuple[int, ...] = (64, 64),
                  map_activation: str = "tanh") -> tuple[TrainingTrace, TrainingState]:
    problem = mixture2d_problem(alpha, config.seed, spec, map_hidden, map_activation)
    eval_rng = np.random.default_rng([config.seed, _EVAL_SEED])
    xp = problem.sample_source(eval_rng, n_eval)
    xq = problem.sample_target(eval_rng, n_eval)

    def evaluate(state: TrainingState) -> dict:
        zp, zq = problem.source_map.forward(xp), problem.target_map.forward(xq)
        return {**embedding_divergences(zp, zq), **pushforward_divergences(state, zp, zq)}

    return run_training(config, mode, problem, evaluate)


# ---------------------------------------------------------------- ablation


ABLATION_PROBLEMS = ("beta-shift", "mixture2d")


def run_history_ablation(config: TrainConfig, mode: AlignmentMode, sizes: list[int], problem: str = "beta-shift",
                         alpha: float = 1.5, n_eval: int | None = None) -> dict:
    """Repeat one toy run per history size, plus one run without alignment.

    Returns final pushforward (discriminator-logit) divergences keyed by size,
    and the unaligned run under ``"baseline"``.
    """
    if any(n < 0 for n in sizes):
        raise ValueError("history sizes must be non-negative")
    if problem not in ABLATION_PROBLEMS:
        raise ValueError(f"unknown ablation problem {problem!r}")
    out = {}
    runs = [(str(n), n, config.align_weight) for n in sizes] + [("baseline", config.history_size, 0.0)]
    for key, n, weight in runs:
        cfg = replace(config, history_size=n, align_weight=weight)
        if problem == "beta-shift":
            trace, _ = run_beta_shift(cfg, mode, n_eval=n_eval or 10_000)
        else:
            trace, _ = run_mixture2d(cfg, mode, alpha, n_eval or 2000)
        out[key] = {k: trace.final[k] for k in ("push_D_W", "push_D_ssd", "D_W_eval", "D_ssd_eval")}
    return out


# ---------------------------------------------------------------- slicing


def run_sliced_counterexample(n_samples: int = 2000, n_directions: int = 64, seed: int = 0,
                              inner: float = 1.0, outer: float = math.sqrt(2.0)) -> dict:
    """Disk against annulus with the same outer radius: every 1D projection
    has the same support, but the 2D supports differ."""
    rng = np.random.default_rng(seed)
    disk = sample_disk(rng, n_samples, outer)
    ring = sample_annulus(rng, n_samples, inner, outer)
    sliced_max, sliced_mean = sliced_ssd(disk, ring, n_directions, seed + 1)
    return {
        "sliced_max": sliced_max,
        "sliced_mean": sliced_mean,
        "ssd_2d": ssd_discrete(disk, ring),
        "ssd_2d_to_true_support": float(distance_to_annulus(disk, inner, outer).mean()),
    }
