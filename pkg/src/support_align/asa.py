"""Adversarial support alignment with history buffers, plus its 1-to-1 and
(beta+1)-to-1 variants.

One training step, in order:

1. sample a mini-batch from each side and map it to feature space,
2. one optimizer step on the discriminator's log-loss,
3. recompute the batch logits with the updated discriminator and prepend the
   stored history of past logits,
4. match the two logit sets (nearest neighbour, capacity-constrained, or
   sorted), and take one generator step on the matched distances,
5. push the batch logits into the history buffers.

History values are plain floats: they act as matching targets and contribute
to the loss value, but no gradient flows into them.
"""

from __future__ import annotations

import collections
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .diffnet import SGD, Adam, Network, logistic_discriminator_loss
from .transport1d import (
    GroundMetric,
    SizeMismatchError,
    as_scalars,
    ground_cost_derivative,
    nn_assignment_1d,
    relaxed_ot_1d,
    wasserstein1_1d,
)

__all__ = [
    "HistoryBuffer",
    "update_history",
    "AlignmentMode",
    "AlignmentResult",
    "alignment_loss",
    "IdentityMap",
    "ShiftMap",
    "ResidualMLPMap",
    "AlignmentProblem",
    "TrainConfig",
    "TrainingState",
    "StepMetrics",
    "TrainingTrace",
    "generator_objective",
    "asa_step",
    "init_state",
    "run_training",
]


class HistoryBuffer:
    """Bounded FIFO of past scalar discriminator outputs."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = int(capacity)
        self._values: collections.deque[float] = collections.deque(maxlen=self.capacity)

    def push(self, values) -> None:
        self._values.extend(float(v) for v in np.asarray(values, dtype=float).ravel())

    @property
    def values(self) -> np.ndarray:
        return np.fromiter(self._values, dtype=float, count=len(self._values))

    def __len__(self) -> int:
        return len(self._values)


def update_history(buf: HistoryBuffer, batch_outputs) -> HistoryBuffer:
    """Append detached batch outputs, evicting the oldest beyond capacity."""
    buf.push(np.array(batch_outputs, dtype=float, copy=True))
    return buf


@dataclass(frozen=True)
class AlignmentMode:
    """Which matching defines the alignment loss.

    ``support``: nearest neighbour in both directions (infinite tolerance).
    ``relaxed``: capacity ``beta + 1`` per target in both directions.
    ``distribution``: sorted 1-to-1 matching (computed once, p to q).
    """

    kind: str = "support"
    metric: GroundMetric = GroundMetric.ABSOLUTE
    beta: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", GroundMetric.parse(self.metric))
        if self.kind not in ("support", "relaxed", "distribution"):
            raise ValueError(f"unknown alignment kind {self.kind!r}")
        if self.kind == "relaxed":
            if not isinstance(self.beta, int) or isinstance(self.beta, bool) or self.beta < 0:
                raise ValueError("relaxed alignment needs an integer beta >= 0")

    @classmethod
    def parse(cls, text: str) -> "AlignmentMode":
        """Parse ``support-abs``, ``distribution-sq``, ``relaxed-2-abs`` and similar."""
        parts = text.split("-")
        metric = parts[-1] if parts[-1] in ("abs", "sq", "absolute", "squared") else "abs"
        if parts[0] == "relaxed":
            if len(parts) < 2 or not parts[1].isdigit():
                raise ValueError(f"relaxed mode needs an integer beta: {text!r}")
            return cls("relaxed", metric, int(parts[1]))
        return cls(parts[0], metric)

    @property
    def name(self) -> str:
        short = "abs" if self.metric is GroundMetric.ABSOLUTE else "sq"
        if self.kind == "relaxed":
            return f"relaxed-{self.beta}-{short}"
        return f"{self.kind}-{short}"


@dataclass
class AlignmentResult:
    loss: float
    grad_p: np.ndarray
    grad_q: np.ndarray
    mask_p: np.ndarray
    mask_q: np.ndarray


def _directed(src, dst, kind, beta, metric):
    if kind == "support":
        return nn_assignment_1d(src, dst, metric)
    if kind == "relaxed":
        return relaxed_ot_1d(src, dst, beta, metric)
    return wasserstein1_1d(src, dst, metric)


def alignment_loss(v_p, v_q, mode: AlignmentMode, n_hist_p: int = 0, n_hist_q: int = 0) -> AlignmentResult:
    """Alignment loss between two logit sets and its gradient w.r.t. each entry.

    ``v_p`` and ``v_q`` are ``concat(history, batch)``; the first
    ``n_hist_*`` entries are history and get zero gradient. Each direction is
    normalized by its own source count.
    """
    v_p = as_scalars(v_p, "v_p")
    v_q = as_scalars(v_q, "v_q")
    if not (0 <= n_hist_p <= v_p.size and 0 <= n_hist_q <= v_q.size):
        raise ValueError("history length exceeds the value set")
    if mode.kind != "support" and v_p.size != v_q.size:
        raise SizeMismatchError(f"{mode.kind} alignment needs equal sizes, got {v_p.size} and {v_q.size}")

    grad_p = np.zeros(v_p.size)
    grad_q = np.zeros(v_q.size)
    loss = 0.0
    directions = [(v_p, v_q, grad_p, grad_q)]
    if mode.kind != "distribution":
        directions.append((v_q, v_p, grad_q, grad_p))
    for src, dst, g_src, g_dst in directions:
        cost, plan = _directed(src, dst, mode.kind, mode.beta, mode.metric)
        loss += cost
        slope = ground_cost_derivative(src - dst[plan.targets], mode.metric) / src.size
        g_src += slope
        g_dst -= np.bincount(plan.targets, weights=slope, minlength=dst.size)

    mask_p = np.arange(v_p.size) >= n_hist_p
    mask_q = np.arange(v_q.size) >= n_hist_q
    return AlignmentResult(loss, grad_p * mask_p, grad_q * mask_q, mask_p, mask_q)


class FeatureMap(Protocol):
    def forward(self, x: np.ndarray) -> np.ndarray: ...
    def backward(self, grad_out: np.ndarray) -> None: ...
    def parameters(self) -> list[np.ndarray]: ...
    def gradients(self) -> list[np.ndarray]: ...


class IdentityMap:
    """Fixed side of the game: no parameters."""

    def forward(self, x):
        return np.asarray(x, dtype=float)

    def backward(self, grad_out):
        pass

    def parameters(self):
        return []

    def gradients(self):
        return []


class ShiftMap:
    """``x -> x + theta`` with a learnable offset vector ``theta``."""

    def __init__(self, theta):
        self.theta = np.array(theta, dtype=float, ndmin=1)
        self.grad = np.zeros_like(self.theta)

    def forward(self, x):
        return np.asarray(x, dtype=float) + self.theta

    def backward(self, grad_out):
        self.grad[...] = np.asarray(grad_out).reshape(-1, self.theta.size).sum(axis=0)

    def parameters(self):
        return [self.theta]

    def gradients(self):
        return [self.grad]


class ResidualMLPMap:
    """``x -> x + shift + net(x)``; the net's output layer starts at zero."""

    def __init__(self, dim: int, hidden: tuple[int, ...], rng: np.random.Generator, activation: str = "tanh"):
        self.shift = ShiftMap(np.zeros(dim))
        self.net = Network.mlp([dim, *hidden, dim], rng, hidden_activation=activation, zero_last=True)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return self.shift.forward(x) + self.net.forward(x)

    def backward(self, grad_out):
        self.shift.backward(grad_out)
        self.net.backward(grad_out)

    def parameters(self):
        return self.shift.parameters() + self.net.parameters()

    def gradients(self):
        return self.shift.gradients() + self.net.gradients()


Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class AlignmentProblem:
    """Two sides of the game: base samplers and the maps into feature space."""

    dim: int
    sample_source: Sampler
    sample_target: Sampler
    source_map: FeatureMap = field(default_factory=IdentityMap)
    target_map: FeatureMap = field(default_factory=IdentityMap)

    def sample(self, rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
        xp = np.asarray(self.sample_source(rng, m), dtype=float).reshape(m, self.dim)
        xq = np.asarray(self.sample_target(rng, m), dtype=float).reshape(m, self.dim)
        return xp, xq

    def features(self, xp: np.ndarray, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.source_map.forward(xp), self.target_map.forward(xq)

    def parameters(self) -> list[np.ndarray]:
        return self.source_map.parameters() + self.target_map.parameters()

    def gradients(self) -> list[np.ndarray]:
        return self.source_map.gradients() + self.target_map.gradients()


@dataclass
class TrainConfig:
    batch_size: int = 128
    history_size: int = 1000
    steps: int = 5000
    align_weight: float = 1.0
    disc_hidden: tuple[int, ...] = (64, 64)
    disc_optimizer: str = "adam"
    disc_lr: float = 1e-3
    gen_optimizer: str = "adam"
    gen_lr: float = 1e-3
    momentum: float = 0.9
    lr_decay_to: float = 1.0
    eval_every: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.history_size < 0 or self.steps < 0:
            raise ValueError("history_size and steps must be non-negative")
        if self.align_weight < 0:
            raise ValueError("align_weight must be non-negative")
        if not 0 < self.lr_decay_to <= 1:
            raise ValueError("lr_decay_to must lie in (0, 1]")
        self.disc_hidden = tuple(self.disc_hidden)

    def lr_scale(self, step: int) -> float:
        """Linear decay from 1 at step 0 to ``lr_decay_to`` at the last step."""
        if self.steps <= 1:
            return 1.0
        frac = min(step, self.steps - 1) / (self.steps - 1)
        return 1.0 - (1.0 - self.lr_decay_to) * frac

    def make_optimizer(self, kind: str, lr: float):
        if kind == "adam":
            return Adam(lr)
        if kind == "sgd":
            return SGD(lr, momentum=self.momentum)
        raise ValueError(f"unknown optimizer {kind!r}")


@dataclass
class TrainingState:
    disc: Network
    disc_opt: object
    gen_opt: object
    hist_p: HistoryBuffer
    hist_q: HistoryBuffer
    rng: np.random.Generator
    step: int = 0


@dataclass
class StepMetrics:
    disc_loss: float
    align_loss: float


def init_state(config: TrainConfig, problem: AlignmentProblem) -> TrainingState:
    data_seq, disc_seq = np.random.SeedSequence(config.seed).spawn(2)
    disc = Network.mlp([problem.dim, *config.disc_hidden, 1], np.random.default_rng(disc_seq))
    return TrainingState(
        disc=disc,
        disc_opt=config.make_optimizer(config.disc_optimizer, config.disc_lr),
        gen_opt=config.make_optimizer(config.gen_optimizer, config.gen_lr),
        hist_p=HistoryBuffer(config.history_size),
        hist_q=HistoryBuffer(config.history_size),
        rng=np.random.default_rng(data_seq),
    )


def generator_objective(
    disc: Network,
    problem: AlignmentProblem,
    xp: np.ndarray,
    xq: np.ndarray,
    hist_p: np.ndarray,
    hist_q: np.ndarray,
    mode: AlignmentMode,
    align_weight: float = 1.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted alignment loss of the current batch logits against the histories.

    Fills the map gradient buffers with ``d(loss)/d(theta)`` and returns
    ``(loss, batch_logits_p, batch_logits_q)``. The discriminator's own
    gradient buffers are overwritten as a side effect.
    """
    m = len(xp)
    zp, zq = problem.features(xp, xq)
    out = disc.forward(np.vstack([zp, zq]))[:, 0]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite discriminator output")
    res = alignment_loss(np.concatenate([hist_p, out[:m]]), np.concatenate([hist_q, out[m:]]), mode,
                         hist_p.size, hist_q.size)
    grad_out = align_weight * np.concatenate([res.grad_p[hist_p.size:], res.grad_q[hist_q.size:]])
    grad_feat = disc.backward(grad_out)
    problem.source_map.backward(grad_feat[:m])
    problem.target_map.backward(grad_feat[m:])
    return align_weight * res.loss, out[:m], out[m:]


def asa_step(state: TrainingState, problem: AlignmentProblem, mode: AlignmentMode, config: TrainConfig) -> StepMetrics:
    m = config.batch_size
    scale = config.lr_scale(state.step)
    state.disc_opt.lr = config.disc_lr * scale
    state.gen_opt.lr = config.gen_lr * scale
    xp, xq = problem.sample(state.rng, m)
    zp, zq = problem.features(xp, xq)

    logits = state.disc.forward(np.vstack([zp, zq]))[:, 0]
    disc_loss, gp, gq = logistic_discriminator_loss(logits[:m], logits[m:])
    state.disc.backward(np.concatenate([gp, gq]))
    state.disc_opt.step(state.disc.parameters(), state.disc.gradients())

    # re-forward with the updated discriminator; histories enter as constants
    try:
        align, out_p, out_q = generator_objective(state.disc, problem, xp, xq, state.hist_p.values,
                                                  state.hist_q.values, mode, 1.0)
    except FloatingPointError as exc:
        raise FloatingPointError(f"step {state.step}: {exc}") from None
    if not math.isfinite(align):
        raise FloatingPointError(f"non-finite alignment loss at step {state.step}")
    params = problem.parameters()
    if config.align_weight > 0 and params:
        grads = [config.align_weight * g for g in problem.gradients()]
        state.gen_opt.step(params, grads)

    update_history(state.hist_p, out_p)
    update_history(state.hist_q, out_q)
    state.step += 1
    return StepMetrics(disc_loss, align)


TRACE_COLUMNS = ["step", "disc_loss", "align_loss", "D_W_eval", "D_ssd_eval"]


@dataclass
class TrainingTrace:
    rows: list[dict] = field(default_factory=list)
    final: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        extra = []
        for row in self.rows:
            extra += [k for k in row if k not in TRACE_COLUMNS and k not in extra]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS + extra, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


Evaluator = Callable[[TrainingState], dict]


def run_training(
    config: TrainConfig,
    mode: AlignmentMode,
    problem: AlignmentProblem,
    evaluate: Evaluator | None = None,
    state: TrainingState | None = None,
) -> tuple[TrainingTrace, TrainingState]:
    """Run ``config.steps`` alignment steps, evaluating at every checkpoint.

    ``evaluate(state)`` should return ``D_W_eval`` / ``D_ssd_eval`` plus any
    experiment-specific columns; it is called at step 0, every
    ``config.eval_every`` steps, and after the last step.
    """
    state = state or init_state(config, problem)
    trace = TrainingTrace()

    def checkpoint(metrics: StepMetrics | None):
        row = {"step": state.step, "disc_loss": "", "align_loss": ""}
        if metrics is not None:
            row["disc_loss"], row["align_loss"] = metrics.disc_loss, metrics.align_loss
        if evaluate is not None:
            row.update(evaluate(state))
        trace.rows.append(row)

    checkpoint(None)
    metrics = None
    for k in range(config.steps):
        metrics = asa_step(state, problem, mode, config)
        if config.eval_every and (k + 1) % config.eval_every == 0 and k + 1 != config.steps:
            checkpoint(metrics)
    if config.steps:
        checkpoint(metrics)
    trace.final = dict(trace.rows[-1])
    return trace, state
