"""Exact 1D transport between scalar samples across assignment tolerances.

Every solver works on two finite sets of scalars and returns the transport
cost normalized by the number of source points, together with a hard
:class:`Assignment`. The tolerance ``beta`` bounds how many source points a
single target may absorb (``beta + 1``):

* ``beta = 0`` is ordinary 1-to-1 matching (sorted pairing),
* integer ``beta > 0`` is a capacity-constrained matching solved by dynamic
  programming over the sorted sequences,
* ``beta = inf`` removes the capacity entirely, i.e. nearest-neighbour
  assignment.

Only integer tolerances are supported for the capacity solver: for integer
capacities the soft (fractional) problem always has a hard optimal plan, for
real ``beta`` it generally does not. Round a real tolerance down before
calling :func:`relaxed_ot_1d`.
"""

from __future__ import annotations

import enum
import functools
import math
import numbers
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GroundMetric",
    "Assignment",
    "SizeMismatchError",
    "EmptyInputError",
    "as_scalars",
    "ground_cost",
    "ground_cost_derivative",
    "wasserstein1_1d",
    "relaxed_ot_1d",
    "nn_assignment_1d",
    "symmetric_relaxed_cost",
    "brute_force_ot_1d",
]

BRUTE_FORCE_MAX_SIZE = 8


class SizeMismatchError(ValueError):
    """Raised when a solver needs equal-size inputs and does not get them."""


class EmptyInputError(ValueError):
    """Raised when an input sample set is empty."""


class GroundMetric(str, enum.Enum):
    ABSOLUTE = "absolute"
    SQUARED = "squared"

    @classmethod
    def parse(cls, value: "GroundMetric | str") -> "GroundMetric":
        if isinstance(value, cls):
            return value
        aliases = {"abs": cls.ABSOLUTE, "sq": cls.SQUARED}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown ground metric {value!r}") from None


def ground_cost(x, y, metric: GroundMetric | str = GroundMetric.ABSOLUTE) -> np.ndarray:
    """Elementwise ground cost ``d(x, y)``."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if GroundMetric.parse(metric) is GroundMetric.SQUARED:
        return diff * diff
    return np.abs(diff)


def ground_cost_derivative(diff, metric: GroundMetric | str = GroundMetric.ABSOLUTE) -> np.ndarray:
    """Derivative of ``d(x, y)`` with respect to ``x`` given ``diff = x - y``.

    The absolute cost uses the subgradient 0 at coincident points.
    """
    diff = np.asarray(diff, dtype=float)
    if GroundMetric.parse(metric) is GroundMetric.SQUARED:
        return 2.0 * diff
    return np.sign(diff)


@dataclass(frozen=True)
class Assignment:
    """Hard transport plan from source indices to target indices.

    ``pairs[k] = (k, target)`` for every source ``k`` (rows are ordered by
    source index); ``capacity_used[j]`` counts the sources sent to target ``j``.
    """

    pairs: np.ndarray
    capacity_used: np.ndarray
    cost: float

    @property
    def targets(self) -> np.ndarray:
        return self.pairs[:, 1]

    def recompute_cost(self, p, q, metric: GroundMetric | str = GroundMetric.ABSOLUTE) -> float:
        return _plan_cost(np.asarray(p, float), np.asarray(q, float), self.targets, metric)


def as_scalars(values, name: str = "values") -> np.ndarray:
    """Validate a 1D sample set and return it as a float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_equal_sizes(p: np.ndarray, q: np.ndarray) -> None:
    if p.size != q.size:
        raise SizeMismatchError(f"expected equal sizes, got {p.size} and {q.size}")


def _check_beta(beta) -> float | int:
    """Return ``beta`` as an int, or ``math.inf``; reject everything else."""
    if isinstance(beta, bool):
        raise ValueError("beta must be a number, not a bool")
    if isinstance(beta, numbers.Integral):
        if beta < 0:
            raise ValueError(f"beta must be non-negative, got {beta}")
        return int(beta)
    if isinstance(beta, numbers.Real):
        if math.isinf(beta) and beta > 0:
            return math.inf
        if float(beta).is_integer() and beta >= 0:
            return int(beta)
    raise ValueError(f"beta must be a non-negative integer or inf, got {beta!r}")


def _plan_cost(p: np.ndarray, q: np.ndarray, targets: np.ndarray, metric) -> float:
    return float(np.mean(ground_cost(p, q[targets], metric)))


def _make_assignment(p, q, targets, metric) -> Assignment:
    targets = np.asarray(targets, dtype=np.intp)
    pairs = np.column_stack([np.arange(p.size, dtype=np.intp), targets])
    used = np.bincount(targets, minlength=q.size)
    return Assignment(pairs=pairs, capacity_used=used, cost=_plan_cost(p, q, targets, metric))


def wasserstein1_1d(p, q, metric: GroundMetric | str = GroundMetric.ABSOLUTE):
    """1-to-1 transport between equal-size scalar sets by sorted pairing.

    Returns ``(cost, plan)``; with the absolute metric ``cost`` is the exact
    Wasserstein-1 distance between the two empirical distributions.
    """
    p = as_scalars(p, "p")
    q = as_scalars(q, "q")
    _check_equal_sizes(p, q)
    order_p = np.argsort(p, kind="stable")
    order_q = np.argsort(q, kind="stable")
    targets = np.empty(p.size, dtype=np.intp)
    targets[order_p] = order_q
    plan = _make_assignment(p, q, targets, metric)
    return plan.cost, plan


def relaxed_ot_1d(p, q, beta: int, metric: GroundMetric | str = GroundMetric.ABSOLUTE):
    """Minimum-cost hard assignment where each target takes at most ``beta + 1`` sources.

    Both sets are sorted and an optimal non-crossing assignment is found by
    dynamic programming: ``best[j][i]`` is the cheapest way to place the
    ``i`` smallest sources on the ``j`` smallest targets, extended by giving
    target ``j`` a block of ``0..beta+1`` consecutive sources. Runs in
    ``O((beta + 1) m^2)``.
    """
    p = as_scalars(p, "p")
    q = as_scalars(q, "q")
    _check_equal_sizes(p, q)
    beta = _check_beta(beta)
    if beta == math.inf:
        raise ValueError("relaxed_ot_1d needs a finite integer beta; use nn_assignment_1d for inf")
    m = p.size
    cap = min(beta + 1, m)

    order_p = np.argsort(p, kind="stable")
    order_q = np.argsort(q, kind="stable")
    xs = p[order_p]
    ys = q[order_q]

    best = np.full(m + 1, np.inf)
    best[0] = 0.0
    block = np.zeros((m, m + 1), dtype=np.intp)  # block[j, i]: sources given to target j
    for j in range(m):
        # prefix[i] = sum of d(xs[:i], ys[j])
        prefix = np.concatenate([[0.0], np.cumsum(ground_cost(xs, ys[j], metric))])
        new = best.copy()
        choice = np.zeros(m + 1, dtype=np.intp)
        for t in range(1, cap + 1):
            cand = np.full(m + 1, np.inf)
            cand[t:] = best[:-t] + (prefix[t:] - prefix[:-t])
            better = cand < new
            new[better] = cand[better]
            choice[better] = t
        best = new
        block[j] = choice

    targets_sorted = np.empty(m, dtype=np.intp)
    i = m
    for j in range(m - 1, -1, -1):
        t = block[j, i]
        targets_sorted[i - t:i] = j
        i -= t
    if i != 0:  # pragma: no cover - capacities always suffice for equal sizes
        raise RuntimeError("dynamic program failed to place every source")

    targets = np.empty(m, dtype=np.intp)
    targets[order_p] = order_q[targets_sorted]
    plan = _make_assignment(p, q, targets, metric)
    return plan.cost, plan


def nn_assignment_1d(p, q, metric: GroundMetric | str = GroundMetric.ABSOLUTE):
    """Send every source to its nearest target (unbounded capacity).

    Sizes may differ. Equidistant targets resolve to the smallest position in
    the stably sorted target order. The cost is one directed term of the
    discrete SSD divergence.
    """
    p = as_scalars(p, "p")
    q = as_scalars(q, "q")
    order_q = np.argsort(q, kind="stable")
    ys = q[order_q]
    n = ys.size

    right = np.searchsorted(ys, p, side="left")  # first target >= source
    left = right - 1
    has_left = left >= 0
    has_right = right < n
    d_left = np.where(has_left, p - ys[np.clip(left, 0, n - 1)], np.inf)
    d_right = np.where(has_right, ys[np.clip(right, 0, n - 1)] - p, np.inf)
    use_left = d_left <= d_right
    # leftmost copy of the chosen left value among duplicates
    left_first = np.searchsorted(ys, ys[np.clip(left, 0, n - 1)], side="left")
    pos = np.where(use_left, left_first, right)

    targets = order_q[pos]
    plan = _make_assignment(p, q, targets, metric)
    return plan.cost, plan


def _directed_cost(p, q, beta, metric) -> float:
    if beta == math.inf:
        return nn_assignment_1d(p, q, metric)[0]
    return relaxed_ot_1d(p, q, beta, metric)[0]


def symmetric_relaxed_cost(p, q, beta1, beta2, metric: GroundMetric | str = GroundMetric.ABSOLUTE) -> float:
    """``D^beta1(p -> q) + D^beta2(q -> p)``; ``inf`` tolerances use nearest neighbours."""
    beta1 = _check_beta(beta1)
    beta2 = _check_beta(beta2)
    return _directed_cost(p, q, beta1, metric) + _directed_cost(q, p, beta2, metric)


@functools.lru_cache(maxsize=4)
def _tail_maps(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All maps of sources 1..m-1 in lexicographic order, with per-target loads."""
    tail = m - 1
    idx = np.arange(m**tail, dtype=np.int64)
    radix = m ** np.arange(tail - 1, -1, -1, dtype=np.int64)
    digits = ((idx[:, None] // radix) % m).astype(np.int8)
    loads = np.stack([(digits == t).sum(axis=1, dtype=np.int8) for t in range(m)], axis=1)
    return digits, loads


def _enumerate_best(costs: np.ndarray, limit) -> np.ndarray:
    """Lexicographically first minimum-cost map whose max target load is <= limit.

    Maps are split by the target of source 0; the cost and load of the
    remaining sources are shared by every split.
    """
    m = costs.shape[0]
    if m == 1:
        return np.zeros(1, dtype=np.intp)
    digits, loads = _tail_maps(m)
    tail_cost = np.zeros(digits.shape[0])
    for s in range(1, m):
        tail_cost += costs[s][digits[:, s - 1]]
    tail_max = loads.max(axis=1)
    best_cost, best_map = math.inf, None
    for first in range(m):
        load = np.maximum(tail_max, loads[:, first] + 1)
        total = np.where(load <= limit, costs[0, first] + tail_cost, np.inf)
        k = int(np.argmin(total))
        if total[k] < best_cost:
            best_cost = float(total[k])
            best_map = np.concatenate([[first], digits[k]]).astype(np.intp)
    return best_map


def brute_force_ot_1d(p, q, beta, metric: GroundMetric | str = GroundMetric.ABSOLUTE):
    """Exhaustive search over every capacity-feasible hard assignment.

    Reference oracle for the sorting, dynamic-programming and nearest-neighbour
    solvers; limited to ``m <= 8`` points per side.
    """
    p = as_scalars(p, "p")
    q = as_scalars(q, "q")
    _check_equal_sizes(p, q)
    beta = _check_beta(beta)
    m = p.size
    if m > BRUTE_FORCE_MAX_SIZE:
        raise ValueError(f"brute force limited to m <= {BRUTE_FORCE_MAX_SIZE}, got {m}")
    limit = m if beta == math.inf else beta + 1
    costs = ground_cost(p[:, None], q[None, :], metric)

    best_map = _enumerate_best(costs, limit)
    plan = _make_assignment(p, q, best_map, metric)
    return plan.cost, plan
