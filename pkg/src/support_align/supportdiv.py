"""Support divergences between point sets and between 1D distributions with known supports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .transport1d import EmptyInputError, GroundMetric, ground_cost, nn_assignment_1d

__all__ = [
    "IntervalUnion",
    "as_points",
    "directed_distances",
    "ssd_discrete",
    "hausdorff",
    "distance_to_interval_union",
    "ssd_continuous_mc",
    "project",
    "random_directions",
    "sliced_ssd",
    "sample_disk",
    "sample_annulus",
    "distance_to_annulus",
]

Sampler = Callable[[np.random.Generator, int], np.ndarray]

_NN_CHUNK = 1024


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted union of pairwise disjoint closed intervals on the real line."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise EmptyInputError("interval union is empty")
        for a, b in ivs:
            if not (math.isfinite(a) and math.isfinite(b)) or a > b:
                raise ValueError(f"invalid interval [{a}, {b}]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be sorted and strictly disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def merged(cls, intervals: Sequence[tuple[float, float]]) -> "IntervalUnion":
        """Build a union from arbitrary intervals, merging overlapping or touching ones."""
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        out: list[list[float]] = []
        for a, b in ivs:
            if out and a <= out[-1][1]:
                out[-1][1] = max(out[-1][1], b)
            else:
                out.append([a, b])
        return cls(tuple((a, b) for a, b in out))

    @property
    def starts(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals])

    @property
    def ends(self) -> np.ndarray:
        return np.array([b for _, b in self.intervals])

    def shifted(self, offset: float) -> "IntervalUnion":
        return IntervalUnion(tuple((a + offset, b + offset) for a, b in self.intervals))

    def contains(self, x) -> np.ndarray:
        return distance_to_interval_union(x, self) == 0.0


def distance_to_interval_union(x, s: IntervalUnion):
    """Distance from ``x`` (scalar or array) to the closest point of ``s``.

    Binary search over the sorted interval starts; zero inside any interval.
    """
    if not s.intervals:
        raise EmptyInputError("interval union is empty")
    xs = np.asarray(x, dtype=float)
    starts, ends = s.starts, s.ends
    k = np.searchsorted(starts, xs, side="right") - 1  # last interval starting at or before x
    kc = np.clip(k, 0, len(starts) - 1)
    # gap to the interval on the left (or inside it), then to the next one on the right
    left = np.where(k >= 0, np.maximum(xs - ends[kc], 0.0), np.inf)
    nxt = np.clip(k + 1, 0, len(starts) - 1)
    right = np.where(k + 1 < len(starts), starts[nxt] - xs, np.inf)
    out = np.minimum(left, right)
    return float(out) if out.ndim == 0 else out


def as_points(points, name: str = "points") -> np.ndarray:
    """Validate a point set; 1D sequences are read as points on the line."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2D array of shape (count, dim)")
    if arr.shape[0] == 0:
        raise EmptyInputError(f"{name} is empty")
    if arr.shape[1] == 0:
        raise ValueError(f"{name} has zero dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = as_points(p, "p")
    q = as_points(q, "q")
    if p.shape[1] != q.shape[1]:
        raise ValueError(f"dimension mismatch: {p.shape[1]} vs {q.shape[1]}")
    return p, q


def directed_distances(p, q) -> np.ndarray:
    """Euclidean distance from every point of ``p`` to the finite set ``q``.

    1D inputs use a sorted merge; higher dimensions use chunked brute force,
    recomputing the winning pair's distance directly to avoid cancellation.
    """
    p, q = _pair(p, q)
    if p.shape[1] == 1:
        _, plan = nn_assignment_1d(p[:, 0], q[:, 0])
        return np.abs(p[:, 0] - q[plan.targets, 0])
    idx = np.empty(p.shape[0], dtype=np.intp)
    q_sq = np.einsum("ij,ij->i", q, q)
    for lo in range(0, p.shape[0], _NN_CHUNK):
        block = p[lo:lo + _NN_CHUNK]
        idx[lo:lo + _NN_CHUNK] = np.argmin(q_sq[None, :] - 2.0 * block @ q.T, axis=1)
    return np.linalg.norm(p - q[idx], axis=1)


def ssd_discrete(p, q) -> float:
    """Symmetric support difference between two finite point sets.

    Mean distance from each point of ``p`` to the set ``q`` plus the mean
    distance from each point of ``q`` to ``p`` (Euclidean ground metric).
    """
    return float(np.mean(directed_distances(p, q)) + np.mean(directed_distances(q, p)))


def hausdorff(p, q) -> float:
    return float(max(np.max(directed_distances(p, q)), np.max(directed_distances(q, p))))


def ssd_continuous_mc(
    sampler_p: Sampler,
    sampler_q: Sampler,
    supp_p: IntervalUnion,
    supp_q: IntervalUnion,
    n_samples: int,
    seed: int,
    metric: GroundMetric | str = GroundMetric.ABSOLUTE,
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E_p[d(x, supp q)] + E_q[d(y, supp p)]``.

    Samplers are called as ``sampler(rng, n)`` with one generator seeded by
    ``seed`` (``p`` first, then ``q``). Returns the estimate and its standard
    error.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    rng = np.random.default_rng(seed)
    xs = np.asarray(sampler_p(rng, n_samples), dtype=float)
    ys = np.asarray(sampler_q(rng, n_samples), dtype=float)
    fwd = ground_cost(distance_to_interval_union(xs, supp_q), 0.0, metric)
    bwd = ground_cost(distance_to_interval_union(ys, supp_p), 0.0, metric)
    estimate = float(np.mean(fwd) + np.mean(bwd))
    stderr = math.sqrt(np.var(fwd, ddof=1) / xs.size + np.var(bwd, ddof=1) / ys.size)
    return estimate, stderr


def project(points, direction) -> np.ndarray:
    """Inner product of every point with a unit ``direction``."""
    pts = as_points(points)
    d = np.asarray(direction, dtype=float).ravel()
    if d.size != pts.shape[1]:
        raise ValueError(f"dimension mismatch: points have {pts.shape[1]}, direction has {d.size}")
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction must have unit norm")
    return pts @ d


def random_directions(n_directions: int, dim: int, seed: int) -> np.ndarray:
    """Directions drawn uniformly on the unit sphere (normalized Gaussians)."""
    if n_directions < 1:
        raise ValueError("n_directions must be positive")
    g = np.random.default_rng(seed).standard_normal((n_directions, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sliced_ssd(p, q, n_directions: int, seed: int) -> tuple[float, float]:
    """Symmetric 1D nearest-neighbour cost of the projections, max and mean over directions."""
    p, q = _pair(p, q)
    if p.shape[1] < 2:
        raise ValueError("sliced SSD needs points of dimension >= 2")
    costs = []
    for d in random_directions(n_directions, p.shape[1], seed):
        a, b = project(p, d), project(q, d)
        costs.append(nn_assignment_1d(a, b)[0] + nn_assignment_1d(b, a)[0])
    costs = np.asarray(costs)
    return float(costs.max()), float(costs.mean())


def sample_disk(rng: np.random.Generator, n: int, radius: float = math.sqrt(2.0)) -> np.ndarray:
    return sample_annulus(rng, n, 0.0, radius)


def sample_annulus(rng: np.random.Generator, n: int, r_in: float = 1.0, r_out: float = math.sqrt(2.0)) -> np.ndarray:
    """Uniform samples from ``{r_in <= |x| <= r_out}`` in the plane."""
    u, phi = rng.random(n), rng.uniform(0.0, 2.0 * math.pi, n)
    r = np.sqrt(r_in**2 + u * (r_out**2 - r_in**2))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def distance_to_annulus(points, r_in: float, r_out: float) -> np.ndarray:
    """Distance to ``{r_in <= |x| <= r_out}``; ``r_in = 0`` gives the disk."""
    r = np.linalg.norm(as_points(points), axis=1)
    return np.maximum(r_in - r, 0.0) + np.maximum(r - r_out, 0.0)
