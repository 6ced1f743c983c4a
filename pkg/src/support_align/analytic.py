"""Closed-form distributions and log-loss discriminators.

Piecewise-uniform densities make every object exact: the optimal
discriminator ``f*(x) = p(x) / (p(x) + q(x))`` is piecewise constant, so the
pushforwards of ``p`` and ``q`` through it are finite sets of atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .supportdiv import IntervalUnion

__all__ = [
    "UndefinedPointError",
    "PiecewiseDensity",
    "DiscreteMeasure1D",
    "optimal_discriminator",
    "optimal_logit",
    "pushforward_discriminator",
    "pushforward_ssd",
    "density_ratio_identity_check",
    "beta_source",
    "beta_shift_family",
    "reflection_counterexample",
    "two_point_counterexamples",
    "random_piecewise_pair",
]

ATOM_MERGE_TOL = 1e-12
MASS_TOL = 1e-12


class UndefinedPointError(ValueError):
    """The query point lies outside both supports, where ``f*`` is arbitrary."""


@dataclass(frozen=True)
class PiecewiseDensity:
    """Density that is constant on each of a sorted list of intervals.

    ``pieces`` holds ``(a, b, c)`` triples with ``a < b`` and density ``c >= 0``;
    pieces may touch but not overlap. ``bound`` optionally records a constant
    ``C`` with ``1/C < c < C`` on every piece of positive density.
    """

    pieces: tuple[tuple[float, float, float], ...]
    bound: float | None = None

    def __post_init__(self):
        pieces = tuple((float(a), float(b), float(c)) for a, b, c in self.pieces if c != 0)
        if not pieces:
            raise ValueError("density has no mass")
        for a, b, c in pieces:
            if not (a < b) or c < 0 or not all(map(math.isfinite, (a, b, c))):
                raise ValueError(f"invalid piece ({a}, {b}, {c})")
        for (_, b0, _), (a1, _, _) in zip(pieces, pieces[1:]):
            if a1 < b0:
                raise ValueError("pieces must be sorted and non-overlapping")
        total = sum((b - a) * c for a, b, c in pieces)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass is {total}, expected 1")
        if self.bound is not None:
            lo, hi = 1.0 / self.bound, self.bound
            if any(not (lo < c < hi) for _, _, c in pieces):
                raise ValueError(f"density outside ({lo}, {hi})")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def from_masses(cls, intervals, masses, bound: float | None = None) -> "PiecewiseDensity":
        """Uniform on each interval with the given probability masses."""
        return cls(tuple((a, b, m / (b - a)) for (a, b), m in zip(intervals, masses)), bound)

    @classmethod
    def uniform(cls, a: float, b: float) -> "PiecewiseDensity":
        return cls(((a, b, 1.0 / (b - a)),))

    def density(self, x):
        xs = np.asarray(x, dtype=float)
        starts = np.array([a for a, _, _ in self.pieces])
        ends = np.array([b for _, b, _ in self.pieces])
        vals = np.array([c for _, _, c in self.pieces])
        k = np.searchsorted(starts, xs, side="right") - 1
        kc = np.clip(k, 0, len(starts) - 1)
        out = np.where((k >= 0) & (xs <= ends[kc]), vals[kc], 0.0)
        return float(out) if out.ndim == 0 else out

    def support(self) -> IntervalUnion:
        return IntervalUnion.merged([(a, b) for a, b, _ in self.pieces])

    def breakpoints(self) -> list[float]:
        return sorted({v for a, b, _ in self.pieces for v in (a, b)})

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        masses = np.array([(b - a) * c for a, b, c in self.pieces])
        k = rng.choice(len(self.pieces), size=n, p=masses / masses.sum())
        lo = np.array([a for a, _, _ in self.pieces])[k]
        hi = np.array([b for _, b, _ in self.pieces])[k]
        return lo + (hi - lo) * rng.random(n)


@dataclass(frozen=True)
class DiscreteMeasure1D:
    """Finite set of atoms with positive masses summing to one."""

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        mass = np.asarray(self.masses, dtype=float)
        if loc.shape != mass.shape or loc.ndim != 1 or loc.size == 0:
            raise ValueError("locations and masses must be equal-length non-empty 1D arrays")
        if not np.all(np.isfinite(loc)) or np.any(mass <= 0):
            raise ValueError("atoms need finite locations and positive masses")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {mass.sum()}, expected 1")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.locations.tolist(), self.masses.tolist()))


def _densities_at(p: PiecewiseDensity, q: PiecewiseDensity, x) -> tuple[float, float]:
    dp, dq = p.density(x), q.density(x)
    if dp + dq == 0:
        raise UndefinedPointError(f"x={x} lies outside both supports")
    return dp, dq


def optimal_discriminator(p: PiecewiseDensity, q: PiecewiseDensity, x: float) -> float:
    """``p(x) / (p(x) + q(x))`` on the union of the supports."""
    dp, dq = _densities_at(p, q, x)
    return dp / (dp + dq)


def optimal_logit(p: PiecewiseDensity, q: PiecewiseDensity, x: float) -> float:
    """``log p(x) - log q(x)``; ``+inf`` / ``-inf`` where one density vanishes."""
    dp, dq = _densities_at(p, q, x)
    if dq == 0:
        return math.inf
    if dp == 0:
        return -math.inf
    return math.log(dp) - math.log(dq)


def _joint_atoms(p: PiecewiseDensity, q: PiecewiseDensity) -> list[tuple[float, float, float]]:
    """``(t, mass_p, mass_q)`` for every distinct value ``t`` of ``f*``, sorted by ``t``."""
    cuts = sorted(set(p.breakpoints()) | set(q.breakpoints()))
    cells = []
    for u, v in zip(cuts, cuts[1:]):
        mid = 0.5 * (u + v)
        dp, dq = p.density(mid), q.density(mid)
        if dp + dq == 0:
            continue
        cells.append((dp / (dp + dq), dp * (v - u), dq * (v - u)))
    cells.sort()
    atoms: list[list[float]] = []
    for t, wp, wq in cells:
        if atoms and t - atoms[-1][0] <= ATOM_MERGE_TOL:
            atoms[-1][1] += wp
            atoms[-1][2] += wq
        else:
            atoms.append([t, wp, wq])
    return [tuple(a) for a in atoms]


def pushforward_discriminator(p: PiecewiseDensity, q: PiecewiseDensity):
    """Atomic pushforwards of ``p`` and ``q`` through ``f*``.

    Returns ``(fp, fq)`` as :class:`DiscreteMeasure1D` with atoms in ``[0, 1]``.
    """
    atoms = _joint_atoms(p, q)
    fp = [(t, wp) for t, wp, _ in atoms if wp > 0]
    fq = [(t, wq) for t, _, wq in atoms if wq > 0]
    return (
        DiscreteMeasure1D(np.array([t for t, _ in fp]), np.array([w for _, w in fp])),
        DiscreteMeasure1D(np.array([t for t, _ in fq]), np.array([w for _, w in fq])),
    )


def _directed_atomic(a: DiscreteMeasure1D, b: DiscreteMeasure1D) -> float:
    gaps = np.abs(a.locations[:, None] - b.locations[None, :]).min(axis=1)
    return float(np.dot(a.masses, gaps))


def pushforward_ssd(p: PiecewiseDensity, q: PiecewiseDensity) -> float:
    """SSD divergence between the two pushforwards, computed exactly from their atoms."""
    fp, fq = pushforward_discriminator(p, q)
    return _directed_atomic(fp, fq) + _directed_atomic(fq, fp)


def density_ratio_identity_check(p: PiecewiseDensity, q: PiecewiseDensity) -> float:
    """Largest ``|w_p / (w_p + w_q) - t|`` over pushforward atoms ``t``.

    For atomic pushforwards the atom masses play the role of the pushforward
    densities, so the ratio must reproduce the atom location exactly.
    """
    return max(abs(wp / (wp + wq) - t) for t, wp, wq in _joint_atoms(p, q))


def _beta_sampler(a: float, b: float) -> Callable:
    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.beta(a, b, size=n)

    return sampler


def beta_source() -> tuple[Callable, IntervalUnion]:
    """The fixed ``Beta(4, 2)`` distribution on ``[0, 1]``."""
    return _beta_sampler(4.0, 2.0), IntervalUnion(((0.0, 1.0),))


def beta_shift_family(theta: float) -> tuple[Callable, IntervalUnion]:
    """``Beta(2, 4)`` shifted by ``theta``, supported on ``[theta, theta + 1]``."""
    theta = float(theta)
    base = _beta_sampler(2.0, 4.0)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        return base(rng, n) + theta

    return sampler, IntervalUnion(((theta, theta + 1.0),))


def reflection_counterexample() -> tuple[PiecewiseDensity, PiecewiseDensity]:
    """Pair with different supports that a 1-Lipschitz critic cannot tell apart by support.

    The critic objective is invariant under ``x -> -x``, so a symmetric
    maximizer exists and maps ``[-2, -1]`` onto the image of ``[1, 2]``.
    Only the construction is provided; the critic is never optimized here.
    """
    p = PiecewiseDensity.from_masses([(-0.5, 0.5), (1.0, 2.0)], [0.75, 0.25])
    q = PiecewiseDensity.from_masses([(-2.0, -1.0), (-0.5, 0.5), (1.0, 2.0)], [0.25, 0.25, 0.5])
    return p, q


def _counts(masses: list[Fraction]) -> list[int]:
    scale = math.lcm(*(m.denominator for m in masses))
    return [int(m * scale) for m in masses]


def two_point_counterexamples(beta1: int, beta2: int, x1: float = 0.0, x2: float = 1.0) -> dict:
    """Equal-weight point multisets separating the three alignment notions.

    Each two-point distribution is realized with multiplicities proportional
    to its masses, so a discrete capacity of ``beta + 1`` per point matches
    the ``(1 + beta) q(y)`` mass constraint.

    ``"relaxed_not_distribution"``: same support, masses within the
    ``(beta1, beta2)`` ratio band, but not equal.
    ``"support_not_relaxed"``: same support, ratio outside the band.
    """
    if beta1 < 1 or beta2 < 1:
        raise ValueError("tolerances must be positive integers")
    b1, b2 = Fraction(beta1), Fraction(beta2)
    shift = min(b2, 1 - 1 / (1 + b1))
    half = Fraction(1, 2)
    cp1, cp2, cq1, cq2 = _counts([half, half, (1 + shift) / 2, (1 - shift) / 2])
    relaxed = ([x1] * cp1 + [x2] * cp2, [x1] * cq1 + [x2] * cq2)

    # eps / (1 - eps) = 1 / (beta2 + 2) < 1 / (1 + beta2)
    eps = Fraction(1, beta2 + 3)
    cp1, cp2, cq1, cq2 = _counts([eps, 1 - eps, 1 - eps, eps])
    support = ([x1] * cp1 + [x2] * cp2, [x1] * cq1 + [x2] * cq2)
    return {
        "relaxed_not_distribution": tuple(np.array(s, dtype=float) for s in relaxed),
        "support_not_relaxed": tuple(np.array(s, dtype=float) for s in support),
    }


def _random_density(rng: np.random.Generator, cells: list[tuple[float, float]], bound: float) -> PiecewiseDensity:
    """Random positive density on the given grid cells, satisfying the bound."""
    for _ in range(100):
        raw = rng.uniform(1.0, 3.0, size=len(cells))
        lengths = np.array([b - a for a, b in cells])
        dens = raw / np.dot(raw, lengths)
        if np.all((dens > 1.0 / bound) & (dens < bound)):
            return PiecewiseDensity(tuple((a, b, c) for (a, b), c in zip(cells, dens)), bound)
    raise RuntimeError("could not draw a density within the bound")


def random_piecewise_pair(rng: np.random.Generator, equal_support: bool, bound: float = 20.0):
    """Random pair of bounded piecewise-uniform densities on a dyadic grid.

    With ``equal_support`` both densities live on the same cells (with
    independent densities); otherwise ``q`` drops at least one cell of ``p``
    and/or gains a cell outside it, so the closed supports differ.
    """
    grid = 0.25
    n_cells = int(rng.integers(2, 9))
    offsets = np.sort(rng.choice(np.arange(-8, 8), size=n_cells, replace=False))
    cells = [(o * grid, (o + 1) * grid) for o in offsets]
    p = _random_density(rng, cells, bound)
    if equal_support:
        return p, _random_density(rng, cells, bound)

    q_cells = list(cells)
    outside = [o for o in range(-10, 10) if o not in offsets]
    action = rng.integers(3)
    if action in (0, 2):
        q_cells.pop(int(rng.integers(len(q_cells))))
    if action in (1, 2) or not q_cells:
        o = int(rng.choice(outside))
        q_cells.append((o * grid, (o + 1) * grid))
    q_cells.sort()
    q = _random_density(rng, q_cells, bound)
    if p.support() == q.support():  # dropped cell was re-added; force a difference
        return random_piecewise_pair(rng, equal_support, bound)
    return p, q
