import math

import numpy as np
import pytest
from scipy import integrate

from support_align.supportdiv import (
    IntervalUnion,
    directed_distances,
    distance_to_annulus,
    distance_to_interval_union,
    hausdorff,
    project,
    random_directions,
    sample_annulus,
    sample_disk,
    sliced_ssd,
    ssd_continuous_mc,
    ssd_discrete,
)
from support_align.transport1d import EmptyInputError


def uniform(a, b):
    return lambda rng, n: rng.uniform(a, b, n)


def naive_interval_distance(x, intervals):
    return min(0.0 if a <= x <= b else min(abs(x - a), abs(x - b)) for a, b in intervals)


def naive_directed(p, q):
    return np.array([min(np.linalg.norm(a - b) for b in q) for a in p])


class TestIntervalUnion:
    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            IntervalUnion(((0, 1), (1, 2)))

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            IntervalUnion(((2, 3), (0, 1)))

    def test_rejects_empty(self):
        with pytest.raises(EmptyInputError):
            IntervalUnion(())

    def test_merged(self):
        s = IntervalUnion.merged([(2, 3), (0, 1), (1, 1.5)])
        assert s.intervals == ((0.0, 1.5), (2.0, 3.0))

    def test_shift_and_contains(self):
        s = IntervalUnion(((0, 1),)).shifted(-3)
        assert s.intervals == ((-3.0, -2.0),)
        assert s.contains([-2.5, 0.0]).tolist() == [True, False]


class TestIntervalDistance:
    def test_examples(self):
        assert distance_to_interval_union(0.5, IntervalUnion(((0, 1),))) == 0.0
        assert distance_to_interval_union(-3, IntervalUnion(((0, 1),))) == 3.0
        assert distance_to_interval_union(1.6, IntervalUnion(((0, 1), (2, 3)))) == pytest.approx(0.4)

    def test_degenerate_interval(self):
        assert distance_to_interval_union(2.5, IntervalUnion(((2, 2),))) == 0.5

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(0)
        s = IntervalUnion(((-4, -3.5), (-1, 0), (0.25, 0.25), (2, 5)))
        xs = rng.uniform(-8, 8, 1000)
        got = distance_to_interval_union(xs, s)
        expected = [naive_interval_distance(x, s.intervals) for x in xs]
        np.testing.assert_array_equal(got, expected)


class TestDiscrete:
    def test_examples(self):
        pts = [(0, 0), (1, 1)]
        assert ssd_discrete(pts, pts) == 0.0
        assert ssd_discrete([(0, 0)], [(3, 4)]) == pytest.approx(10.0)
        assert ssd_discrete([(0, 0), (1, 0)], [(0, 0)]) == pytest.approx(0.5)

    def test_hausdorff_examples(self):
        assert hausdorff([(0, 0)], [(3, 4)]) == pytest.approx(5.0)
        assert hausdorff([0, 1], [0, 10]) == pytest.approx(9.0)
        assert hausdorff([(1, 2)], [(1, 2)]) == 0.0

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            ssd_discrete(np.zeros((0, 2)), [(0, 0)])
        with pytest.raises(ValueError):
            ssd_discrete([(0, 0)], [(0, 0, 0)])
        with pytest.raises(ValueError):
            hausdorff([(np.nan, 0)], [(0, 0)])

    @pytest.mark.parametrize("dim", [1, 2, 5])
    def test_directed_matches_brute_force(self, dim):
        rng = np.random.default_rng(dim)
        p, q = rng.normal(size=(60, dim)), rng.normal(size=(45, dim))
        np.testing.assert_allclose(directed_distances(p, q), naive_directed(p, q), atol=1e-12)

    def test_chunking_is_transparent(self):
        rng = np.random.default_rng(1)
        p, q = rng.normal(size=(2500, 3)), rng.normal(size=(40, 3))
        np.testing.assert_allclose(directed_distances(p, q), naive_directed(p, q), atol=1e-12)

    def test_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p = rng.integers(-3, 4, size=(int(rng.integers(1, 8)), 2)).astype(float)
            q = rng.integers(-3, 4, size=(int(rng.integers(1, 8)), 2)).astype(float)
            s, h = ssd_discrete(p, q), hausdorff(p, q)
            assert s == pytest.approx(ssd_discrete(q, p), abs=1e-12)
            assert s <= 2 * h + 1e-12
            assert h >= directed_distances(p, q).max() - 1e-12
            same = set(map(tuple, p)) == set(map(tuple, q))
            assert (s == 0) == same and (h == 0) == same


class TestContinuousMC:
    def test_identical_uniforms(self):
        s = IntervalUnion(((0, 1),))
        est, err = ssd_continuous_mc(uniform(0, 1), uniform(0, 1), s, s, 1000, seed=0)
        assert est == 0.0 and err == 0.0

    def test_disjoint_uniforms_against_quadrature(self):
        # E|gap| from [0,1] to [2,3] plus from [2,3] to [0,1]
        fwd, _ = integrate.quad(lambda x: 2.0 - x, 0, 1)
        bwd, _ = integrate.quad(lambda y: y - 1.0, 2, 3)
        est, err = ssd_continuous_mc(uniform(0, 1), uniform(2, 3), IntervalUnion(((0, 1),)),
                                     IntervalUnion(((2, 3),)), 4000, seed=1)
        assert fwd + bwd == pytest.approx(3.0)
        assert abs(est - (fwd + bwd)) < 3 * err

    def test_std_error_scaling(self):
        args = (uniform(0, 1), uniform(2, 3), IntervalUnion(((0, 1),)), IntervalUnion(((2, 3),)))
        _, e1 = ssd_continuous_mc(*args, 2000, seed=3)
        _, e4 = ssd_continuous_mc(*args, 8000, seed=3)
        assert 1 / 1.5 <= (e1 / e4) / 2 <= 1.5

    def test_deterministic(self):
        args = (uniform(0, 1), uniform(0.5, 2), IntervalUnion(((0, 1),)), IntervalUnion(((0.5, 2),)))
        assert ssd_continuous_mc(*args, 500, seed=9) == ssd_continuous_mc(*args, 500, seed=9)

    def test_needs_enough_samples(self):
        s = IntervalUnion(((0, 1),))
        with pytest.raises(ValueError):
            ssd_continuous_mc(uniform(0, 1), uniform(0, 1), s, s, 99, seed=0)


class TestProjection:
    def test_examples(self):
        assert project([(1, 0)], (1, 0)).tolist() == [1.0]
        assert project([(1, 1)], (0, 1)).tolist() == [1.0]
        assert project([(3, 4)], (0.6, 0.8))[0] == pytest.approx(5.0)

    def test_rejects_bad_direction(self):
        with pytest.raises(ValueError):
            project([(1, 0)], (1, 1))
        with pytest.raises(ValueError):
            project([(1, 0)], (1, 0, 0))

    def test_random_directions_are_unit(self):
        d = random_directions(64, 3, seed=0)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(d, random_directions(64, 3, seed=0))


class TestSliced:
    def test_identical_sets(self):
        pts = np.random.default_rng(0).normal(size=(50, 2))
        assert sliced_ssd(pts, pts, 16, seed=0) == (0.0, 0.0)

    def test_translated_copies_are_detected(self):
        pts = np.random.default_rng(1).normal(size=(40, 2))
        mx, mean = sliced_ssd(pts, pts + [3.0, 0.0], 32, seed=2)
        assert mx > 0 and mean > 0

    def test_rejects_1d(self):
        with pytest.raises(ValueError):
            sliced_ssd([0.0, 1.0], [0.0, 1.0], 4, seed=0)

    def test_shapes_have_expected_radii(self):
        rng = np.random.default_rng(4)
        r_disk = np.linalg.norm(sample_disk(rng, 5000), axis=1)
        r_ann = np.linalg.norm(sample_annulus(rng, 5000), axis=1)
        assert r_disk.max() <= math.sqrt(2) + 1e-12
        assert r_ann.min() >= 1 - 1e-12 and r_ann.max() <= math.sqrt(2) + 1e-12
        assert np.all(distance_to_annulus(sample_annulus(rng, 100), 1, math.sqrt(2)) == 0)

    def test_disk_annulus_ssd_against_quadrature(self):
        # only disk points inside radius 1 are off the annulus; density r / (R^2 / 2)
        radius = math.sqrt(2)
        analytic, _ = integrate.quad(lambda r: (1 - r) * 2 * r / radius**2, 0, 1)
        assert analytic == pytest.approx(1 / 6)
        rng = np.random.default_rng(5)
        mc = distance_to_annulus(sample_disk(rng, 200_000), 1.0, radius).mean()
        assert mc == pytest.approx(analytic, abs=3e-3)
