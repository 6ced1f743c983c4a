import math

import numpy as np
import pytest

from support_align.analytic import (
    DiscreteMeasure1D,
    PiecewiseDensity,
    UndefinedPointError,
    beta_shift_family,
    beta_source,
    density_ratio_identity_check,
    optimal_discriminator,
    optimal_logit,
    pushforward_discriminator,
    pushforward_ssd,
    random_piecewise_pair,
    reflection_counterexample,
    two_point_counterexamples,
)
from support_align.transport1d import nn_assignment_1d, relaxed_ot_1d, wasserstein1_1d

U01 = PiecewiseDensity.uniform(0, 1)
U_SHIFT = PiecewiseDensity.uniform(0.5, 1.5)


def atoms(measure):
    return {round(k, 12): round(v, 12) for k, v in measure.as_dict().items()}


class TestPiecewiseDensity:
    def test_rejects_wrong_mass(self):
        with pytest.raises(ValueError):
            PiecewiseDensity(((0, 1, 0.5),))

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            PiecewiseDensity(((0, 1, 0.5), (0.5, 1.5, 0.5)))

    def test_bound_enforced(self):
        with pytest.raises(ValueError):
            PiecewiseDensity.from_masses([(0, 1), (1, 2)], [0.99, 0.01], bound=20)

    def test_touching_pieces_merge_in_support(self):
        d = PiecewiseDensity.from_masses([(0, 0.5), (0.5, 1)], [0.75, 0.25])
        assert d.support().intervals == ((0.0, 1.0),)
        assert d.density(0.25) == 1.5 and d.density(0.75) == 0.5 and d.density(2.0) == 0.0

    def test_samples_stay_in_support(self):
        p, q = reflection_counterexample()
        xs = q.sample(np.random.default_rng(0), 2000)
        assert np.all(q.support().contains(xs))


class TestOptimalDiscriminator:
    def test_examples(self):
        assert optimal_discriminator(U01, U01, 0.3) == 0.5
        assert optimal_discriminator(U01, U_SHIFT, 0.25) == 1.0
        assert optimal_discriminator(U01, U_SHIFT, 0.75) == 0.5

    def test_outside_both_supports(self):
        with pytest.raises(UndefinedPointError):
            optimal_discriminator(U01, U_SHIFT, 5.0)
        with pytest.raises(UndefinedPointError):
            optimal_logit(U01, U_SHIFT, -1.0)

    def test_logit(self):
        q = PiecewiseDensity.from_masses([(0, 0.5), (0.5, 1)], [0.375, 0.625])  # densities 3/4, 5/4
        p = PiecewiseDensity.from_masses([(0, 0.5), (0.5, 1)], [0.75, 0.25])  # densities 3/2, 1/2
        assert optimal_logit(U01, U01, 0.5) == 0.0
        assert optimal_logit(U01, U_SHIFT, 0.25) == math.inf
        assert optimal_logit(U01, U_SHIFT, 1.25) == -math.inf
        assert optimal_logit(p, q, 0.25) == pytest.approx(math.log(2.0))
        assert optimal_logit(U01, q, 0.75) == pytest.approx(math.log(0.8))


class TestPushforward:
    def test_shifted_uniforms(self):
        fp, fq = pushforward_discriminator(U01, U_SHIFT)
        assert atoms(fp) == {0.5: 0.5, 1.0: 0.5}
        assert atoms(fq) == {0.0: 0.5, 0.5: 0.5}
        assert pushforward_ssd(U01, U_SHIFT) == pytest.approx(0.5)

    def test_identical(self):
        fp, fq = pushforward_discriminator(U01, U01)
        assert atoms(fp) == atoms(fq) == {0.5: 1.0}
        assert pushforward_ssd(U01, U01) == 0.0

    def test_reflection_construction(self):
        p, q = reflection_counterexample()
        fp, fq = pushforward_discriminator(p, q)
        third = round(1 / 3, 12)
        assert atoms(fp) == {0.75: 0.75, third: 0.25}
        assert atoms(fq) == {0.0: 0.25, 0.75: 0.25, third: 0.5}
        assert set(atoms(fp)) <= set(atoms(fq))
        assert density_ratio_identity_check(p, q) <= 1e-12

    def test_reflection_symmetry_of_critic(self):
        # the optimal discriminator takes the same value on x and -x where both densities are positive
        p, q = reflection_counterexample()
        for x in [-0.4, -0.1, 0.2]:
            assert optimal_discriminator(p, q, x) == optimal_discriminator(p, q, -x)

    def test_equal_support_different_density(self):
        q = PiecewiseDensity.from_masses([(0, 0.5), (0.5, 1)], [0.75, 0.25])
        assert pushforward_ssd(U01, q) == 0.0

    def test_ratio_identity_examples(self):
        assert density_ratio_identity_check(U01, U_SHIFT) <= 1e-12
        assert density_ratio_identity_check(U01, U01) == 0.0

    def test_random_pairs_iff(self):
        rng = np.random.default_rng(0)
        for k in range(40):
            equal = k % 2 == 0
            p, q = random_piecewise_pair(rng, equal_support=equal)
            assert (p.support() == q.support()) == equal
            div = pushforward_ssd(p, q)
            assert (div <= 1e-12) == equal
            assert density_ratio_identity_check(p, q) <= 1e-12


class TestDiscreteMeasure:
    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteMeasure1D([0.0, 1.0], [0.5, 0.6])
        with pytest.raises(ValueError):
            DiscreteMeasure1D([0.0], [0.0])


class TestBetaFamily:
    def test_supports(self):
        assert beta_shift_family(0.0)[1].intervals == ((0.0, 1.0),)
        assert beta_shift_family(-3.0)[1].intervals == ((-3.0, -2.0),)
        assert beta_source()[1].intervals == ((0.0, 1.0),)

    def test_mean(self):
        sampler, _ = beta_shift_family(-3.0)
        xs = sampler(np.random.default_rng(0), 20_000)
        err = xs.std(ddof=1) / math.sqrt(xs.size)
        assert abs(xs.mean() - (-3 + 1 / 3)) < 3 * err
        src = beta_source()[0](np.random.default_rng(1), 20_000)
        assert abs(src.mean() - 2 / 3) < 3 * src.std(ddof=1) / math.sqrt(src.size)


class TestTwoPointCounterexamples:
    def test_unit_tolerance_instances(self):
        c = two_point_counterexamples(1, 1)
        p, q = c["relaxed_not_distribution"]
        assert p.tolist() == [0, 0, 1, 1] and q.tolist() == [0, 0, 0, 1]
        p, q = c["support_not_relaxed"]
        assert p.tolist() == [0, 1, 1, 1] and q.tolist() == [0, 0, 0, 1]

    @pytest.mark.parametrize("beta", [1, 2, 3])
    def test_separates_alignment_notions(self, beta):
        c = two_point_counterexamples(beta, beta)
        p, q = c["relaxed_not_distribution"]
        assert wasserstein1_1d(p, q)[0] > 0
        assert relaxed_ot_1d(p, q, beta)[0] == 0 and relaxed_ot_1d(q, p, beta)[0] == 0
        p, q = c["support_not_relaxed"]
        assert nn_assignment_1d(p, q)[0] == 0 and nn_assignment_1d(q, p)[0] == 0
        assert relaxed_ot_1d(p, q, beta)[0] + relaxed_ot_1d(q, p, beta)[0] > 0

    def test_rejects_zero_tolerance(self):
        with pytest.raises(ValueError):
            two_point_counterexamples(0, 1)
