"""Tests for `hardmix.scaling`."""
import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st

from hardmix.exceptions import (
    ExhaustedReservoirError,
    InvalidInputError,
    ScalingInfeasibleError,
)
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import (
    GradScaling,
    bbgky_prefactor,
    collision_frequencies,
    kernel_constant,
    limit_constants,
    mean_free_time,
    prefactor_defect_bound,
    prefactor_product,
    realize,
)

A, B = SpeciesKind.A, SpeciesKind.B


class TestRealize:
    def test_symmetric(self):
        realized = realize(GradScaling(1.0, 1.0, 1.0, 3), 1000)
        assert realized.counts == (1000, 1000)
        assert realized.eps2 == pytest.approx(1000 ** -0.5)
        assert realized.eps2 == pytest.approx(0.0316228, rel=1e-6)
        assert realized.eps1 == realized.eps2

    def test_diameter_ratio(self):
        realized = realize(GradScaling(1.0, 1.0, 2.0, 3), 1000)
        assert realized.n1 == 250
        assert realized.eps1 == 2.0 * realized.eps2

    @given(
        st.integers(1, 10_000),
        st.sampled_from([2, 3, 4]),
        st.floats(0.1, 10.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_symmetry_any_n(self, n2, dim, c):
        realized = realize(GradScaling(c, c, 1.0, dim), n2)
        assert realized.n1 == n2
        assert realized.eps1 == realized.eps2

    @pytest.mark.parametrize(
        "c1, c2, b, dim, n2",
        [(1.0, 1.0, 2.0, 3, 1000), (2.0, 0.5, 0.5, 2, 100), (1.0, 3.0, 3.0, 2, 900)],
    )
    def test_identities(self, c1, c2, b, dim, n2):
        realized = realize(GradScaling(c1, c2, b, dim), n2)
        n1, n2 = realized.counts
        assert n1 * realized.eps1 ** (dim - 1) == pytest.approx(c1, rel=1e-10)
        assert n2 * realized.eps2 ** (dim - 1) == pytest.approx(c2, rel=1e-10)
        assert realized.eps1 == b * realized.eps2

    def test_infeasible(self):
        with pytest.raises(ScalingInfeasibleError):
            realize(GradScaling(1.0, 1.0, 2.0, 3), 1001)
        with pytest.raises(ScalingInfeasibleError):
            realize(GradScaling(1.0, 1.0, 10.0, 3), 10)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            GradScaling(0.0, 1.0, 1.0, 3)
        with pytest.raises(InvalidInputError):
            GradScaling(1.0, 1.0, 1.0, 1)
        with pytest.raises(InvalidInputError):
            realize(GradScaling(1.0, 1.0, 1.0, 2), 0)


class TestConstants:
    def test_symmetric(self):
        assert limit_constants(GradScaling(1.0, 1.0, 1.0, 2)) == (1.0, 1.0, 1.0, 1.0)

    def test_closed_forms(self):
        c1, c2, c12, c21 = limit_constants(GradScaling(1.0, 1.0, 2.0, 3))
        assert c12 == 2.25
        assert c21 == 0.5625

    def test_kernel_table(self):
        scaling = GradScaling(0.7, 1.3, 2.0, 3)
        c1, c2, c12, c21 = limit_constants(scaling)
        assert kernel_constant(scaling, A, A) == c1
        assert kernel_constant(scaling, B, B) == c2
        assert kernel_constant(scaling, A, B) == c12
        assert kernel_constant(scaling, B, A) == c21
        assert kernel_constant(GradScaling(1.0, 1.0, 2.0, 3), A, B) == 2.25
        np.testing.assert_array_equal(scaling.kernel_table, [[c1, c12], [c21, c2]])

    def test_asymmetry_in_b(self):
        c12 = [GradScaling(1.0, 1.0, b, 3).c12 for b in (1.0, 2.0, 4.0)]
        c21 = [GradScaling(1.0, 1.0, b, 3).c21 for b in (1.0, 2.0, 4.0)]
        assert c12[0] < c12[1] < c12[2]
        assert c21[0] > c21[1] > c21[2]


class TestPrefactors:
    scaling = GradScaling(1.0, 1.0, 2.0, 3)

    def test_same_species(self):
        realized = realize(GradScaling(1.0, 1.0, 1.0, 3), 1000)
        value = bbgky_prefactor(realized, (1, 1), (0, 0), A, A)
        assert value == pytest.approx(1.0 * (1.0 - 1.0 / realized.n1))

    @pytest.mark.parametrize("alpha, beta", [(A, A), (A, B), (B, A), (B, B)])
    def test_increases_to_limit(self, alpha, beta):
        limit = kernel_constant(self.scaling, alpha, beta)
        values = [
            bbgky_prefactor(realize(self.scaling, n2), (2, 1), (1, 1), alpha, beta)
            for n2 in (100, 1000, 10_000)
        ]
        assert values[0] < values[1] < values[2] < limit
        assert values[2] == pytest.approx(limit, rel=1e-2)

    @pytest.mark.parametrize("n2", [100, 1000, 10_000])
    def test_defect_bound(self, n2):
        realized = realize(self.scaling, n2)
        s = (2, 1)
        alphas = [A, B, A, B]
        betas = [B, B, A, A]
        a_inf, a_n = prefactor_product(realized, s, alphas, betas)
        defect = 1.0 - a_n / a_inf
        bound = prefactor_defect_bound(self.scaling, s, len(alphas))
        assert 0.0 < defect <= bound * realized.max_eps ** (self.scaling.dim - 1)

    def test_single_defect_bound(self):
        realized = realize(self.scaling, 1000)
        for alpha, beta in [(A, A), (A, B), (B, A), (B, B)]:
            a_n = bbgky_prefactor(realized, (3, 2), (0, 1), alpha, beta)
            defect = 1.0 - a_n / kernel_constant(self.scaling, alpha, beta)
            bound = prefactor_defect_bound(self.scaling, (3, 2), 1)
            assert 0.0 < defect <= bound * realized.max_eps**2

    def test_exhausted(self):
        realized = realize(GradScaling(1.0, 1.0, 1.0, 2), 3)
        with pytest.raises(ExhaustedReservoirError):
            bbgky_prefactor(realized, (1, 2), (0, 1), A, B)


class TestMeanFreeTime:
    def test_single_species_closed_form(self):
        # d = 3, unit masses and temperatures: E|u| = sqrt(2) * 2 / sqrt(pi)
        scaling = GradScaling(1.0, 1.0, 1.0, 3)
        freq = collision_frequencies(scaling, (1.0, 1.0))
        expected = np.pi * np.sqrt(2.0) * 2.0 / np.sqrt(np.pi)
        np.testing.assert_allclose(freq, expected)
        assert mean_free_time(scaling, (1.0, 1.0)) == pytest.approx(
            1.0 / (2 * expected)
        )

    def test_monte_carlo_speed(self):
        scaling = GradScaling(1.0, 2.0, 0.5, 2)
        mass = (1.0, 4.0)
        rng = np.random.default_rng(0)
        va = rng.standard_normal((400_000, 2)) / np.sqrt(2.0 * mass[0])
        vb = rng.standard_normal((400_000, 2)) / np.sqrt(2.0 * mass[1])
        speed = np.linalg.norm(va - vb, axis=1).mean()
        freq = collision_frequencies(scaling, mass)
        assert freq[0, 1] == pytest.approx(scaling.c12 * 2.0 * speed, rel=5e-3)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            collision_frequencies(GradScaling(1.0, 1.0, 1.0, 2), (1.0, -1.0))
