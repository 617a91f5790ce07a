"""Tests for `hardmix.hierarchy.duhamel`."""
import numpy as np
import pytest

from scipy.special import roots_legendre

from hardmix.dynamics.sampling import MaxwellianDensity
from hardmix.exceptions import EmptyDomainError, ExhaustedReservoirError, InvalidInputError
from hardmix.hierarchy.duhamel import (
    DuhamelEstimate,
    TensorizedData,
    duhamel_iterate,
    free_flow_observable,
    truncated_series,
)
from hardmix.hierarchy.pseudo import Flavor
from hardmix.kinetic.operators import boltzmann_loss_term
from hardmix.kinetic.quadrature import CollisionQuadrature
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import GradScaling, realize

A, B = SpeciesKind.A, SpeciesKind.B
MASSES = (1.0, 3.0)
SCALING = GradScaling(c1=1.0, c2=1.0, b=1.0, dim=2)


@pytest.fixture(scope="module")
def data():
    g0 = MaxwellianDensity(2, mass=MASSES[0], gamma=1.0, center=(0.2, 0.0))
    h0 = MaxwellianDensity(2, mass=MASSES[1], gamma=1.0, drift=(0.3, 0.0))
    return TensorizedData(g0, h0)


@pytest.fixture(scope="module")
def other_data():
    g0 = MaxwellianDensity(2, mass=MASSES[0], gamma=0.5, spread=2.0, profile="uniform")
    h0 = MaxwellianDensity(2, mass=MASSES[1], gamma=2.0, center=(-0.5, 0.5))
    return TensorizedData(g0, h0)


class TestTensorizedData:
    def test_product(self, data):
        rng = np.random.default_rng(0)
        x, v = rng.normal(size=(5, 3, 2)), rng.normal(size=(5, 3, 2))
        values = data((2, 1))(x, v)
        expected = data.g0(x[:, 0], v[:, 0]) * data.g0(x[:, 1], v[:, 1]) * data.h0(x[:, 2], v[:, 2])
        assert values.shape == (5,)
        np.testing.assert_allclose(values, expected, rtol=1e-14)

    def test_separation(self, data):
        separated = TensorizedData(data.g0, data.h0, separation=0.5)
        x = np.array([[[0.0, 0.0], [0.4, 0.0]], [[0.0, 0.0], [0.6, 0.0]]])
        v = np.zeros_like(x)
        values = separated((1, 1))(x, v)
        assert values[0] == 0.0
        assert values[1] == data((1, 1))(x[1], v[1])

    def test_wrong_size(self, data):
        with pytest.raises(InvalidInputError):
            data((1, 1))(np.zeros((3, 2)), np.zeros((3, 2)))

    def test_negative_separation(self, data):
        with pytest.raises(InvalidInputError):
            TensorizedData(data.g0, data.h0, separation=-1.0)


class TestDuhamelIterate:
    def test_zero_data(self):
        zero = lambda s: (lambda x, v: np.zeros(np.shape(x)[:-2]))  # noqa: E731
        estimate = duhamel_iterate(
            zero, [[0.0, 0.0]], (1, 0), 2, 0.5, SCALING, MASSES, samples=600, seed=1
        )
        assert isinstance(estimate, DuhamelEstimate)
        assert estimate.value == 0.0
        assert estimate.stderr == 0.0
        assert estimate.k == 2
        assert estimate.flavor is Flavor.BOLTZMANN
        assert estimate.samples == 600

    def test_free_flow(self, data):
        x_s, t, radius = [[0.3, -0.1]], 0.5, 4.0
        estimate = duhamel_iterate(
            data, x_s, (1, 0), 0, t, SCALING, MASSES, radius=radius, samples=20_000, seed=3
        )
        exact = free_flow_observable(data, x_s, (1, 0), t, radius)
        assert abs(estimate.value - exact) <= 3 * estimate.stderr + 1e-3 * exact

    def test_free_flow_with_test_function(self, data):
        x_s, t, radius = [[0.0, 0.0], [0.5, 0.5]], 0.2, 3.0
        phi = lambda v: np.sum(v[..., 0], axis=-1) ** 2  # noqa: E731
        estimate = duhamel_iterate(
            data, x_s, (1, 1), 0, t, SCALING, MASSES, radius=radius,
            test_function=phi, samples=20_000, seed=4,
        )
        exact = free_flow_observable(data, x_s, (1, 1), t, radius, test_function=phi, nodes=16)
        assert abs(estimate.value - exact) <= 3 * estimate.stderr + 1e-3 * abs(exact)

    @pytest.mark.parametrize("flavor", ["boltzmann", "bbgky"])
    def test_linear_in_data(self, data, other_data, flavor):
        combined = lambda s: (  # noqa: E731
            lambda x, v: data(s)(x, v) - 2.5 * other_data(s)(x, v)
        )
        scaling = realize(SCALING, 200)
        kwargs = dict(
            x_s=[[0.0, 0.0], [0.5, 0.0]], s=(1, 1), k=2, t=0.4, scaling=scaling,
            masses=MASSES, flavor=flavor, radius=3.0, samples=700, seed=12,
        )
        first = duhamel_iterate(data, **kwargs).value
        second = duhamel_iterate(other_data, **kwargs).value
        both = duhamel_iterate(combined, **kwargs).value
        scale = abs(first) + 2.5 * abs(second)
        assert abs(both - (first - 2.5 * second)) <= 1e-12 * scale

    def test_reproducible_across_threads(self, data):
        kwargs = dict(
            x_s=[[0.0, 0.0]], s=(1, 0), k=2, t=0.3, scaling=SCALING, masses=MASSES,
            radius=3.0, samples=1300, seed=9,
        )
        single = duhamel_iterate(data, threads=1, **kwargs)
        pooled = duhamel_iterate(data, threads=3, **kwargs)
        assert single == pooled

    def test_seeds_differ(self, data):
        kwargs = dict(
            x_s=[[0.0, 0.0]], s=(1, 0), k=1, t=0.3, scaling=SCALING, masses=MASSES,
            radius=3.0, samples=200,
        )
        assert duhamel_iterate(data, seed=1, **kwargs) != duhamel_iterate(data, seed=2, **kwargs)

    def test_single_loss_term(self, data):
        x_s = np.array([[0.1, 0.2]])
        v_s = np.array([[0.3, -0.2]])
        t, radius = 0.5, 3.0
        estimate = duhamel_iterate(
            data, x_s, (1, 0), 1, t, SCALING, MASSES, alphas=[A], betas=[B], signs=[-1],
            targets=[0], radius=radius, v_s=v_s, samples=20_000, seed=5,
        )

        quadrature = CollisionQuadrature.default(2, radius)
        nodes, weights = roots_legendre(8)
        expected = 0.0
        for node, weight in zip(0.5 * t * (nodes + 1.0), 0.5 * t * weights):
            def flowed(x, v, t1=node):
                return data((1, 1))(x - t1 * v, v)

            expected -= weight * boltzmann_loss_term(
                flowed, x_s - (t - node) * v_s, v_s, 0, (1, 0), A, B, SCALING,
                MASSES, quadrature, radius=radius,
            )
        assert expected < 0
        assert abs(estimate.value - expected) <= 3 * estimate.stderr + 2e-3 * abs(expected)

    def test_summed_patterns(self, data):
        kwargs = dict(
            x_s=[[0.0, 0.0]], s=(1, 0), k=1, t=0.4, scaling=SCALING, masses=MASSES,
            radius=3.0, samples=6000,
        )
        summed = duhamel_iterate(data, seed=21, **kwargs)
        parts = [
            duhamel_iterate(data, alphas=[A], betas=[beta], signs=[j], targets=[0], seed=22 + i, **kwargs)
            for i, (beta, j) in enumerate([(A, 1), (A, -1), (B, 1), (B, -1)])
        ]
        total = sum(p.value for p in parts)
        sigma = np.sqrt(summed.stderr**2 + sum(p.stderr**2 for p in parts))
        assert abs(summed.value - total) <= 3 * sigma

    def test_flavors_converge(self, data):
        differences = []
        for n2 in (100, 1000, 10_000):
            kwargs = dict(
                initial_data=data, x_s=[[0.0, 0.0]], s=(1, 0), k=1, t=0.4,
                scaling=realize(SCALING, n2), masses=MASSES, radius=3.0, samples=2000, seed=17,
            )
            boltzmann = duhamel_iterate(flavor="boltzmann", **kwargs)
            bbgky = duhamel_iterate(flavor="bbgky", **kwargs)
            assert bbgky.rejected_fraction == 0.0
            differences.append(abs(bbgky.value - boltzmann.value))
        assert differences[0] > differences[1] > differences[2]

    def test_rejections_shrink_with_diameter(self, data):
        fractions = []
        for n2 in (8, 32, 128):
            estimate = duhamel_iterate(
                data, [[0.0, 0.0], [1.0, 0.0]], (1, 1), 2, 1.0, realize(SCALING, n2),
                MASSES, flavor=Flavor.BBGKY, radius=2.0, samples=2000, seed=33,
            )
            fractions.append(estimate.rejected_fraction)
        assert fractions[0] > 0
        assert fractions[0] >= fractions[1] >= fractions[2]
        assert fractions[0] > fractions[2]

    def test_exhausted_reservoir(self, data):
        tiny = realize(SCALING, 2)
        with pytest.raises(ExhaustedReservoirError):
            duhamel_iterate(
                data, [[0.0, 0.0], [3.0, 0.0]], (2, 0), 1, 0.5, tiny, MASSES,
                flavor="bbgky", alphas=[A], betas=[A], samples=10, seed=0,
            )

    def test_empty_simplex(self, data):
        with pytest.raises(EmptyDomainError):
            duhamel_iterate(data, [[0.0, 0.0]], (1, 0), 3, 0.5, SCALING, MASSES, delta=0.2, samples=10)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 9},
            {"k": -1},
            {"s": (8, 0), "x_s": np.zeros((8, 2))},
            {"s": (0, 0), "x_s": np.zeros((0, 2))},
            {"x_s": [[0.0, 0.0, 0.0]]},
            {"x_s": [[0.0, 0.0], [1.0, 1.0]]},
            {"flavor": "bbgky"},
            {"flavor": "enskog"},
            {"radius": 0.0},
            {"samples": 0},
            {"threads": 0},
            {"signs": [0]},
            {"signs": [1, 1]},
            {"alphas": ["B"], "betas": ["A"]},
            {"alphas": ["A"], "betas": ["A"], "targets": [1]},
            {"v_s": [[0.0, 0.0], [0.0, 0.0]]},
        ],
    )
    def test_invalid(self, data, kwargs):
        arguments = dict(
            initial_data=data, x_s=[[0.0, 0.0]], s=(1, 0), k=1, t=0.5, scaling=SCALING,
            masses=MASSES, samples=10, seed=0,
        )
        arguments.update(kwargs)
        with pytest.raises((InvalidInputError, ValueError)):
            duhamel_iterate(**arguments)


class TestFreeFlowObservable:
    def test_gaussian(self):
        data = lambda s: (lambda x, v: np.exp(-np.sum(v**2, axis=(-2, -1))))  # noqa: E731
        assert free_flow_observable(data, [[0.0, 0.0]], (1, 0), 1.0, 6.0) == pytest.approx(
            np.pi, rel=1e-6
        )

    def test_normalized_at_time_zero(self, data):
        # velocities integrate out, leaving the spatial density
        value = free_flow_observable(data, [[0.2, 0.0]], (1, 0), 0.0, 6.0)
        assert value == pytest.approx(data.g0.spatial_density(np.array([0.2, 0.0])), rel=1e-6)

    def test_truncation_error_shrinks(self, data):
        x_s, t = [[0.0, 0.0]], 0.5
        reference = free_flow_observable(data, x_s, (1, 0), t, 6.0)
        errors = [
            abs(free_flow_observable(data, x_s, (1, 0), t, radius, nodes=32) - reference)
            for radius in (0.5, 1.0, 2.0)
        ]
        assert errors[0] > errors[1] > errors[2]

    def test_too_many_points(self, data):
        with pytest.raises(InvalidInputError):
            free_flow_observable(data, np.zeros((3, 2)), (2, 1), 1.0, 2.0, nodes=24)


class TestTruncatedSeries:
    def test_columns(self, data):
        frame = truncated_series(
            data, [[0.0, 0.0]], (1, 0), 2, 0.1, SCALING, MASSES, radius=2.0, samples=300, seed=0
        )
        assert list(frame.columns) == [
            "k", "term", "stderr", "abs_term", "rejected_fraction", "partial_sum"
        ]
        assert list(frame["k"]) == [0, 1, 2]
        np.testing.assert_allclose(frame["partial_sum"], np.cumsum(frame["term"]))

    def test_empty_orders_vanish(self, data):
        frame = truncated_series(
            data, [[0.0, 0.0]], (1, 0), 3, 0.5, SCALING, MASSES, radius=2.0,
            delta=0.2, samples=200, seed=0,
        )
        assert list(frame["term"][2:]) == [0.0, 0.0]
        assert frame["term"][0] != 0.0

    def test_terms_decay(self, data):
        frame = truncated_series(
            data, [[0.0, 0.0]], (1, 0), 5, 0.1, SCALING, MASSES, radius=2.0,
            samples=2000, seed=2024,
        )
        magnitudes = frame["abs_term"].to_numpy()[1:]
        assert np.all(np.diff(magnitudes) < 0)

    def test_error_decreases_with_radius(self, data):
        def partial_sum(radius, samples):
            frame = truncated_series(
                data, [[0.0, 0.0]], (1, 0), 2, 0.1, SCALING, MASSES, radius=radius,
                samples=samples, seed=31,
            )
            return frame["partial_sum"].iloc[-1]

        reference = partial_sum(4.0, 20_000)
        errors = [abs(partial_sum(radius, 4000) - reference) for radius in (0.5, 1.5)]
        assert errors[0] > errors[1]
