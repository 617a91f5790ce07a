"""Tests for `hardmix.chaos.metrics`."""
import logging
import numpy as np
import pytest

from hardmix.chaos.marginals import HistogramGrid, estimate_marginal, l1_distance
from hardmix.chaos.metrics import (
    CHAOS_COLUMNS,
    ChaosPoint,
    chaos_metric,
    conditioned_ensemble,
    conditioned_initial_sampler,
    default_box,
    evolve_ensemble,
    good_config_check,
    probe_points,
    species_covariance,
)
from hardmix.chaos.observables import ObservableSpec, VelocityGaussian, VelocityPolynomial
from hardmix.dynamics.sampling import MaxwellianDensity, estimate_partition_function
from hardmix.exceptions import InvalidInputError, InvalidStateError, ValidationError
from hardmix.kinetic.pde import GridDensityPair, PhaseGrid
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import MixtureParams
from hardmix.scaling import GradScaling, realize

PARAMS = MixtureParams(2, mass=(1.0, 1.0), diameter=(0.1, 0.1))


def _pair(va, vb, xb=(2.0, 0.0)):
    return Configuration([[0.0, 0.0]], [va], [xb], [vb])


class TestGoodConfigCheck:
    def test_static_and_separated(self):
        report = good_config_check(_pair((0.0, 0.0), (0.0, 0.0)), 0.5, 0.0, 10.0, PARAMS)
        assert report
        assert report.checked >= 1

    def test_pair_closing_backward(self):
        # forward the pair separates, so the backward flow closes it
        z = _pair((-1.0, 0.0), (1.0, 0.0))
        report = good_config_check(z, 0.5, 0.0, 1.0, PARAMS)
        assert not report
        assert not report.indeterminate
        assert 0.75 - 1e-9 <= report.violation_time <= 0.875

    def test_pair_closing_forward_is_good(self):
        z = _pair((1.0, 0.0), (-1.0, 0.0))
        assert good_config_check(z, 0.5, 0.0, 1.0, PARAMS)

    def test_window_starts_at_t0(self):
        z = _pair((1.0, 0.0), (-1.0, 0.0), xb=(0.3, 0.0))
        assert not good_config_check(z, 0.5, 0.0, 1.0, PARAMS)
        assert good_config_check(z, 0.5, 0.2, 1.0, PARAMS)

    def test_zero_theta_always_good(self):
        z = _pair((-1.0, 0.0), (1.0, 0.0))
        assert good_config_check(z, 0.0, 0.0, 5.0, PARAMS)

    def test_dip_between_sample_times(self):
        # the pair dips to 0.498 < theta for less than 0.1 time units
        z = _pair((0.0, 0.0), (-1.0, 0.0), xb=(-5.0625, 0.498))
        report = good_config_check(z, 0.5, 0.0, 10.0, PARAMS)
        assert not report
        assert not report.indeterminate
        expected = 5.0625 - np.sqrt(0.5**2 - 0.498**2)
        assert report.violation_time == pytest.approx(expected, rel=1e-9)

    def test_violation_after_collision(self):
        # backward, A meets B0 at u = 0.95 and then runs into the resting B1
        z = Configuration(
            [[0.0, 0.0]], [[-1.0, 0.0]], [[2.0, 0.0], [-0.5, 0.0]], [[1.0, 0.0], [0.0, 0.0]]
        )
        assert good_config_check(z, 0.2, 0.0, 3.0, PARAMS).violation_time == pytest.approx(0.9)
        report = good_config_check(z, 0.2, 1.2, 3.0, PARAMS)
        assert not report
        assert report.checked == 1
        assert report.violation_time == pytest.approx(2.2, abs=1e-9)

    def test_pathology_is_indeterminate(self):
        # the backward collision exhausts a zero event budget
        z = _pair((-1.0, 0.0), (1.0, 0.0))
        report = good_config_check(z, 0.05, 0.0, 1.5, PARAMS, budget=0)
        assert not report
        assert report.indeterminate

    def test_overlap(self):
        with pytest.raises(InvalidStateError):
            good_config_check(_pair((0.0, 0.0), (0.0, 0.0), xb=(0.05, 0.0)), 0.5, 0.0, 1.0, PARAMS)

    @pytest.mark.parametrize("theta,t0,horizon", [(-0.1, 0.0, 1.0), (0.1, 2.0, 1.0)])
    def test_invalid(self, theta, t0, horizon):
        with pytest.raises(InvalidInputError):
            good_config_check(_pair((0.0, 0.0), (0.0, 0.0)), theta, t0, horizon, PARAMS)


def _maxwellians(spread=0.5, profile="gaussian"):
    return (
        MaxwellianDensity(2, mass=1.0, spread=spread, profile=profile),
        MaxwellianDensity(2, mass=1.0, spread=spread, profile=profile),
    )


class TestConditionedSampling:
    def test_tiny_diameters_accept_at_once(self):
        realized = realize(GradScaling(1e-8, 1e-8, 1.0, 2), 1)
        g0, h0 = _maxwellians()
        for seed in range(10):
            sampled = conditioned_initial_sampler(g0, h0, realized, seed=seed)
            assert sampled.attempts == 1
            assert sampled.configuration.counts == (1, 1)

    def test_logs_partition_estimate(self, caplog):
        realized = realize(GradScaling(0.3, 0.3, 1.0, 2), 3)
        with caplog.at_level(logging.INFO, logger="hardmix.chaos.metrics"):
            conditioned_ensemble(*_maxwellians(), realized, 20, seed=0)
        assert "Z_N estimate" in caplog.text

    def test_dimension_mismatch(self):
        realized = realize(GradScaling(1.0, 1.0, 1.0, 3), 4)
        with pytest.raises(InvalidInputError):
            conditioned_initial_sampler(*_maxwellians(), realized)

    def test_partition_function_monotone_in_eps(self):
        densities = _maxwellians()
        box = default_box(densities)
        values = []
        for eps in (0.02, 0.05, 0.1):
            realized = realize(GradScaling(10 * eps, 10 * eps, 1.0, 2), 10)
            params = realized.params((1.0, 1.0))
            estimate = estimate_partition_function(
                densities, params, realized.counts, box, trials=2000, seed=3
            )
            values.append(estimate.value)
        assert values[0] >= values[1] >= values[2]
        assert values[0] > values[2]

    def test_marginal_defect_shrinks_with_eps(self):
        g0, h0 = _maxwellians()
        grid = HistogramGrid(2, space_extent=1.5, space_bins=6, velocity_extent=4.0, velocity_bins=1)

        def spatial(x, v):
            return g0.spatial_density(x[..., 0, :]) / grid.velocity_cell_volume

        gaps = []
        for eps in (0.35, 0.2, 0.05):
            realized = realize(GradScaling(3 * eps, 3 * eps, 1.0, 2), 3)
            ensemble = conditioned_ensemble(g0, h0, realized, 4000, seed=13)
            estimate = estimate_marginal(ensemble, (1, 0), grid, permutations=3, seed=14)
            gaps.append(l1_distance(estimate, spatial))
        assert gaps[0] > gaps[1] > gaps[2]


def test_default_box_holds_densities():
    g0 = MaxwellianDensity(2, spread=0.5, center=[1.0, 0.0], drift=[0.0, 2.0])
    h0 = MaxwellianDensity(2, mass=4.0, spread=1.0, profile="uniform")
    box = default_box((g0, h0))
    assert box.half_width == pytest.approx(4.0)
    assert box.velocity_bound == pytest.approx(2.0 + 10.0 / np.sqrt(2.0))


class TestEvolveEnsemble:
    def test_free_flight(self):
        z = Configuration([[0.0, 0.0]], [[1.0, 2.0]], [], [])
        evolved = evolve_ensemble([z, z], 0.5, PARAMS)
        assert len(evolved) == 2
        assert evolved.pathological == 0
        np.testing.assert_allclose(evolved.configurations[0].x, [[0.5, 1.0]])

    def test_pathological_dropped(self):
        colliding = _pair((1.0, 0.0), (-1.0, 0.0))
        free = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [], [])
        evolved = evolve_ensemble([colliding, free], 2.0, PARAMS, budget=0)
        assert len(evolved) == 1
        assert evolved.pathological == 1

    def test_threads(self):
        realized = realize(GradScaling(0.5, 0.5, 1.0, 2), 4)
        ensemble = conditioned_ensemble(*_maxwellians(), realized, 12, seed=5)
        params = realized.params((1.0, 1.0))
        one = evolve_ensemble(ensemble, 0.3, params)
        four = evolve_ensemble(ensemble, 0.3, params, threads=4)
        assert one.configurations == four.configurations


class TestSpeciesCovariance:
    def test_independent_velocities(self):
        realized = realize(GradScaling(0.5, 0.5, 1.0, 2), 4)
        ensemble = conditioned_ensemble(*_maxwellians(), realized, 1000, seed=6)
        estimate = species_covariance(ensemble, lambda v: v[:, 0], lambda v: v[:, 0])
        assert estimate.samples == 1000
        assert abs(estimate.value) <= 4 * estimate.stderr

    def test_detects_correlation(self):
        rng = np.random.default_rng(7)
        ensemble = []
        for _ in range(2000):
            v = rng.standard_normal((1, 2))
            ensemble.append(Configuration([[0.0, 0.0]], v, [[1.0, 0.0]], v))
        estimate = species_covariance(ensemble, lambda v: v[:, 0], lambda v: v[:, 0])
        assert estimate.value == pytest.approx(1.0, abs=0.1)

    def test_needs_both_species(self):
        z = Configuration([[0.0, 0.0]], [[0.0, 0.0]], [], [])
        with pytest.raises(ValidationError):
            species_covariance([z, z], np.sum, np.sum)

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError):
            species_covariance([_pair((0.0, 0.0), (0.0, 0.0))], np.sum, np.sum)


class TestProbePoints:
    def test_shape_and_separation(self):
        spec = ObservableSpec((1, 1), VelocityGaussian((1, 1), 2), separation=0.3)
        points = probe_points(spec, 1.0, 64, seed=0)
        assert points.shape == (64, 2, 2)
        assert np.all(np.abs(points) <= 1.0)
        assert np.all(np.linalg.norm(points[:, 0] - points[:, 1], axis=-1) > 0.3)

    def test_reproducible(self):
        spec = ObservableSpec((2, 0), VelocityGaussian((2, 0), 2), separation=0.1)
        np.testing.assert_array_equal(
            probe_points(spec, 1.0, 16, seed=4), probe_points(spec, 1.0, 16, seed=4)
        )

    def test_warns_when_short(self, caplog):
        spec = ObservableSpec((1, 1), VelocityGaussian((1, 1), 2), separation=10.0)
        with caplog.at_level(logging.WARNING, logger="hardmix.chaos.metrics"):
            points = probe_points(spec, 1.0, 8, seed=0)
        assert len(points) == 0
        assert "probe points" in caplog.text


def _iid_point(realized, size, seed, density):
    x, v = density.sample(np.random.default_rng(seed), size)
    ensemble = [Configuration(x[i : i + 1], v[i : i + 1], [], []) for i in range(size)]
    return ChaosPoint(realized, ensemble)


class TestChaosMetric:
    GRID = HistogramGrid(2, space_extent=1.0, space_bins=4, velocity_extent=4.0, velocity_bins=8)

    def test_noise_shrinks_with_ensemble_size(self):
        g0 = MaxwellianDensity(2, spread=1.0, profile="uniform")
        realized = realize(GradScaling(1.0, 1.0, 1.0, 2), 100)
        points = [_iid_point(realized, size, size, g0) for size in (100, 1000, 10_000)]
        spec = ObservableSpec((1, 0), VelocityPolynomial.constant((1, 0), 2), spec_id="density")
        report = chaos_metric(points, (g0, g0), [spec], 0.0, self.GRID, seed=1)
        gaps = report.table["gap"].to_numpy()
        assert gaps[0] > gaps[1] > gaps[2]
        assert np.all(report.table["stderr"] > 0)

    def test_table_columns(self):
        g0 = MaxwellianDensity(2, spread=1.0, profile="uniform")
        points = [
            _iid_point(realize(GradScaling(1.0, 1.0, 1.0, 2), n2), 50, n2, g0)
            for n2 in (10, 20, 40)
        ]
        specs = [
            ObservableSpec((1, 0), VelocityPolynomial.constant((1, 0), 2), spec_id="one"),
            ObservableSpec((1, 0), VelocityGaussian((1, 0), 2), spec_id="gauss"),
        ]
        report = chaos_metric(points, (g0, g0), specs, 0.25, self.GRID, probes=8, seed=2)
        assert list(report.table.columns) == CHAOS_COLUMNS
        assert len(report.table) == 6
        assert report.table["N2"].tolist() == [10, 20, 40, 10, 20, 40]
        assert report.table["eps2"].iloc[0] == pytest.approx(0.1)
        assert set(report.slopes) == {"one", "gauss"}
        assert np.all(report.table["t"] == 0.25)

    def test_deterministic(self, tmp_path):
        g0 = MaxwellianDensity(2, spread=1.0, profile="uniform")
        realized = realize(GradScaling(1.0, 1.0, 1.0, 2), 10)
        points = [_iid_point(realized, 200, 0, g0)]
        spec = ObservableSpec((1, 0), VelocityGaussian((1, 0), 2))
        first = chaos_metric(points, (g0, g0), [spec], 0.0, self.GRID, probes=8, seed=3)
        second = chaos_metric(points, (g0, g0), [spec], 0.0, self.GRID, probes=8, seed=3)
        a = first.write_csv(tmp_path / "a.csv").read_bytes()
        b = second.write_csv(tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_scalings_must_agree(self):
        g0 = MaxwellianDensity(2)
        points = [
            _iid_point(realize(GradScaling(1.0, 1.0, 1.0, 2), 10), 5, 0, g0),
            _iid_point(realize(GradScaling(2.0, 2.0, 1.0, 2), 10), 5, 0, g0),
        ]
        spec = ObservableSpec((1, 0), VelocityGaussian((1, 0), 2))
        with pytest.raises(ValidationError):
            chaos_metric(points, (g0, g0), [spec], 0.0, self.GRID)

    def test_homogeneous_reference_refused(self):
        g0 = MaxwellianDensity(2)
        grid = PhaseGrid(2, velocity_extent=3.0, n_velocity=9)
        pair = GridDensityPair.from_callables(g0.velocity_density, g0.velocity_density, grid)
        points = [_iid_point(realize(GradScaling(1.0, 1.0, 1.0, 2), 10), 5, 0, g0)]
        spec = ObservableSpec((1, 0), VelocityGaussian((1, 0), 2))
        with pytest.raises(ValidationError):
            chaos_metric(points, pair, [spec], 0.0, self.GRID)

    def test_needs_points(self):
        spec = ObservableSpec((1, 0), VelocityGaussian((1, 0), 2))
        with pytest.raises(ValidationError):
            chaos_metric([], None, [spec], 0.0, self.GRID)

    def test_probe_extent_inside_grid(self):
        g0 = MaxwellianDensity(2)
        points = [_iid_point(realize(GradScaling(1.0, 1.0, 1.0, 2), 10), 5, 0, g0)]
        spec = ObservableSpec((1, 0), VelocityGaussian((1, 0), 2))
        with pytest.raises(InvalidInputError):
            chaos_metric(points, (g0, g0), [spec], 0.0, self.GRID, probe_extent=2.0)

    def test_evolved_ensembles(self):
        g0, h0 = _maxwellians()
        grid = HistogramGrid(2, space_extent=1.5, space_bins=3, velocity_extent=4.0, velocity_bins=4)
        spec = ObservableSpec(
            (1, 1),
            VelocityPolynomial((1, 1), 2, [(1.0, [[0, 0], [0, 0]])]),
            separation=0.2,
            spec_id="pair-density",
        )
        points = []
        for n2 in (4, 8):
            realized = realize(GradScaling(0.5, 0.5, 1.0, 2), n2)
            ensemble = conditioned_ensemble(g0, h0, realized, 30, seed=n2)
            evolved = evolve_ensemble(ensemble, 0.05, realized.params((1.0, 1.0)))
            points.append(ChaosPoint(realized, evolved.configurations))
        report = chaos_metric(points, (g0, h0), [spec], 0.05, grid, probes=8, seed=9)
        assert len(report.table) == 2
        assert np.all(np.isfinite(report.table["gap"]))


@pytest.mark.slow
def test_conditioning_gap_decreases_along_scaling():
    g0, h0 = _maxwellians()
    grid = HistogramGrid(2, space_extent=1.5, space_bins=6, velocity_extent=3.0, velocity_bins=8)
    specs = [
        ObservableSpec((1, 0), VelocityPolynomial.constant((1, 0), 2), spec_id="density"),
        ObservableSpec((1, 0), VelocityGaussian((1, 0), 2), spec_id="gauss"),
    ]
    points = []
    for n2 in (2, 6, 18):
        realized = realize(GradScaling(1.0, 1.0, 1.0, 2), n2)
        ensemble = conditioned_ensemble(g0, h0, realized, 4000, seed=n2)
        points.append(ChaosPoint(realized, ensemble.configurations))
    report = chaos_metric(points, (g0, h0), specs, 0.0, grid, seed=10)
    assert report.is_decreasing("density")
    assert report.is_decreasing("gauss")
    assert report.slopes["density"] > 0
