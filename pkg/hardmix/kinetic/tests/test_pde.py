"""Tests for `hardmix.kinetic.pde`."""
import numpy as np
import pytest
import warnings

from hardmix.exceptions import (
    HorizonWarning,
    InvalidInputError,
    NegativeDensityWarning,
    NonContractionError,
    ValidationError,
)
from hardmix.kinetic.norms import SolverWeights
from hardmix.kinetic.operators import apply_boltzmann_hierarchy_op
from hardmix.kinetic.pde import (
    GridDensityPair,
    GridFunction,
    PhaseGrid,
    collision_term,
    free_transport,
    read_snapshot,
    snapshot_frame,
    solve_mixture_pde,
    write_snapshot,
    write_snapshot_csv,
)
from hardmix.kinetic.quadrature import CollisionQuadrature
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import GradScaling

MASSES = (1.0, 2.0)
SCALING = GradScaling(c1=1.0, c2=1.0, b=1.0, dim=2)
WEIGHTS = SolverWeights(gamma0=0.25, mu0=0.0, decay=1.0, horizon=0.1)

quad = CollisionQuadrature.default(2, radius=4.0, n_radial=8, sphere_resolution=16)


def _maxwellian(mass, gamma=0.5, amplitude=1.0, drift=(0.0, 0.0)):
    drift = np.asarray(drift)
    return lambda v: amplitude * np.exp(-gamma * mass * np.sum((v - drift) ** 2, -1))


class TestPhaseGrid:
    def test_homogeneous(self):
        grid = PhaseGrid(2, 3.0, 7)
        assert grid.homogeneous
        assert grid.shape == (7, 7)
        assert grid.velocity_points.shape == (7, 7, 2)
        np.testing.assert_allclose(grid.velocity_axis[[0, -1]], [-3.0, 3.0])

    def test_inhomogeneous(self):
        grid = PhaseGrid(2, 1.0, 3, space_extent=2.0, n_space=5)
        assert grid.shape == (5, 5, 3, 3)
        x, v = grid.phase_points()
        assert x.shape == v.shape == (5, 5, 3, 3, 2)
        np.testing.assert_allclose(x[1, 2, 0, 0], [-1.0, 0.0])
        np.testing.assert_allclose(v[4, 4, 2, 1], [1.0, 0.0])

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            PhaseGrid(2, -1.0, 5)
        with pytest.raises(InvalidInputError):
            PhaseGrid(2, 1.0, 5, space_extent=1.0, n_space=1)


class TestGridFunction:
    def test_interpolation(self):
        grid = PhaseGrid(2, 2.0, 5)
        f = GridFunction.from_callable(lambda v: v[..., 0] + 2 * v[..., 1], grid)
        np.testing.assert_allclose(f(np.array([[0.3, -0.7], [1.0, 1.0]])), [-1.1, 3.0])
        assert f(np.array([3.0, 0.0])) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            GridFunction(PhaseGrid(2, 2.0, 5), np.zeros((4, 4)))

    def test_pair_needs_common_grid(self):
        g = GridFunction(PhaseGrid(2, 2.0, 5), np.zeros((5, 5)))
        h = GridFunction(PhaseGrid(2, 2.0, 6), np.zeros((6, 6)))
        with pytest.raises(InvalidInputError):
            GridDensityPair(g, h)


class TestFreeTransport:
    def test_matches_characteristics(self):
        grid = PhaseGrid(2, 1.0, 5, space_extent=2.0, n_space=33)

        def blob(x, v):
            return np.exp(-4.0 * np.sum(x**2, -1)) * (1.0 + 0.0 * v[..., 0])

        f0 = GridFunction.from_callable(blob, grid)
        t = 0.5
        moved = free_transport(f0.values, grid, t)
        x, v = grid.phase_points()
        np.testing.assert_allclose(moved, blob(x - t * v, v), atol=0.05)

    def test_homogeneous_identity(self):
        grid = PhaseGrid(2, 1.0, 5)
        values = np.arange(25.0).reshape(5, 5)
        np.testing.assert_array_equal(free_transport(values, grid, 3.0), values)


class TestSolveMixturePDE:
    grid = PhaseGrid(2, 4.0, 17)

    def _initial(self, g, h, grid=None):
        return GridDensityPair.from_callables(g, h, grid or self.grid)

    def test_zero_data(self):
        zero = lambda v: np.zeros(v.shape[:-1])  # noqa: E731
        solution = solve_mixture_pde(
            self._initial(zero, zero), MASSES, SCALING, WEIGHTS, 0.1, steps=2, quadrature=quad
        )
        assert np.all(solution.g == 0.0) and np.all(solution.h == 0.0)
        assert solution.iterations == 1

    def test_zero_constants_homogeneous(self):
        initial = self._initial(
            _maxwellian(1.0, amplitude=0.1, drift=(0.5, 0.0)), _maxwellian(2.0, amplitude=0.1)
        )
        solution = solve_mixture_pde(
            initial, MASSES, np.zeros((2, 2)), WEIGHTS, 0.1, steps=3, quadrature=quad
        )
        for n in range(len(solution)):
            np.testing.assert_array_equal(solution.g[n], initial.g.values)
            np.testing.assert_array_equal(solution.h[n], initial.h.values)

    def test_zero_constants_transport(self):
        grid = PhaseGrid(2, 1.0, 3, space_extent=2.0, n_space=17)

        def data(x, v):
            return 0.1 * np.exp(-4.0 * np.sum(x**2, -1) - np.sum(v**2, -1))

        initial = GridDensityPair.from_callables(data, data, grid)
        solution = solve_mixture_pde(
            initial, MASSES, np.zeros((2, 2)), WEIGHTS, 0.1, steps=2, quadrature=quad
        )
        x, v = grid.phase_points()
        np.testing.assert_allclose(
            solution.final.g.values, free_transport(initial.g.values, grid, 0.1)
        )
        np.testing.assert_allclose(solution.final.h.values, data(x - 0.1 * v, v), atol=2e-2)

    @pytest.mark.slow
    def test_equilibrium_is_stationary(self):
        initial = self._initial(
            _maxwellian(MASSES[0]), _maxwellian(MASSES[1]), PhaseGrid(2, 4.0, 25)
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonWarning)
            solution = solve_mixture_pde(
                initial, MASSES, SCALING, WEIGHTS, 0.02, steps=2, quadrature=quad
            )
        assert np.max(np.abs(solution.final.g.values - initial.g.values)) <= 1e-2
        assert np.max(np.abs(solution.final.h.values - initial.h.values)) <= 1e-2

    def test_contraction_and_bound(self):
        initial = self._initial(
            _maxwellian(1.0, gamma=1.0, amplitude=0.05, drift=(0.5, 0.0)),
            _maxwellian(2.0, gamma=1.0, amplitude=0.05, drift=(-0.5, 0.0)),
        )
        with warnings.catch_warnings():
            warnings.simplefilter("error", HorizonWarning)
            solution = solve_mixture_pde(
                initial, MASSES, SCALING, WEIGHTS, 0.1, steps=4, quadrature=quad
            )
        assert solution.iterations <= 20
        assert solution.residuals[-1] < 1e-8
        ratios = solution.contraction_ratios
        assert len(ratios) >= 1
        assert np.all(ratios <= 0.9)
        assert solution.bound_ratio <= 2.0 * 1.1
        assert not solution.negative

    def test_horizon_check(self):
        zero = lambda v: np.zeros(v.shape[:-1])  # noqa: E731
        with pytest.raises(InvalidInputError):
            solve_mixture_pde(self._initial(zero, zero), MASSES, SCALING, WEIGHTS, 0.2)

    def test_large_data_warns(self):
        big = _maxwellian(1.0, gamma=1.0, amplitude=5.0)
        with pytest.warns(HorizonWarning):
            solve_mixture_pde(
                self._initial(big, big), MASSES, np.zeros((2, 2)), WEIGHTS, 0.1,
                steps=1, quadrature=quad,
            )

    def test_non_contraction(self):
        initial = self._initial(
            _maxwellian(1.0, amplitude=0.05, drift=(1.0, 0.0)), _maxwellian(2.0, amplitude=0.05)
        )
        with pytest.raises(NonContractionError):
            solve_mixture_pde(
                initial, MASSES, SCALING, WEIGHTS, 0.1, steps=2, quadrature=quad, max_iter=1
            )

    def test_negative_iterates_reported(self):
        # a loss term far larger than the data drives the first iterate negative
        initial = self._initial(
            _maxwellian(1.0, gamma=1.0, amplitude=1e-3, drift=(2.0, 0.0)),
            _maxwellian(2.0, gamma=1.0, amplitude=0.4),
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                solve_mixture_pde(
                    initial, MASSES, 20.0 * np.ones((2, 2)), WEIGHTS, 0.1,
                    steps=2, quadrature=quad, max_iter=3,
                )
            except NonContractionError:
                pass
        assert any(issubclass(w.category, NegativeDensityWarning) for w in caught)


class TestTensorConsistency:
    def test_first_iterate(self):
        """
        For tensor data the Boltzmann hierarchy operators summed over the
        collision species reproduce the first Picard correction.
        """
        grid = PhaseGrid(2, 4.0, 9)
        initial = GridDensityPair.from_callables(
            _maxwellian(1.0, gamma=1.0, drift=(0.5, 0.0)),
            _maxwellian(2.0, gamma=1.0, drift=(0.0, -0.5)),
            grid,
        )
        g, h = initial.g.velocity_profile(), initial.h.velocity_profile()
        n_g, n_h = collision_term(
            initial.g.values, initial.h.values, grid, MASSES, SCALING, quad
        )

        def tensor(s):
            profiles = [g] * s[0] + [h] * s[1]

            def f(x, v):
                return np.prod(
                    [p(v[..., k, :]) for k, p in enumerate(profiles)], axis=0
                )

            return f

        s = (1, 1)
        i, j = (3, 5), (6, 2)
        v = np.stack([grid.velocity_points[i], grid.velocity_points[j]])
        x = np.zeros((2, 2))
        total = 0.0
        for alpha, beta in SpeciesKind.pairs():
            s_next = tuple(c + u for c, u in zip(s, beta.unit))
            total += apply_boltzmann_hierarchy_op(
                tensor(s_next), s, alpha, beta, SCALING, MASSES, quad
            )(x, v)
        expected = n_g[i] * initial.h.values[j] + initial.g.values[i] * n_h[j]
        assert total == pytest.approx(expected, rel=1e-10, abs=1e-13)


class TestSnapshots:
    def _pair(self, grid):
        rng = np.random.default_rng(3)
        return GridDensityPair(
            GridFunction(grid, rng.random(grid.shape)),
            GridFunction(grid, rng.random(grid.shape)),
            t=0.25,
        )

    @pytest.mark.parametrize(
        "grid", [PhaseGrid(2, 3.0, 4), PhaseGrid(2, 1.0, 3, space_extent=2.0, n_space=2)]
    )
    def test_binary(self, tmp_path, grid):
        pair = self._pair(grid)
        back = read_snapshot(write_snapshot(pair, tmp_path / "snap.bin"))
        assert back.grid == grid
        assert back.t == 0.25
        np.testing.assert_array_equal(back.g.values, pair.g.values)
        np.testing.assert_array_equal(back.h.values, pair.h.values)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTASNAP" + bytes(48))
        with pytest.raises(ValidationError):
            read_snapshot(path)

    def test_csv(self, tmp_path):
        grid = PhaseGrid(2, 1.0, 3, space_extent=2.0, n_space=2)
        pair = self._pair(grid)
        frame = snapshot_frame(pair)
        assert list(frame.columns) == ["t", "species", "x0", "x1", "v0", "v1", "value"]
        assert len(frame) == 2 * int(np.prod(grid.shape))
        path = write_snapshot_csv(pair, tmp_path / "snap.csv")
        assert path.read_text().startswith("t,species,x0")
        homogeneous = snapshot_frame(self._pair(PhaseGrid(2, 1.0, 3)))
        assert "x0" not in homogeneous.columns
