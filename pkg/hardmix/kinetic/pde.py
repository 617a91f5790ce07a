"""
Mild solutions of the Boltzmann system for mixtures,

.. math::

    \\partial_t g + v \\cdot \\nabla_x g = A^A_A Q^A_A(g, g) + A^A_B Q^A_B(g, h),
    \\qquad
    \\partial_t h + v \\cdot \\nabla_x h = A^B_A Q^B_A(h, g) + A^B_B Q^B_B(h, h),

by Picard iteration of the Duhamel form

.. math::

    G(t) = S^t G_0 + \\int_0^t S^{t - \\tau} \\mathcal{N} G(\\tau) \\, d\\tau,

where :math:`S^t F(x, v) = F(x - t v, v)` is free transport.

Densities live on a `PhaseGrid`: a Cartesian velocity grid on
:math:`[-R, R]^d`, times a Cartesian space grid on :math:`[-L, L]^d` unless
the grid is space homogeneous.  Transport is semi-Lagrangian, interpolating
linearly at the feet of the characteristics; values leaving the grid are
zero.  The collision term is evaluated with `~hardmix.kinetic.operators.q_kernel`
on the interpolated velocity profiles.

Picard iterates are not clipped.  Negative values are reported with a
`~hardmix.exceptions.NegativeDensityWarning`.
"""
__all__ = [
    "GridDensityPair",
    "GridFunction",
    "PDESolution",
    "PhaseGrid",
    "SolverWeights",
    "collision_term",
    "free_transport",
    "read_snapshot",
    "snapshot_frame",
    "solve_mixture_pde",
    "write_snapshot",
    "write_snapshot_csv",
]

import logging
import numpy as np
import pandas as pd
import warnings

from dataclasses import dataclass, field
from pathlib import Path
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator
from typing import Callable, Optional, Sequence, Tuple, Union

from hardmix.exceptions import (
    HorizonWarning,
    InvalidInputError,
    NegativeDensityWarning,
    NonContractionError,
    ValidationError,
)
from hardmix.kinetic.norms import SolverWeights, pair_norm, trajectory_norm
from hardmix.kinetic.operators import q_kernel
from hardmix.kinetic.quadrature import CollisionQuadrature
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import GradScaling

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PICARD_TOL = 1e-8
"""Picard iteration stops once successive iterates differ by less than this."""

MAX_PICARD_ITERATIONS = 20

GROWTH_LIMIT = 3
"""Consecutive residual increases tolerated before giving up."""

SNAPSHOT_MAGIC = b"HMIXPDE1"


@dataclass(frozen=True)
class PhaseGrid:
    """
    Cartesian grid of phase space.

    Parameters
    ----------
    dim : int

    velocity_extent : float
        Half width :math:`R` of the velocity cube.

    n_velocity : int
        Nodes per velocity axis.

    space_extent : float, optional
        Half width :math:`L` of the space cube; `None` for a space homogeneous
        grid.

    n_space : int
        Nodes per space axis, ignored for homogeneous grids.
    """

    dim: int
    velocity_extent: float
    n_velocity: int
    space_extent: Optional[float] = None
    n_space: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidInputError(f"dim must be >= 2, got {self.dim}")
        if self.velocity_extent <= 0 or self.n_velocity < 2:
            raise InvalidInputError("velocity grid needs a positive extent and 2+ nodes")
        if self.space_extent is not None and (self.space_extent <= 0 or self.n_space < 2):
            raise InvalidInputError("space grid needs a positive extent and 2+ nodes")
        if self.space_extent is None:
            object.__setattr__(self, "n_space", 0)

    @property
    def homogeneous(self) -> bool:
        """`True` if densities do not depend on position."""
        return self.space_extent is None

    @property
    def velocity_axis(self) -> np.ndarray:
        return np.linspace(-self.velocity_extent, self.velocity_extent, self.n_velocity)

    @property
    def space_axis(self) -> np.ndarray:
        if self.homogeneous:
            return np.empty(0)
        return np.linspace(-self.space_extent, self.space_extent, self.n_space)

    @property
    def velocity_shape(self) -> Tuple[int, ...]:
        return (self.n_velocity,) * self.dim

    @property
    def space_shape(self) -> Tuple[int, ...]:
        return () if self.homogeneous else (self.n_space,) * self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the value arrays, space axes first."""
        return self.space_shape + self.velocity_shape

    @property
    def axes(self) -> Tuple[np.ndarray, ...]:
        """One coordinate array per axis of `shape`."""
        space = () if self.homogeneous else (self.space_axis,) * self.dim
        return space + (self.velocity_axis,) * self.dim

    @property
    def velocity_points(self) -> np.ndarray:
        """Velocity nodes, shape ``velocity_shape + (dim,)``."""
        mesh = np.meshgrid(*(self.velocity_axis,) * self.dim, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def space_points(self) -> np.ndarray:
        """Space nodes, shape ``space_shape + (dim,)``."""
        if self.homogeneous:
            return np.zeros((self.dim,))
        mesh = np.meshgrid(*(self.space_axis,) * self.dim, indexing="ij")
        return np.stack(mesh, axis=-1)

    def phase_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Broadcast ``(x, v)`` nodes, each of shape ``shape + (dim,)``."""
        v = self.velocity_points
        if self.homogeneous:
            return np.zeros(v.shape), v
        pad = (None,) * self.dim
        x = self.space_points[(Ellipsis,) + pad + (slice(None),)]
        x, v = np.broadcast_arrays(x, v[pad])
        return x, v


@dataclass(frozen=True)
class GridFunction:
    """
    A density sampled on a `PhaseGrid`.

    Calling it interpolates linearly; points outside the grid give zero.
    Homogeneous grid functions are called with velocities only.
    """

    grid: PhaseGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidInputError(
                f"values of shape {values.shape} do not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, func: Callable, grid: PhaseGrid) -> "GridFunction":
        """Sample ``func(v)`` (homogeneous) or ``func(x, v)`` on ``grid``."""
        if grid.homogeneous:
            return cls(grid, func(grid.velocity_points))
        return cls(grid, func(*grid.phase_points()))

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.min(self.values) >= 0.0)

    def velocity_profile(self, index: Tuple[int, ...] = ()) -> Callable:
        """Interpolant in velocity at the space node ``index``."""
        return RegularGridInterpolator(
            (self.grid.velocity_axis,) * self.grid.dim,
            self.values[tuple(index)],
            bounds_error=False,
            fill_value=0.0,
        )

    def __call__(self, *args) -> np.ndarray:
        interpolant = RegularGridInterpolator(
            self.grid.axes, self.values, bounds_error=False, fill_value=0.0
        )
        if self.grid.homogeneous:
            (v,) = args[-1:]
            return interpolant(np.asarray(v, dtype=float))
        x, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
        return interpolant(np.concatenate([x, v], axis=-1))


@dataclass(frozen=True)
class GridDensityPair:
    """The species densities :math:`(g, h)` at time ``t``."""

    g: GridFunction
    h: GridFunction
    t: float = 0.0

    def __post_init__(self):
        if self.g.grid != self.h.grid:
            raise InvalidInputError("g and h must live on the same grid")

    @property
    def grid(self) -> PhaseGrid:
        return self.g.grid

    @classmethod
    def from_callables(cls, g, h, grid: PhaseGrid, t: float = 0.0) -> "GridDensityPair":
        return cls(GridFunction.from_callable(g, grid), GridFunction.from_callable(h, grid), t)


def _kernel_table(constants) -> np.ndarray:
    if isinstance(constants, GradScaling):
        return constants.kernel_table
    table = np.asarray(constants, dtype=float)
    if table.shape != (2, 2) or np.any(table < 0):
        raise InvalidInputError("kernel constants must be a nonnegative 2x2 table")
    return table


def free_transport(values: np.ndarray, grid: PhaseGrid, t: float) -> np.ndarray:
    """
    :math:`S^t F(x, v) = F(x - t v, v)` on the grid.  The identity for
    homogeneous grids.
    """
    values = np.asarray(values, dtype=float)
    if grid.homogeneous or t == 0:
        return values.copy()
    x, v = grid.phase_points()
    interpolant = RegularGridInterpolator(
        grid.axes, values, bounds_error=False, fill_value=0.0
    )
    return interpolant(np.concatenate([x - t * v, v], axis=-1))


def collision_term(
    g: np.ndarray,
    h: np.ndarray,
    grid: PhaseGrid,
    masses: Sequence[float],
    constants,
    quadrature: CollisionQuadrature,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    The nonlinearity :math:`\\mathcal{N}(g, h)`: for each species
    :math:`\\sum_\\beta A^\\alpha_\\beta Q^\\alpha_\\beta` evaluated at every
    grid node.

    ``constants`` is a `~hardmix.scaling.GradScaling` or a 2x2 table
    indexed ``[alpha, beta]``; pairs with a zero constant are skipped.
    """
    table = _kernel_table(constants)
    densities = (GridFunction(grid, g), GridFunction(grid, h))
    v = grid.velocity_points
    out = (np.zeros(grid.shape), np.zeros(grid.shape))
    for index in np.ndindex(*grid.space_shape):
        profiles = [d.velocity_profile(index) for d in densities]
        for alpha, beta in SpeciesKind.pairs():
            constant = table[int(alpha), int(beta)]
            if constant == 0.0:
                continue
            out[int(alpha)][index] += constant * q_kernel(
                profiles[int(alpha)],
                profiles[int(beta)],
                alpha,
                beta,
                v,
                masses,
                quadrature,
            )
    return out


def _duhamel_integral(
    source: np.ndarray, times: np.ndarray, grid: PhaseGrid
) -> np.ndarray:
    """:math:`\\int_0^{t_n} S^{t_n - \\tau} F(\\tau) d\\tau` by the trapezoid rule."""
    if grid.homogeneous:
        return cumulative_trapezoid(source, times, axis=0, initial=0.0)
    out = np.zeros_like(source)
    for n in range(1, len(times)):
        dt = np.diff(times[: n + 1])
        w = np.zeros(n + 1)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
        for m in range(n + 1):
            out[n] += w[m] * free_transport(source[m], grid, times[n] - times[m])
    return out


@dataclass(frozen=True)
class PDESolution:
    """
    A trajectory of the Boltzmann system for mixtures on a `PhaseGrid`.

    ``g`` and ``h`` have shape ``(len(times),) + grid.shape``.  ``residuals``
    holds the weighted distance between successive Picard iterates and
    ``bound_ratio`` the ratio :math:`\\|G\\| / |G_0|`.
    """

    grid: PhaseGrid
    times: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    iterations: int
    residuals: Tuple[float, ...]
    bound_ratio: float
    negative: bool

    def __len__(self):
        return len(self.times)

    def at(self, n: int) -> GridDensityPair:
        """The densities at the ``n``-th time node."""
        return GridDensityPair(
            GridFunction(self.grid, self.g[n]),
            GridFunction(self.grid, self.h[n]),
            float(self.times[n]),
        )

    @property
    def final(self) -> GridDensityPair:
        return self.at(len(self.times) - 1)

    @property
    def contraction_ratios(self) -> np.ndarray:
        """Ratios of successive Picard residuals."""
        r = np.asarray(self.residuals)
        if r.size < 2:
            return np.empty(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return r[1:] / r[:-1]


def _warn_negative(iteration: int, minimum: float):
    message = (
        f"Picard iterate {iteration} takes negative values (min {minimum:.3e}); "
        f"values are kept as computed"
    )
    logger.warning(message)
    warnings.warn(message, NegativeDensityWarning, stacklevel=3)


def solve_mixture_pde(
    initial: GridDensityPair,
    masses: Sequence[float],
    constants,
    weights: SolverWeights,
    t_end: float,
    steps: int = 10,
    quadrature: Optional[CollisionQuadrature] = None,
    tol: float = PICARD_TOL,
    max_iter: int = MAX_PICARD_ITERATIONS,
) -> PDESolution:
    """
    Solve the Boltzmann system for mixtures on ``[0, t_end]`` by Picard
    iteration of the mild form.

    Parameters
    ----------
    initial : `GridDensityPair`
        Data :math:`(g_0, h_0)`.

    masses : pair of float

    constants : `~hardmix.scaling.GradScaling` or array_like
        Kernel constants :math:`A^\\alpha_\\beta`, or a 2x2 table of them.

    weights : `~hardmix.kinetic.norms.SolverWeights`
        Norm weights; ``t_end`` must not exceed ``weights.horizon``.

    t_end : float

    steps : int
        Number of time steps of the trapezoid rule.

    quadrature : `~hardmix.kinetic.quadrature.CollisionQuadrature`, optional
        Defaults to the standard rules on the ball inscribed in the velocity
        cube.

    tol : float
        Stopping tolerance on the weighted distance of successive iterates.

    max_iter : int

    Raises
    ------
    `~hardmix.exceptions.NonContractionError`
        If the residual grows for `GROWTH_LIMIT` consecutive iterations or
        ``max_iter`` iterations do not reach ``tol``.

    Warns
    -----
    `~hardmix.exceptions.HorizonWarning`
        If the data exceed the smallness condition
        :math:`|G_0|_{\\gamma_0, \\mu_0 + 1} \\leq 1/2`.

    `~hardmix.exceptions.NegativeDensityWarning`
        If an iterate takes negative values.
    """
    grid = initial.grid
    if not 0.0 < t_end <= weights.horizon:
        raise InvalidInputError(
            f"t_end = {t_end} must lie in (0, {weights.horizon}] for these weights"
        )
    if steps < 1 or max_iter < 1:
        raise InvalidInputError("steps and max_iter must be positive")
    table = _kernel_table(constants)
    if quadrature is None:
        quadrature = CollisionQuadrature.default(grid.dim, grid.velocity_extent)

    v = grid.velocity_points
    g0, h0 = initial.g.values, initial.h.values
    smallness = pair_norm(g0, h0, v, masses, weights.gamma0, weights.mu0 + 1.0)
    if smallness > 0.5:
        message = (
            f"|G0| = {smallness:.3g} exceeds 1/2 in the (gamma0, mu0 + 1) norm; "
            f"the horizon may be beyond the local existence time"
        )
        logger.warning(message)
        warnings.warn(message, HorizonWarning, stacklevel=2)

    times = np.linspace(0.0, t_end, steps + 1)
    free_g = np.stack([free_transport(g0, grid, t) for t in times])
    free_h = np.stack([free_transport(h0, grid, t) for t in times])
    g, h = free_g.copy(), free_h.copy()

    residuals = []
    negative = False
    growth = 0
    for iteration in range(1, max_iter + 1):
        terms = [
            collision_term(g[n], h[n], grid, masses, table, quadrature)
            for n in range(len(times))
        ]
        g_next = free_g + _duhamel_integral(np.stack([t[0] for t in terms]), times, grid)
        h_next = free_h + _duhamel_integral(np.stack([t[1] for t in terms]), times, grid)
        residual = trajectory_norm(g_next - g, h_next - h, times, v, masses, weights)
        logger.debug("Picard iteration %d: residual %.3e", iteration, residual)
        growth = growth + 1 if residuals and residual > residuals[-1] else 0
        residuals.append(residual)
        g, h = g_next, h_next

        minimum = min(np.min(g), np.min(h))
        if minimum < 0.0 and not negative:
            negative = True
            _warn_negative(iteration, minimum)
        if residual < tol:
            break
        if growth >= GROWTH_LIMIT:
            raise NonContractionError(
                f"Picard residual grew for {growth} consecutive iterations "
                f"(last {residual:.3e}); choose a smaller t_end than {t_end}"
            )
    else:
        raise NonContractionError(
            f"Picard iteration did not reach {tol:.1e} in {max_iter} iterations "
            f"(last residual {residuals[-1]:.3e}); choose a smaller t_end than {t_end}"
        )

    data_norm = pair_norm(g0, h0, v, masses, weights.gamma0, weights.mu0)
    solution_norm = trajectory_norm(g, h, times, v, masses, weights)
    bound_ratio = solution_norm / data_norm if data_norm > 0 else 0.0
    logger.info(
        "Picard converged in %d iterations, |G| / |G0| = %.3f", iteration, bound_ratio
    )
    return PDESolution(
        grid=grid,
        times=times,
        g=g,
        h=h,
        iterations=iteration,
        residuals=tuple(residuals),
        bound_ratio=bound_ratio,
        negative=negative,
    )


def snapshot_frame(pair: GridDensityPair) -> pd.DataFrame:
    """
    Long-form table of a snapshot with columns ``t, species, x0.., v0..,
    value``; the position columns are absent for homogeneous grids.
    """
    grid = pair.grid
    x, v = grid.phase_points()
    frames = []
    for kind, density in zip(SpeciesKind, (pair.g, pair.h)):
        columns = {"t": pair.t, "species": kind.tag}
        if not grid.homogeneous:
            columns.update({f"x{k}": x[..., k].ravel() for k in range(grid.dim)})
        columns.update({f"v{k}": v[..., k].ravel() for k in range(grid.dim)})
        columns["value"] = density.values.ravel()
        frames.append(pd.DataFrame(columns))
    return pd.concat(frames, ignore_index=True)


def write_snapshot_csv(pair: GridDensityPair, path: PathLike) -> Path:
    """Write `snapshot_frame` of ``pair`` as CSV."""
    path = Path(path)
    snapshot_frame(pair).to_csv(path, index=False, float_format="%.17g")
    return path


def write_snapshot(pair: GridDensityPair, path: PathLike) -> Path:
    """
    Write ``pair`` in the self-describing binary layout: the magic
    ``b"HMIXPDE1"``, ``int64`` values ``(d, n_space, n_velocity)`` (``n_space``
    zero for homogeneous grids), ``float64`` values ``(t, L, R)``, then the
    values of ``g`` and of ``h`` in C order.
    """
    path = Path(path)
    grid = pair.grid
    header = np.array([grid.dim, grid.n_space, grid.n_velocity], dtype="<i8")
    extents = np.array(
        [pair.t, grid.space_extent or 0.0, grid.velocity_extent], dtype="<f8"
    )
    with open(path, "wb") as handle:
        handle.write(SNAPSHOT_MAGIC)
        handle.write(header.tobytes())
        handle.write(extents.tobytes())
        handle.write(np.ascontiguousarray(pair.g.values, dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(pair.h.values, dtype="<f8").tobytes())
    return path


def read_snapshot(path: PathLike) -> GridDensityPair:
    """Read a snapshot written by `write_snapshot`."""
    raw = Path(path).read_bytes()
    if raw[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ValidationError(f"{path}: not a hardmix density snapshot")
    offset = len(SNAPSHOT_MAGIC)
    dim, n_space, n_velocity = (
        int(n) for n in np.frombuffer(raw, dtype="<i8", count=3, offset=offset)
    )
    offset += 24
    t, space_extent, velocity_extent = np.frombuffer(
        raw, dtype="<f8", count=3, offset=offset
    )
    offset += 24
    grid = PhaseGrid(
        dim,
        float(velocity_extent),
        n_velocity,
        float(space_extent) if n_space else None,
        n_space,
    )
    size = int(np.prod(grid.shape))
    if len(raw) != offset + 16 * size:
        raise ValidationError(f"{path}: payload does not match the header")
    values = np.frombuffer(raw, dtype="<f8", count=2 * size, offset=offset)
    g, h = values[:size].reshape(grid.shape), values[size:].reshape(grid.shape)
    return GridDensityPair(GridFunction(grid, g), GridFunction(grid, h), float(t))
