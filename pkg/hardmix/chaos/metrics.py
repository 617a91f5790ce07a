"""
Propagation-of-chaos diagnostics: conditioned initial ensembles, backward
goodness of configurations, the covariance between species, and the gap
between ensemble observables and the tensor product of the kinetic solution.
"""
__all__ = [
    "ChaosPoint",
    "ChaosReport",
    "CovarianceEstimate",
    "EvolvedEnsemble",
    "GoodnessReport",
    "chaos_metric",
    "conditioned_ensemble",
    "conditioned_initial_sampler",
    "default_box",
    "evolve_ensemble",
    "good_config_check",
    "probe_points",
    "species_covariance",
]

import logging
import numpy as np
import pandas as pd

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from scipy.spatial.distance import pdist
from scipy.special import roots_legendre
from scipy.stats import linregress, qmc
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from hardmix.chaos.marginals import (
    DEFAULT_PERMUTATIONS,
    HistogramGrid,
    estimate_marginal,
)
from hardmix.chaos.observables import (
    ObservableSpec,
    histogram_observable,
    one_particle_integrals,
)
from hardmix.dynamics.flow import DEFAULT_EVENT_BUDGET, SimBox, advance
from hardmix.dynamics.sampling import (
    DEFAULT_ACCEPTANCE_FLOOR,
    Ensemble,
    MaxwellianDensity,
    SampledConfiguration,
    sample_configuration,
    sample_ensemble,
)
from hardmix.exceptions import InvalidInputError, InvalidStateError, ValidationError
from hardmix.kinetic.pde import GridDensityPair
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import MixtureParams, SpeciesKind
from hardmix.scaling import RealizedScaling
from hardmix.utils import SeedLike, make_rng, spawn_seeds

logger = logging.getLogger(__name__)

DEFAULT_PROBES = 64
"""Size of the Latin-hypercube probe set of `chaos_metric`."""

CHAOS_COLUMNS = ["N1", "N2", "eps1", "eps2", "spec_id", "t", "gap", "stderr"]


@dataclass(frozen=True)
class GoodnessReport:
    """
    Outcome of `good_config_check`.  The report is truthy when the
    configuration is good; ``indeterminate`` flags a backward flow that hit a
    pathology before the check finished.
    """

    good: bool
    indeterminate: bool = False
    violation_time: Optional[float] = None
    checked: int = 0

    def __bool__(self):
        return self.good


def _first_within(x: np.ndarray, v: np.ndarray, duration: float, theta: float) -> Optional[float]:
    """
    Earliest backward time in ``[0, duration]`` at which a pair of free
    flights ``x - u v`` comes within ``theta``, or `None`.
    """
    iu, ju = np.triu_indices(x.shape[0], k=1)
    dx = x[iu] - x[ju]
    dv = v[iu] - v[ju]
    a = np.einsum("ij,ij->i", dv, dv)
    b = np.einsum("ij,ij->i", dx, dv)
    c = np.einsum("ij,ij->i", dx, dx) - theta**2
    if np.any(c <= 0):
        return 0.0
    disc = b * b - a * c
    closing = (b > 0) & (disc >= 0)
    if not np.any(closing):
        return None
    roots = c[closing] / (b[closing] + np.sqrt(disc[closing]))
    first = float(roots.min())
    return first if first <= duration else None


def good_config_check(
    z: Configuration,
    theta: float,
    t0: float,
    horizon: float,
    params: MixtureParams,
    budget: int = DEFAULT_EVENT_BUDGET,
) -> GoodnessReport:
    """
    Check that the backward flow :math:`Z(-t)` keeps all centers more than
    ``theta`` apart for every ``t`` in ``[t0, horizon]``.

    The backward trajectory is replayed one free flight at a time and each
    flight is tested at the exact closest approach of every pair.

    Parameters
    ----------
    z : `~hardmix.mixture.configuration.Configuration`

    theta : float
        Required separation of centers.

    t0, horizon : float
        The checked window of backward times, ``0 <= t0 <= horizon``.

    params : `~hardmix.mixture.species.MixtureParams`

    budget : int
        Event budget of the backward flow.

    Returns
    -------
    `GoodnessReport`
        ``violation_time`` is the first backward time at which a pair is
        within ``theta``; ``checked`` counts the free flights examined.

    Raises
    ------
    `~hardmix.exceptions.InvalidStateError`
        If ``z`` is not in the phase space.
    """
    if theta < 0:
        raise InvalidInputError(f"theta must be non-negative, got {theta}")
    if not 0.0 <= t0 <= horizon:
        raise InvalidInputError(f"need 0 <= t0 <= horizon, got t0={t0}, horizon={horizon}")
    if not z.in_phase_space(params):
        raise InvalidStateError("configuration has overlapping particles")
    if theta == 0.0 or z.size < 2:
        return GoodnessReport(True)

    result = advance(z, -horizon, params, budget)
    end = horizon if result.ok else -result.pathology.time
    # backward events from the latest; a flight from backward time u is x - (s - u) v
    breaks = [(-event.time, event) for event in reversed(result.events)]
    breaks.append((end, None))

    x, v = np.array(z.x), np.array(z.v)
    u, checked = 0.0, 0
    for until, event in breaks:
        lo = max(u, t0)
        if until > lo or (event is None and until >= lo):
            checked += 1
            hit = _first_within(x - (lo - u) * v, v, until - lo, theta)
            if hit is not None:
                return GoodnessReport(False, violation_time=lo + hit, checked=checked)
        x = x - (until - u) * v
        u = until
        if event is not None:
            for ref, pre in zip(event.pair, event.pre):
                v[z.stacked_index(ref)] = pre

    if not result.ok:
        logger.debug("backward flow met %s", result.pathology)
        return GoodnessReport(False, indeterminate=True, checked=checked)
    return GoodnessReport(True, checked=checked)


def default_box(densities: Sequence[MaxwellianDensity]) -> SimBox:
    """A box holding all but a negligible part of the densities' mass."""
    half_width = 0.0
    velocity_bound = 0.0
    for density in densities:
        reach = 6.0 * density.spread if density.profile == "gaussian" else density.spread
        half_width = max(half_width, float(np.max(np.abs(density.center))) + reach)
        velocity_bound = max(
            velocity_bound,
            float(np.linalg.norm(density.drift)) + 10.0 * density.velocity_std,
        )
    return SimBox(half_width, velocity_bound)


def _mixture(g0: MaxwellianDensity, h0: MaxwellianDensity, realized: RealizedScaling):
    if g0.dim != realized.dim or h0.dim != realized.dim:
        raise InvalidInputError(
            f"densities must be {realized.dim}-dimensional like the scaling"
        )
    return realized.params((g0.mass, h0.mass))


def conditioned_initial_sampler(
    g0: MaxwellianDensity,
    h0: MaxwellianDensity,
    realized: RealizedScaling,
    seed: SeedLike = None,
    box: Optional[SimBox] = None,
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR,
) -> SampledConfiguration:
    """
    Draw one configuration of ``realized.counts`` particles from the
    conditioned data :math:`\\mathbb{1}_{\\mathcal{D}} g_0^{\\otimes N_1}
    \\otimes h_0^{\\otimes N_2} / \\mathcal{Z}_N` with the realized diameters.

    The masses are those of the densities.  Errors are those of
    `~hardmix.dynamics.sampling.sample_configuration`.
    """
    params = _mixture(g0, h0, realized)
    box = default_box((g0, h0)) if box is None else box
    sampled = sample_configuration(
        (g0, h0), params, realized.counts, box, seed, acceptance_floor
    )
    logger.info(
        "Z_N estimate %.4g after %d draws at N = %s",
        sampled.acceptance_rate,
        sampled.attempts,
        realized.counts,
    )
    return sampled


def conditioned_ensemble(
    g0: MaxwellianDensity,
    h0: MaxwellianDensity,
    realized: RealizedScaling,
    size: int,
    seed: SeedLike = None,
    box: Optional[SimBox] = None,
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR,
) -> Ensemble:
    """``size`` independent draws of `conditioned_initial_sampler`."""
    params = _mixture(g0, h0, realized)
    box = default_box((g0, h0)) if box is None else box
    ensemble = sample_ensemble(
        (g0, h0), params, realized.counts, box, size, seed, acceptance_floor
    )
    logger.info(
        "Z_N estimate %.4g at N = %s, eps = (%.3g, %.3g)",
        ensemble.acceptance_rate,
        realized.counts,
        realized.eps1,
        realized.eps2,
    )
    return ensemble


@dataclass(frozen=True)
class EvolvedEnsemble:
    """Configurations at time ``t`` and the number of discarded trajectories."""

    configurations: Tuple[Configuration, ...]
    t: float
    pathological: int = 0

    def __len__(self):
        return len(self.configurations)

    def __iter__(self):
        return iter(self.configurations)


def evolve_ensemble(
    ensemble: Iterable[Configuration],
    t: float,
    params: MixtureParams,
    budget: int = DEFAULT_EVENT_BUDGET,
    threads: int = 1,
) -> EvolvedEnsemble:
    """
    Advance every configuration by ``t``; pathological trajectories are
    dropped and counted.
    """
    configurations = list(ensemble)

    def run(z):
        return advance(z, t, params, budget)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, configurations))
    else:
        results = [run(z) for z in configurations]
    kept = tuple(r.final for r in results if r.ok)
    dropped = len(results) - len(kept)
    events = sum(len(r.events) for r in results)
    logger.info(
        "evolved %d configurations to t = %.4g: %d collisions, %d pathological",
        len(results),
        t,
        events,
        dropped,
    )
    return EvolvedEnsemble(kept, float(t), dropped)


@dataclass(frozen=True)
class CovarianceEstimate:
    value: float
    stderr: float
    samples: int


def species_covariance(
    ensemble: Iterable[Configuration],
    phi_a: Callable[[np.ndarray], np.ndarray],
    phi_b: Callable[[np.ndarray], np.ndarray],
) -> CovarianceEstimate:
    """
    Estimate :math:`\\mathrm{cov}(\\phi_1(v^A), \\phi_2(v^B))` for one A- and
    one B-particle.

    Labels within a species are exchangeable, so the covariance of the
    species means of :math:`\\phi_1` and :math:`\\phi_2` over each
    configuration estimates the same quantity with all pairs pooled.
    ``phi_a`` and ``phi_b`` map velocities of shape ``(n, d)`` to ``(n,)``.
    """
    a, b = [], []
    for n, z in enumerate(ensemble):
        na, nb = z.counts
        if na == 0 or nb == 0:
            raise ValidationError(f"configuration {n} lacks one of the species")
        a.append(float(np.mean(phi_a(z.velocities(SpeciesKind.A)))))
        b.append(float(np.mean(phi_b(z.velocities(SpeciesKind.B)))))
    m = len(a)
    if m < 2:
        raise ValidationError("a covariance needs at least two configurations")
    a, b = np.asarray(a), np.asarray(b)
    products = (a - a.mean()) * (b - b.mean())
    value = float(products.sum() / (m - 1))
    stderr = float(products.std(ddof=1) / np.sqrt(m))
    return CovarianceEstimate(value, stderr, m)


def probe_points(
    spec: ObservableSpec,
    extent: float,
    n: int = DEFAULT_PROBES,
    seed: SeedLike = None,
    oversample: int = 8,
) -> np.ndarray:
    """
    Latin-hypercube points of :math:`[-L, L]^{d|s|}` whose positions are
    more than ``spec.separation`` apart, shape ``(n, |s|, d)``.

    Candidates violating the separation are skipped; if fewer than ``n``
    remain among ``oversample * n`` candidates, a warning is logged and
    fewer points are returned.
    """
    size, dim = sum(spec.s), spec.dim
    rng = make_rng(seed)
    sampler = qmc.LatinHypercube(d=size * dim, seed=rng)
    candidates = qmc.scale(sampler.random(oversample * n), -extent, extent)
    candidates = candidates.reshape(-1, size, dim)
    if size > 1:
        keep = np.array(
            [np.min(pdist(x)) > spec.separation for x in candidates], dtype=bool
        )
        candidates = candidates[keep]
    if len(candidates) < n:
        logger.warning(
            "only %d of %d probe points of %s are separated by %g",
            len(candidates),
            n,
            spec.spec_id,
            spec.separation,
        )
    return candidates[:n]


@dataclass(frozen=True)
class ChaosPoint:
    """An evolved ensemble at one scaled point :math:`(N, \\epsilon)`."""

    realized: RealizedScaling
    ensemble: Sequence[Configuration] = field(repr=False)


@dataclass(frozen=True)
class ChaosReport:
    """
    Observable gaps per scaled point and test function, with the slope of
    :math:`\\log` gap against :math:`\\log \\max \\epsilon` per ``spec_id``.
    """

    table: pd.DataFrame = field(repr=False)
    slopes: Dict[str, float]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.table.to_csv(path, index=False)
        return path

    def is_decreasing(self, spec_id: str) -> bool:
        """Whether the gaps of ``spec_id`` shrink as ``N2`` grows."""
        rows = self.table[self.table["spec_id"] == spec_id].sort_values("N2")
        return bool(np.all(np.diff(rows["gap"].to_numpy()) < 0))


def _reference_cell_average(
    densities: Tuple[Callable, Callable],
    spec: ObservableSpec,
    cell_lower: np.ndarray,
    width: float,
    radius: float,
    nodes: int,
    space_nodes: int,
) -> float:
    """Tensor observable averaged over the position cell of a probe."""
    dim = spec.dim
    points, weights = roots_legendre(space_nodes)
    points = 0.5 * width * (points + 1.0)
    weights = 0.5 * weights
    offsets = np.stack(np.meshgrid(*([points] * dim), indexing="ij"), axis=-1).reshape(
        -1, dim
    )
    w = np.prod(
        np.stack(np.meshgrid(*([weights] * dim), indexing="ij"), axis=-1), axis=-1
    ).ravel()
    s1 = spec.s[0]
    total = 0.0
    for coefficient, factors in spec.phi.terms():
        product = coefficient
        for k, factor in enumerate(factors):
            density = densities[0] if k < s1 else densities[1]
            values = one_particle_integrals(
                density, factor, cell_lower[k] + offsets, radius, nodes
            )
            product *= float(np.sum(w * values))
        total += product
    return total


def _reference(reference) -> Tuple[Callable, Callable]:
    if isinstance(reference, GridDensityPair):
        if reference.grid.homogeneous:
            raise ValidationError(
                "a space homogeneous solution cannot be compared with a dispersing ensemble"
            )
        return reference.g, reference.h
    if isinstance(reference, (tuple, list)) and len(reference) == 2:
        return tuple(reference)
    raise InvalidInputError("the reference must be a GridDensityPair or a pair of densities")


def _fit_slope(table: pd.DataFrame) -> float:
    eps = np.maximum(table["eps1"].to_numpy(), table["eps2"].to_numpy())
    gap = table["gap"].to_numpy()
    if len(gap) < 2 or np.any(gap <= 0) or np.unique(eps).size < 2:
        return float("nan")
    return float(linregress(np.log(eps), np.log(gap)).slope)


def chaos_metric(
    points: Sequence[ChaosPoint],
    reference,
    specs: Sequence[ObservableSpec],
    t: float,
    grid: HistogramGrid,
    probes: int = DEFAULT_PROBES,
    probe_extent: Optional[float] = None,
    permutations: int = DEFAULT_PERMUTATIONS,
    radius: Optional[float] = None,
    nodes: int = 24,
    space_nodes: int = 2,
    seed: SeedLike = None,
    threads: int = 1,
) -> ChaosReport:
    """
    Gap between ensemble observables and those of :math:`g^{\\otimes s_1}
    \\otimes h^{\\otimes s_2}` at time ``t``, per scaled point and test
    function.

    For every spec, the ``gap`` is the largest difference over a common
    probe set between the histogram observable and the reference observable
    averaged over the same position cell; ``stderr`` is the histogram's
    standard error at the maximizing probe.

    Parameters
    ----------
    points : sequence of `ChaosPoint`
        Ensembles at time ``t`` of one Grad scaling; at least three points
        are needed for a trend.

    reference : `~hardmix.kinetic.pde.GridDensityPair` or pair of callables
        The kinetic solution :math:`(g, h)` at ``t``, as functions of
        ``(x, v)``.

    specs : sequence of `~hardmix.chaos.observables.ObservableSpec`

    t : float
        Recorded in the table.

    grid : `~hardmix.chaos.marginals.HistogramGrid`

    probes : int
        Size of the Latin-hypercube probe set.

    probe_extent : float, optional
        Half width of the probed position cube, the grid's by default.

    permutations : int
        Relabelings per configuration in the histograms.

    radius : float, optional
        Velocity cut-off of the reference quadrature, the grid's velocity
        extent by default.

    nodes, space_nodes : int
        Gauss-Legendre nodes per velocity axis and per position axis of a
        cell.

    seed : int, `numpy.random.SeedSequence`, or `None`

    threads : int
        Passed to `~hardmix.chaos.marginals.estimate_marginal`.

    Raises
    ------
    `~hardmix.exceptions.ValidationError`
        If the points do not share one Grad scaling, or do not match the
        grid's dimension.
    """
    if not points:
        raise ValidationError("chaos_metric needs at least one scaled point")
    scaling = points[0].realized.scaling
    for point in points:
        if point.realized.scaling != scaling:
            raise ValidationError(
                f"scaled points follow different Grad scalings: {scaling} and "
                f"{point.realized.scaling}"
            )
    if scaling.dim != grid.dim:
        raise ValidationError(f"grid is {grid.dim}-dimensional, scaling is {scaling.dim}")
    if len(points) < 3:
        logger.warning("%d scaled points are too few for a trend", len(points))
    densities = _reference(reference)
    extent = grid.space_extent if probe_extent is None else probe_extent
    if not 0 < extent <= grid.space_extent:
        raise InvalidInputError(
            f"probe extent {extent} must lie in (0, {grid.space_extent}]"
        )
    radius = grid.velocity_extent if radius is None else radius

    probe_seeds = spawn_seeds(seed, 2)
    probe_streams = spawn_seeds(probe_seeds[0], len(specs))
    histogram_streams = spawn_seeds(probe_seeds[1], len(specs) * len(points))

    rows: List[Dict] = []
    for i, spec in enumerate(specs):
        if spec.dim != grid.dim:
            raise ValidationError(f"{spec.spec_id} is not {grid.dim}-dimensional")
        probe_set = probe_points(spec, extent, probes, np.random.default_rng(probe_streams[i]))
        cells = grid.locate(probe_set, np.zeros_like(probe_set))[:, : probe_set[0].size]
        lowers = (-grid.space_extent + cells * grid.space_width).reshape(probe_set.shape)
        expected = np.array(
            [
                _reference_cell_average(
                    densities, spec, lower, grid.space_width, radius, nodes, space_nodes
                )
                for lower in lowers
            ]
        )
        for j, point in enumerate(points):
            estimate = estimate_marginal(
                point.ensemble,
                spec.s,
                grid,
                permutations,
                histogram_streams[i * len(points) + j],
                threads,
            )
            measured = np.array(
                [histogram_observable(estimate, spec.phi, x) for x in probe_set]
            ).reshape(-1, 2)
            gaps = np.abs(measured[:, 0] - expected)
            worst = int(np.argmax(gaps)) if gaps.size else 0
            realized = point.realized
            rows.append(
                {
                    "N1": realized.n1,
                    "N2": realized.n2,
                    "eps1": realized.eps1,
                    "eps2": realized.eps2,
                    "spec_id": spec.spec_id,
                    "t": float(t),
                    "gap": float(gaps[worst]) if gaps.size else 0.0,
                    "stderr": float(measured[worst, 1]) if gaps.size else 0.0,
                }
            )
    table = pd.DataFrame(rows, columns=CHAOS_COLUMNS)
    slopes = {
        spec_id: _fit_slope(group) for spec_id, group in table.groupby("spec_id", sort=False)
    }
    for spec_id, slope in slopes.items():
        logger.info("%s: gap ~ max(eps)^%.3g", spec_id, slope)
    return ChaosReport(table, slopes)
