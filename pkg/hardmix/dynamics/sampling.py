"""
Sampling of initial data for the mixture and empirical pathology statistics.

The one-particle densities are Maxwellians in velocity times a Gaussian or
uniform spatial profile.  A configuration is drawn i.i.d. per particle from
:math:`g_0^{\\otimes N_A} \\otimes h_0^{\\otimes N_B}` restricted to a
`~hardmix.dynamics.flow.SimBox`, and the whole configuration is rejected until
it lies in the phase space, which realizes the conditioned data
:math:`\\mathbb{1}_{\\mathcal{D}} g_0^{\\otimes N_A} \\otimes h_0^{\\otimes N_B}
/ \\mathcal{Z}_N`.  The acceptance rate estimates :math:`\\mathcal{Z}_N`.
"""
__all__ = [
    "Ensemble",
    "MaxwellianDensity",
    "PartitionEstimate",
    "SampledConfiguration",
    "estimate_partition_function",
    "pathology_rate",
    "sample_configuration",
    "sample_ensemble",
]

import logging
import numpy as np
import pandas as pd

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from hardmix.dynamics.flow import DEFAULT_EVENT_BUDGET, SimBox, advance
from hardmix.exceptions import InfeasibleDensityError, InvalidInputError
from hardmix.mixture.collisions import BoundaryKind, classify_boundary
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import MixtureParams
from hardmix.utils import SeedLike, make_rng

logger = logging.getLogger(__name__)

DEFAULT_ACCEPTANCE_FLOOR = 1e-4

_PROFILES = ("gaussian", "uniform")


class MaxwellianDensity:
    """
    A one-particle density
    :math:`f(x, v) = \\rho(x) (\\gamma M / \\pi)^{d/2}
    e^{-\\gamma M |v - u|^2}`.

    Parameters
    ----------
    dim : int
        Spatial dimension.

    mass : float
        Particle mass :math:`M`.

    gamma : float
        Inverse temperature :math:`\\gamma`.

    drift : array_like, optional
        Mean velocity :math:`u`, zero by default.

    center : array_like, optional
        Center of the spatial profile, the origin by default.

    spread : float
        Standard deviation of the Gaussian profile, or half width of the
        uniform profile.

    profile : {"gaussian", "uniform"}
        Spatial profile :math:`\\rho`.
    """

    def __init__(
        self,
        dim: int,
        mass: float = 1.0,
        gamma: float = 1.0,
        drift: Optional[Sequence[float]] = None,
        center: Optional[Sequence[float]] = None,
        spread: float = 1.0,
        profile: str = "gaussian",
    ):
        if mass <= 0 or gamma <= 0 or spread <= 0:
            raise InvalidInputError("mass, gamma, and spread must be positive")
        if profile not in _PROFILES:
            raise InvalidInputError(
                f"profile must be one of {_PROFILES}, got {profile!r}"
            )
        self.dim = int(dim)
        self.mass = float(mass)
        self.gamma = float(gamma)
        self.drift = np.zeros(dim) if drift is None else np.asarray(drift, float)
        self.center = np.zeros(dim) if center is None else np.asarray(center, float)
        self.spread = float(spread)
        self.profile = profile
        if self.drift.shape != (dim,) or self.center.shape != (dim,):
            raise InvalidInputError("drift and center must have length dim")

    def __repr__(self):
        return (
            f"MaxwellianDensity(dim={self.dim}, mass={self.mass}, "
            f"gamma={self.gamma}, profile={self.profile!r})"
        )

    @property
    def velocity_std(self) -> float:
        """Per-component standard deviation :math:`(2 \\gamma M)^{-1/2}`."""
        return 1.0 / np.sqrt(2.0 * self.gamma * self.mass)

    def spatial_density(self, x) -> np.ndarray:
        """The profile :math:`\\rho(x)` for ``x`` of shape ``(..., d)``."""
        dx = np.asarray(x, dtype=float) - self.center
        if self.profile == "gaussian":
            s2 = self.spread**2
            norm = (2.0 * np.pi * s2) ** (-self.dim / 2)
            return norm * np.exp(-np.sum(dx * dx, axis=-1) / (2.0 * s2))
        inside = np.all(np.abs(dx) <= self.spread, axis=-1)
        return inside / (2.0 * self.spread) ** self.dim

    def velocity_density(self, v) -> np.ndarray:
        """The Maxwellian factor for ``v`` of shape ``(..., d)``."""
        dv = np.asarray(v, dtype=float) - self.drift
        a = self.gamma * self.mass
        return (a / np.pi) ** (self.dim / 2) * np.exp(-a * np.sum(dv * dv, axis=-1))

    def __call__(self, x, v) -> np.ndarray:
        return self.spatial_density(x) * self.velocity_density(v)

    def sample(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` i.i.d. phase-space points, each of shape ``(n, d)``."""
        if self.profile == "gaussian":
            x = self.center + self.spread * rng.standard_normal((n, self.dim))
        else:
            x = self.center + rng.uniform(-self.spread, self.spread, (n, self.dim))
        v = self.drift + self.velocity_std * rng.standard_normal((n, self.dim))
        return x, v


@dataclass(frozen=True)
class SampledConfiguration:
    """A configuration accepted by `sample_configuration` and its cost."""

    configuration: Configuration
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        """One accepted draw over ``attempts`` whole-configuration draws."""
        return 1.0 / self.attempts


@dataclass(frozen=True)
class Ensemble:
    """Independent conditioned configurations and the pooled acceptance rate."""

    configurations: Tuple[Configuration, ...]
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.configurations) / self.attempts

    def __len__(self):
        return len(self.configurations)

    def __iter__(self):
        return iter(self.configurations)


@dataclass(frozen=True)
class PartitionEstimate:
    """Monte Carlo estimate of :math:`\\mathcal{Z}_N` with its standard error."""

    value: float
    stderr: float
    trials: int


def _draw_in_box(
    density: MaxwellianDensity, rng: np.random.Generator, n: int, box: SimBox
) -> Tuple[np.ndarray, np.ndarray]:
    x, v = density.sample(rng, n)
    bad = ~(box.contains_positions(x) & box.contains_velocities(v))
    rounds = 0
    while np.any(bad):
        rounds += 1
        if rounds > 10_000:
            raise InfeasibleDensityError(
                f"{density!r} puts almost no mass in the simulation box {box}"
            )
        x_new, v_new = density.sample(rng, int(bad.sum()))
        x[bad], v[bad] = x_new, v_new
        bad = ~(box.contains_positions(x) & box.contains_velocities(v))
    return x, v


def _draw(
    densities: Tuple[MaxwellianDensity, MaxwellianDensity],
    counts: Tuple[int, int],
    box: SimBox,
    rng: np.random.Generator,
) -> Configuration:
    xa, va = _draw_in_box(densities[0], rng, counts[0], box)
    xb, vb = _draw_in_box(densities[1], rng, counts[1], box)
    return Configuration(xa, va, xb, vb)


def _check(densities, params: MixtureParams, counts) -> Tuple[int, int]:
    if len(densities) != 2:
        raise InvalidInputError("need one density per species")
    for density in densities:
        if density.dim != params.dim:
            raise InvalidInputError(
                f"density dimension {density.dim} does not match {params.dim}"
            )
    counts = (int(counts[0]), int(counts[1]))
    if min(counts) < 0:
        raise InvalidInputError(f"particle counts must be non-negative, got {counts}")
    return counts


def sample_configuration(
    densities: Tuple[MaxwellianDensity, MaxwellianDensity],
    params: MixtureParams,
    counts: Tuple[int, int],
    box: SimBox,
    seed: SeedLike = None,
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR,
) -> SampledConfiguration:
    """
    Draw one configuration from the conditioned product density.

    Parameters
    ----------
    densities : pair of `MaxwellianDensity`
        The one-particle densities :math:`g_0` (A) and :math:`h_0` (B).

    params : `~hardmix.mixture.species.MixtureParams`

    counts : tuple of int
        Particle numbers ``(N_A, N_B)``.

    box : `~hardmix.dynamics.flow.SimBox`
        Every particle is drawn inside the box.

    seed : int, `numpy.random.Generator`, or `None`

    acceptance_floor : float
        Give up after ``ceil(1 / acceptance_floor)`` rejected draws.

    Raises
    ------
    `~hardmix.exceptions.InfeasibleDensityError`
        If no configuration in the phase space is found before the floor.
    """
    counts = _check(densities, params, counts)
    rng = make_rng(seed)
    limit = int(np.ceil(1.0 / acceptance_floor))
    for attempt in range(1, limit + 1):
        z = _draw(densities, counts, box, rng)
        if z.min_gap(params) > 0.0:
            return SampledConfiguration(z, attempt)
    raise InfeasibleDensityError(
        f"no admissible configuration in {limit} draws: acceptance rate below "
        f"{acceptance_floor:g}; lower the density or the diameters"
    )


def sample_ensemble(
    densities: Tuple[MaxwellianDensity, MaxwellianDensity],
    params: MixtureParams,
    counts: Tuple[int, int],
    box: SimBox,
    size: int,
    seed: SeedLike = None,
    acceptance_floor: float = DEFAULT_ACCEPTANCE_FLOOR,
) -> Ensemble:
    """Draw ``size`` configurations from one random stream."""
    rng = make_rng(seed)
    draws: List[Configuration] = []
    attempts = 0
    for _ in range(size):
        sampled = sample_configuration(
            densities, params, counts, box, rng, acceptance_floor
        )
        draws.append(sampled.configuration)
        attempts += sampled.attempts
    ensemble = Ensemble(tuple(draws), max(attempts, 1))
    logger.info(
        "sampled %d configurations of %s particles, acceptance rate %.4g",
        size,
        counts,
        ensemble.acceptance_rate,
    )
    return ensemble


def estimate_partition_function(
    densities: Tuple[MaxwellianDensity, MaxwellianDensity],
    params: MixtureParams,
    counts: Tuple[int, int],
    box: SimBox,
    trials: int = 10_000,
    seed: SeedLike = None,
) -> PartitionEstimate:
    """
    Estimate :math:`\\mathcal{Z}_N = \\int \\mathbb{1}_{\\mathcal{D}}
    g_0^{\\otimes N_A} \\otimes h_0^{\\otimes N_B}` over the box by direct
    Monte Carlo.

    The draws do not depend on the diameters, so for a fixed ``seed`` the
    estimate is non-increasing as the diameters grow.
    """
    counts = _check(densities, params, counts)
    if trials < 1:
        raise InvalidInputError(f"trials must be positive, got {trials}")
    rng = make_rng(seed)
    hits = sum(
        _draw(densities, counts, box, rng).min_gap(params) > 0.0
        for _ in range(trials)
    )
    p = hits / trials
    estimate = PartitionEstimate(p, float(np.sqrt(p * (1.0 - p) / trials)), trials)
    logger.info("Z_N estimate %.6g +/- %.2g", estimate.value, estimate.stderr)
    return estimate


def _is_pathological(
    z: Configuration,
    params: MixtureParams,
    horizon: float,
    window: float,
    budget: int,
) -> bool:
    if classify_boundary(z, params, window, window).kind is not BoundaryKind.INTERIOR:
        return True
    result = advance(z, horizon, params, budget, contact_tol=window, grazing_tol=window)
    return not result.ok


def pathology_rate(
    ensemble: Sequence[Configuration],
    params: MixtureParams,
    horizon: float,
    windows: Sequence[float],
    budget: int = DEFAULT_EVENT_BUDGET,
) -> pd.DataFrame:
    """
    Fraction of ``ensemble`` whose flow up to ``horizon`` meets a pathology,
    for each relative tolerance window in ``windows``.

    The window is used both as the contact tolerance and as the grazing
    tolerance, and a start that is not interior for the window counts as
    pathological.  The flow itself does not depend on the window, so for a
    fixed ensemble the rate is non-increasing as the window shrinks.

    Returns
    -------
    `pandas.DataFrame`
        Columns ``window``, ``rate``, ``stderr``, ``samples``; one row per
        window.
    """
    configurations = list(ensemble)
    rows = []
    for window in windows:
        if window <= 0:
            raise InvalidInputError(f"windows must be positive, got {window}")
        flags = np.array(
            [
                _is_pathological(z, params, horizon, window, budget)
                for z in configurations
            ],
            dtype=float,
        )
        n = flags.size
        rate = float(flags.mean()) if n else 0.0
        stderr = float(np.sqrt(rate * (1.0 - rate) / n)) if n else 0.0
        rows.append({"window": window, "rate": rate, "stderr": stderr, "samples": n})
        logger.info("pathology window %.3g: rate %.4g over %d samples", window, rate, n)
    return pd.DataFrame(rows, columns=["window", "rate", "stderr", "samples"])
