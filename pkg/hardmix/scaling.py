"""
Parameter algebra of the mixed Boltzmann-Grad scaling.

.. contents:: Content
   :local:

Scaling
-------

For inverse mean free paths :math:`c_1, c_2` and diameter ratio
:math:`b = \\epsilon_1 / \\epsilon_2` the particle numbers and diameters obey

.. math::

    N_1 \\epsilon_1^{d-1} = c_1, \\qquad N_2 \\epsilon_2^{d-1} = c_2, \\qquad
    \\epsilon_1 = b \\epsilon_2,

so that :math:`N_1 = (c_1 / c_2) b^{1-d} N_2`.  `realize` solves the scaling
for a given :math:`N_2` and refuses non-integral :math:`N_1`.

Kernel constants
----------------

The constant :math:`A^\\alpha_\\beta` multiplies the collision kernel of a
species-:math:`\\alpha` particle with an adjoined species-:math:`\\beta`
particle:

+------------+------------+------------------------------------------+
| ``alpha``  | ``beta``   | :math:`A^\\alpha_\\beta`                   |
+============+============+==========================================+
| A          | A          | :math:`c_1`                              |
+------------+------------+------------------------------------------+
| B          | B          | :math:`c_2`                              |
+------------+------------+------------------------------------------+
| A          | B          | :math:`c_{12} = c_2 ((1 + b)/2)^{d-1}`   |
+------------+------------+------------------------------------------+
| B          | A          | :math:`c_{21} = c_1 ((1 + b^{-1})/2)^{d-1}` |
+------------+------------+------------------------------------------+

At finite :math:`N` the hierarchy carries instead the prefactors
:math:`(N_\\beta - s_\\beta - \\tilde\\beta^\\beta) \\epsilon_{(\\alpha,\\beta)}^{d-1}`
computed by `bbgky_prefactor`.
"""
__all__ = [
    "GradScaling",
    "RealizedScaling",
    "bbgky_prefactor",
    "collision_frequencies",
    "kernel_constant",
    "limit_constants",
    "mean_free_time",
    "prefactor_defect_bound",
    "prefactor_product",
    "realize",
]

import logging
import numpy as np

from dataclasses import dataclass
from scipy.special import gamma as gamma_fn
from typing import Any, Dict, Mapping, Sequence, Tuple

from hardmix.exceptions import (
    ExhaustedReservoirError,
    InvalidInputError,
    ScalingInfeasibleError,
)
from hardmix.mixture.species import MixtureParams, SpeciesKind
from hardmix.utils import cross_section_factor

logger = logging.getLogger(__name__)

REALIZE_RTOL = 1e-10
"""Relative tolerance on the integrality of :math:`N_1`."""


@dataclass(frozen=True)
class GradScaling:
    """
    Constants of a mixed Boltzmann-Grad scaling.

    Parameters
    ----------
    c1, c2 : float
        Inverse mean free paths of species A and B.

    b : float
        Diameter ratio :math:`\\epsilon_1 / \\epsilon_2`.

    dim : int
        Spatial dimension.

    Examples
    --------
    >>> scaling = GradScaling(c1=1.0, c2=1.0, b=2.0, dim=3)
    >>> scaling.c12, scaling.c21
    (2.25, 0.5625)
    """

    c1: float
    c2: float
    b: float
    dim: int

    def __post_init__(self):
        for name in ("c1", "c2", "b"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, float(value))
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidInputError(f"dim must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def c12(self) -> float:
        """:math:`c_{12} = c_2 ((1 + b) / 2)^{d-1}`."""
        return self.c2 * ((1.0 + self.b) / 2.0) ** (self.dim - 1)

    @property
    def c21(self) -> float:
        """:math:`c_{21} = c_1 ((1 + b^{-1}) / 2)^{d-1}`."""
        return self.c1 * ((1.0 + 1.0 / self.b) / 2.0) ** (self.dim - 1)

    def kernel_constant(self, alpha: SpeciesKind, beta: SpeciesKind) -> float:
        """:math:`A^\\alpha_\\beta`; see `kernel_constant`."""
        alpha, beta = SpeciesKind.parse(alpha), SpeciesKind.parse(beta)
        if alpha is beta:
            return self.c1 if alpha is SpeciesKind.A else self.c2
        return self.c12 if alpha is SpeciesKind.A else self.c21

    @property
    def kernel_table(self) -> np.ndarray:
        """2x2 table of :math:`A^\\alpha_\\beta` indexed ``[alpha, beta]``."""
        return np.array(
            [[self.kernel_constant(a, b) for b in SpeciesKind] for a in SpeciesKind]
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"c1": self.c1, "c2": self.c2, "b": self.b, "dim": self.dim}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GradScaling":
        return cls(
            float(data["c1"]), float(data["c2"]), float(data["b"]), int(data["dim"])
        )


@dataclass(frozen=True)
class RealizedScaling:
    """A scaling solved at a finite particle number."""

    scaling: GradScaling
    n1: int
    n2: int
    eps1: float
    eps2: float

    @property
    def dim(self) -> int:
        return self.scaling.dim

    @property
    def counts(self) -> Tuple[int, int]:
        """:math:`(N_1, N_2)`."""
        return self.n1, self.n2

    @property
    def diameters(self) -> Tuple[float, float]:
        """:math:`(\\epsilon_1, \\epsilon_2)`."""
        return self.eps1, self.eps2

    @property
    def max_eps(self) -> float:
        """:math:`\\max(\\epsilon_1, \\epsilon_2)`."""
        return max(self.eps1, self.eps2)

    def count_of(self, kind: SpeciesKind) -> int:
        return self.counts[int(SpeciesKind.parse(kind))]

    def interaction_distance(self, alpha: SpeciesKind, beta: SpeciesKind) -> float:
        """Contact distance :math:`\\epsilon_{(\\alpha,\\beta)}`."""
        a, b = int(SpeciesKind.parse(alpha)), int(SpeciesKind.parse(beta))
        return 0.5 * (self.diameters[a] + self.diameters[b])

    def params(self, mass: Sequence[float]) -> MixtureParams:
        """`~hardmix.mixture.species.MixtureParams` with these diameters."""
        return MixtureParams(self.dim, mass=mass, diameter=self.diameters)

    def to_dict(self) -> Dict[str, Any]:
        """Realized tuple and all constants, as printed by the command line."""
        c1, c2, c12, c21 = limit_constants(self.scaling)
        return {
            **self.scaling.to_dict(),
            "N1": self.n1,
            "N2": self.n2,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "c12": c12,
            "c21": c21,
        }


def realize(scaling: GradScaling, n2: int) -> RealizedScaling:
    """
    Solve the scaling for :math:`N_2 = ` ``n2``.

    Raises
    ------
    `~hardmix.exceptions.ScalingInfeasibleError`
        If :math:`N_1 = (c_1 / c_2) b^{1-d} N_2` is not an integer up to
        floating-point noise, or is zero.

    Examples
    --------
    >>> realized = realize(GradScaling(1.0, 1.0, 2.0, 3), 1000)
    >>> realized.n1, round(realized.eps2, 7)
    (250, 0.0316228)
    """
    if int(n2) != n2 or n2 < 1:
        raise InvalidInputError(f"n2 must be a positive integer, got {n2}")
    n2 = int(n2)
    d = scaling.dim
    exact = (scaling.c1 / scaling.c2) * scaling.b ** (1 - d) * n2
    n1 = int(round(exact))
    if n1 < 1 or abs(exact - n1) > REALIZE_RTOL * max(1.0, exact):
        raise ScalingInfeasibleError(
            f"N1 = (c1/c2) b^(1-d) N2 = {exact!r} is not a positive integer; "
            f"choose N2 so that it is"
        )
    eps2 = (scaling.c2 / n2) ** (1.0 / (d - 1))
    realized = RealizedScaling(scaling, n1, n2, scaling.b * eps2, eps2)
    logger.debug("realized scaling %s", realized.to_dict())
    return realized


def limit_constants(scaling: GradScaling) -> Tuple[float, float, float, float]:
    """
    The constants :math:`(c_1, c_2, c_{12}, c_{21})` of the limiting system.

    Examples
    --------
    >>> limit_constants(GradScaling(1.0, 1.0, 1.0, 2))
    (1.0, 1.0, 1.0, 1.0)
    """
    return scaling.c1, scaling.c2, scaling.c12, scaling.c21


def kernel_constant(
    scaling: GradScaling, alpha: SpeciesKind, beta: SpeciesKind
) -> float:
    """
    The constant :math:`A^\\alpha_\\beta` for a species-``alpha`` particle
    colliding with an adjoined species-``beta`` particle.
    """
    return scaling.kernel_constant(alpha, beta)


def bbgky_prefactor(
    realized: RealizedScaling,
    s: Tuple[int, int],
    added: Tuple[int, int],
    alpha: SpeciesKind,
    beta: SpeciesKind,
) -> float:
    """
    The finite-:math:`N` prefactor
    :math:`(N_\\beta - s_\\beta - \\tilde\\beta^\\beta)
    \\epsilon_{(\\alpha,\\beta)}^{d-1}`.

    Parameters
    ----------
    realized : `RealizedScaling`

    s : tuple of int
        Particle counts :math:`(s_1, s_2)` of the marginal.

    added : tuple of int
        Particles of each species adjoined before this one.

    alpha, beta : `~hardmix.mixture.species.SpeciesKind`
        Species of the colliding particle and of the adjoined particle.

    Raises
    ------
    `~hardmix.exceptions.ExhaustedReservoirError`
        If no species-``beta`` particle is left to adjoin.
    """
    alpha, beta = SpeciesKind.parse(alpha), SpeciesKind.parse(beta)
    remaining = realized.count_of(beta) - int(s[int(beta)]) - int(added[int(beta)])
    if remaining <= 0:
        raise ExhaustedReservoirError(
            f"no {beta.tag}-particles left: N = {realized.count_of(beta)}, "
            f"s = {s[int(beta)]}, already added {added[int(beta)]}"
        )
    sigma = realized.interaction_distance(alpha, beta)
    return remaining * sigma ** (realized.dim - 1)


def prefactor_product(
    realized: RealizedScaling,
    s: Tuple[int, int],
    alphas: Sequence[SpeciesKind],
    betas: Sequence[SpeciesKind],
) -> Tuple[float, float]:
    """
    Products :math:`(A^\\infty, A^N)` of the kernel constants and of the
    finite-:math:`N` prefactors along a sequence of adjunctions.
    """
    if len(alphas) != len(betas):
        raise InvalidInputError("alphas and betas must have the same length")
    added = [0, 0]
    a_inf = a_n = 1.0
    for alpha, beta in zip(alphas, betas):
        beta = SpeciesKind.parse(beta)
        a_inf *= realized.scaling.kernel_constant(alpha, beta)
        a_n *= bbgky_prefactor(realized, s, tuple(added), alpha, beta)
        added[int(beta)] += 1
    return a_inf, a_n


def prefactor_defect_bound(scaling: GradScaling, s: Tuple[int, int], k: int) -> float:
    """
    A constant :math:`C` with
    :math:`0 < 1 - A^N / A^\\infty \\leq C \\max(\\epsilon)^{d-1}` for ``k``
    adjunctions to an ``s``-marginal.

    Each factor falls short of its limit by
    :math:`(s_\\beta + \\tilde\\beta^\\beta) / N_\\beta \\leq (|s| + k)
    \\epsilon_\\beta^{d-1} / c_\\beta`, and the defects of a product add up
    at most, giving :math:`C = k (|s| + k) / \\min(c_1, c_2)`.
    """
    size = int(s[0]) + int(s[1])
    return k * (size + k) / min(scaling.c1, scaling.c2)


def _mean_relative_speed(dim: int, variance: float) -> float:
    # E|u| for u ~ N(0, variance I_d)
    return float(
        np.sqrt(2.0 * variance) * gamma_fn((dim + 1) / 2) / gamma_fn(dim / 2)
    )


def collision_frequencies(
    scaling: GradScaling,
    mass: Sequence[float],
    gamma: Sequence[float] = (1.0, 1.0),
) -> np.ndarray:
    """
    Limiting collision frequencies :math:`\\nu_{\\alpha\\beta}` of a
    species-``alpha`` particle with species-``beta`` particles, when both
    species are spatially homogeneous Maxwellians
    :math:`e^{-\\gamma_\\alpha M_\\alpha |v|^2}` of unit mass density.

    :math:`\\nu_{\\alpha\\beta} = A^\\alpha_\\beta \\kappa_d
    \\mathbb{E}|v_\\alpha - v_\\beta|`, where :math:`\\kappa_d` is the
    volume of the unit ball in :math:`d - 1` dimensions.
    """
    mass = np.asarray(mass, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if mass.shape != (2,) or gamma.shape != (2,) or np.any(mass <= 0) or np.any(
        gamma <= 0
    ):
        raise InvalidInputError("mass and gamma need two positive entries")
    kappa = cross_section_factor(scaling.dim)
    component_var = 1.0 / (2.0 * gamma * mass)
    table = scaling.kernel_table
    freq = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            variance = component_var[a] + component_var[b]
            speed = _mean_relative_speed(scaling.dim, variance)
            freq[a, b] = table[a, b] * kappa * speed
    return freq


def mean_free_time(
    scaling: GradScaling,
    mass: Sequence[float],
    gamma: Sequence[float] = (1.0, 1.0),
) -> float:
    """
    Mean free time of the faster-colliding species,
    :math:`1 / \\max_\\alpha \\sum_\\beta \\nu_{\\alpha\\beta}`.

    Horizons in configuration files may be given in these units.
    """
    freq = collision_frequencies(scaling, mass, gamma)
    return float(1.0 / np.max(freq.sum(axis=1)))
