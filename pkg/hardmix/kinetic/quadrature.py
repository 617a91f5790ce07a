"""
Quadrature rules on the unit sphere :math:`S^{d-1}` and on the velocity ball
:math:`B_R`.

+--------+-------------------------------------------------+----------------+
| ``d``  | sphere rule                                     | exact degree   |
+========+=================================================+================+
| 2      | ``n`` equispaced angles (trapezoid)             | ``n - 1``      |
+--------+-------------------------------------------------+----------------+
| 3      | Gauss-Legendre in :math:`\\cos\\vartheta` times  | ``min(2 n_p -  |
|        | equispaced azimuth                              | 1, n_a - 1)``  |
+--------+-------------------------------------------------+----------------+

The ball rule is a polar product: Gauss-Legendre in the radius with the
Jacobian :math:`r^{d-1}` folded into the weights, times the sphere rule.  It
integrates constants exactly.
"""
__all__ = [
    "CollisionQuadrature",
    "SphereQuadrature",
    "VelocityGrid",
    "default_velocity_radius",
    "sphere_quadrature",
]

import numpy as np

from dataclasses import dataclass, field
from scipy.special import roots_legendre
from scipy.stats import chi2
from typing import Optional

from hardmix.exceptions import InvalidInputError
from hardmix.utils import ball_volume, sphere_area

DEFAULT_SPHERE_NODES = {2: 32, 3: (12, 24)}
"""Default resolution: angles for ``d = 2``, (polar, azimuth) for ``d = 3``."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SphereQuadrature:
    """
    Nodes and positive weights on :math:`S^{d-1}`.

    Use `sphere_quadrature` to build one.  ``degree`` is the largest total
    degree of polynomials (restricted to the sphere) integrated exactly.
    """

    dim: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    degree: int

    def __len__(self):
        return self.weights.size

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the last axis of ``values`` with the weights."""
        return np.asarray(values) @ self.weights


def sphere_quadrature(dim: int, resolution=None) -> SphereQuadrature:
    """
    Build the sphere rule for ``dim`` in {2, 3}.

    Parameters
    ----------
    dim : int

    resolution : int or tuple of int, optional
        Number of angles for ``dim == 2``; ``(n_polar, n_azimuth)`` or a
        single ``n_polar`` (with ``n_azimuth = 2 n_polar``) for ``dim == 3``.

    Examples
    --------
    >>> rule = sphere_quadrature(2)
    >>> len(rule), rule.degree
    (32, 31)
    >>> rule = sphere_quadrature(3)
    >>> len(rule), rule.degree
    (288, 23)
    """
    if dim == 2:
        n = int(resolution or DEFAULT_SPHERE_NODES[2])
        if n < 3:
            raise InvalidInputError("need at least 3 angles on the circle")
        phi = 2.0 * np.pi * np.arange(n) / n
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        weights = np.full(n, 2.0 * np.pi / n)
        return SphereQuadrature(2, _frozen(nodes), _frozen(weights), n - 1)

    if dim == 3:
        if resolution is None:
            n_polar, n_azimuth = DEFAULT_SPHERE_NODES[3]
        elif np.ndim(resolution) == 0:
            n_polar, n_azimuth = int(resolution), 2 * int(resolution)
        else:
            n_polar, n_azimuth = (int(r) for r in resolution)
        if n_polar < 1 or n_azimuth < 3:
            raise InvalidInputError("sphere resolution too small")
        mu, w_mu = roots_legendre(n_polar)
        phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        mu_g, phi_g = np.meshgrid(mu, phi, indexing="ij")
        rho = np.sqrt(1.0 - mu_g**2)
        nodes = np.stack(
            [rho * np.cos(phi_g), rho * np.sin(phi_g), mu_g], axis=-1
        ).reshape(-1, 3)
        weights = np.outer(w_mu, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)).ravel()
        degree = min(2 * n_polar - 1, n_azimuth - 1)
        return SphereQuadrature(3, _frozen(nodes), _frozen(weights), degree)

    raise InvalidInputError(f"no sphere quadrature for dimension {dim}")


def default_velocity_radius(
    dim: int, gamma_mass: float, tail: float = 1e-8
) -> float:
    """
    Radius outside of which the Maxwellian :math:`e^{-\\gamma M |v|^2}` has
    mass fraction ``tail``.

    For this Maxwellian :math:`2 \\gamma M |v|^2` is :math:`\\chi^2_d`
    distributed.
    """
    return float(np.sqrt(chi2.isf(tail, dim) / (2.0 * gamma_mass)))


@dataclass(frozen=True)
class VelocityGrid:
    """
    Polar product quadrature on the velocity ball :math:`B_R`.

    Parameters
    ----------
    dim : int

    radius : float
        Truncation radius :math:`R`.

    n_radial : int
        Gauss-Legendre nodes in the radius.

    sphere : `SphereQuadrature`, optional
        Angular rule, `sphere_quadrature` default for ``dim`` if omitted.
    """

    dim: int
    radius: float
    n_radial: int = 16
    sphere: Optional[SphereQuadrature] = None
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.radius <= 0 or self.n_radial < 1:
            raise InvalidInputError("radius and n_radial must be positive")
        sphere = self.sphere or sphere_quadrature(self.dim)
        if sphere.dim != self.dim:
            raise InvalidInputError("sphere rule dimension does not match")
        object.__setattr__(self, "sphere", sphere)

        x, w = roots_legendre(self.n_radial)
        r = 0.5 * self.radius * (x + 1.0)
        w_r = 0.5 * self.radius * w * r ** (self.dim - 1)
        nodes = r[:, None, None] * sphere.nodes[None, :, :]
        weights = w_r[:, None] * sphere.weights[None, :]
        object.__setattr__(self, "nodes", _frozen(nodes.reshape(-1, self.dim)))
        object.__setattr__(self, "weights", _frozen(weights.ravel()))

    def __len__(self):
        return self.weights.size

    @property
    def volume(self) -> float:
        """Exact volume of :math:`B_R`."""
        return ball_volume(self.dim, self.radius)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the last axis of ``values`` with the weights."""
        return np.asarray(values) @ self.weights


@dataclass(frozen=True)
class CollisionQuadrature:
    """The pair of rules used to evaluate collision integrals."""

    sphere: SphereQuadrature
    velocities: VelocityGrid

    @classmethod
    def default(
        cls, dim: int, radius: float, n_radial: int = 16, sphere_resolution=None
    ) -> "CollisionQuadrature":
        sphere = sphere_quadrature(dim, sphere_resolution)
        return cls(sphere, VelocityGrid(dim, radius, n_radial, sphere))

    @property
    def dim(self) -> int:
        return self.sphere.dim

    @property
    def radius(self) -> float:
        return self.velocities.radius

    def check(self):
        """Sanity check of both rules against the exact measures."""
        area = sphere_area(self.dim)
        if abs(self.sphere.weights.sum() - area) > 1e-10 * area:
            raise InvalidInputError("sphere weights do not sum to the sphere area")
        vol = self.velocities.volume
        if abs(self.velocities.weights.sum() - vol) > 1e-6 * vol:
            raise InvalidInputError("ball weights do not sum to the ball volume")
        return self
