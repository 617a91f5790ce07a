"""
The mass-weighted elastic collision law, classification of boundary
configurations, and the impact operator.

.. contents:: Content
   :local:

Collision law
-------------

For spheres of masses :math:`M_a, M_b` meeting along the unit normal
:math:`n = (x_a - x_b) / |x_a - x_b|`,

.. math::

    v_a^* = v_a - \\frac{2 M_b}{M_a + M_b} ((v_a - v_b) \\cdot n) n, \\qquad
    v_b^* = v_b + \\frac{2 M_a}{M_a + M_b} ((v_a - v_b) \\cdot n) n.

The law preserves momentum and the kinetic form
:math:`M_a |v_a|^2 + M_b |v_b|^2` and is an involution for fixed ``n``.

Boundary classes
----------------

+---------------------------+-------------------------------------------------+
| ``INTERIOR``              | no pair within the contact window               |
+---------------------------+-------------------------------------------------+
| ``SIMPLE_PRE``            | one contact pair, approaching                   |
+---------------------------+-------------------------------------------------+
| ``SIMPLE_POST``           | one contact pair, receding                      |
+---------------------------+-------------------------------------------------+
| ``SIMPLE_GRAZING``        | one contact pair, zero normal relative velocity |
+---------------------------+-------------------------------------------------+
| ``MULTIPLE``              | two or more contact pairs                       |
+---------------------------+-------------------------------------------------+
"""
__all__ = [
    "BoundaryClass",
    "BoundaryKind",
    "GRAZING_RTOL",
    "classify_boundary",
    "collide",
    "impact_operator",
]

import enum
import numpy as np

from dataclasses import dataclass
from typing import Optional, Tuple

from hardmix.exceptions import (
    BoundaryPreconditionError,
    InvalidInputError,
    InvalidStateError,
)
from hardmix.mixture.configuration import CONTACT_RTOL, Configuration, ParticleRef
from hardmix.mixture.species import MixtureParams

GRAZING_RTOL = 1e-9
"""Relative grazing window on the normal relative velocity."""

UNIT_TOL = 1e-12
"""Tolerance on :math:`|n| - 1` accepted by `collide`."""


def collide(
    v_a: np.ndarray,
    v_b: np.ndarray,
    n: np.ndarray,
    m_a: float,
    m_b: float,
    unit_tol: float = UNIT_TOL,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Post-collisional velocities of a pair of spheres.

    Parameters
    ----------
    v_a, v_b : array_like, shape ``(..., d)``
        Pre-collisional velocities.  Leading axes broadcast.

    n : array_like, shape ``(..., d)``
        Unit normal(s), :math:`(x_a - x_b) / |x_a - x_b|`.

    m_a, m_b : float
        Masses.

    unit_tol : float
        Accepted deviation of :math:`|n|` from one.

    Returns
    -------
    v_a_star, v_b_star : `numpy.ndarray`

    Raises
    ------
    `~hardmix.exceptions.InvalidInputError`
        If any normal is not a unit vector within ``unit_tol``.

    Examples
    --------
    >>> va, vb = collide([1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0], 1.0, 3.0)
    >>> va.tolist(), vb.tolist()
    ([-2.0, 0.0], [0.0, 0.0])
    """
    v_a = np.asarray(v_a, dtype=float)
    v_b = np.asarray(v_b, dtype=float)
    n = np.asarray(n, dtype=float)
    norm = np.sqrt(np.sum(n * n, axis=-1))
    if np.any(np.abs(norm - 1.0) > unit_tol):
        raise InvalidInputError("collision normal must be a unit vector")

    proj = np.sum((v_a - v_b) * n, axis=-1)[..., None] * n
    total = m_a + m_b
    return v_a - (2.0 * m_b / total) * proj, v_b + (2.0 * m_a / total) * proj


class BoundaryKind(enum.Enum):
    """Classification of a configuration relative to the phase-space boundary."""

    INTERIOR = "interior"
    SIMPLE_PRE = "simple-pre-collisional"
    SIMPLE_POST = "simple-post-collisional"
    SIMPLE_GRAZING = "simple-grazing"
    MULTIPLE = "multiple-collision"


@dataclass(frozen=True)
class BoundaryClass:
    """
    Result of `classify_boundary`.

    ``pair`` is present exactly for the three simple kinds and names the
    unique contact pair, species-ordered (``alpha <= beta``).
    """

    kind: BoundaryKind
    pair: Optional[Tuple[ParticleRef, ParticleRef]] = None

    @property
    def is_simple(self) -> bool:
        """Exactly one pair in contact."""
        return self.kind in (
            BoundaryKind.SIMPLE_PRE,
            BoundaryKind.SIMPLE_POST,
            BoundaryKind.SIMPLE_GRAZING,
        )

    @property
    def is_non_grazing_contact(self) -> bool:
        """In the domain of the impact operator."""
        return self.kind in (BoundaryKind.SIMPLE_PRE, BoundaryKind.SIMPLE_POST)


def _contact_pairs(
    z: Configuration, params: MixtureParams, contact_tol: float
) -> Tuple[np.ndarray, np.ndarray]:
    if z.size < 2:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    dist = z.distances()
    sigma = z.sigma_matrix(params)
    iu, ju = np.triu_indices(z.size, k=1)
    rel = dist[iu, ju] / sigma[iu, ju] - 1.0
    if np.any(rel < -contact_tol):
        worst = int(np.argmin(rel))
        raise InvalidStateError(
            f"particles {z.ref(iu[worst])} and {z.ref(ju[worst])} overlap "
            f"(relative gap {rel[worst]:.3e})"
        )
    contact = np.abs(rel) <= contact_tol
    return iu[contact], ju[contact]


def classify_boundary(
    z: Configuration,
    params: MixtureParams,
    contact_tol: float = CONTACT_RTOL,
    grazing_tol: float = GRAZING_RTOL,
) -> BoundaryClass:
    """
    Classify ``z`` as interior, a simple contact (pre, post, grazing), or a
    multiple collision.

    A pair is in contact when ``| |x_i - x_j| - eps | <= contact_tol * eps``.
    A simple contact is grazing when the normal relative velocity is at most
    ``grazing_tol`` times the largest particle speed.

    Raises
    ------
    `~hardmix.exceptions.InvalidStateError`
        If some pair overlaps beyond the contact window.
    """
    ii, jj = _contact_pairs(z, params, contact_tol)
    if ii.size == 0:
        return BoundaryClass(BoundaryKind.INTERIOR)
    if ii.size > 1:
        return BoundaryClass(BoundaryKind.MULTIPLE)

    i, j = int(ii[0]), int(jj[0])
    dx = z.x[i] - z.x[j]
    dv = z.v[i] - z.v[j]
    normal_speed = float(np.dot(dx, dv) / np.linalg.norm(dx))
    speed_scale = float(np.max(np.linalg.norm(z.v, axis=1)))
    pair = (z.ref(i), z.ref(j))

    if abs(normal_speed) <= grazing_tol * speed_scale or speed_scale == 0.0:
        return BoundaryClass(BoundaryKind.SIMPLE_GRAZING, pair)
    if normal_speed < 0:
        return BoundaryClass(BoundaryKind.SIMPLE_PRE, pair)
    return BoundaryClass(BoundaryKind.SIMPLE_POST, pair)


def impact_operator(
    z: Configuration,
    params: MixtureParams,
    contact_tol: float = CONTACT_RTOL,
    grazing_tol: float = GRAZING_RTOL,
) -> Configuration:
    """
    Apply the impact operator :math:`T` to a configuration in a simple,
    non-grazing contact.

    Positions are untouched and only the contact pair's velocities change,
    so :math:`T` maps pre-collisional configurations to post-collisional ones
    and back; :math:`T \\circ T` is the identity.

    Raises
    ------
    `~hardmix.exceptions.BoundaryPreconditionError`
        If ``z`` is interior, grazing, or in a multiple collision.  The error
        carries the `BoundaryClass`.
    """
    boundary = classify_boundary(z, params, contact_tol, grazing_tol)
    if not boundary.is_non_grazing_contact:
        raise BoundaryPreconditionError(
            f"impact operator needs a simple non-grazing contact, got "
            f"{boundary.kind.value}",
            boundary,
        )

    i = z.stacked_index(boundary.pair[0])
    j = z.stacked_index(boundary.pair[1])
    dx = z.x[i] - z.x[j]
    n = dx / np.linalg.norm(dx)
    masses = z.masses(params)
    va, vb = collide(z.v[i], z.v[j], n, masses[i], masses[j])

    v = np.array(z.v)
    v[i], v[j] = va, vb
    return z.replace(v=v)
