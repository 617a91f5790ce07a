"""
Stopping times of the mixture flow: contact times of single pairs and the
earliest contact of a configuration.
"""
__all__ = [
    "ContactTime",
    "EventKind",
    "EventPrediction",
    "contact_times",
    "next_event",
    "time_to_contact",
]

import enum
import logging
import numpy as np

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from hardmix.exceptions import InvalidStateError, PathologyError
from hardmix.mixture.collisions import (
    GRAZING_RTOL,
    BoundaryKind,
    classify_boundary,
    impact_operator,
)
from hardmix.mixture.configuration import CONTACT_RTOL, Configuration, ParticleRef
from hardmix.mixture.species import MixtureParams

logger = logging.getLogger(__name__)


class ContactTime(NamedTuple):
    """First contact time of a pair and whether the contact is tangent."""

    time: float
    grazing: bool


class EventKind(enum.Enum):
    """Kind of a predicted contact."""

    CONTACT = "contact"
    GRAZING_CONTACT = "grazing-contact"


@dataclass(frozen=True)
class EventPrediction:
    """The earliest predicted contact of a configuration."""

    time: float
    pair: Tuple[ParticleRef, ParticleRef]
    kind: EventKind


def time_to_contact(
    x_rel,
    v_rel,
    sigma: float,
    tol: Optional[float] = None,
    grazing_tol: float = GRAZING_RTOL,
) -> Optional[ContactTime]:
    """
    Smallest :math:`t \\geq 0` with :math:`|x_{rel} + t v_{rel}| = \\sigma`.

    The root of the quadratic is taken in the form
    :math:`t = c / (-b + \\sqrt{b^2 - a c})`, which does not cancel when the
    discriminant is small.  The contact is tangent (grazing) when the
    discriminant :math:`b^2 - ac = |v|^2 (\\sigma^2 - |x_\\perp|^2)` is within
    ``grazing_tol * |v|^2 sigma^2`` of zero.

    Parameters
    ----------
    x_rel, v_rel : array_like
        Relative position and velocity of the pair.

    sigma : float
        Contact distance.

    tol : float, optional
        Accepted overlap, defaults to ``1e-9 * sigma``.

    grazing_tol : float
        Relative window for tangency.

    Returns
    -------
    `ContactTime` or `None`
        `None` when the pair never reaches contact.

    Raises
    ------
    `~hardmix.exceptions.InvalidStateError`
        If the pair overlaps by more than ``tol``.

    Examples
    --------
    >>> time_to_contact([2.0, 0.0], [-1.0, 0.0], 1.0)
    ContactTime(time=1.0, grazing=False)
    >>> time_to_contact([2.0, 0.0], [1.0, 0.0], 1.0) is None
    True
    """
    x_rel = np.asarray(x_rel, dtype=float)
    v_rel = np.asarray(v_rel, dtype=float)
    if tol is None:
        tol = CONTACT_RTOL * sigma
    if np.linalg.norm(x_rel) < sigma - tol:
        raise InvalidStateError(
            f"pair overlaps: |x_rel| = {np.linalg.norm(x_rel)} < sigma = {sigma}"
        )

    a = float(v_rel @ v_rel)
    b = float(x_rel @ v_rel)
    c = float(x_rel @ x_rel) - sigma * sigma
    if a == 0.0 or b >= 0.0:
        return None
    disc = b * b - a * c
    window = grazing_tol * a * sigma * sigma
    if disc < -window:
        return None
    grazing = disc <= window
    t = c / (-b + np.sqrt(max(disc, 0.0)))
    return ContactTime(max(float(t), 0.0), bool(grazing))


def contact_times(
    x_rel: np.ndarray, v_rel: np.ndarray, sigma: np.ndarray
) -> np.ndarray:
    """
    Vectorized `time_to_contact` without overlap or grazing checks.

    Returns an array of first contact times with ``inf`` where a pair never
    reaches contact.
    """
    a = np.einsum("...k,...k->...", v_rel, v_rel)
    b = np.einsum("...k,...k->...", x_rel, v_rel)
    c = np.einsum("...k,...k->...", x_rel, x_rel) - sigma * sigma
    disc = b * b - a * c
    hit = (a > 0.0) & (b < 0.0) & (disc >= 0.0)
    times = np.full(np.shape(a), np.inf)
    root = np.sqrt(np.where(hit, disc, 0.0))
    denom = np.where(hit, -b + root, 1.0)
    times[hit] = np.maximum(c[hit] / denom[hit], 0.0)
    return times


def next_event(
    z: Configuration,
    params: MixtureParams,
    contact_tol: float = CONTACT_RTOL,
    grazing_tol: float = GRAZING_RTOL,
) -> Optional[EventPrediction]:
    """
    The earliest contact of any interacting pair of ``z`` under free flow.

    A pre-collisional boundary configuration is first mapped through the
    impact operator, so the prediction refers to the outgoing state.  Pairs
    currently in post-collisional contact are not counted.

    Returns
    -------
    `EventPrediction` or `None`
        `None` when no pair ever collides.

    Raises
    ------
    `~hardmix.exceptions.PathologyError`
        If ``z`` starts in a grazing or multiple collision.
    """
    boundary = classify_boundary(z, params, contact_tol, grazing_tol)
    if boundary.kind in (BoundaryKind.SIMPLE_GRAZING, BoundaryKind.MULTIPLE):
        raise PathologyError(
            f"cannot predict events from a {boundary.kind.value} configuration",
            boundary,
        )
    if boundary.kind is BoundaryKind.SIMPLE_PRE:
        z = impact_operator(z, params, contact_tol, grazing_tol)

    if z.size < 2:
        return None
    iu, ju = np.triu_indices(z.size, k=1)
    sigma = z.sigma_matrix(params)[iu, ju]
    times = contact_times(z.x[iu] - z.x[ju], z.v[iu] - z.v[ju], sigma)
    best = int(np.argmin(times))
    if not np.isfinite(times[best]):
        return None

    i, j = int(iu[best]), int(ju[best])
    contact = time_to_contact(
        z.x[i] - z.x[j], z.v[i] - z.v[j], sigma[best], grazing_tol=grazing_tol
    )
    grazing = contact is not None and contact.grazing
    kind = EventKind.GRAZING_CONTACT if grazing else EventKind.CONTACT
    logger.debug("next event at t=%.6g for pair (%d, %d)", times[best], i, j)
    return EventPrediction(float(times[best]), (z.ref(i), z.ref(j)), kind)
