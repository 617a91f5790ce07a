"""
Pseudo-trajectories: the backward particle constructions along which the
Duhamel iterates of both hierarchies are evaluated.

.. contents:: Content
   :local:

Construction
------------

Starting from :math:`Z_s` at time :math:`t_0 = t`, the particles fly freely
backward to :math:`t_1`, where record 1 of the `CollisionHistory` adjoins a
particle next to its target, and so on down to time zero.  The two flavors
differ only in where the new particle is put: the ``BOLTZMANN`` flavor puts
it at the position :math:`x_{m_i}` of its target, the ``BBGKY`` flavor at
:math:`x_{m_i} + j_i \\epsilon_{(\\alpha_i,\\beta_i)} \\omega_i`.

For :math:`j_i = +1` the target and the new particle leave with the velocities
of `~hardmix.mixture.collisions.collide` along :math:`\\omega_i`; for
:math:`j_i = -1` they keep theirs.  The velocities are computed by the same
operations in both flavors, so they agree exactly, and the positions of a
particle adjoined after :math:`i - 1` adjunctions differ by at most
:math:`(i - 1) \\max \\epsilon`.

Stages
------

``stages[0]`` is :math:`Z_s`, ``stages[i]`` for :math:`i = 1..k+1` the
configuration :math:`Z(t_i^+)` just before adjunction :math:`i` (with
:math:`t_{k+1} = 0`), and ``adjoined[i - 1]`` the configuration
:math:`Z(t_i^-)` right after it.  The new particle is appended at the end of
its species block.
"""
__all__ = [
    "Flavor",
    "PseudoTrajectory",
    "RecollisionReport",
    "build_bbgky_pseudo",
    "build_boltzmann_pseudo",
    "compare_pseudo",
    "recollision_filter",
]

import enum
import logging
import numpy as np
import pandas as pd

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

from hardmix.exceptions import InvalidInputError, ValidationError
from hardmix.hierarchy.history import AdjunctionRecord, CollisionHistory
from hardmix.mixture.collisions import collide
from hardmix.mixture.configuration import CONTACT_RTOL, Configuration
from hardmix.mixture.species import MixtureParams, SpeciesKind

logger = logging.getLogger(__name__)

PROXIMITY_SLACK = 1e-10
"""Absolute slack added to the per-particle position bound."""

VELOCITY_TOL = 1e-12
"""Accepted velocity deviation between the two flavors."""


class Flavor(enum.Enum):
    """Which hierarchy a pseudo-trajectory belongs to."""

    BOLTZMANN = "boltzmann"
    BBGKY = "bbgky"


@dataclass(frozen=True)
class PseudoTrajectory:
    """
    The stages of a pseudo-trajectory built from one `CollisionHistory`.

    ``params`` is set for the BBGKY flavor and gives the interaction
    distances used for the offsets.
    """

    flavor: Flavor
    history: CollisionHistory
    stages: Tuple[Configuration, ...]
    adjoined: Tuple[Configuration, ...]
    params: Optional[MixtureParams] = None

    @property
    def k(self) -> int:
        return self.history.k

    @property
    def times(self) -> Tuple[float, ...]:
        """:math:`(t_0, \\dots, t_{k+1})`."""
        return self.history.times

    @property
    def final(self) -> Configuration:
        """:math:`Z(0^+)`, where the initial data is evaluated."""
        return self.stages[-1]

    def segments(self) -> Iterator[Tuple[int, Configuration, float]]:
        """
        The free-flight segments ``(i, start, duration)``, ``i = 0..k``:
        ``start`` flies backward for ``duration`` to reach ``stages[i + 1]``.
        """
        times = self.times
        starts = (self.stages[0],) + self.adjoined
        for i, start in enumerate(starts):
            yield i, start, times[i] - times[i + 1]


def _check(z_s: Configuration, history: CollisionHistory):
    if tuple(z_s.counts) != history.s:
        raise ValidationError(
            f"configuration has counts {z_s.counts}, history starts from s = {history.s}"
        )
    if history.dim is not None and history.dim != z_s.dim:
        raise ValidationError(
            f"history is {history.dim}-dimensional, configuration is {z_s.dim}"
        )


def _adjoin(
    z: Configuration,
    record: AdjunctionRecord,
    masses: Sequence[float],
    offset: float,
) -> Configuration:
    k = z.stacked_index((record.alpha, record.m))
    omega = np.asarray(record.omega)
    v_target = z.v[k]
    v_new = np.asarray(record.v_new)
    if record.j == 1:
        v_target, v_new = collide(
            v_target,
            v_new,
            omega,
            masses[int(record.alpha)],
            masses[int(record.beta)],
        )
    x_new = z.x[k] + (record.j * offset) * omega
    v = z.v.copy()
    v[k] = v_target
    return z.replace(v=v).with_particle(record.beta, x_new, v_new)


def _build(
    flavor: Flavor,
    z_s: Configuration,
    history: CollisionHistory,
    masses: Sequence[float],
    params: Optional[MixtureParams] = None,
) -> PseudoTrajectory:
    _check(z_s, history)
    times = history.times
    stages = [z_s]
    adjoined = []
    current = z_s
    for i, record in enumerate(history.records, start=1):
        before = current.free_flight(-(times[i - 1] - times[i]))
        stages.append(before)
        offset = 0.0
        if params is not None:
            offset = params.interaction_distance(record.alpha, record.beta)
        current = _adjoin(before, record, masses, offset)
        adjoined.append(current)
    stages.append(current.free_flight(-times[-2]))
    return PseudoTrajectory(flavor, history, tuple(stages), tuple(adjoined), params)


def build_boltzmann_pseudo(
    z_s: Configuration, history: CollisionHistory, masses: Sequence[float]
) -> PseudoTrajectory:
    """
    Build the Boltzmann hierarchy pseudo-trajectory of ``z_s``: new particles
    are adjoined at the position of their target.

    Parameters
    ----------
    z_s : `~hardmix.mixture.configuration.Configuration`
        The configuration at time ``history.t``, with counts ``history.s``.

    history : `~hardmix.hierarchy.history.CollisionHistory`

    masses : pair of float
        :math:`(M_1, M_2)`.

    Raises
    ------
    `~hardmix.exceptions.ValidationError`
        If ``z_s`` does not match the history.

    Examples
    --------
    >>> from hardmix.hierarchy.history import AdjunctionRecord, CollisionHistory
    >>> z = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [], [])
    >>> record = AdjunctionRecord("A", "B", 0, -1, (0.0, 1.0), (0.0, 2.0), 1.0)
    >>> pseudo = build_boltzmann_pseudo(z, CollisionHistory((1, 0), 2.0, (record,)), (1.0, 1.0))
    >>> pseudo.final.x.tolist()
    [[-2.0, 0.0], [-1.0, -2.0]]
    """
    return _build(Flavor.BOLTZMANN, z_s, history, masses)


def build_bbgky_pseudo(
    z_s: Configuration, history: CollisionHistory, params: MixtureParams
) -> PseudoTrajectory:
    """
    Build the BBGKY hierarchy pseudo-trajectory of ``z_s``: the new particle
    is put at :math:`x_{m_i} + j_i \\epsilon_{(\\alpha_i,\\beta_i)} \\omega_i`.
    """
    if params.dim != z_s.dim:
        raise ValidationError(f"params are {params.dim}-dimensional, configuration is {z_s.dim}")
    return _build(Flavor.BBGKY, z_s, history, params.mass, params)


def _proximity_order(history: CollisionHistory) -> int:
    # smallest n with k <= n and s_1, s_2 < n
    return max(history.k, history.s[0] + 1, history.s[1] + 1)


def compare_pseudo(
    boltzmann: PseudoTrajectory,
    bbgky: PseudoTrajectory,
    strict: bool = True,
) -> pd.DataFrame:
    """
    Compare the two flavors of a pseudo-trajectory stage by stage.

    Parameters
    ----------
    boltzmann, bbgky : `PseudoTrajectory`
        Built from the same history and the same starting configuration.

    strict : bool
        Raise when a stage breaks the proximity bounds.

    Returns
    -------
    `pandas.DataFrame`
        One row per stage with columns ``stage``, ``t``, ``particles``,
        ``position_deviation`` (largest per-particle distance),
        ``total_position_deviation`` (Euclidean norm over all particles),
        ``velocity_deviation``, ``bound`` (:math:`\\sqrt{2}(i - 1)\\max\\epsilon
        + 10^{-10}`), ``total_bound`` (:math:`\\sqrt{8} n^2 \\max\\epsilon`),
        and ``within_bound``.

    Raises
    ------
    `~hardmix.exceptions.ValidationError`
        If the inputs are not a Boltzmann and a BBGKY trajectory of the same
        history and start, or, with ``strict``, if a bound is broken.
    """
    if boltzmann.flavor is not Flavor.BOLTZMANN or bbgky.flavor is not Flavor.BBGKY:
        raise ValidationError("compare a Boltzmann trajectory with a BBGKY trajectory")
    if boltzmann.history != bbgky.history:
        raise ValidationError("pseudo-trajectories come from different histories")
    if boltzmann.stages[0] != bbgky.stages[0]:
        raise ValidationError("pseudo-trajectories start from different configurations")

    max_eps = bbgky.params.max_diameter
    n = _proximity_order(bbgky.history)
    total_bound = np.sqrt(8.0) * n**2 * max_eps
    rows = []
    for i, (zb, zn) in enumerate(zip(boltzmann.stages, bbgky.stages)):
        dx = np.linalg.norm(zb.x - zn.x, axis=-1)
        dv = np.linalg.norm(zb.v - zn.v, axis=-1)
        bound = np.sqrt(2.0) * max(i - 1, 0) * max_eps + PROXIMITY_SLACK
        row = {
            "stage": i,
            "t": boltzmann.times[i],
            "particles": zb.size,
            "position_deviation": float(dx.max(initial=0.0)),
            "total_position_deviation": float(np.sqrt(np.sum(dx**2))),
            "velocity_deviation": float(dv.max(initial=0.0)),
            "bound": bound,
            "total_bound": total_bound,
        }
        row["within_bound"] = bool(
            row["velocity_deviation"] <= VELOCITY_TOL
            and row["position_deviation"] <= bound
            and row["total_position_deviation"] <= total_bound + PROXIMITY_SLACK
        )
        rows.append(row)
    frame = pd.DataFrame(rows)
    if strict and not frame["within_bound"].all():
        bad = frame.loc[~frame["within_bound"], "stage"].tolist()
        raise ValidationError(f"pseudo-trajectories drift apart beyond the bound at stages {bad}")
    return frame


@dataclass(frozen=True)
class RecollisionReport:
    """
    Outcome of `recollision_filter`: ``stage`` is the first free-flight
    segment in which a pair comes closer than its interaction distance, and
    ``pair`` the stacked indices of that pair.
    """

    clean: bool
    stage: Optional[int] = None
    pair: Optional[Tuple[int, int]] = None


def _closest_approach(
    z: Configuration, duration: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(z.size, k=1)
    dx = z.x[iu] - z.x[ju]
    dv = z.v[iu] - z.v[ju]
    # positions at backward time u are dx - u dv
    speed2 = np.einsum("ij,ij->i", dv, dv)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(speed2 > 0, np.einsum("ij,ij->i", dx, dv) / speed2, 0.0)
    u = np.clip(u, 0.0, duration)
    gap = dx - u[:, None] * dv
    return iu, ju, np.sqrt(np.einsum("ij,ij->i", gap, gap))


def recollision_filter(
    pseudo: PseudoTrajectory,
    params: Optional[MixtureParams] = None,
    tol: float = CONTACT_RTOL,
) -> RecollisionReport:
    """
    Replay the free-flight segments of a BBGKY pseudo-trajectory under the
    hard-sphere exclusion.

    A segment is recollided when some pair comes closer than
    :math:`(1 - tol)\\,\\epsilon_{(\\alpha,\\beta)}` while it is flown.  A
    freshly adjoined pair starts in contact and separates backward in time,
    so it only counts if it comes back.

    Parameters
    ----------
    pseudo : `PseudoTrajectory`

    params : `~hardmix.mixture.species.MixtureParams`, optional
        Interaction distances; those of ``pseudo`` by default.

    tol : float
        Relative contact window.
    """
    params = params or pseudo.params
    if params is None:
        raise InvalidInputError("recollision check needs interaction distances")
    for i, start, duration in pseudo.segments():
        if start.size < 2:
            continue
        iu, ju, closest = _closest_approach(start, duration)
        sigma = start.sigma_matrix(params)[iu, ju]
        hit = np.flatnonzero(closest < sigma * (1.0 - tol))
        if hit.size:
            pair = (int(iu[hit[0]]), int(ju[hit[0]]))
            logger.debug("recollision in segment %d between %s", i, pair)
            return RecollisionReport(False, i, pair)
    return RecollisionReport(True)
