"""
The event-driven flow :math:`\\Psi^t` of the mixture.

.. contents:: Content
   :local:

Scheduling
----------

`advance` keeps one priority queue of predicted pair contacts keyed by time.
After a collision only the pairs involving the two colliding particles are
re-predicted; stale entries are recognized by per-particle collision stamps
and dropped when popped.  The multiple-collision check at an event queries a
k-d tree for the pairs within one interaction distance instead of forming
every pair distance.

Pathologies
-----------

A trajectory is aborted, not perturbed, when it meets

+--------------------------+--------------------------------------------------+
| ``MULTIPLE_COLLISION``   | another pair is within the contact window at an  |
|                          | event (or at the start)                          |
+--------------------------+--------------------------------------------------+
| ``GRAZING``              | the normal relative speed at an event is within  |
|                          | the grazing window                               |
+--------------------------+--------------------------------------------------+
| ``EVENT_OVERFLOW``       | more events than the budget                      |
+--------------------------+--------------------------------------------------+

The `FlowResult` then carries the configuration at the pathology time and the
`Pathology` record.  Negative times run the forward engine on the
velocity-reversed configuration and reverse the result.
"""
__all__ = [
    "CollisionEvent",
    "DEFAULT_EVENT_BUDGET",
    "FlowResult",
    "Pathology",
    "PathologyKind",
    "SimBox",
    "advance",
    "read_event_log",
    "write_event_log",
]

import enum
import heapq
import json
import logging
import numpy as np

from dataclasses import dataclass
from pathlib import Path
from scipy.spatial import cKDTree
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from hardmix.dynamics.events import contact_times
from hardmix.exceptions import InvalidInputError, PathologyError, ValidationError
from hardmix.mixture.collisions import (
    GRAZING_RTOL,
    BoundaryKind,
    classify_boundary,
    collide,
    impact_operator,
)
from hardmix.mixture.configuration import CONTACT_RTOL, Configuration, ParticleRef
from hardmix.mixture.species import MixtureParams, SpeciesKind

logger = logging.getLogger(__name__)

DEFAULT_EVENT_BUDGET = 10**6
"""Default maximum number of collisions per trajectory."""

Velocity = Tuple[float, ...]


@dataclass(frozen=True)
class SimBox:
    """
    The truncated phase space :math:`B^x_\\rho \\times B^v_R`: positions in the
    cube of half width ``half_width`` and speeds at most ``velocity_bound``.
    """

    half_width: float
    velocity_bound: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.velocity_bound > 0):
            raise InvalidInputError(
                f"box half width and velocity bound must be positive, got "
                f"{self.half_width} and {self.velocity_bound}"
            )

    def contains_positions(self, x: np.ndarray) -> np.ndarray:
        """Per-row membership of positions ``x`` (shape ``(n, d)``)."""
        return np.all(np.abs(x) <= self.half_width, axis=-1)

    def contains_velocities(self, v: np.ndarray) -> np.ndarray:
        """Per-row membership of velocities ``v`` (shape ``(n, d)``)."""
        return np.linalg.norm(v, axis=-1) <= self.velocity_bound

    def contains(self, z: Configuration) -> bool:
        """Whether every particle of ``z`` lies in the box."""
        return bool(
            np.all(self.contains_positions(z.x))
            and np.all(self.contains_velocities(z.v))
        )


class PathologyKind(enum.Enum):
    """Reasons a trajectory is discarded."""

    MULTIPLE_COLLISION = "multiple-collision"
    GRAZING = "grazing"
    EVENT_OVERFLOW = "event-overflow"


@dataclass(frozen=True)
class Pathology:
    """Kind and time of a trajectory pathology."""

    kind: PathologyKind
    time: float


@dataclass(frozen=True)
class CollisionEvent:
    """
    One collision of a trajectory: its time, the species-ordered pair, and the
    pair's velocities just before and just after the collision.
    """

    time: float
    pair: Tuple[ParticleRef, ParticleRef]
    pre: Tuple[Velocity, Velocity]
    post: Tuple[Velocity, Velocity]

    def to_json(self) -> Dict[str, Any]:
        """The JSON-lines record of the event."""
        return {
            "t": self.time,
            "pair": [[SpeciesKind(k).tag, int(i)] for k, i in self.pair],
            "pre": [list(v) for v in self.pre],
            "post": [list(v) for v in self.post],
        }

    @classmethod
    def from_json(cls, record: Dict[str, Any]) -> "CollisionEvent":
        """Inverse of `to_json`."""
        try:
            pair = tuple((SpeciesKind.parse(k), int(i)) for k, i in record["pair"])
            pre = tuple(tuple(float(c) for c in v) for v in record["pre"])
            post = tuple(tuple(float(c) for c in v) for v in record["post"])
            return cls(float(record["t"]), pair, pre, post)
        except (KeyError, TypeError, ValueError) as err:
            raise ValidationError(f"malformed event record {record!r}") from err


@dataclass(frozen=True)
class FlowResult:
    """
    Outcome of `advance`.

    ``final`` is the configuration at the requested time, or at the pathology
    time when ``pathology`` is set.  ``events`` are in chronological order.
    """

    final: Configuration
    events: Tuple[CollisionEvent, ...]
    pathology: Optional[Pathology] = None

    @property
    def ok(self) -> bool:
        """No pathology was met."""
        return self.pathology is None

    def raise_for_pathology(self) -> "FlowResult":
        """Raise `~hardmix.exceptions.PathologyError` if the flow was aborted."""
        if self.pathology is not None:
            raise PathologyError(
                f"trajectory aborted by {self.pathology.kind.value} at "
                f"t = {self.pathology.time:.6g}",
                self.pathology,
            )
        return self


class _ForwardFlow:
    """Mutable state of one forward trajectory."""

    def __init__(
        self,
        z: Configuration,
        params: MixtureParams,
        budget: int,
        contact_tol: float,
        grazing_tol: float,
    ):
        self.z = z
        self.counts = z.counts
        self.x = np.array(z.x)
        self.v = np.array(z.v)
        self.masses = z.masses(params)
        self.sigma = z.sigma_matrix(params)
        self.sigma_max = float(self.sigma.max()) if self.sigma.size else 0.0
        self.budget = budget
        self.contact_tol = contact_tol
        self.grazing_tol = grazing_tol
        self.now = 0.0
        self.stamp = np.zeros(z.size, dtype=np.int64)
        self.events: List[CollisionEvent] = []
        self.queue: List[Tuple[float, int, int, int, int]] = []

    def configuration(self) -> Configuration:
        return Configuration.from_stacked(self.x, self.v, self.counts)

    def ref(self, i: int) -> ParticleRef:
        return self.z.ref(i)

    def record(self, i: int, j: int, pre: Tuple[np.ndarray, np.ndarray]):
        self.events.append(
            CollisionEvent(
                self.now,
                (self.ref(i), self.ref(j)),
                (tuple(pre[0].tolist()), tuple(pre[1].tolist())),
                (tuple(self.v[i].tolist()), tuple(self.v[j].tolist())),
            )
        )
        self.stamp[i] += 1
        self.stamp[j] += 1

    def predict_all(self):
        n = self.x.shape[0]
        if n < 2:
            return
        iu, ju = np.triu_indices(n, k=1)
        times = contact_times(
            self.x[iu] - self.x[ju], self.v[iu] - self.v[ju], self.sigma[iu, ju]
        )
        for k in np.flatnonzero(np.isfinite(times)):
            i, j = int(iu[k]), int(ju[k])
            stamps = int(self.stamp[i]), int(self.stamp[j])
            self.queue.append((self.now + float(times[k]), i, j, *stamps))
        heapq.heapify(self.queue)

    def predict_for(self, p: int, skip: int):
        others = np.array([k for k in range(self.x.shape[0]) if k not in (p, skip)])
        if others.size == 0:
            return
        times = contact_times(
            self.x[p] - self.x[others], self.v[p] - self.v[others], self.sigma[p, others]
        )
        for k in np.flatnonzero(np.isfinite(times)):
            q = int(others[k])
            i, j = min(p, q), max(p, q)
            heapq.heappush(
                self.queue,
                (
                    self.now + float(times[k]),
                    i,
                    j,
                    int(self.stamp[i]),
                    int(self.stamp[j]),
                ),
            )

    def other_contacts(self, i: int, j: int) -> bool:
        tree = cKDTree(self.x)
        reach = (1.0 + self.contact_tol) * self.sigma_max
        pairs = tree.query_pairs(reach, output_type="ndarray")
        if pairs.size == 0:
            return False
        a, b = pairs[:, 0], pairs[:, 1]
        dist = np.linalg.norm(self.x[a] - self.x[b], axis=1)
        close = np.abs(dist / self.sigma[a, b] - 1.0) <= self.contact_tol
        close &= ~(((a == i) & (b == j)) | ((a == j) & (b == i)))
        return bool(np.any(close))

    def abort(self, kind: PathologyKind) -> FlowResult:
        logger.debug("trajectory aborted: %s at t=%.6g", kind.value, self.now)
        return FlowResult(
            self.configuration(), tuple(self.events), Pathology(kind, self.now)
        )

    def run(self, t: float) -> FlowResult:
        while self.queue:
            tau, i, j, si, sj = heapq.heappop(self.queue)
            if si != self.stamp[i] or sj != self.stamp[j]:
                continue
            if tau > t:
                break
            self.x += (tau - self.now) * self.v
            self.now = tau

            if len(self.events) >= self.budget:
                return self.abort(PathologyKind.EVENT_OVERFLOW)
            if self.other_contacts(i, j):
                return self.abort(PathologyKind.MULTIPLE_COLLISION)
            dx = self.x[i] - self.x[j]
            dv = self.v[i] - self.v[j]
            n = dx / np.linalg.norm(dx)
            if abs(float(n @ dv)) <= self.grazing_tol * float(np.linalg.norm(dv)):
                return self.abort(PathologyKind.GRAZING)

            pre = (self.v[i].copy(), self.v[j].copy())
            self.v[i], self.v[j] = collide(
                pre[0], pre[1], n, self.masses[i], self.masses[j]
            )
            self.record(i, j, pre)
            self.predict_for(i, skip=j)
            self.predict_for(j, skip=i)

        self.x += (t - self.now) * self.v
        self.now = t
        return FlowResult(self.configuration(), tuple(self.events))


def _advance_forward(
    z: Configuration,
    t: float,
    params: MixtureParams,
    budget: int,
    contact_tol: float,
    grazing_tol: float,
) -> FlowResult:
    boundary = classify_boundary(z, params, contact_tol, grazing_tol)
    if boundary.kind is BoundaryKind.MULTIPLE:
        return FlowResult(z, (), Pathology(PathologyKind.MULTIPLE_COLLISION, 0.0))
    if boundary.kind is BoundaryKind.SIMPLE_GRAZING:
        return FlowResult(z, (), Pathology(PathologyKind.GRAZING, 0.0))

    flow = _ForwardFlow(z, params, budget, contact_tol, grazing_tol)
    if boundary.kind is BoundaryKind.SIMPLE_PRE:
        i = z.stacked_index(boundary.pair[0])
        j = z.stacked_index(boundary.pair[1])
        pre = (flow.v[i].copy(), flow.v[j].copy())
        flow.v = np.array(impact_operator(z, params, contact_tol, grazing_tol).v)
        flow.record(i, j, pre)
    flow.predict_all()
    return flow.run(t)


def _reverse_event(event: CollisionEvent) -> CollisionEvent:
    def flip(pair):
        return tuple(tuple(-c for c in v) for v in pair)

    return CollisionEvent(-event.time, event.pair, flip(event.post), flip(event.pre))


def advance(
    z: Configuration,
    t: float,
    params: MixtureParams,
    budget: int = DEFAULT_EVENT_BUDGET,
    contact_tol: float = CONTACT_RTOL,
    grazing_tol: float = GRAZING_RTOL,
) -> FlowResult:
    """
    Evolve ``z`` by the hard-sphere flow for time ``t``.

    Parameters
    ----------
    z : `~hardmix.mixture.configuration.Configuration`
        Starting configuration, interior or in a simple non-grazing contact.
        A pre-collisional start is collided at time zero.

    t : float
        Time to advance; negative times run the flow backward.

    params : `~hardmix.mixture.species.MixtureParams`

    budget : int
        Largest number of collisions before the trajectory is aborted.

    contact_tol, grazing_tol : float
        Relative windows of the multiple-collision and grazing checks.

    Returns
    -------
    `FlowResult`
        Pathologies are reported in the result, never raised; use
        `FlowResult.raise_for_pathology` to turn them into errors.

    Raises
    ------
    `~hardmix.exceptions.InvalidStateError`
        If ``z`` has overlapping particles.

    Examples
    --------
    >>> params = MixtureParams(2, mass=(1.0, 1.0), diameter=(1.0, 1.0))
    >>> z = Configuration([[0.0, 0.0]], [[1.0, 0.5]], [], [])
    >>> advance(z, 2.0, params).final.x.tolist()
    [[2.0, 1.0]]
    """
    if budget < 0:
        raise InvalidInputError(f"event budget must be non-negative, got {budget}")
    t = float(t)
    if t >= 0:
        result = _advance_forward(z, t, params, budget, contact_tol, grazing_tol)
    else:
        back = _advance_forward(
            z.reversed(), -t, params, budget, contact_tol, grazing_tol
        )
        pathology = back.pathology
        if pathology is not None:
            pathology = Pathology(pathology.kind, -pathology.time)
        result = FlowResult(
            back.final.reversed(),
            tuple(_reverse_event(e) for e in reversed(back.events)),
            pathology,
        )
    logger.debug(
        "advanced %d particles by t=%.6g with %d events", z.size, t, len(result.events)
    )
    return result


PathLike = Union[str, Path]


def write_event_log(events: Iterable[CollisionEvent], path: PathLike) -> Path:
    """Write ``events`` to ``path`` as JSON lines."""
    path = Path(path)
    with open(path, "w") as handle:
        for event in events:
            handle.write(json.dumps(event.to_json()) + "\n")
    return path


def read_event_log(path: PathLike) -> List[CollisionEvent]:
    """Read an event log written by `write_event_log`."""
    events = []
    with open(path) as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValidationError(f"{path}:{number}: {err}") from err
            events.append(CollisionEvent.from_json(record))
    return events
