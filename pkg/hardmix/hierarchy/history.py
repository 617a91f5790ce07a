"""
Collision histories of the Duhamel expansion and the time simplices they live
on.

.. contents:: Content
   :local:

Histories
---------

A history of order :math:`k` started from an :math:`s`-marginal at time
:math:`t` is a sequence of adjunctions, in backward time order.  Record
:math:`i` adjoins a species-:math:`\\beta_i` particle with velocity
:math:`v_i` next to particle :math:`m_i` (zero-based) of species
:math:`\\alpha_i` at time :math:`t_i`, along the unit vector
:math:`\\omega_i`.  The sign :math:`j_i = -1` keeps the velocities, the sign
:math:`j_i = +1` collides the pair.

+------------------+-----------------------------------------------------------+
| times            | :math:`t \\geq t_1 > t_2 > \\dots > t_k \\geq 0`             |
+------------------+-----------------------------------------------------------+
| targets          | :math:`0 \\leq m_i < s_{\\alpha_i} +                        |
|                  | \\tilde\\beta^{\\alpha_i}_{i-1}`, the live population        |
+------------------+-----------------------------------------------------------+
| populations      | :math:`s + \\tilde\\beta_i`, with :math:`\\tilde\\beta_i`      |
|                  | the species counts of the first :math:`i` adjunctions      |
+------------------+-----------------------------------------------------------+

Time simplices
--------------

The separated simplex :math:`\\mathcal{T}_{k,\\delta}(t)` asks for gaps
:math:`t - t_1, t_1 - t_2, \\dots, t_k - 0` of at least :math:`\\delta`.
Shifting :math:`t_i` by :math:`(k + 1 - i) \\delta` maps it onto the plain
simplex of length :math:`L = t - (k + 1)\\delta`, so it has volume
:math:`L^k / k!` and is empty when :math:`L < 0`.
"""
__all__ = [
    "AdjunctionRecord",
    "CollisionHistory",
    "TimeSimplexSample",
    "random_history",
    "read_history_log",
    "sample_time_simplex",
    "write_history_log",
]

import json
import logging
import numpy as np

from dataclasses import dataclass
from pathlib import Path
from scipy.special import factorial
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

from hardmix.exceptions import EmptyDomainError, InvalidInputError, ValidationError
from hardmix.mixture.collisions import UNIT_TOL
from hardmix.mixture.species import SpeciesKind
from hardmix.utils import SeedLike, make_rng, sample_ball, sample_unit_vectors

logger = logging.getLogger(__name__)

Vector = Tuple[float, ...]
PathLike = Union[str, Path]


def _vector(value, name: str) -> Vector:
    try:
        vec = tuple(float(c) for c in np.asarray(value, dtype=float).ravel())
    except (TypeError, ValueError) as err:
        raise ValidationError(f"{name} must be a vector of floats") from err
    if not vec or not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name} must be a finite non-empty vector, got {vec}")
    return vec


@dataclass(frozen=True)
class AdjunctionRecord:
    """One adjunction of a `CollisionHistory`."""

    alpha: SpeciesKind
    beta: SpeciesKind
    m: int
    j: int
    omega: Vector
    v_new: Vector
    t: float

    def __post_init__(self):
        try:
            alpha = SpeciesKind.parse(self.alpha)
            beta = SpeciesKind.parse(self.beta)
        except InvalidInputError as err:
            raise ValidationError(str(err)) from err
        if int(self.m) != self.m or self.m < 0:
            raise ValidationError(f"target index must be a non-negative integer, got {self.m}")
        if self.j not in (-1, 1):
            raise ValidationError(f"adjunction sign must be -1 or +1, got {self.j}")
        omega = _vector(self.omega, "omega")
        v_new = _vector(self.v_new, "v_new")
        if len(omega) != len(v_new):
            raise ValidationError("omega and v_new must have the same dimension")
        if abs(np.linalg.norm(omega) - 1.0) > UNIT_TOL:
            raise ValidationError(f"omega must be a unit vector, got {omega}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "v_new", v_new)
        object.__setattr__(self, "t", float(self.t))

    @property
    def dim(self) -> int:
        return len(self.omega)

    def to_json(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha.tag,
            "beta": self.beta.tag,
            "m": self.m,
            "j": self.j,
            "omega": list(self.omega),
            "v": list(self.v_new),
            "t": self.t,
        }

    @classmethod
    def from_json(cls, record: Dict[str, Any]) -> "AdjunctionRecord":
        try:
            return cls(
                record["alpha"],
                record["beta"],
                record["m"],
                record["j"],
                record["omega"],
                record["v"],
                record["t"],
            )
        except (KeyError, TypeError) as err:
            raise ValidationError(f"malformed adjunction record {record!r}") from err


@dataclass(frozen=True)
class CollisionHistory:
    """
    A collision history started from an ``s``-marginal at time ``t``.

    Parameters
    ----------
    s : tuple of int
        Particle counts :math:`(s_1, s_2)` of the marginal.

    t : float
        Starting time :math:`t_0 = t \\geq 0`.

    records : sequence of `AdjunctionRecord`
        The adjunctions in the order they are met going backward in time.

    Raises
    ------
    `~hardmix.exceptions.ValidationError`
        If the times are not strictly decreasing inside :math:`[0, t]`, a
        target lies outside the live population, or the records disagree on
        the dimension.

    Examples
    --------
    >>> record = AdjunctionRecord("A", "B", 0, -1, (1.0, 0.0), (0.5, 0.0), 0.4)
    >>> history = CollisionHistory((1, 0), 1.0, (record,))
    >>> history.k, history.populations
    (1, ((1, 0), (1, 1)))
    """

    s: Tuple[int, int]
    t: float
    records: Tuple[AdjunctionRecord, ...] = ()

    def __post_init__(self):
        s = tuple(int(c) for c in self.s)
        if len(s) != 2 or min(s) < 0:
            raise ValidationError(f"s must be a pair of non-negative counts, got {self.s}")
        t = float(self.t)
        if not t >= 0:
            raise ValidationError(f"starting time must be non-negative, got {self.t}")
        records = tuple(
            r if isinstance(r, AdjunctionRecord) else AdjunctionRecord(**r)
            for r in self.records
        )
        if len({r.dim for r in records}) > 1:
            raise ValidationError("records disagree on the dimension")

        previous = t
        live = list(s)
        for i, record in enumerate(records, start=1):
            if not (0.0 <= record.t <= previous) or (i > 1 and record.t == previous):
                raise ValidationError(
                    f"record {i}: time {record.t} must lie in [0, {previous}] and "
                    f"strictly below the previous adjunction"
                )
            if record.m >= live[int(record.alpha)]:
                raise ValidationError(
                    f"record {i}: target {record.alpha.tag}{record.m} does not exist, "
                    f"only {live[int(record.alpha)]} {record.alpha.tag}-particles live"
                )
            live[int(record.beta)] += 1
            previous = record.t

        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "records", records)

    @property
    def k(self) -> int:
        """Number of adjunctions."""
        return len(self.records)

    @property
    def dim(self) -> Optional[int]:
        """Dimension of the records, `None` for the empty history."""
        return self.records[0].dim if self.records else None

    @property
    def times(self) -> Tuple[float, ...]:
        """:math:`(t_0, t_1, \\dots, t_k, t_{k+1} = 0)`."""
        return (self.t,) + tuple(r.t for r in self.records) + (0.0,)

    @property
    def alphas(self) -> Tuple[SpeciesKind, ...]:
        return tuple(r.alpha for r in self.records)

    @property
    def betas(self) -> Tuple[SpeciesKind, ...]:
        return tuple(r.beta for r in self.records)

    @property
    def sign(self) -> int:
        """:math:`\\prod_i j_i`."""
        return int(np.prod([r.j for r in self.records], dtype=int))

    @property
    def populations(self) -> Tuple[Tuple[int, int], ...]:
        """Species counts :math:`s + \\tilde\\beta_i` for :math:`i = 0..k`."""
        live = list(self.s)
        out = [tuple(live)]
        for record in self.records:
            live[int(record.beta)] += 1
            out.append(tuple(live))
        return tuple(out)

    def is_separated(self, delta: float) -> bool:
        """Whether every gap of `times` is at least ``delta``."""
        gaps = -np.diff(self.times)
        return bool(np.all(gaps >= delta))

    def to_json(self) -> Dict[str, Any]:
        return {
            "s": list(self.s),
            "t": self.t,
            "records": [r.to_json() for r in self.records],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "CollisionHistory":
        try:
            records = tuple(AdjunctionRecord.from_json(r) for r in data["records"])
            return cls(tuple(data["s"]), data["t"], records)
        except (KeyError, TypeError) as err:
            raise ValidationError(f"malformed history {data!r}") from err


class TimeSimplexSample(NamedTuple):
    """Times drawn by `sample_time_simplex` and the volume of the simplex."""

    times: np.ndarray
    volume: float


def sample_time_simplex(
    k: int,
    t: float,
    delta: float = 0.0,
    seed: SeedLike = None,
    size: Optional[int] = None,
) -> TimeSimplexSample:
    """
    Draw uniformly from the separated time simplex
    :math:`\\mathcal{T}_{k,\\delta}(t)`.

    Parameters
    ----------
    k : int
        Number of times.

    t : float
        Starting time.

    delta : float
        Minimal gap, zero for the plain simplex.

    seed : int, `numpy.random.Generator`, or `None`

    size : int, optional
        Number of draws; the times then have shape ``(size, k)``.

    Returns
    -------
    `TimeSimplexSample`
        Decreasing times of shape ``(k,)`` (or ``(size, k)``) and the
        volume :math:`L^k / k!`.

    Raises
    ------
    `~hardmix.exceptions.EmptyDomainError`
        If :math:`t < (k + 1) \\delta`.

    Examples
    --------
    >>> sample = sample_time_simplex(0, 1.0)
    >>> sample.times.shape, sample.volume
    ((0,), 1.0)
    >>> sample_time_simplex(2, 2.0, seed=1).volume
    2.0
    """
    if int(k) != k or k < 0:
        raise InvalidInputError(f"k must be a non-negative integer, got {k}")
    if delta < 0 or t < 0:
        raise InvalidInputError("t and delta must be non-negative")
    k = int(k)
    length = t - (k + 1) * delta
    if length < 0:
        raise EmptyDomainError(
            f"no {k} times in [0, {t}] with gaps of at least {delta}: need "
            f"t >= (k + 1) * delta = {(k + 1) * delta}"
        )
    rng = make_rng(seed)
    shape = (k,) if size is None else (int(size), k)
    draws = -np.sort(-rng.uniform(0.0, length, size=shape), axis=-1)
    shift = delta * np.arange(k, 0, -1)
    volume = float(length**k / factorial(k, exact=True))
    return TimeSimplexSample(draws + shift, volume)


def random_history(
    s: Tuple[int, int],
    k: int,
    t: float,
    dim: int,
    radius: float,
    delta: float = 0.0,
    seed: SeedLike = None,
) -> CollisionHistory:
    """
    Draw a history of order ``k``: times uniform on the separated simplex,
    targets uniform among the live particles, species and signs uniform,
    :math:`\\omega` uniform on the sphere, and :math:`v` uniform in the ball
    of radius ``radius``.
    """
    if sum(s) == 0 and k > 0:
        raise InvalidInputError("a history needs at least one particle to collide with")
    rng = make_rng(seed)
    times = sample_time_simplex(k, t, delta, rng).times
    omegas = sample_unit_vectors(rng, k, dim)
    velocities = sample_ball(rng, k, dim, radius)
    live = [int(c) for c in s]
    records = []
    for i in range(k):
        present = [kind for kind in SpeciesKind if live[int(kind)] > 0]
        alpha = present[rng.integers(len(present))]
        beta = SpeciesKind(int(rng.integers(2)))
        m = int(rng.integers(live[int(alpha)]))
        j = int(rng.choice((-1, 1)))
        records.append(
            AdjunctionRecord(alpha, beta, m, j, omegas[i], velocities[i], times[i])
        )
        live[int(beta)] += 1
    return CollisionHistory(tuple(s), t, tuple(records))


def write_history_log(histories: Iterable[CollisionHistory], path: PathLike) -> Path:
    """Write ``histories`` to ``path`` as JSON lines."""
    path = Path(path)
    with open(path, "w") as handle:
        for history in histories:
            handle.write(json.dumps(history.to_json()) + "\n")
    return path


def read_history_log(path: PathLike) -> List[CollisionHistory]:
    """Read a log written by `write_history_log`."""
    histories = []
    with open(path) as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                histories.append(CollisionHistory.from_json(json.loads(line)))
            except json.JSONDecodeError as err:
                raise ValidationError(f"{path}:{number}: {err}") from err
    return histories
