"""
Velocity test functions and the observables

.. math::

    I_\\phi(X_s) = \\int \\phi(V_s) f^{(s)}(X_s, V_s) \\, dV_s

of marginals, evaluated on positions :math:`X_s` whose centers are more than
a separation :math:`\\sigma` apart.

.. contents:: Content
   :local:

Test functions
--------------

+----------------------+-----------------------------------------------------+
| family               | :math:`\\phi(V_s)`                                   |
+======================+=====================================================+
| `VelocityPolynomial` | a sum of monomials of total degree at most 4         |
+----------------------+-----------------------------------------------------+
| `VelocityGaussian`   | :math:`a \\, e^{-|V_s - c|^2 / 2 w^2}`                |
+----------------------+-----------------------------------------------------+
| `VelocityBox`        | :math:`a \\, \\mathbb{1}\\{l \\leq V_s \\leq u\\}`      |
+----------------------+-----------------------------------------------------+

Every family is a finite sum of products of one-particle factors, which
`VelocityFunction.terms` exposes, so observables of tensorized densities
factor into one-particle integrals.

Sources
-------

`observable` accepts a `~hardmix.chaos.marginals.MarginalEstimate` (summed
over the velocity cells at the position cell of :math:`X_s`), a
`~hardmix.kinetic.pde.GridDensityPair` or a pair of one-particle densities
(taken as the tensor product :math:`g^{\\otimes s_1} \\otimes h^{\\otimes s_2}`
and integrated by a Gauss-Legendre rule per particle), or any marginal
``f(x, v)`` (integrated by a product rule over the velocity ball).
"""
__all__ = [
    "DEFAULT_VELOCITY_RADIUS",
    "MAX_DEGREE",
    "ObservableSpec",
    "VelocityBox",
    "VelocityFunction",
    "VelocityGaussian",
    "VelocityPolynomial",
    "check_separated",
    "histogram_observable",
    "observable",
    "one_particle_integrals",
    "regional_observable",
    "velocity_function",
]

import abc
import numpy as np

from dataclasses import dataclass
from functools import partial
from scipy.spatial.distance import pdist
from scipy.special import roots_legendre
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from hardmix.chaos.marginals import MarginalEstimate
from hardmix.exceptions import InvalidInputError, SeparationError, ValidationError
from hardmix.hierarchy.duhamel import free_flow_observable
from hardmix.kinetic.pde import GridDensityPair

MAX_DEGREE = 4
"""Largest total degree of a `VelocityPolynomial` term."""

DEFAULT_VELOCITY_RADIUS = 6.0
"""Velocity cut-off of density quadratures when the source has none."""

Factor = Callable[[np.ndarray], np.ndarray]
Term = Tuple[float, Tuple[Factor, ...]]


def _pair(s) -> Tuple[int, int]:
    s = tuple(int(c) for c in s)
    if len(s) != 2 or min(s) < 0 or sum(s) == 0:
        raise InvalidInputError(f"s must be a nonzero pair of counts, got {s}")
    return s


def _per_particle(value, size: int, dim: int, name: str) -> np.ndarray:
    array = np.broadcast_to(np.asarray(value, dtype=float), (size, dim)).copy()
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} must be finite")
    return array


class VelocityFunction(abc.ABC):
    """
    A test function :math:`\\phi(V_s)` of the velocities of ``s``
    particles, evaluated on arrays of shape ``(..., |s|, d)``.
    """

    family: str = ""

    def __init__(self, s: Tuple[int, int], dim: int):
        self.s = _pair(s)
        self.dim = int(dim)
        if self.dim < 1:
            raise InvalidInputError(f"dim must be positive, got {dim}")

    @property
    def size(self) -> int:
        return sum(self.s)

    @abc.abstractmethod
    def terms(self) -> List[Term]:
        """``[(coefficient, (factor_1, ..., factor_|s|)), ...]``."""

    @abc.abstractmethod
    def bound(self, radius: float) -> float:
        """An upper bound of :math:`|\\phi|` on the ball of radius ``radius``."""

    @abc.abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-2:] != (self.size, self.dim):
            raise InvalidInputError(
                f"{self.family} test function takes velocities of shape "
                f"(..., {self.size}, {self.dim}), got {v.shape}"
            )
        total = np.zeros(v.shape[:-2])
        for coefficient, factors in self.terms():
            product = np.full(v.shape[:-2], coefficient)
            for k, factor in enumerate(factors):
                product = product * factor(v[..., k, :])
            total = total + product
        return total

    def __eq__(self, other):
        return type(other) is type(self) and other.to_dict() == self.to_dict()

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


def _monomial(v: np.ndarray, powers: np.ndarray) -> np.ndarray:
    return np.prod(v**powers, axis=-1)


class VelocityPolynomial(VelocityFunction):
    """
    :math:`\\phi(V_s) = \\sum_j c_j \\prod_{k, i} v_{k,i}^{p_{j,k,i}}` with
    every total degree :math:`\\sum_{k,i} p_{j,k,i}` at most `MAX_DEGREE`.

    Parameters
    ----------
    s : tuple of int

    dim : int

    terms : sequence of ``(coefficient, powers)``
        ``powers`` is an array of non-negative integers of shape
        ``(|s|, d)``, one row per particle in species-block order.

    Examples
    --------
    >>> phi = VelocityPolynomial((1, 1), 2, [(2.0, [[1, 0], [0, 1]])])
    >>> phi(np.array([[3.0, 5.0], [7.0, 11.0]]))
    array(66.)
    """

    family = "polynomial"

    def __init__(self, s, dim, terms: Sequence[Tuple[float, Any]]):
        super().__init__(s, dim)
        normalized = []
        for coefficient, powers in terms:
            powers = np.asarray(powers)
            if powers.shape != (self.size, self.dim):
                raise InvalidInputError(
                    f"powers must have shape {(self.size, self.dim)}, got {powers.shape}"
                )
            if np.any(powers < 0) or np.any(powers != np.round(powers)):
                raise InvalidInputError("powers must be non-negative integers")
            powers = powers.astype(np.int64)
            if powers.sum() > MAX_DEGREE:
                raise InvalidInputError(
                    f"degree {powers.sum()} exceeds the largest degree {MAX_DEGREE}"
                )
            normalized.append((float(coefficient), powers))
        if not normalized:
            raise InvalidInputError("a polynomial needs at least one term")
        self._terms = normalized

    @classmethod
    def constant(cls, s, dim: int, value: float = 1.0) -> "VelocityPolynomial":
        size = sum(_pair(s))
        return cls(s, dim, [(value, np.zeros((size, dim), dtype=int))])

    @classmethod
    def component(
        cls, s, dim: int, particle: int, axis: int, power: int = 1
    ) -> "VelocityPolynomial":
        """:math:`v_{k,i}^p` for particle ``k`` and axis ``i``."""
        size = sum(_pair(s))
        if not (0 <= particle < size and 0 <= axis < dim):
            raise InvalidInputError(f"no component ({particle}, {axis}) for s = {s}")
        powers = np.zeros((size, dim), dtype=int)
        powers[particle, axis] = power
        return cls(s, dim, [(1.0, powers)])

    @property
    def degree(self) -> int:
        return int(max(p.sum() for _, p in self._terms))

    def terms(self) -> List[Term]:
        return [
            (c, tuple(partial(_monomial, powers=p[k]) for k in range(self.size)))
            for c, p in self._terms
        ]

    def bound(self, radius: float) -> float:
        return float(sum(abs(c) * radius ** int(p.sum()) for c, p in self._terms))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "terms": [
                {"coefficient": c, "powers": p.tolist()} for c, p in self._terms
            ],
        }


def _gaussian(v: np.ndarray, center: np.ndarray, width: float) -> np.ndarray:
    dv = v - center
    return np.exp(-np.sum(dv * dv, axis=-1) / (2.0 * width**2))


class VelocityGaussian(VelocityFunction):
    """:math:`a \\, e^{-|V_s - c|^2 / 2 w^2}`, centered at the origin by default."""

    family = "gaussian"

    def __init__(self, s, dim, width: float = 1.0, center=0.0, amplitude: float = 1.0):
        super().__init__(s, dim)
        if not width > 0:
            raise InvalidInputError(f"width must be positive, got {width}")
        self.width = float(width)
        self.center = _per_particle(center, self.size, self.dim, "center")
        self.amplitude = float(amplitude)

    def terms(self) -> List[Term]:
        return [
            (
                self.amplitude,
                tuple(
                    partial(_gaussian, center=self.center[k], width=self.width)
                    for k in range(self.size)
                ),
            )
        ]

    def bound(self, radius: float) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "width": self.width,
            "center": self.center.tolist(),
            "amplitude": self.amplitude,
        }


def _box(v: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.all((v >= lower) & (v <= upper), axis=-1).astype(float)


class VelocityBox(VelocityFunction):
    """:math:`a` times the indicator of the box :math:`l \\leq V_s \\leq u`."""

    family = "box"

    def __init__(self, s, dim, lower, upper, amplitude: float = 1.0):
        super().__init__(s, dim)
        self.lower = _per_particle(lower, self.size, self.dim, "lower")
        self.upper = _per_particle(upper, self.size, self.dim, "upper")
        if np.any(self.lower > self.upper):
            raise InvalidInputError("box lower corner exceeds its upper corner")
        self.amplitude = float(amplitude)

    def terms(self) -> List[Term]:
        return [
            (
                self.amplitude,
                tuple(
                    partial(_box, lower=self.lower[k], upper=self.upper[k])
                    for k in range(self.size)
                ),
            )
        ]

    def bound(self, radius: float) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "amplitude": self.amplitude,
        }


def velocity_function(data: Mapping[str, Any], s, dim: int) -> VelocityFunction:
    """
    Build a test function from its mapping form (as written by
    ``to_dict`` and used in run configuration files).
    """
    data = dict(data)
    family = data.pop("family", None)
    try:
        if family == "polynomial":
            terms = [(t["coefficient"], t["powers"]) for t in data.pop("terms")]
            phi = VelocityPolynomial(s, dim, terms)
        elif family == "gaussian":
            phi = VelocityGaussian(s, dim, **data)
            data = {}
        elif family == "box":
            phi = VelocityBox(s, dim, **data)
            data = {}
        else:
            raise InvalidInputError(
                f"unknown test function family {family!r}; "
                f"expected polynomial, gaussian, or box"
            )
    except (KeyError, TypeError) as err:
        raise InvalidInputError(f"malformed {family} test function: {err}") from err
    if data:
        raise InvalidInputError(f"unexpected keys {sorted(data)} for a {family} test function")
    return phi


@dataclass(frozen=True)
class ObservableSpec:
    """
    What to measure: the marginal ``s``, the test function ``phi``, and the
    separation :math:`\\sigma` of admissible positions.
    """

    s: Tuple[int, int]
    phi: VelocityFunction
    separation: float = 0.0
    spec_id: str = ""

    def __post_init__(self):
        s = _pair(self.s)
        if self.phi.s != s:
            raise InvalidInputError(f"test function is for s = {self.phi.s}, not {s}")
        if self.separation < 0:
            raise InvalidInputError(f"separation must be non-negative, got {self.separation}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "separation", float(self.separation))
        if not self.spec_id:
            object.__setattr__(self, "spec_id", f"{self.phi.family}-{s[0]}{s[1]}")

    @property
    def dim(self) -> int:
        return self.phi.dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.spec_id,
            "s": list(self.s),
            "separation": self.separation,
            "phi": self.phi.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], dim: int) -> "ObservableSpec":
        try:
            s = _pair(data["s"])
            phi = velocity_function(data["phi"], s, dim)
        except KeyError as err:
            raise InvalidInputError(f"observable needs the key {err}") from err
        return cls(s, phi, float(data.get("separation", 0.0)), str(data.get("id", "")))


def check_separated(x_s, separation: float, size: Optional[int] = None) -> np.ndarray:
    """
    Return ``x_s`` as an array of shape ``(|s|, d)`` after checking that its
    centers are pairwise more than ``separation`` apart.

    Raises
    ------
    `~hardmix.exceptions.SeparationError`
    """
    x_s = np.asarray(x_s, dtype=float)
    if x_s.ndim != 2 or (size is not None and x_s.shape[0] != size):
        raise InvalidInputError(f"positions must have shape ({size}, d), got {x_s.shape}")
    if x_s.shape[0] > 1:
        gaps = pdist(x_s)
        if np.min(gaps) <= separation:
            raise SeparationError(
                f"positions are {np.min(gaps):.4g} apart, closer than the "
                f"separation {separation:g}"
            )
    return x_s


def histogram_observable(
    estimate: MarginalEstimate, phi: VelocityFunction, x_s
) -> Tuple[float, float]:
    """
    The observable of a histogram estimate at the position cell of ``x_s``
    with its standard error.

    The test function is evaluated at the velocity cell centers.  The
    standard error treats the histogram entries as independent, which
    overstates it when several relabelings of one configuration are pooled.
    """
    if phi.s != estimate.s or phi.dim != estimate.grid.dim:
        raise ValidationError(f"test function does not fit the {estimate.s} marginal")
    grid = estimate.grid
    x_s = np.asarray(x_s, dtype=float)
    target = grid.locate(x_s[None], np.zeros_like(x_s)[None])[0, : x_s.size]
    if np.any(target < 0) or estimate.entries == 0:
        return 0.0, 0.0
    width = x_s.size
    match = np.all(estimate.cells[:, :width] == target, axis=1)
    if not np.any(match):
        return 0.0, 0.0
    _, v = grid.centers(estimate.cells[match], estimate.size)
    volume = grid.space_cell_volume**estimate.size
    scores = phi(v) / volume
    n = estimate.entries
    first = float(np.sum(estimate.counts[match] * scores)) / n
    second = float(np.sum(estimate.counts[match] * scores**2)) / n
    stderr = np.sqrt(max(second - first**2, 0.0) / n)
    return first, float(stderr)


def one_particle_integrals(
    density: Callable, factor: Factor, x: np.ndarray, radius: float, nodes: int
) -> np.ndarray:
    """
    :math:`\\int_{[-R, R]^d} \\psi(v) f(x, v) \\, dv` for positions ``x`` of
    shape ``(..., d)`` by a Gauss-Legendre product rule.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    points, weights = roots_legendre(nodes)
    points, weights = radius * points, radius * weights
    v = np.stack(np.meshgrid(*([points] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    w = np.prod(
        np.stack(np.meshgrid(*([weights] * dim), indexing="ij"), axis=-1), axis=-1
    ).ravel()
    xb = np.broadcast_to(x[..., None, :], x.shape[:-1] + v.shape)
    vb = np.broadcast_to(v, xb.shape)
    values = np.asarray(density(xb, vb), dtype=float) * factor(vb)
    return np.sum(values * w, axis=-1)


def _tensor_observable(
    densities: Tuple[Callable, Callable],
    phi: VelocityFunction,
    x_s: np.ndarray,
    radius: float,
    nodes: int,
) -> float:
    s1 = phi.s[0]
    total = 0.0
    for coefficient, factors in phi.terms():
        product = coefficient
        for k, factor in enumerate(factors):
            density = densities[0] if k < s1 else densities[1]
            product *= float(one_particle_integrals(density, factor, x_s[k], radius, nodes))
        total += product
    return total


Source = Union[MarginalEstimate, GridDensityPair, Tuple[Callable, Callable], Callable]


def observable(
    source: Source,
    spec: ObservableSpec,
    x_s,
    radius: Optional[float] = None,
    nodes: int = 24,
) -> float:
    """
    Evaluate :math:`I_\\phi(X_s)` for ``source`` at the positions ``x_s``.

    Parameters
    ----------
    source : `~hardmix.chaos.marginals.MarginalEstimate`, `~hardmix.kinetic.pde.GridDensityPair`, pair of callables, or callable
        See the module documentation.

    spec : `ObservableSpec`

    x_s : array_like, shape ``(|s|, d)``

    radius : float, optional
        Velocity cut-off of density sources; defaults to the velocity extent
        of a `~hardmix.kinetic.pde.GridDensityPair` and to
        `DEFAULT_VELOCITY_RADIUS` otherwise.

    nodes : int
        Gauss-Legendre nodes per velocity axis.

    Raises
    ------
    `~hardmix.exceptions.SeparationError`
        If two positions of ``x_s`` are not more than ``spec.separation``
        apart.

    Examples
    --------
    >>> from hardmix.dynamics.sampling import MaxwellianDensity
    >>> g = MaxwellianDensity(2, spread=1.0)
    >>> spec = ObservableSpec((1, 0), VelocityPolynomial.constant((1, 0), 2))
    >>> round(observable((g, g), spec, [[0.0, 0.0]]) * 2 * np.pi, 4)
    1.0
    """
    x_s = check_separated(x_s, spec.separation, sum(spec.s))
    if x_s.shape[1] != spec.dim:
        raise InvalidInputError(f"positions are {x_s.shape[1]}-dimensional, phi is {spec.dim}")
    if isinstance(source, MarginalEstimate):
        return histogram_observable(source, spec.phi, x_s)[0]
    if isinstance(source, GridDensityPair):
        radius = source.grid.velocity_extent if radius is None else radius
        return _tensor_observable((source.g, source.h), spec.phi, x_s, radius, nodes)
    radius = DEFAULT_VELOCITY_RADIUS if radius is None else radius
    if isinstance(source, (tuple, list)) and len(source) == 2:
        return _tensor_observable(tuple(source), spec.phi, x_s, radius, nodes)
    if callable(source):
        return free_flow_observable(
            lambda s: source, x_s, spec.s, 0.0, radius, spec.phi, nodes
        )
    raise InvalidInputError(f"cannot take observables of {type(source).__name__}")


def regional_observable(
    estimate: MarginalEstimate, phi: VelocityFunction, lower, upper
) -> float:
    """
    :math:`\\int_{\\Omega^{|s|}} \\int \\phi(V_s) f^{(s)} \\, dV_s \\, dX_s`
    over the box :math:`\\Omega = [l, u]` from a histogram estimate, counting
    the cells whose centers lie in the box.

    Dividing by the same integral of :math:`\\phi \\equiv 1` gives conditional
    means, e.g. the mean velocity of A-particles in a region.
    """
    if phi.s != estimate.s or phi.dim != estimate.grid.dim:
        raise ValidationError(f"test function does not fit the {estimate.s} marginal")
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (estimate.grid.dim,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (estimate.grid.dim,))
    if np.any(lower > upper):
        raise InvalidInputError("region lower corner exceeds its upper corner")
    if estimate.cells.shape[0] == 0:
        return 0.0
    x, v = estimate.centers()
    inside = np.all((x >= lower) & (x <= upper), axis=(-2, -1))
    return float(np.sum(estimate.probabilities[inside] * phi(v[inside])))
