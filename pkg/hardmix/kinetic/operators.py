"""
The bilinear collision kernels of the Boltzmann system for mixtures and the
collision operators of the BBGKY and Boltzmann hierarchies.

.. contents:: Content
   :local:

Kernels
-------

For species :math:`\\alpha, \\beta` and functions :math:`G, H` of velocity,

.. math::

    Q^\\alpha_\\beta(G, H)(v) = \\int_{\\mathbb{R}^d} \\int_{S^{d-1}}
    ((w - v) \\cdot \\theta)_+ \\left[ G(v^*) H(w^*) - G(v) H(w) \\right]
    d\\theta \\, dw,

where :math:`(v^*, w^*)` is the mass-weighted collision law of
`~hardmix.mixture.collisions.collide` with normal :math:`\\theta`.  The
:math:`w` integral is restricted to the velocity ball of the
`~hardmix.kinetic.quadrature.CollisionQuadrature`.

Hierarchy operators
-------------------

A marginal is a callable ``f(x, v)`` taking positions and velocities of shape
``(..., n, d)`` in species-block order (all A-particles, then all
B-particles) and returning values of shape ``(...)``.  The operators act on
the marginal with one more particle: the adjoined species-``beta`` particle
is appended at the end of its species block.

+-----------------+------------------------------------------+-------------------+
| operator        | prefactor                                | adjoined position |
+=================+==========================================+===================+
| Boltzmann       | :math:`A^\\alpha_\\beta`                   | :math:`x_i`       |
+-----------------+------------------------------------------+-------------------+
| BBGKY           | :math:`(N_\\beta - s_\\beta)               | :math:`x_i \\pm    |
|                 | \\epsilon_{(\\alpha,\\beta)}^{d-1}`         | \\epsilon\\theta`   |
+-----------------+------------------------------------------+-------------------+

The gain term is evaluated at post-collisional velocities with the adjoined
particle at :math:`x_i + \\epsilon_{(\\alpha,\\beta)}\\theta`; the loss term at
the unchanged velocities with the adjoined particle at
:math:`x_i - \\epsilon_{(\\alpha,\\beta)}\\theta`.  With an energy radius
:math:`R` the argument is multiplied by the indicator of
:math:`\\{\\sum |v_k|^2 \\leq R^2\\}`.

The operators are evaluated pointwise on continuous functions; they are not
filtered by the flow.
"""
__all__ = [
    "CollisionNodes",
    "HierarchyOperator",
    "MarginalFunction",
    "apply_bbgky_hierarchy_op",
    "apply_boltzmann_hierarchy_op",
    "bbgky_gain_term",
    "bbgky_loss_term",
    "bbgky_operator",
    "boltzmann_gain_term",
    "boltzmann_loss_term",
    "boltzmann_operator",
    "collision_nodes",
    "q_gain",
    "q_kernel",
    "q_loss",
]

import functools
import logging
import numpy as np

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

from hardmix.exceptions import InvalidInputError
from hardmix.kinetic.quadrature import CollisionQuadrature
from hardmix.mixture.collisions import collide
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import (
    GradScaling,
    RealizedScaling,
    bbgky_prefactor,
    kernel_constant,
)

logger = logging.getLogger(__name__)

MarginalFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
VelocityFunction = Callable[[np.ndarray], np.ndarray]

CHUNK_SIZE = 2**21
"""Upper bound on collision nodes materialized at once."""


@dataclass(frozen=True)
class CollisionNodes:
    """
    The quadrature nodes of a collision integral at a batch of velocities.

    All arrays broadcast to ``(..., m, p)`` (trailing ``d`` for vectors) where
    ``m`` indexes the velocity ball nodes and ``p`` the sphere nodes.
    """

    v: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    v_star: np.ndarray = field(repr=False)
    w_star: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    """Quadrature weights times :math:`((w - v) \\cdot \\theta)_+`."""


def _masses(masses: Sequence[float], alpha, beta) -> Tuple[float, float]:
    alpha, beta = SpeciesKind.parse(alpha), SpeciesKind.parse(beta)
    return float(masses[int(alpha)]), float(masses[int(beta)])


def collision_nodes(
    v: np.ndarray,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
) -> CollisionNodes:
    """
    Incoming and outgoing velocities with their weights for the collision
    integral at velocities ``v`` of shape ``(..., d)``.
    """
    m_a, m_b = _masses(masses, alpha, beta)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != quadrature.dim:
        raise InvalidInputError(
            f"velocity dimension {v.shape[-1]} does not match quadrature "
            f"dimension {quadrature.dim}"
        )
    vv = v[..., None, None, :]
    w = quadrature.velocities.nodes[:, None, :]
    theta = quadrature.sphere.nodes[None, :, :]
    rate = np.maximum(np.sum((w - vv) * theta, axis=-1), 0.0)
    weights = (
        rate
        * quadrature.velocities.weights[:, None]
        * quadrature.sphere.weights[None, :]
    )
    v_star, w_star = collide(vv, w, theta, m_a, m_b)
    return CollisionNodes(vv, w, theta, v_star, w_star, weights)


def _batched(v: np.ndarray, quadrature: CollisionQuadrature):
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    per_point = len(quadrature.velocities) * len(quadrature.sphere)
    step = max(1, CHUNK_SIZE // per_point)
    for start in range(0, len(flat), step):
        yield slice(start, start + step), flat[start : start + step]


def q_gain(
    G: VelocityFunction,
    H: VelocityFunction,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    v: np.ndarray,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
) -> np.ndarray:
    """
    Gain part :math:`\\iint ((w - v)\\cdot\\theta)_+ G(v^*) H(w^*)` of
    `q_kernel`.
    """
    v = np.asarray(v, dtype=float)
    out = np.empty(v.shape[:-1]).reshape(-1)
    for sl, chunk in _batched(v, quadrature):
        nodes = collision_nodes(chunk, alpha, beta, masses, quadrature)
        integrand = nodes.weights * G(nodes.v_star) * H(nodes.w_star)
        out[sl] = integrand.sum(axis=(-2, -1))
    return out.reshape(v.shape[:-1])


def q_loss(
    G: VelocityFunction,
    H: VelocityFunction,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    v: np.ndarray,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
) -> np.ndarray:
    """
    Loss part :math:`G(v) \\iint ((w - v)\\cdot\\theta)_+ H(w)` of
    `q_kernel`.
    """
    v = np.asarray(v, dtype=float)
    h_nodes = H(quadrature.velocities.nodes)
    out = np.empty(v.shape[:-1]).reshape(-1)
    for sl, chunk in _batched(v, quadrature):
        nodes = collision_nodes(chunk, alpha, beta, masses, quadrature)
        out[sl] = np.sum(nodes.weights * h_nodes[:, None], axis=(-2, -1))
    return G(v) * out.reshape(v.shape[:-1])


def q_kernel(
    G: VelocityFunction,
    H: VelocityFunction,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    v: np.ndarray,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
) -> np.ndarray:
    """
    Evaluate the mixture collision kernel :math:`Q^\\alpha_\\beta(G, H)`.

    Parameters
    ----------
    G, H : callable
        Functions of velocity mapping ``(..., d)`` arrays to ``(...)``;
        ``G`` describes species ``alpha`` and ``H`` species ``beta``.

    alpha, beta : `~hardmix.mixture.species.SpeciesKind`

    v : array_like, shape ``(..., d)``
        Velocities at which the kernel is evaluated.

    masses : pair of float
        Masses :math:`(M_1, M_2)` in species order.

    quadrature : `~hardmix.kinetic.quadrature.CollisionQuadrature`

    Returns
    -------
    `numpy.ndarray` of shape ``(...)``

    Examples
    --------
    >>> from hardmix.kinetic.quadrature import CollisionQuadrature
    >>> quad = CollisionQuadrature.default(2, radius=6.0)
    >>> maxwellian = lambda v: np.exp(-np.sum(v**2, axis=-1))
    >>> value = q_kernel(maxwellian, maxwellian, "A", "A", [0.5, 0.0], (1.0, 1.0), quad)
    >>> abs(float(value)) < 1e-12
    True
    """
    return q_gain(G, H, alpha, beta, v, masses, quadrature) - q_loss(
        G, H, alpha, beta, v, masses, quadrature
    )


@dataclass(frozen=True)
class HierarchyOperator:
    """
    A collision operator :math:`\\mathcal{C}^\\alpha_{s, s+\\beta}` of one of
    the hierarchies, mapping a marginal with :math:`|s| + 1` particles to a
    function of :math:`|s|` particles.

    Use `boltzmann_operator` or `bbgky_operator` to build one.
    """

    s: Tuple[int, int]
    alpha: SpeciesKind
    beta: SpeciesKind
    masses: Tuple[float, float]
    quadrature: CollisionQuadrature = field(repr=False)
    prefactor: float
    offset: float = 0.0
    radius: Optional[float] = None

    def __post_init__(self):
        s = tuple(int(c) for c in self.s)
        if len(s) != 2 or min(s) < 0:
            raise InvalidInputError(f"s must be a pair of counts, got {self.s}")
        alpha = SpeciesKind.parse(self.alpha)
        if s[int(alpha)] == 0:
            raise InvalidInputError(
                f"no {alpha.tag}-particle in s = {s} to collide with"
            )
        if self.radius is not None and self.radius <= 0:
            raise InvalidInputError("energy radius must be positive")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", SpeciesKind.parse(self.beta))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @property
    def size(self) -> int:
        """:math:`|s|`, the number of particles of the result."""
        return sum(self.s)

    @property
    def insert_at(self) -> int:
        """Stacked index of the adjoined particle in the argument."""
        return self.s[0] if self.beta is SpeciesKind.A else self.size

    def _target(self, i: int) -> int:
        if not 0 <= i < self.s[int(self.alpha)]:
            raise InvalidInputError(
                f"target index {i} out of range for {self.s[int(self.alpha)]} "
                f"{self.alpha.tag}-particles"
            )
        return (0 if self.alpha is SpeciesKind.A else self.s[0]) + i

    def _check_point(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        expected = (self.size, self.quadrature.dim)
        if x.shape != expected or v.shape != expected:
            raise InvalidInputError(
                f"phase point must have shape {expected}, got {x.shape}, {v.shape}"
            )
        return x, v

    def _argument(self, x, v, k, x_new, v_target, v_new):
        """Stack the adjoined phase point, shape ``(m, p, |s| + 1, d)``."""
        batch = np.broadcast_shapes(x_new.shape, v_target.shape, v_new.shape)
        xs = np.broadcast_to(x, batch[:-1] + x.shape).copy()
        vs = np.broadcast_to(v, batch[:-1] + v.shape).copy()
        vs[..., k, :] = v_target
        at = self.insert_at

        def adjoin(stack, new):
            new = np.broadcast_to(new, batch)[..., None, :]
            return np.concatenate([stack[..., :at, :], new, stack[..., at:, :]], axis=-2)

        return adjoin(xs, x_new), adjoin(vs, v_new)

    def _evaluate(self, f_next, x_next, v_next):
        values = np.asarray(f_next(x_next, v_next), dtype=float)
        if self.radius is not None:
            inside = np.sum(v_next**2, axis=(-2, -1)) <= self.radius**2
            values = np.where(inside, values, 0.0)
        return values

    def gain_term(self, f_next: MarginalFunction, x, v, i: int) -> float:
        """
        :math:`\\mathcal{C}^{+,i}`: the gain integral for target ``i`` of
        species ``alpha`` (zero-based within its species).
        """
        x, v = self._check_point(x, v)
        k = self._target(i)
        nodes = collision_nodes(
            v[k], self.alpha, self.beta, self.masses, self.quadrature
        )
        x_new = x[k] + self.offset * nodes.theta
        x_next, v_next = self._argument(
            x, v, k, x_new, nodes.v_star, nodes.w_star
        )
        values = self._evaluate(f_next, x_next, v_next)
        return self.prefactor * float(np.sum(nodes.weights * values))

    def loss_term(self, f_next: MarginalFunction, x, v, i: int) -> float:
        """
        :math:`\\mathcal{C}^{-,i}`: the loss integral for target ``i`` of
        species ``alpha``.
        """
        x, v = self._check_point(x, v)
        k = self._target(i)
        nodes = collision_nodes(
            v[k], self.alpha, self.beta, self.masses, self.quadrature
        )
        x_new = x[k] - self.offset * nodes.theta
        w = np.broadcast_to(nodes.w, nodes.weights.shape + (self.quadrature.dim,))
        x_next, v_next = self._argument(x, v, k, x_new, v[k], w)
        values = self._evaluate(f_next, x_next, v_next)
        return self.prefactor * float(np.sum(nodes.weights * values))

    def __call__(self, f_next: MarginalFunction, x, v) -> float:
        total = 0.0
        for i in range(self.s[int(self.alpha)]):
            total += self.gain_term(f_next, x, v, i) - self.loss_term(
                f_next, x, v, i
            )
        return total

    def bind(self, f_next: MarginalFunction) -> Callable[[np.ndarray, np.ndarray], float]:
        """The operator applied to ``f_next``, as a function of a phase point."""
        return functools.partial(self.__call__, f_next)


def boltzmann_operator(
    s: Tuple[int, int],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    scaling: GradScaling,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
    radius: Optional[float] = None,
) -> HierarchyOperator:
    """The Boltzmann hierarchy operator with constant :math:`A^\\alpha_\\beta`."""
    alpha, beta = SpeciesKind.parse(alpha), SpeciesKind.parse(beta)
    return HierarchyOperator(
        s,
        alpha,
        beta,
        tuple(masses),
        quadrature,
        prefactor=kernel_constant(scaling, alpha, beta),
        offset=0.0,
        radius=radius,
    )


def bbgky_operator(
    s: Tuple[int, int],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    realized: RealizedScaling,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
    added: Tuple[int, int] = (0, 0),
    radius: Optional[float] = None,
) -> HierarchyOperator:
    """
    The BBGKY hierarchy operator of a realized scaling.

    ``added`` counts the particles of each species adjoined earlier in a
    history; it reduces the reservoir in the prefactor.

    Raises
    ------
    `~hardmix.exceptions.ExhaustedReservoirError`
        If no species-``beta`` particle is left.
    """
    alpha, beta = SpeciesKind.parse(alpha), SpeciesKind.parse(beta)
    return HierarchyOperator(
        s,
        alpha,
        beta,
        tuple(masses),
        quadrature,
        prefactor=bbgky_prefactor(realized, tuple(s), tuple(added), alpha, beta),
        offset=realized.interaction_distance(alpha, beta),
        radius=radius,
    )


def apply_boltzmann_hierarchy_op(
    f_next: MarginalFunction,
    s: Tuple[int, int],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    scaling: GradScaling,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
    radius: Optional[float] = None,
) -> Callable[[np.ndarray, np.ndarray], float]:
    """
    Apply :math:`\\mathcal{C}^{\\alpha,\\infty}_{s,s+\\beta}` to ``f_next``.

    Returns
    -------
    callable
        ``(x, v) -> float`` for a phase point of :math:`|s|` particles.
    """
    op = boltzmann_operator(s, alpha, beta, scaling, masses, quadrature, radius)
    return op.bind(f_next)


def apply_bbgky_hierarchy_op(
    f_next: MarginalFunction,
    s: Tuple[int, int],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    realized: RealizedScaling,
    masses: Sequence[float],
    quadrature: CollisionQuadrature,
    added: Tuple[int, int] = (0, 0),
    radius: Optional[float] = None,
) -> Callable[[np.ndarray, np.ndarray], float]:
    """Apply :math:`\\mathcal{C}^{\\alpha,N}_{s,s+\\beta}` to ``f_next``."""
    op = bbgky_operator(
        s, alpha, beta, realized, masses, quadrature, added=added, radius=radius
    )
    return op.bind(f_next)


def boltzmann_gain_term(f_next, x, v, i, s, alpha, beta, scaling, masses, quadrature, radius=None):
    """Gain term of `apply_boltzmann_hierarchy_op` for target ``i``."""
    op = boltzmann_operator(s, alpha, beta, scaling, masses, quadrature, radius)
    return op.gain_term(f_next, x, v, i)


def boltzmann_loss_term(f_next, x, v, i, s, alpha, beta, scaling, masses, quadrature, radius=None):
    """Loss term of `apply_boltzmann_hierarchy_op` for target ``i``."""
    op = boltzmann_operator(s, alpha, beta, scaling, masses, quadrature, radius)
    return op.loss_term(f_next, x, v, i)


def bbgky_gain_term(
    f_next, x, v, i, s, alpha, beta, realized, masses, quadrature, added=(0, 0), radius=None
):
    """Gain term of `apply_bbgky_hierarchy_op` for target ``i``."""
    op = bbgky_operator(s, alpha, beta, realized, masses, quadrature, added, radius)
    return op.gain_term(f_next, x, v, i)


def bbgky_loss_term(
    f_next, x, v, i, s, alpha, beta, realized, masses, quadrature, added=(0, 0), radius=None
):
    """Loss term of `apply_bbgky_hierarchy_op` for target ``i``."""
    op = bbgky_operator(s, alpha, beta, realized, masses, quadrature, added, radius)
    return op.loss_term(f_next, x, v, i)
