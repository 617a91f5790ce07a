"""
Monte Carlo evaluation of the truncated Duhamel iterates of the BBGKY and
Boltzmann hierarchies along pseudo-trajectories.

.. contents:: Content
   :local:

Estimator
---------

The order-``k`` iterate of an ``s``-marginal tested against
:math:`\\phi(V_s)` is an integral over velocities :math:`V_s`, times in the
separated simplex, and one :math:`(\\omega_i, v_i)` per adjunction, summed
over species :math:`\\alpha_i, \\beta_i`, targets :math:`m_i`, and signs
:math:`j_i`.  Every sample draws all of them uniformly and carries the
weight

.. math::

    |B^{d|s|}_R| \\, \\phi(V_s) \\, |\\mathcal{T}_{k,\\delta}(t)|
    \\prod_{i=1}^k j_i A_i \\, c_i \\, |B^d_R| \\, \\frac{|S^{d-1}|}{2}
    \\, |\\omega_i \\cdot (v_i - v_{m_i})| \\; f_0(Z(0^+)),

where :math:`A_i` is :math:`A^{\\alpha_i}_{\\beta_i}` (Boltzmann) or the
finite-:math:`N` prefactor (BBGKY), and :math:`c_i` counts the discrete
choices that were sampled rather than prescribed.  :math:`\\omega_i` is
reflected into the half sphere where :math:`\\omega_i \\cdot (v_i - v_{m_i})
> 0`, which samples the half sphere uniformly.  Samples whose velocities
leave :math:`\\{\\sum |v|^2 \\leq R^2\\}` at any stage weigh zero; in the
BBGKY flavor, so do samples whose pseudo-trajectory recollides.

All random numbers of a sample are drawn in a fixed order from a stream that
depends on the seed and on the chunk index only, so the two flavors are
coupled sample by sample, and the result does not depend on ``threads``.
"""
__all__ = [
    "DEFAULT_MAX_ORDER",
    "DuhamelEstimate",
    "TensorizedData",
    "duhamel_iterate",
    "free_flow_observable",
    "truncated_series",
]

import logging
import numpy as np
import pandas as pd

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from scipy.special import roots_legendre
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

from hardmix.exceptions import (
    EmptyDomainError,
    InvalidInputError,
)
from hardmix.hierarchy.history import (
    AdjunctionRecord,
    CollisionHistory,
    sample_time_simplex,
)
from hardmix.hierarchy.pseudo import (
    Flavor,
    build_bbgky_pseudo,
    build_boltzmann_pseudo,
    recollision_filter,
)
from hardmix.kinetic.operators import MarginalFunction
from hardmix.mixture.collisions import collide
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import SpeciesKind
from hardmix.scaling import GradScaling, RealizedScaling, bbgky_prefactor
from hardmix.utils import (
    SeedLike,
    ball_volume,
    mean_and_stderr,
    sample_ball,
    sample_unit_vectors,
    spawn_seeds,
    sphere_area,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 8
"""Largest order ``k`` and bound on the species counts of ``s``."""

CHUNK_SIZE = 512
"""Samples drawn from one spawned stream."""

MAX_QUADRATURE_POINTS = 2**21

InitialData = Callable[[Tuple[int, int]], MarginalFunction]
TestFunction = Callable[[np.ndarray], np.ndarray]


class TensorizedData:
    """
    Tensorized initial data :math:`g_0^{\\otimes s_1} \\otimes h_0^{\\otimes
    s_2}`, optionally restricted to configurations whose centers are more
    than ``separation`` apart.

    Calling the instance with ``s`` returns the ``s``-marginal as a function
    ``f(x, v)`` of arrays of shape ``(..., |s|, d)``.

    Parameters
    ----------
    g0, h0 : callable
        One-particle densities ``(x, v) -> value`` of species A and B, taking
        arrays of shape ``(..., d)``, e.g.
        `~hardmix.dynamics.sampling.MaxwellianDensity`.

    separation : float
        Use the largest diameter to get the data truncated to the separated
        set.
    """

    def __init__(self, g0: MarginalFunction, h0: MarginalFunction, separation: float = 0.0):
        if separation < 0:
            raise InvalidInputError("separation must be non-negative")
        self.g0 = g0
        self.h0 = h0
        self.separation = float(separation)

    def __repr__(self):
        return f"TensorizedData(g0={self.g0!r}, h0={self.h0!r}, separation={self.separation})"

    def __call__(self, s: Tuple[int, int]) -> MarginalFunction:
        s1, s2 = (int(c) for c in s)

        def marginal(x, v):
            x = np.asarray(x, dtype=float)
            v = np.asarray(v, dtype=float)
            if x.shape[-2] != s1 + s2:
                raise InvalidInputError(
                    f"marginal of s = {(s1, s2)} evaluated at {x.shape[-2]} particles"
                )
            values = np.ones(x.shape[:-2])
            for k in range(s1 + s2):
                density = self.g0 if k < s1 else self.h0
                values = values * density(x[..., k, :], v[..., k, :])
            if self.separation > 0 and s1 + s2 > 1:
                iu, ju = np.triu_indices(s1 + s2, k=1)
                gaps = np.linalg.norm(x[..., iu, :] - x[..., ju, :], axis=-1)
                values = np.where(np.all(gaps > self.separation, axis=-1), values, 0.0)
            return values

        return marginal


@dataclass(frozen=True)
class DuhamelEstimate:
    """
    Monte Carlo estimate of one truncated Duhamel iterate.

    ``abs_value`` is the mean of the absolute sample weights, an upper
    estimate of the iterate's absolute value; ``rejected_fraction`` is the
    share of samples discarded for recollisions.
    """

    value: float
    stderr: float
    abs_value: float
    samples: int
    rejected_fraction: float
    k: int
    flavor: Flavor

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "flavor": self.flavor.value,
            "value": self.value,
            "stderr": self.stderr,
            "abs_value": self.abs_value,
            "samples": self.samples,
            "rejected_fraction": self.rejected_fraction,
        }


def _species_pattern(values, k: int, name: str):
    if values is None:
        return None
    values = tuple(SpeciesKind.parse(v) for v in values)
    if len(values) != k:
        raise InvalidInputError(f"{name} must have length k = {k}, got {len(values)}")
    return values


def _int_pattern(values, k: int, name: str, allowed=None):
    if values is None:
        return None
    values = tuple(int(v) for v in values)
    if len(values) != k:
        raise InvalidInputError(f"{name} must have length k = {k}, got {len(values)}")
    if allowed is not None and not set(values) <= set(allowed):
        raise InvalidInputError(f"{name} must take values in {allowed}, got {values}")
    if allowed is None and min(values, default=0) < 0:
        raise InvalidInputError(f"{name} must be non-negative, got {values}")
    return values


def _check_targets(s, alphas, betas, targets):
    live = list(s)
    for i, (alpha, beta) in enumerate(zip(alphas, betas)):
        count = live[int(alpha)]
        if count == 0 or (targets is not None and targets[i] >= count):
            raise InvalidInputError(
                f"adjunction {i + 1}: only {count} {alpha.tag}-particles to collide with"
            )
        live[int(beta)] += 1


class _DuhamelSampler:
    """Draws and weighs the samples of one iterate."""

    def __init__(
        self,
        initial_data: InitialData,
        x_s: np.ndarray,
        s: Tuple[int, int],
        k: int,
        t: float,
        scaling: Union[GradScaling, RealizedScaling],
        masses: Tuple[float, float],
        flavor: Flavor,
        alphas,
        betas,
        signs,
        targets,
        radius: float,
        delta: float,
        test_function: Optional[TestFunction],
        v_s: Optional[np.ndarray],
    ):
        self.initial_data = initial_data
        self.x_s = x_s
        self.s = s
        self.k = k
        self.t = t
        self.masses = masses
        self.flavor = flavor
        self.alphas = alphas
        self.betas = betas
        self.signs = signs
        self.targets = targets
        self.radius = radius
        self.delta = delta
        self.test_function = test_function
        self.v_s = v_s
        self.dim = x_s.shape[-1]
        self.size = sum(s)

        if isinstance(scaling, RealizedScaling):
            self.realized = scaling
            self.grad = scaling.scaling
        else:
            self.realized = None
            self.grad = scaling
        self.params = None
        if flavor is Flavor.BBGKY:
            self.params = self.realized.params(masses)

        self.adjunction_volume = ball_volume(self.dim, radius) * 0.5 * sphere_area(self.dim)
        self.velocity_volume = (
            1.0 if v_s is not None else ball_volume(self.size * self.dim, radius)
        )
        self._marginals: Dict[Tuple[int, int], MarginalFunction] = {}

    def marginal(self, counts: Tuple[int, int]) -> MarginalFunction:
        if counts not in self._marginals:
            self._marginals[counts] = self.initial_data(counts)
        return self._marginals[counts]

    def prefactor(self, added, alpha, beta) -> float:
        if self.flavor is Flavor.BOLTZMANN:
            return self.grad.kernel_constant(alpha, beta)
        return bbgky_prefactor(self.realized, self.s, tuple(added), alpha, beta)

    def draw(self, seed: np.random.SeedSequence, n: int) -> Dict[str, np.ndarray]:
        # the order of the draws couples flavors and prescribed patterns
        rng = np.random.default_rng(seed)
        k, d = self.k, self.dim
        draws = {}
        if self.v_s is None:
            draws["v_s"] = sample_ball(rng, n, self.size * d, self.radius).reshape(
                n, self.size, d
            )
        else:
            draws["v_s"] = np.broadcast_to(self.v_s, (n, self.size, d))
        simplex = sample_time_simplex(k, self.t, self.delta, rng, size=n)
        draws["times"], draws["simplex_volume"] = simplex.times, simplex.volume
        draws["omega"] = sample_unit_vectors(rng, n * k, d).reshape(n, k, d)
        draws["v_new"] = sample_ball(rng, n * k, d, self.radius).reshape(n, k, d)
        draws["choice"] = rng.random((n, k, 4))
        return draws

    def weigh(self, draws: Dict[str, np.ndarray], p: int) -> Tuple[float, bool]:
        """Weight of sample ``p`` and whether it was rejected."""
        v_s = np.array(draws["v_s"][p])
        r2 = self.radius**2
        if np.sum(v_s**2) > r2:
            return 0.0, False
        weight = self.velocity_volume * draws["simplex_volume"]
        if self.v_s is None and self.test_function is not None:
            weight *= float(self.test_function(v_s))

        v = v_s.copy()
        live = list(self.s)
        added = [0, 0]
        records = []
        for i in range(self.k):
            choice = draws["choice"][p, i]
            multiplicity = 1.0
            if self.alphas is None:
                alpha = SpeciesKind.A if choice[2] < 0.5 else SpeciesKind.B
                multiplicity *= 2.0
            else:
                alpha = self.alphas[i]
            if self.betas is None:
                beta = SpeciesKind.A if choice[3] < 0.5 else SpeciesKind.B
                multiplicity *= 2.0
            else:
                beta = self.betas[i]
            if self.signs is None:
                j = 1 if choice[0] < 0.5 else -1
                multiplicity *= 2.0
            else:
                j = self.signs[i]
            count = live[int(alpha)]
            if self.targets is None:
                m = min(int(choice[1] * count), count - 1)
                multiplicity *= count
            else:
                m = self.targets[i]
            if m < 0 or m >= count:
                return 0.0, False

            target = (0 if alpha is SpeciesKind.A else live[0]) + m
            v_new = draws["v_new"][p, i]
            omega = draws["omega"][p, i]
            relative = float(omega @ (v_new - v[target]))
            if relative == 0.0:
                return 0.0, False
            omega = np.copysign(1.0, relative) * omega

            weight *= (
                j
                * self.prefactor(added, alpha, beta)
                * multiplicity
                * self.adjunction_volume
                * abs(relative)
            )
            adjoined = v_new
            if j == 1:
                v[target], adjoined = collide(
                    v[target], v_new, omega, self.masses[int(alpha)], self.masses[int(beta)]
                )
            at = live[0] if beta is SpeciesKind.A else live[0] + live[1]
            v = np.insert(v, at, adjoined, axis=0)
            live[int(beta)] += 1
            added[int(beta)] += 1
            if np.sum(v**2) > r2:
                return 0.0, False
            records.append(
                AdjunctionRecord(
                    alpha, beta, m, j, tuple(omega), tuple(v_new), float(draws["times"][p, i])
                )
            )

        history = CollisionHistory(self.s, self.t, tuple(records))
        z_s = Configuration.from_stacked(self.x_s, v_s, self.s)
        if self.flavor is Flavor.BOLTZMANN:
            pseudo = build_boltzmann_pseudo(z_s, history, self.masses)
        else:
            pseudo = build_bbgky_pseudo(z_s, history, self.params)
            if not recollision_filter(pseudo).clean:
                return 0.0, True
        final = pseudo.final
        value = float(self.marginal(tuple(final.counts))(final.x, final.v))
        return weight * value, False

    def chunk(self, seed: np.random.SeedSequence, n: int) -> Tuple[np.ndarray, np.ndarray]:
        draws = self.draw(seed, n)
        weights = np.empty(n)
        rejected = np.zeros(n, dtype=bool)
        for p in range(n):
            weights[p], rejected[p] = self.weigh(draws, p)
        return weights, rejected


def duhamel_iterate(
    initial_data: InitialData,
    x_s,
    s: Tuple[int, int],
    k: int,
    t: float,
    scaling: Union[GradScaling, RealizedScaling],
    masses: Sequence[float],
    flavor: Union[Flavor, str] = Flavor.BOLTZMANN,
    alphas: Optional[Sequence] = None,
    betas: Optional[Sequence] = None,
    signs: Optional[Sequence[int]] = None,
    targets: Optional[Sequence[int]] = None,
    radius: float = 4.0,
    delta: float = 0.0,
    test_function: Optional[TestFunction] = None,
    v_s=None,
    samples: int = 10_000,
    seed: SeedLike = None,
    threads: int = 1,
    max_order: int = DEFAULT_MAX_ORDER,
) -> DuhamelEstimate:
    """
    Estimate the order-``k`` truncated Duhamel iterate of the ``s``-marginal
    at positions ``x_s`` and time ``t``.

    Parameters
    ----------
    initial_data : callable
        ``s -> f(x, v)``, the family of initial marginals; see
        `TensorizedData`.

    x_s : array_like, shape ``(|s|, d)``
        Positions in species-block order.

    s : tuple of int

    k : int
        Order of the iterate, at most ``max_order``.

    t : float
        Time.

    scaling : `~hardmix.scaling.GradScaling` or `~hardmix.scaling.RealizedScaling`
        The BBGKY flavor needs a realized scaling.

    masses : pair of float

    flavor : `~hardmix.hierarchy.pseudo.Flavor` or str

    alphas, betas : sequence of `~hardmix.mixture.species.SpeciesKind`, optional
        Prescribed species of the targets and of the adjoined particles;
        summed over when omitted.

    signs : sequence of {-1, 1}, optional
        Prescribed gain (``1``) or loss (``-1``) choices; summed over when
        omitted.

    targets : sequence of int, optional
        Prescribed zero-based targets within their species; summed over when
        omitted.

    radius : float
        Energy truncation :math:`R`.

    delta : float
        Minimal gap of the collision times.

    test_function : callable, optional
        :math:`\\phi(V_s)` on arrays of shape ``(|s|, d)``; one by default.

    v_s : array_like, shape ``(|s|, d)``, optional
        Evaluate the iterate pointwise at these velocities instead of
        integrating against ``test_function``.

    samples : int

    seed : int, `~numpy.random.SeedSequence`, or `None`

    threads : int
        Worker threads; the estimate does not depend on it.

    max_order : int

    Returns
    -------
    `DuhamelEstimate`

    Raises
    ------
    `~hardmix.exceptions.EmptyDomainError`
        If the separated simplex is empty.

    `~hardmix.exceptions.ExhaustedReservoirError`
        If a BBGKY prefactor runs out of particles.
    """
    flavor = Flavor(flavor)
    s = tuple(int(c) for c in s)
    if len(s) != 2 or min(s) < 0 or sum(s) == 0:
        raise InvalidInputError(f"s must be a pair of counts with |s| >= 1, got {s}")
    if int(k) != k or not 0 <= k <= max_order:
        raise InvalidInputError(f"k must be an integer in [0, {max_order}], got {k}")
    if max(s) >= max_order:
        raise InvalidInputError(f"species counts of s = {s} must stay below {max_order}")
    k = int(k)
    x_s = np.asarray(x_s, dtype=float)
    if x_s.ndim != 2 or x_s.shape[0] != sum(s):
        raise InvalidInputError(f"x_s must have shape ({sum(s)}, d), got {x_s.shape}")
    if x_s.shape[1] != scaling.dim:
        raise InvalidInputError(
            f"positions are {x_s.shape[1]}-dimensional, scaling is {scaling.dim}"
        )
    if v_s is not None:
        v_s = np.asarray(v_s, dtype=float)
        if v_s.shape != x_s.shape:
            raise InvalidInputError(f"v_s must have shape {x_s.shape}, got {v_s.shape}")
    if flavor is Flavor.BBGKY and not isinstance(scaling, RealizedScaling):
        raise InvalidInputError("the BBGKY flavor needs a RealizedScaling")
    if radius <= 0 or samples < 1 or threads < 1:
        raise InvalidInputError("radius, samples, and threads must be positive")
    masses = tuple(float(m) for m in masses)
    alphas = _species_pattern(alphas, k, "alphas")
    betas = _species_pattern(betas, k, "betas")
    targets = _int_pattern(targets, k, "targets")
    if alphas is not None and betas is not None:
        _check_targets(s, alphas, betas, targets)

    sampler = _DuhamelSampler(
        initial_data,
        x_s,
        s,
        k,
        float(t),
        scaling,
        masses,
        flavor,
        alphas,
        betas,
        _int_pattern(signs, k, "signs", allowed=(-1, 1)),
        targets,
        float(radius),
        float(delta),
        test_function,
        v_s,
    )

    n_chunks = -(-int(samples) // CHUNK_SIZE)
    sizes = [CHUNK_SIZE] * (n_chunks - 1) + [int(samples) - CHUNK_SIZE * (n_chunks - 1)]
    seeds = spawn_seeds(seed, n_chunks)
    if threads == 1:
        results = [sampler.chunk(sq, n) for sq, n in zip(seeds, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(sampler.chunk, seeds, sizes))
    weights = np.concatenate([w for w, _ in results])
    rejected = np.concatenate([r for _, r in results])

    value, stderr = mean_and_stderr(weights)
    estimate = DuhamelEstimate(
        value=value,
        stderr=stderr,
        abs_value=float(np.sum(np.abs(weights)) / weights.size),
        samples=int(weights.size),
        rejected_fraction=float(np.count_nonzero(rejected) / weights.size),
        k=k,
        flavor=flavor,
    )
    logger.info(
        "%s iterate k=%d s=%s t=%g: %.6g +/- %.2g (%d samples, %.2f%% rejected)",
        flavor.value,
        k,
        s,
        t,
        estimate.value,
        estimate.stderr,
        estimate.samples,
        100.0 * estimate.rejected_fraction,
    )
    return estimate


def free_flow_observable(
    initial_data: InitialData,
    x_s,
    s: Tuple[int, int],
    t: float,
    radius: float,
    test_function: Optional[TestFunction] = None,
    nodes: int = 24,
) -> float:
    """
    The order-zero term :math:`\\int_{\\sum |v|^2 \\leq R^2} \\phi(V_s)
    f_0^{(s)}(X_s - tV_s, V_s) \\, dV_s` by a Gauss-Legendre product rule on
    the cube :math:`[-R, R]^{d|s|}`.

    ``test_function`` is evaluated on arrays of shape ``(..., |s|, d)`` here.

    Examples
    --------
    >>> data = lambda s: (lambda x, v: np.exp(-np.sum(v**2, axis=(-2, -1))))
    >>> round(free_flow_observable(data, [[0.0, 0.0]], (1, 0), 1.0, 6.0), 4)
    3.1416
    """
    s = tuple(int(c) for c in s)
    x_s = np.asarray(x_s, dtype=float)
    size, dim = x_s.shape
    if size != sum(s):
        raise InvalidInputError(f"x_s must hold {sum(s)} particles, got {size}")
    axes = size * dim
    if nodes**axes > MAX_QUADRATURE_POINTS:
        raise InvalidInputError(
            f"{nodes}^{axes} quadrature points exceed {MAX_QUADRATURE_POINTS}; "
            f"use fewer nodes or duhamel_iterate with k = 0"
        )
    points, weights = roots_legendre(nodes)
    points, weights = radius * points, radius * weights
    grid = np.stack(np.meshgrid(*([points] * axes), indexing="ij"), axis=-1)
    v = grid.reshape(-1, size, dim)
    w = np.prod(
        np.stack(np.meshgrid(*([weights] * axes), indexing="ij"), axis=-1), axis=-1
    ).ravel()
    inside = np.sum(v**2, axis=(-2, -1)) <= radius**2
    values = np.asarray(initial_data(s)(x_s - t * v, v), dtype=float)
    if test_function is not None:
        values = values * np.asarray(test_function(v), dtype=float)
    return float(np.sum(w * inside * values))


def truncated_series(
    initial_data: InitialData,
    x_s,
    s: Tuple[int, int],
    n: int,
    t: float,
    scaling: Union[GradScaling, RealizedScaling],
    masses: Sequence[float],
    flavor: Union[Flavor, str] = Flavor.BOLTZMANN,
    radius: float = 4.0,
    delta: float = 0.0,
    test_function: Optional[TestFunction] = None,
    samples: int = 10_000,
    seed: SeedLike = None,
    threads: int = 1,
) -> pd.DataFrame:
    """
    The terms ``k = 0..n`` of the truncated Duhamel series, each summed over
    species, targets, and signs, with partial sums.

    Every order uses its own spawned stream.  Orders whose separated simplex
    is empty contribute zero.

    Returns
    -------
    `pandas.DataFrame`
        Columns ``k``, ``term``, ``stderr``, ``abs_term``,
        ``rejected_fraction``, and ``partial_sum``.
    """
    seeds = spawn_seeds(seed, int(n) + 1)
    rows = []
    for k in range(int(n) + 1):
        try:
            estimate = duhamel_iterate(
                initial_data,
                x_s,
                s,
                k,
                t,
                scaling,
                masses,
                flavor=flavor,
                radius=radius,
                delta=delta,
                test_function=test_function,
                samples=samples,
                seed=seeds[k],
                threads=threads,
            )
        except EmptyDomainError:
            logger.debug("order %d: empty separated simplex, term is zero", k)
            rows.append(
                {"k": k, "term": 0.0, "stderr": 0.0, "abs_term": 0.0, "rejected_fraction": 0.0}
            )
            continue
        rows.append(
            {
                "k": k,
                "term": estimate.value,
                "stderr": estimate.stderr,
                "abs_term": estimate.abs_value,
                "rejected_fraction": estimate.rejected_fraction,
            }
        )
    frame = pd.DataFrame(rows)
    frame["partial_sum"] = frame["term"].cumsum()
    return frame
