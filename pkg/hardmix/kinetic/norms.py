"""
Energy-weighted supremum norms used as a priori diagnostics.

+-------------------------+---------------------------------------------------+
| `weighted_sup_norm`     | :math:`\\| e^{\\gamma E(Z)} f \\|_\\infty` for one      |
|                         | marginal                                          |
+-------------------------+---------------------------------------------------+
| `hierarchy_norm`        | :math:`\\sup_s e^{\\mu |s|} |f^{(s)}|_{s,\\gamma}`     |
+-------------------------+---------------------------------------------------+
| `species_norm`          | :math:`\\| e^{\\mu + \\gamma M_\\alpha |v|^2} g \\|_\\infty`|
+-------------------------+---------------------------------------------------+
| `pair_norm`             | sum of the two `species_norm` values              |
+-------------------------+---------------------------------------------------+
| `trajectory_norm`       | supremum in time of `pair_norm` with the decayed  |
|                         | weights :math:`\\gamma(t), \\mu(t)`                 |
+-------------------------+---------------------------------------------------+

Energies carry no factor one half, :math:`E = \\sum M |v|^2`.  Suprema are taken
over the sampled points only.
"""
__all__ = [
    "SolverWeights",
    "hierarchy_norm",
    "pair_norm",
    "phase_energy",
    "species_norm",
    "trajectory_norm",
    "weighted_sup_norm",
]

import numpy as np

from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

from hardmix.exceptions import InvalidInputError


@dataclass(frozen=True)
class SolverWeights:
    """
    Time-decayed norm weights :math:`\\gamma(t) = \\gamma_0 - \\lambda t`,
    :math:`\\mu(t) = \\mu_0 - \\lambda t` on :math:`[0, T]`.

    Parameters
    ----------
    gamma0 : float
        Initial energy weight, positive.

    mu0 : float
        Initial particle-number weight.

    decay : float
        The rate :math:`\\lambda > 0`.

    horizon : float
        :math:`T > 0` with :math:`\\gamma(T) > 0`.

    Examples
    --------
    >>> weights = SolverWeights(gamma0=1.0, mu0=0.0, decay=0.5, horizon=1.0)
    >>> weights.gamma(1.0), weights.mu(1.0)
    (0.5, -0.5)
    """

    gamma0: float
    mu0: float
    decay: float
    horizon: float

    def __post_init__(self):
        if self.gamma0 <= 0 or self.decay <= 0 or self.horizon <= 0:
            raise InvalidInputError("gamma0, decay and horizon must be positive")
        if self.gamma(self.horizon) <= 0:
            raise InvalidInputError(
                f"gamma(T) = {self.gamma(self.horizon)} must stay positive; "
                f"shorten the horizon below {self.gamma0 / self.decay}"
            )

    def gamma(self, t):
        """:math:`\\gamma(t)`."""
        return self.gamma0 - self.decay * t

    def mu(self, t):
        """:math:`\\mu(t)`."""
        return self.mu0 - self.decay * t

    @classmethod
    def for_horizon(cls, gamma0: float, mu0: float, horizon: float) -> "SolverWeights":
        """Weights decaying to :math:`\\gamma_0 / 2` at ``horizon``."""
        return cls(gamma0, mu0, 0.5 * gamma0 / horizon, horizon)


def _species_masses(s: Tuple[int, int], masses: Sequence[float]) -> np.ndarray:
    s1, s2 = (int(c) for c in s)
    if s1 < 0 or s2 < 0:
        raise InvalidInputError(f"s must be a pair of counts, got {s}")
    return np.concatenate([np.full(s1, float(masses[0])), np.full(s2, float(masses[1]))])


def phase_energy(v: np.ndarray, s: Tuple[int, int], masses: Sequence[float]) -> np.ndarray:
    """
    :math:`E(V_s) = \\sum_k M_k |v_k|^2` for velocities of shape
    ``(..., |s|, d)`` in species-block order.
    """
    v = np.asarray(v, dtype=float)
    m = _species_masses(s, masses)
    if v.shape[-2] != m.size:
        raise InvalidInputError(
            f"velocities carry {v.shape[-2]} particles, s = {tuple(s)} needs {m.size}"
        )
    return np.einsum("...kd,...kd,k->...", v, v, m)


def _weighted_max(values: np.ndarray, exponent: np.ndarray) -> float:
    # e^a |f| as exp(a + log|f|) so that e^{gamma E} e^{-gamma E} stays finite
    values = np.abs(np.asarray(values, dtype=float))
    exponent = np.broadcast_to(np.asarray(exponent, dtype=float), values.shape)
    nonzero = values > 0
    if not np.any(nonzero):
        return 0.0
    return float(np.exp(np.max(exponent[nonzero] + np.log(values[nonzero]))))


def weighted_sup_norm(
    values: np.ndarray,
    v: np.ndarray,
    s: Tuple[int, int],
    gamma: float,
    masses: Sequence[float],
) -> float:
    """
    The norm :math:`|f|_{s,\\gamma} = \\sup e^{\\gamma E(Z)} |f(Z)|` over
    sampled phase points.

    Parameters
    ----------
    values : array_like, shape ``(...)``
        Samples of the marginal.

    v : array_like, shape ``(..., |s|, d)``
        Velocities of the samples.

    s : tuple of int

    gamma : float

    masses : pair of float

    Examples
    --------
    >>> v = np.array([[[1.0, 0.0]], [[0.0, 2.0]]])
    >>> f = np.exp(-0.5 * np.array([1.0, 4.0]))
    >>> round(weighted_sup_norm(f, v, (1, 0), 0.5, (1.0, 1.0)), 12)
    1.0
    """
    return _weighted_max(values, gamma * phase_energy(v, s, masses))


def hierarchy_norm(
    marginals: Mapping[Tuple[int, int], Tuple[np.ndarray, np.ndarray]],
    gamma: float,
    mu: float,
    masses: Sequence[float],
) -> float:
    """
    :math:`\\sup_s e^{\\mu |s|} |f^{(s)}|_{s,\\gamma}` over a finite family
    ``{s: (values, v)}`` of sampled marginals.
    """
    norm = 0.0
    for s, (values, v) in marginals.items():
        size = sum(int(c) for c in s)
        norm = max(norm, np.exp(mu * size) * weighted_sup_norm(values, v, s, gamma, masses))
    return float(norm)


def species_norm(
    values: np.ndarray, v: np.ndarray, mass: float, gamma: float, mu: float
) -> float:
    """
    :math:`|g|_{\\alpha,\\gamma,\\mu} = \\| e^{\\mu + \\gamma M_\\alpha |v|^2}
    g \\|_\\infty`, ``values`` of shape ``(...)`` sampled at velocities ``v``
    broadcasting to ``(..., d)``.
    """
    v = np.asarray(v, dtype=float)
    return _weighted_max(values, mu + gamma * mass * np.sum(v * v, axis=-1))


def pair_norm(
    g: np.ndarray,
    h: np.ndarray,
    v: np.ndarray,
    masses: Sequence[float],
    gamma: float,
    mu: float,
) -> float:
    """:math:`|G|_{\\gamma,\\mu} = |g|_{A,\\gamma,\\mu} + |h|_{B,\\gamma,\\mu}`."""
    return species_norm(g, v, masses[0], gamma, mu) + species_norm(
        h, v, masses[1], gamma, mu
    )


def trajectory_norm(
    g: np.ndarray,
    h: np.ndarray,
    times: np.ndarray,
    v: np.ndarray,
    masses: Sequence[float],
    weights: SolverWeights,
) -> float:
    """
    :math:`\\|G\\| = \\sup_{t} |G(t)|_{\\gamma(t),\\mu(t)}` for trajectories
    whose leading axis runs over ``times``.
    """
    return max(
        pair_norm(g_t, h_t, v, masses, weights.gamma(t), weights.mu(t))
        for t, g_t, h_t in zip(times, g, h)
    )
