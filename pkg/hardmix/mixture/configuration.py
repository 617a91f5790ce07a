"""
Phase-space points of the mixture.

A `Configuration` stores the particles species-segregated: the ``N_A``
A-particles first, then the ``N_B`` B-particles, each block contiguous.
Particle references are ``(SpeciesKind, index)`` pairs with zero-based
indices inside the species block.
"""
__all__ = [
    "Configuration",
    "ParticleRef",
    "energy",
    "total_momentum",
]

import numpy as np

from typing import Iterator, Optional, Sequence, Tuple

from hardmix.exceptions import InvalidInputError
from hardmix.mixture.species import MixtureParams, SpeciesKind

ParticleRef = Tuple[SpeciesKind, int]

CONTACT_RTOL = 1e-9
"""Relative contact window: a pair is in contact when ``|dist - eps| <= 1e-9 eps``."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


class Configuration:
    """
    A phase-space point :math:`Z = (X, V)` of a two-species system.

    Parameters
    ----------
    positions_a, velocities_a : array_like, shape ``(N_A, d)``
        Positions and velocities of the A-particles.

    positions_b, velocities_b : array_like, shape ``(N_B, d)``
        Positions and velocities of the B-particles.

    Notes
    -----
    Instances are immutable: the arrays are copied and flagged read-only, and
    every operation returns a new configuration.
    """

    __slots__ = ("_x", "_v", "_counts")

    def __init__(
        self,
        positions_a,
        velocities_a,
        positions_b,
        velocities_b,
    ):
        xa = np.asarray(positions_a, dtype=float)
        va = np.asarray(velocities_a, dtype=float)
        xb = np.asarray(positions_b, dtype=float)
        vb = np.asarray(velocities_b, dtype=float)

        dims = {arr.shape[-1] for arr in (xa, va, xb, vb) if arr.ndim == 2}
        if len(dims) != 1:
            raise InvalidInputError("positions and velocities must share one dimension")
        dim = dims.pop()
        xa, va, xb, vb = (
            arr.reshape(-1, dim) if arr.size == 0 else arr for arr in (xa, va, xb, vb)
        )
        for arr in (xa, va, xb, vb):
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise InvalidInputError("arrays must have shape (count, dim)")
        if xa.shape != va.shape or xb.shape != vb.shape:
            raise InvalidInputError(
                "position and velocity counts must match within each species"
            )

        self._x = _frozen(np.concatenate([xa, xb], axis=0))
        self._v = _frozen(np.concatenate([va, vb], axis=0))
        self._counts = (xa.shape[0], xb.shape[0])

    @classmethod
    def from_stacked(
        cls, x: np.ndarray, v: np.ndarray, counts: Tuple[int, int]
    ) -> "Configuration":
        """Build a configuration from stacked ``(N_A + N_B, d)`` arrays."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        n_a = int(counts[0])
        if x.shape[0] != n_a + int(counts[1]):
            raise InvalidInputError("stacked arrays do not match counts")
        return cls(x[:n_a], v[:n_a], x[n_a:], v[n_a:])

    @classmethod
    def empty(cls, dim: int) -> "Configuration":
        """A configuration with no particles."""
        blank = np.zeros((0, dim))
        return cls(blank, blank, blank, blank)

    def __repr__(self):
        return (
            f"Configuration(dim={self.dim}, counts={self.counts})"
        )

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self._counts == other._counts
            and np.array_equal(self._x, other._x)
            and np.array_equal(self._v, other._v)
        )

    __hash__ = None

    @property
    def dim(self) -> int:
        """Spatial dimension."""
        return self._x.shape[1]

    @property
    def counts(self) -> Tuple[int, int]:
        """Particle counts ``(N_A, N_B)``."""
        return self._counts

    @property
    def size(self) -> int:
        """Total number of particles."""
        return self._counts[0] + self._counts[1]

    @property
    def x(self) -> np.ndarray:
        """Stacked read-only positions, shape ``(N_A + N_B, d)``."""
        return self._x

    @property
    def v(self) -> np.ndarray:
        """Stacked read-only velocities, shape ``(N_A + N_B, d)``."""
        return self._v

    @property
    def species(self) -> np.ndarray:
        """Species index (0 for A, 1 for B) of every stacked particle."""
        return np.repeat([0, 1], self._counts)

    def offset(self, kind: SpeciesKind) -> int:
        """Stacked index of the first particle of species ``kind``."""
        return 0 if SpeciesKind(kind) is SpeciesKind.A else self._counts[0]

    def stacked_index(self, ref: ParticleRef) -> int:
        """Stacked index of particle ``ref``."""
        kind, index = SpeciesKind(ref[0]), int(ref[1])
        if not 0 <= index < self._counts[int(kind)]:
            raise InvalidInputError(
                f"species {kind.tag} has {self._counts[int(kind)]} particles, "
                f"no index {index}"
            )
        return self.offset(kind) + index

    def ref(self, stacked: int) -> ParticleRef:
        """Inverse of `stacked_index`."""
        if stacked < self._counts[0]:
            return SpeciesKind.A, int(stacked)
        return SpeciesKind.B, int(stacked - self._counts[0])

    def positions(self, kind: SpeciesKind) -> np.ndarray:
        """Positions of the particles of species ``kind``."""
        start = self.offset(kind)
        return self._x[start : start + self._counts[int(kind)]]

    def velocities(self, kind: SpeciesKind) -> np.ndarray:
        """Velocities of the particles of species ``kind``."""
        start = self.offset(kind)
        return self._v[start : start + self._counts[int(kind)]]

    def masses(self, params: MixtureParams) -> np.ndarray:
        """Mass of every stacked particle."""
        return np.asarray(params.mass)[self.species]

    def sigma_matrix(self, params: MixtureParams) -> np.ndarray:
        """Pairwise interaction distances of the stacked particles."""
        species = self.species
        return params.sigma_table[species[:, None], species[None, :]]

    def pairs(self) -> Iterator[Tuple[int, int]]:
        """All interacting stacked index pairs ``(i, j)`` with ``i < j``."""
        n = self.size
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j

    def replace(
        self, x: Optional[np.ndarray] = None, v: Optional[np.ndarray] = None
    ) -> "Configuration":
        """Return a copy with stacked positions and/or velocities replaced."""
        return Configuration.from_stacked(
            self._x if x is None else x, self._v if v is None else v, self._counts
        )

    def free_flight(self, t: float) -> "Configuration":
        """Rectilinear motion :math:`X + tV` for time ``t`` (negative allowed)."""
        return self.replace(x=self._x + t * self._v)

    def reversed(self) -> "Configuration":
        """The velocity-reversed configuration."""
        return self.replace(v=-self._v)

    def with_particle(
        self, kind: SpeciesKind, x: Sequence[float], v: Sequence[float]
    ) -> "Configuration":
        """Append one particle of species ``kind`` at the end of its block."""
        kind = SpeciesKind(kind)
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        v = np.asarray(v, dtype=float).reshape(1, self.dim)
        xa, va = self.positions(SpeciesKind.A), self.velocities(SpeciesKind.A)
        xb, vb = self.positions(SpeciesKind.B), self.velocities(SpeciesKind.B)
        if kind is SpeciesKind.A:
            return Configuration(np.vstack([xa, x]), np.vstack([va, v]), xb, vb)
        return Configuration(xa, va, np.vstack([xb, x]), np.vstack([vb, v]))

    def distances(self) -> np.ndarray:
        """Full matrix of center distances."""
        diff = self._x[:, None, :] - self._x[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def min_gap(self, params: MixtureParams) -> float:
        """
        Smallest relative gap :math:`|x_i - x_j| / \\epsilon_{(i,j)} - 1` over
        all pairs, ``inf`` with fewer than two particles.
        """
        if self.size < 2:
            return np.inf
        iu = np.triu_indices(self.size, k=1)
        gaps = self.distances()[iu] / self.sigma_matrix(params)[iu] - 1.0
        return float(gaps.min())

    def in_phase_space(
        self, params: MixtureParams, tol: float = CONTACT_RTOL
    ) -> bool:
        """
        Whether every interacting pair satisfies
        :math:`|x_i - x_j| \\geq \\epsilon_{(i,j)}(1 - tol)`.
        """
        if params.dim != self.dim:
            raise InvalidInputError(
                f"configuration is {self.dim}-dimensional, params are {params.dim}"
            )
        return self.min_gap(params) >= -tol

    def is_separated(self, theta: float) -> bool:
        """Whether all pairwise center distances exceed ``theta``."""
        if self.size < 2:
            return True
        iu = np.triu_indices(self.size, k=1)
        return bool(np.all(self.distances()[iu] > theta))


def energy(z: Configuration, params: MixtureParams) -> float:
    """
    Energy :math:`E(Z) = \\sum M_\\alpha |v_i^\\alpha|^2` (no factor one half).

    Examples
    --------
    >>> params = MixtureParams(2, mass=(2.0, 1.0), diameter=(1.0, 1.0))
    >>> z = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [], [])
    >>> energy(z, params)
    2.0
    """
    return float(np.sum(z.masses(params) * np.einsum("ij,ij->i", z.v, z.v)))


def total_momentum(z: Configuration, params: MixtureParams) -> np.ndarray:
    """Total momentum :math:`\\sum M_\\alpha v_i^\\alpha`."""
    return np.sum(z.masses(params)[:, None] * z.v, axis=0)
