"""
Histogram estimates of the mixed marginals of an ensemble of configurations.

.. contents:: Content
   :local:

Cells
-----

A `HistogramGrid` splits every position axis of the cube
:math:`[-L, L]^d` into ``space_bins`` cells and every velocity axis of
:math:`[-R, R]^d` into ``velocity_bins`` cells.  The ``(s_1, s_2)`` marginal
lives on the product of these cells over :math:`s_1` A-particles and
:math:`s_2` B-particles.  Only occupied cells are stored: a
`MarginalEstimate` holds the integer cell indices of its occupied cells and
their counts, so estimates of different chunks merge by adding counts.

Symmetrization
--------------

For each configuration, ``permutations`` random ordered subsets of
:math:`s_1` A-labels and :math:`s_2` B-labels are histogrammed, which averages
the first-particles marginal over relabelings within each species.  Mass
falling outside the grid is dropped, so the normalized estimate integrates to
at most one; `MarginalEstimate.mass` reports what is left.
"""
__all__ = [
    "HistogramGrid",
    "MarginalEstimate",
    "estimate_marginal",
    "l1_distance",
]

import logging
import numpy as np
import pandas as pd

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple

from hardmix.exceptions import InvalidInputError, ValidationError
from hardmix.kinetic.norms import weighted_sup_norm
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import SpeciesKind
from hardmix.utils import SeedLike, spawn_seeds

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 8
"""Random same-species relabelings histogrammed per configuration."""

CHUNK_SIZE = 256
"""Configurations histogrammed from one spawned stream."""

MAX_L1_CELLS = 2**22


@dataclass(frozen=True)
class HistogramGrid:
    """
    Cells of one particle's phase space, shared by all particles of a
    marginal.

    Parameters
    ----------
    dim : int

    space_extent : float
        Half width :math:`L` of the position cube.

    space_bins : int
        Cells per position axis.

    velocity_extent : float
        Half width :math:`R` of the velocity cube.

    velocity_bins : int
        Cells per velocity axis.
    """

    dim: int
    space_extent: float
    space_bins: int
    velocity_extent: float
    velocity_bins: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"dim must be positive, got {self.dim}")
        if self.space_extent <= 0 or self.velocity_extent <= 0:
            raise InvalidInputError("histogram extents must be positive")
        if self.space_bins < 1 or self.velocity_bins < 1:
            raise InvalidInputError("histogram needs at least one cell per axis")

    @property
    def space_width(self) -> float:
        return 2.0 * self.space_extent / self.space_bins

    @property
    def velocity_width(self) -> float:
        return 2.0 * self.velocity_extent / self.velocity_bins

    @property
    def space_cell_volume(self) -> float:
        """Volume of one particle's position cell."""
        return self.space_width**self.dim

    @property
    def velocity_cell_volume(self) -> float:
        return self.velocity_width**self.dim

    def _index(self, values: np.ndarray, extent: float, bins: int) -> np.ndarray:
        index = np.floor((values + extent) * (bins / (2.0 * extent))).astype(np.int64)
        # the upper faces belong to the last cell
        index = np.where(values == extent, bins - 1, index)
        return np.where((index >= 0) & (index < bins), index, -1)

    def locate(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """
        Cell indices of particles ``x, v`` of shape ``(..., n, d)``, as rows
        ``(..., 2 n d)`` of position indices followed by velocity indices.
        Coordinates outside the grid give ``-1``.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        lead = x.shape[:-2]
        ix = self._index(x, self.space_extent, self.space_bins).reshape(lead + (-1,))
        iv = self._index(v, self.velocity_extent, self.velocity_bins).reshape(
            lead + (-1,)
        )
        return np.concatenate([ix, iv], axis=-1)

    def centers(self, cells: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """Cell centers ``(x, v)``, each of shape ``(m, size, d)``."""
        cells = np.asarray(cells, dtype=float).reshape(-1, 2, size, self.dim)
        x = -self.space_extent + (cells[:, 0] + 0.5) * self.space_width
        v = -self.velocity_extent + (cells[:, 1] + 0.5) * self.velocity_width
        return x, v

    def shape(self, size: int) -> Tuple[int, ...]:
        """Number of cells along each index column for ``size`` particles."""
        return (self.space_bins,) * (size * self.dim) + (self.velocity_bins,) * (
            size * self.dim
        )


@dataclass(frozen=True)
class MarginalEstimate:
    """
    Histogram estimate of the ``(s_1, s_2)`` marginal.

    ``cells`` holds one row of cell indices per occupied cell (see
    `HistogramGrid.locate`) and ``counts`` the number of histogrammed entries
    in it; ``entries`` is the number of entries including those outside the
    grid, and ``samples`` the number of configurations.
    """

    s: Tuple[int, int]
    grid: HistogramGrid
    cells: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    entries: int
    samples: int

    def __post_init__(self):
        s = tuple(int(c) for c in self.s)
        cells = np.asarray(self.cells, dtype=np.int64).reshape(
            -1, 2 * sum(s) * self.grid.dim
        )
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (cells.shape[0],):
            raise ValidationError("one count per occupied cell is required")
        if counts.sum() > self.entries:
            raise ValidationError("counts exceed the number of entries")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "counts", counts)

    @property
    def size(self) -> int:
        return sum(self.s)

    @property
    def mass(self) -> float:
        """Fraction of the entries that fell inside the grid."""
        return float(self.counts.sum() / self.entries) if self.entries else 0.0

    @property
    def probabilities(self) -> np.ndarray:
        """Estimated probability of each occupied cell."""
        return self.counts / self.entries

    @property
    def cell_volume(self) -> float:
        return (self.grid.space_cell_volume * self.grid.velocity_cell_volume) ** self.size

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Centers ``(x, v)`` of the occupied cells, shape ``(m, |s|, d)``."""
        return self.grid.centers(self.cells, self.size)

    def density(self) -> np.ndarray:
        """Estimated density in each occupied cell."""
        return self.probabilities / self.cell_volume

    def weighted_sup(self, gamma: float, masses: Sequence[float]) -> float:
        """
        The weighted norm :math:`\\sup e^{\\gamma E(V)} |f|` of the estimated
        density over the occupied cells, at the cell centers.
        """
        _, v = self.centers()
        return weighted_sup_norm(self.density(), v, self.s, gamma, masses)

    def merge(self, other: "MarginalEstimate") -> "MarginalEstimate":
        """Pool the entries of two estimates of the same marginal."""
        if other.s != self.s or other.grid != self.grid:
            raise ValidationError("only estimates of the same marginal on one grid merge")
        cells, counts = _reduce(
            np.concatenate([self.cells, other.cells]),
            np.concatenate([self.counts, other.counts]),
        )
        return MarginalEstimate(
            self.s,
            self.grid,
            cells,
            counts,
            self.entries + other.entries,
            self.samples + other.samples,
        )

    def marginalize(self, kind) -> "MarginalEstimate":
        """
        Integrate out the last particle of species ``kind``, giving the
        estimate of the marginal with one particle fewer.
        """
        kind = SpeciesKind.parse(kind)
        if self.s[kind] == 0:
            raise ValidationError(f"s = {self.s} has no {kind.tag}-particle to integrate out")
        particle = self.s[0] - 1 if kind is SpeciesKind.A else self.size - 1
        dim = self.grid.dim
        blocks = self.cells.reshape(-1, 2, self.size, dim)
        kept = np.delete(blocks, particle, axis=2).reshape(self.cells.shape[0], -1)
        cells, counts = _reduce(kept, self.counts)
        s = list(self.s)
        s[kind] -= 1
        return MarginalEstimate(
            tuple(s), self.grid, cells, counts, self.entries, self.samples
        )

    def to_frame(self) -> pd.DataFrame:
        """Occupied cells with their counts, probabilities, and densities."""
        dim = self.grid.dim
        columns = [
            f"{part}{k}_{axis}"
            for part in ("x", "v")
            for k in range(self.size)
            for axis in range(dim)
        ]
        frame = pd.DataFrame(self.cells, columns=columns)
        frame["count"] = self.counts
        frame["probability"] = self.probabilities
        frame["density"] = self.density()
        return frame


def _reduce(cells: np.ndarray, counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if cells.shape[0] == 0:
        return cells, counts
    unique, inverse = np.unique(cells, axis=0, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=counts, minlength=unique.shape[0])
    return unique, summed.astype(np.int64)


def _histogram(
    configurations: Sequence[Configuration],
    s: Tuple[int, int],
    grid: HistogramGrid,
    permutations: Optional[int],
    seed: SeedLike,
    start: int,
) -> MarginalEstimate:
    s1, s2 = s
    rng = np.random.default_rng(seed)
    rows = []
    for n, z in enumerate(configurations, start=start):
        na, nb = z.counts
        if na < s1 or nb < s2:
            raise ValidationError(
                f"configuration {n} holds {z.counts} particles, s = {s} needs "
                f"at least {s1} A and {s2} B"
            )
        if z.dim != grid.dim:
            raise ValidationError(
                f"configuration {n} is {z.dim}-dimensional, the grid is {grid.dim}"
            )
        if permutations is None:
            index = np.concatenate([np.arange(s1), na + np.arange(s2)])[None, :]
        else:
            pick_a = np.argsort(rng.random((permutations, na)), axis=1)[:, :s1]
            pick_b = np.argsort(rng.random((permutations, nb)), axis=1)[:, :s2]
            index = np.concatenate([pick_a, na + pick_b], axis=1)
        rows.append(grid.locate(z.x[index], z.v[index]))
    per_sample = 1 if permutations is None else permutations
    width = 2 * (s1 + s2) * grid.dim
    cells = np.concatenate(rows) if rows else np.empty((0, width), dtype=np.int64)
    inside = np.all(cells >= 0, axis=1)
    cells, counts = _reduce(cells[inside], np.ones(int(inside.sum()), dtype=np.int64))
    return MarginalEstimate(
        s, grid, cells, counts, len(configurations) * per_sample, len(configurations)
    )


def estimate_marginal(
    ensemble: Iterable[Configuration],
    s: Tuple[int, int],
    grid: HistogramGrid,
    permutations: Optional[int] = DEFAULT_PERMUTATIONS,
    seed: SeedLike = None,
    threads: int = 1,
) -> MarginalEstimate:
    """
    Histogram the ``s`` marginal of an ensemble.

    Parameters
    ----------
    ensemble : iterable of `~hardmix.mixture.configuration.Configuration`
        For example an `~hardmix.dynamics.sampling.Ensemble`.

    s : tuple of int
        ``(s_1, s_2)``.

    grid : `HistogramGrid`

    permutations : int or `None`
        Random same-species relabelings per configuration; `None`
        histograms the first :math:`s_1` A- and :math:`s_2` B-particles
        as labelled.

    seed : int, `numpy.random.SeedSequence`, or `None`
        Configurations are processed in chunks of `CHUNK_SIZE`, each with its
        own spawned stream, so the estimate does not depend on ``threads``.

    threads : int

    Raises
    ------
    `~hardmix.exceptions.ValidationError`
        If the ensemble is empty or a configuration has too few particles.

    Examples
    --------
    >>> z = Configuration([[0.1, 0.1]], [[0.5, -0.5]], [], [])
    >>> grid = HistogramGrid(2, 1.0, 4, 1.0, 4)
    >>> estimate = estimate_marginal([z] * 3, (1, 0), grid)
    >>> estimate.counts.tolist(), estimate.mass
    ([24], 1.0)
    """
    s = tuple(int(c) for c in s)
    if len(s) != 2 or min(s) < 0 or sum(s) == 0:
        raise InvalidInputError(f"s must be a nonzero pair of counts, got {s}")
    if permutations is not None and permutations < 1:
        raise InvalidInputError(f"permutations must be positive, got {permutations}")
    configurations = list(ensemble)
    if not configurations:
        raise ValidationError("cannot estimate a marginal from an empty ensemble")

    starts = range(0, len(configurations), CHUNK_SIZE)
    seeds = spawn_seeds(seed, len(starts))
    jobs = [
        (configurations[i : i + CHUNK_SIZE], s, grid, permutations, child, i)
        for i, child in zip(starts, seeds)
    ]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _histogram(*job), jobs))
    else:
        parts = [_histogram(*job) for job in jobs]
    estimate = parts[0]
    for part in parts[1:]:
        estimate = estimate.merge(part)

    logger.info(
        "estimated the %s marginal from %d configurations, %d occupied cells",
        s,
        estimate.samples,
        estimate.cells.shape[0],
    )
    if estimate.mass < 1.0:
        logger.info("%.3g of the mass fell outside the histogram grid", 1.0 - estimate.mass)
    return estimate


def l1_distance(
    estimate: MarginalEstimate, marginal: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> float:
    """
    :math:`L^1` distance on the grid between the histogram and a marginal
    density ``marginal(x, v)`` of arrays ``(..., |s|, d)``, the latter
    integrated over each cell by its midpoint value.

    Every cell of the grid is visited, so this is meant for small marginals.
    """
    size = estimate.size
    shape = estimate.grid.shape(size)
    total = int(np.prod(shape, dtype=np.int64))
    if total > MAX_L1_CELLS:
        raise InvalidInputError(
            f"{total} cells exceed {MAX_L1_CELLS}; coarsen the grid or lower s"
        )
    cells = np.stack(np.unravel_index(np.arange(total), shape), axis=-1)
    x, v = estimate.grid.centers(cells, size)
    reference = np.asarray(marginal(x, v), dtype=float) * estimate.cell_volume
    empirical = np.zeros(total)
    if estimate.cells.shape[0]:
        flat = np.ravel_multi_index(tuple(estimate.cells.T), shape)
        empirical[flat] = estimate.probabilities
    return float(np.sum(np.abs(empirical - reference)))
