"""
A utility module containing paths, random stream helpers, and small
geometric quantities shared by the `hardmix` sub-packages.
"""
__all__ = [
    "ball_volume",
    "cross_section_factor",
    "make_rng",
    "mean_and_stderr",
    "package_dir",
    "sample_ball",
    "sample_unit_vectors",
    "sphere_area",
    "spawn_seeds",
    "templates_dir",
]

import numpy as np

from pathlib import Path
from scipy.special import gamma
from typing import List, Tuple, Union

package_dir = Path(__file__).parent.absolute()
"""Absolute path to the `hardmix` package directory."""

templates_dir = (package_dir / "templates").resolve()
"""Absolute path to the `hardmix` templates directory."""

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """
    Return a `numpy.random.Generator` for ``seed``.  A generator passed in is
    returned unchanged so that callers can share one stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: SeedLike, n: int) -> List[np.random.SeedSequence]:
    """
    Spawn ``n`` statistically independent child seeds from ``seed``.

    Child ``i`` only depends on ``seed`` and ``i``, so work split across
    threads in any order reproduces the sequential result.  A
    `~numpy.random.SeedSequence` is copied before spawning, so passing the
    same one twice spawns the same children; a generator contributes one
    draw as the root entropy.
    """
    if isinstance(seed, np.random.SeedSequence):
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    elif isinstance(seed, np.random.Generator):
        root = np.random.SeedSequence(int(seed.integers(2**63)))
    else:
        root = np.random.SeedSequence(seed)
    return root.spawn(n)


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere :math:`S^{d-1}` in ``dim`` dimensions."""
    return float(2.0 * np.pi ** (dim / 2) / gamma(dim / 2))


def ball_volume(dim: int, radius: float = 1.0) -> float:
    """Volume of the ball of radius ``radius`` in ``dim`` dimensions."""
    return float(np.pi ** (dim / 2) / gamma(dim / 2 + 1) * radius**dim)


def cross_section_factor(dim: int) -> float:
    r"""
    The constant :math:`\kappa_d` with
    :math:`\int_{S^{d-1}} (u \cdot \theta)_+ \, d\theta = \kappa_d |u|`,
    i.e. the volume of the unit ball in :math:`d - 1` dimensions.

    Examples
    --------
    >>> cross_section_factor(2)
    2.0
    """
    return ball_volume(dim - 1)


def sample_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Draw ``n`` vectors uniformly on :math:`S^{d-1}`, shape ``(n, dim)``."""
    draws = rng.standard_normal((n, dim))
    return draws / np.linalg.norm(draws, axis=-1, keepdims=True)


def sample_ball(
    rng: np.random.Generator, n: int, dim: int, radius: float
) -> np.ndarray:
    """Draw ``n`` points uniformly in the ball of radius ``radius``."""
    directions = sample_unit_vectors(rng, n, dim)
    radii = radius * rng.random(n) ** (1.0 / dim)
    return directions * radii[:, None]


def mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
    """
    Sample mean and standard error of ``values``.

    `numpy.sum` reduces with pairwise summation, so the mean does not depend
    on how the samples were produced, only on their order.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return 0.0, 0.0
    mean = float(np.sum(values) / n)
    if n == 1:
        return mean, 0.0
    var = float(np.sum((values - mean) ** 2) / (n - 1))
    return mean, float(np.sqrt(var / n))
