"""
The two particle types of the mixture and the physical parameters that go
with them.
"""
__all__ = ["MixtureParams", "SpeciesKind", "interaction_distance"]

import enum
import numpy as np

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Mapping, Tuple, Union

from hardmix.exceptions import InvalidInputError


class SpeciesKind(enum.IntEnum):
    """
    The particle types.  ``A`` is the type :math:`(1, 0)` and ``B`` the type
    :math:`(0, 1)`; the integer values give the ordering ``A < B`` and index
    per-species arrays.
    """

    A = 0
    B = 1

    @property
    def tag(self) -> str:
        """Single letter tag used in files and configuration."""
        return self.name

    @property
    def other(self) -> "SpeciesKind":
        """The other species."""
        return SpeciesKind(1 - int(self))

    @property
    def unit(self) -> Tuple[int, int]:
        """The type as a count vector, ``(1, 0)`` or ``(0, 1)``."""
        return (1, 0) if self is SpeciesKind.A else (0, 1)

    @classmethod
    def parse(cls, value: Union[str, int, "SpeciesKind"]) -> "SpeciesKind":
        """Convert a tag (``"A"``/``"B"``), an integer, or a kind to a kind."""
        if isinstance(value, SpeciesKind):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise InvalidInputError(f"unknown species tag {value!r}") from None
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise InvalidInputError(f"unknown species {value!r}") from None

    @classmethod
    def pairs(cls) -> Iterator[Tuple["SpeciesKind", "SpeciesKind"]]:
        """All ordered ``(alpha, beta)`` pairs."""
        for a in cls:
            for b in cls:
                yield a, b


def _per_species(value: Any, name: str) -> Tuple[float, float]:
    if isinstance(value, Mapping):
        try:
            pair = (value[SpeciesKind.A.tag], value[SpeciesKind.B.tag])
        except KeyError:
            try:
                pair = (value[SpeciesKind.A], value[SpeciesKind.B])
            except KeyError:
                raise InvalidInputError(
                    f"{name} must give a value for both species A and B"
                ) from None
    else:
        pair = tuple(value)
        if len(pair) != 2:
            raise InvalidInputError(f"{name} must have exactly two entries")
    return float(pair[0]), float(pair[1])


@dataclass(frozen=True)
class MixtureParams:
    """
    Dimension, masses, and diameters of a two-species mixture.

    Parameters
    ----------
    dim : int
        Spatial dimension :math:`d \\geq 2`.

    mass : mapping or pair
        Masses :math:`(M_1, M_2)`, keyed by species tag or given in ``A, B``
        order.

    diameter : mapping or pair
        Diameters :math:`(\\epsilon_1, \\epsilon_2)`.

    Examples
    --------
    >>> params = MixtureParams(2, mass={"A": 1.0, "B": 3.0}, diameter=(1.0, 3.0))
    >>> params.interaction_distance(SpeciesKind.A, SpeciesKind.B)
    2.0
    """

    dim: int
    mass: Tuple[float, float]
    diameter: Tuple[float, float]
    _sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidInputError(f"dim must be an integer >= 2, got {self.dim}")
        mass = _per_species(self.mass, "mass")
        diameter = _per_species(self.diameter, "diameter")
        if min(mass) <= 0 or not np.all(np.isfinite(mass)):
            raise InvalidInputError(f"masses must be strictly positive, got {mass}")
        if min(diameter) <= 0 or not np.all(np.isfinite(diameter)):
            raise InvalidInputError(
                f"diameters must be strictly positive, got {diameter}"
            )
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "diameter", diameter)

        sigma = 0.5 * (np.asarray(diameter)[:, None] + np.asarray(diameter)[None, :])
        sigma.setflags(write=False)
        object.__setattr__(self, "_sigma", sigma)

    def mass_of(self, kind: SpeciesKind) -> float:
        """Mass of species ``kind``."""
        return self.mass[int(kind)]

    def diameter_of(self, kind: SpeciesKind) -> float:
        """Diameter of species ``kind``."""
        return self.diameter[int(kind)]

    def interaction_distance(self, a: SpeciesKind, b: SpeciesKind) -> float:
        """Contact distance :math:`(\\epsilon_a + \\epsilon_b) / 2`."""
        return float(self._sigma[int(a), int(b)])

    @property
    def sigma_table(self) -> np.ndarray:
        """Read-only 2x2 table of interaction distances indexed by species."""
        return self._sigma

    @property
    def max_diameter(self) -> float:
        """:math:`\\max(\\epsilon_1, \\epsilon_2)`."""
        return max(self.diameter)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form used by configuration files."""
        return {
            "dim": self.dim,
            "mass": {"A": self.mass[0], "B": self.mass[1]},
            "diameter": {"A": self.diameter[0], "B": self.diameter[1]},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MixtureParams":
        """Inverse of `to_dict`."""
        return cls(int(data["dim"]), mass=data["mass"], diameter=data["diameter"])


def interaction_distance(
    params: MixtureParams, a: SpeciesKind, b: SpeciesKind
) -> float:
    """
    Return the interaction distance :math:`\\epsilon_{(a, b)}` between a
    type-``a`` and a type-``b`` sphere, the average of their diameters.
    """
    return params.interaction_distance(SpeciesKind.parse(a), SpeciesKind.parse(b))
