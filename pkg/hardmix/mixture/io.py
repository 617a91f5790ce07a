"""
Columnar serialization of configurations.

Both formats store one row per particle, A-particles first: the species tag,
``d`` position components, and ``d`` velocity components.

* CSV: header ``species,x0,..,x{d-1},v0,..,v{d-1}``, written with `pandas`
  using the shortest round-trip float representation.
* Binary: the 8-byte magic ``b"HMIXCFG1"``, three little-endian ``int64``
  values ``(d, N_A, N_B)``, then ``(N_A + N_B) * 2d`` little-endian IEEE-754
  doubles in row order.  The species column is implied by the counts.
"""
__all__ = [
    "configuration_frame",
    "read_configuration_binary",
    "read_configuration_csv",
    "write_configuration_binary",
    "write_configuration_csv",
]

import numpy as np
import pandas as pd

from pathlib import Path
from typing import List, Union

from hardmix.exceptions import ValidationError
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import SpeciesKind

PathLike = Union[str, Path]

BINARY_MAGIC = b"HMIXCFG1"


def _columns(dim: int) -> List[str]:
    return (
        ["species"] + [f"x{k}" for k in range(dim)] + [f"v{k}" for k in range(dim)]
    )


def configuration_frame(z: Configuration) -> pd.DataFrame:
    """Return ``z`` as a `pandas.DataFrame` in the columnar layout."""
    frame = pd.DataFrame(np.hstack([z.x, z.v]), columns=_columns(z.dim)[1:])
    frame.insert(0, "species", [SpeciesKind(s).tag for s in z.species])
    return frame


def write_configuration_csv(z: Configuration, path: PathLike) -> Path:
    """Write ``z`` to ``path`` as CSV."""
    path = Path(path)
    configuration_frame(z).to_csv(path, index=False, float_format="%.17g")
    return path


def read_configuration_csv(path: PathLike) -> Configuration:
    """Read a configuration written by `write_configuration_csv`."""
    frame = pd.read_csv(path, float_precision="round_trip")
    dim = (frame.shape[1] - 1) // 2
    if list(frame.columns) != _columns(dim):
        raise ValidationError(f"{path}: unexpected columns {list(frame.columns)}")
    tags = frame["species"].astype(str).str.upper()
    if not tags.isin(["A", "B"]).all():
        raise ValidationError(f"{path}: species column must hold A or B")
    if (tags.to_numpy()[:-1] > tags.to_numpy()[1:]).any():
        raise ValidationError(f"{path}: A rows must precede B rows")

    values = frame.iloc[:, 1:].to_numpy(dtype=float)
    counts = (int((tags == "A").sum()), int((tags == "B").sum()))
    return Configuration.from_stacked(values[:, :dim], values[:, dim:], counts)


def write_configuration_binary(z: Configuration, path: PathLike) -> Path:
    """Write ``z`` to ``path`` in the compact binary layout."""
    path = Path(path)
    header = np.array([z.dim, *z.counts], dtype="<i8")
    payload = np.ascontiguousarray(np.hstack([z.x, z.v]), dtype="<f8")
    with open(path, "wb") as handle:
        handle.write(BINARY_MAGIC)
        handle.write(header.tobytes())
        handle.write(payload.tobytes())
    return path


def read_configuration_binary(path: PathLike) -> Configuration:
    """Read a configuration written by `write_configuration_binary`."""
    raw = Path(path).read_bytes()
    if raw[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise ValidationError(f"{path}: not a hardmix configuration file")
    offset = len(BINARY_MAGIC)
    dim, n_a, n_b = np.frombuffer(raw, dtype="<i8", count=3, offset=offset)
    offset += 24
    n = int(n_a + n_b)
    values = np.frombuffer(raw, dtype="<f8", count=n * 2 * int(dim), offset=offset)
    values = values.reshape(n, 2 * int(dim))
    return Configuration.from_stacked(
        values[:, :dim], values[:, dim:], (int(n_a), int(n_b))
    )
