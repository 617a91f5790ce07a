"""
Run configuration files for the `hardmix` command line.

.. contents:: Content
   :local:

Layout
------

A run is described by a single YAML file.  Scalars at the top level select
the command and its artifacts, and one mapping per concern carries the
physical and numerical parameters:

+---------------+--------------------------------------------------------------+
| **schema**    | Configuration schema version; the major part must match      |
|               | `CONFIG_SCHEMA`.                                             |
+---------------+--------------------------------------------------------------+
| **command**   | One of `COMMANDS`.                                           |
+---------------+--------------------------------------------------------------+
| **seed**      | Root seed, an unsigned 64-bit integer.                       |
+---------------+--------------------------------------------------------------+
| **output**    | Output directory; ``HARDMIX_OUTPUT_DIR`` overrides it.       |
+---------------+--------------------------------------------------------------+
| **format**    | Data file format, one of `FORMATS`.                          |
+---------------+--------------------------------------------------------------+
| **time_unit** | ``absolute`` or ``mean-free-time`` for every time field.     |
+---------------+--------------------------------------------------------------+
| **mixture**   | `MixtureOptions`                                             |
+---------------+--------------------------------------------------------------+
| **initial**   | `InitialOptions`                                             |
+---------------+--------------------------------------------------------------+
| **scaling**   | `ScalingOptions`                                             |
+---------------+--------------------------------------------------------------+
| **dynamics**  | `DynamicsOptions`                                            |
+---------------+--------------------------------------------------------------+
| **pde**       | `PDEOptions`                                                 |
+---------------+--------------------------------------------------------------+
| **pseudo**    | `PseudoOptions`                                              |
+---------------+--------------------------------------------------------------+
| **duhamel**   | `DuhamelOptions`                                             |
+---------------+--------------------------------------------------------------+
| **chaos**     | `ChaosOptions`                                               |
+---------------+--------------------------------------------------------------+

Every section is optional and filled with defaults.  Each section class maps
field names to validators in its ``option_spec``; a validator takes the raw
YAML value and returns the normalized one or raises `ValueError`.  Failures
are reported as `~hardmix.exceptions.ConfigError` naming the dotted field and
its line in the file.  Unknown keys are logged and ignored.
"""
__all__ = [
    "COMMANDS",
    "CONFIG_SCHEMA",
    "FORMATS",
    "ChaosOptions",
    "DuhamelOptions",
    "DynamicsOptions",
    "HistogramOptions",
    "InitialOptions",
    "MixtureOptions",
    "OptionError",
    "PDEOptions",
    "PseudoOptions",
    "RunConfig",
    "ScalingOptions",
    "SectionOptions",
    "load_config",
    "option_bool",
    "option_choice",
    "option_float",
    "option_list",
    "option_mapping",
    "option_nonnegative_float",
    "option_nonnegative_int",
    "option_positive_float",
    "option_positive_int",
    "option_seed",
    "option_species_pair",
    "option_str",
    "optional",
]

import copy
import logging
import numpy as np
import yaml

from dataclasses import dataclass, field
from packaging.version import InvalidVersion, Version
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Union

from hardmix.chaos.observables import ObservableSpec, velocity_function
from hardmix.dynamics.flow import DEFAULT_EVENT_BUDGET
from hardmix.exceptions import ConfigError, InvalidInputError, ScalingInfeasibleError
from hardmix.kinetic.pde import MAX_PICARD_ITERATIONS, PICARD_TOL
from hardmix.mixture.configuration import CONTACT_RTOL
from hardmix.scaling import GradScaling, realize

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = "1.0"
"""Schema version written by `RunConfig.to_yaml`."""

COMMANDS = (
    "simulate",
    "scaling",
    "pde-solve",
    "pseudo-compare",
    "duhamel",
    "chaos-test",
    "pathology-scan",
)

FORMATS = ("csv", "jsonl", "binary")

TIME_UNITS = ("absolute", "mean-free-time")


class OptionError(ValueError):
    """
    A validator failure inside a nested value.  ``key`` is appended to the
    field path of the report.
    """

    def __init__(self, key: Union[str, int], message: str):
        super().__init__(message)
        self.key = key


def _number(argument: Any) -> float:
    if isinstance(argument, bool) or not isinstance(argument, (int, float)):
        raise ValueError(f"must be a number, got {argument!r}")
    value = float(argument)
    if not np.isfinite(value):
        raise ValueError(f"must be finite, got {argument!r}")
    return value


def _integer(argument: Any) -> int:
    if isinstance(argument, bool):
        raise ValueError(f"must be an integer, got {argument!r}")
    if isinstance(argument, float) and argument.is_integer():
        return int(argument)
    if not isinstance(argument, int):
        raise ValueError(f"must be an integer, got {argument!r}")
    return argument


def option_float(argument: Any) -> float:
    """A finite number."""
    return _number(argument)


def option_positive_float(argument: Any) -> float:
    """A finite number ``> 0``."""
    value = _number(argument)
    if value <= 0:
        raise ValueError(f"must be positive, got {argument!r}")
    return value


def option_nonnegative_float(argument: Any) -> float:
    """A finite number ``>= 0``."""
    value = _number(argument)
    if value < 0:
        raise ValueError(f"must be non-negative, got {argument!r}")
    return value


def option_positive_int(argument: Any) -> int:
    value = _integer(argument)
    if value < 1:
        raise ValueError(f"must be a positive integer, got {argument!r}")
    return value


def option_nonnegative_int(argument: Any) -> int:
    value = _integer(argument)
    if value < 0:
        raise ValueError(f"must be a non-negative integer, got {argument!r}")
    return value


def option_seed(argument: Any) -> int:
    """An unsigned 64-bit integer."""
    value = _integer(argument)
    if not 0 <= value < 2**64:
        raise ValueError(f"must be an unsigned 64-bit integer, got {argument!r}")
    return value


def option_str(argument: Any) -> str:
    if not isinstance(argument, (str, int, float)) or isinstance(argument, bool):
        raise ValueError(f"must be a string, got {argument!r}")
    return str(argument)


def option_bool(argument: Any) -> bool:
    if not isinstance(argument, bool):
        raise ValueError(f"must be true or false, got {argument!r}")
    return argument


def option_mapping(argument: Any) -> Dict[str, Any]:
    """A mapping, copied."""
    if not isinstance(argument, Mapping):
        raise ValueError(f"must be a mapping, got {argument!r}")
    return copy.deepcopy(dict(argument))


def option_choice(*choices: str) -> Callable[[Any], str]:
    """A validator accepting one of ``choices``."""

    def validator(argument: Any) -> str:
        if argument not in choices:
            raise ValueError(f"must be one of {', '.join(choices)}; got {argument!r}")
        return argument

    return validator


def optional(validator: Callable[[Any], Any]) -> Callable[[Any], Any]:
    """Wrap ``validator`` to let `None` through."""

    def wrapped(argument: Any) -> Any:
        return None if argument is None else validator(argument)

    return wrapped


def option_list(validator: Callable[[Any], Any], min_length: int = 1) -> Callable:
    """A validator for a list whose items pass ``validator``."""

    def wrapped(argument: Any) -> List[Any]:
        if not isinstance(argument, (list, tuple)):
            raise ValueError(f"must be a list, got {argument!r}")
        if len(argument) < min_length:
            raise ValueError(f"needs at least {min_length} entries")
        items = []
        for index, item in enumerate(argument):
            try:
                items.append(validator(item))
            except OptionError as err:
                raise OptionError(f"[{index}].{err.key}", str(err)) from None
            except ValueError as err:
                raise OptionError(f"[{index}]", str(err)) from None
        return items

    return wrapped


def option_species_pair(validator: Callable[[Any], Any]) -> Callable:
    """
    A validator for a per-species value, written ``{A: .., B: ..}`` or as a
    two-entry list in ``A, B`` order.  Returns the mapping form.
    """

    def wrapped(argument: Any) -> Dict[str, Any]:
        if isinstance(argument, Mapping):
            unknown = set(argument) - {"A", "B"}
            if unknown:
                raise ValueError(f"species keys must be A and B, got {sorted(map(str, unknown))}")
            missing = [key for key in ("A", "B") if key not in argument]
            if missing:
                raise ValueError(f"needs a value for species {', '.join(missing)}")
            raw = {"A": argument["A"], "B": argument["B"]}
        elif isinstance(argument, (list, tuple)) and len(argument) == 2:
            raw = {"A": argument[0], "B": argument[1]}
        else:
            raise ValueError(f"must give one value per species A and B, got {argument!r}")
        pair = {}
        for key, value in raw.items():
            try:
                pair[key] = validator(value)
            except ValueError as err:
                raise OptionError(key, str(err)) from None
        return pair

    return wrapped


def _line_index(text: str) -> Dict[str, int]:
    """One-based lines of the keys and list items of a YAML document."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                child = f"{path}.{key.value}" if path else str(key.value)
                lines[child] = key.start_mark.line + 1
                walk(value, child)
        elif isinstance(node, yaml.SequenceNode):
            for index, item in enumerate(node.value):
                child = f"{path}[{index}]"
                lines[child] = item.start_mark.line + 1
                walk(item, child)

    if root is not None:
        walk(root, "")
    return lines


class SectionOptions:
    """
    Validate one mapping of a run configuration against `option_spec`.

    Parameters
    ----------
    data : mapping or `None`
        The raw section; `None` selects all defaults.

    lines : dict, optional
        Dotted field paths to YAML lines, for diagnostics.

    prefix : str, optional
        Dotted path of the section, `name` by default.
    """

    name = ""

    option_spec: Dict[str, Callable[[Any], Any]] = {}
    """Mapping of field names to validator functions or nested sections."""

    defaults: Dict[str, Any] = {}
    """Normalized values of the fields left out."""

    def __init__(
        self,
        data: Optional[Mapping[str, Any]],
        lines: Optional[Dict[str, int]] = None,
        prefix: Optional[str] = None,
    ):
        self._prefix = self.name if prefix is None else prefix
        self._lines = {} if lines is None else lines
        self._options = self.condition_options({} if data is None else data)

    @property
    def options(self) -> Dict[str, Any]:
        """Copy of the validated options."""
        return copy.deepcopy(self._options)

    def path(self, key: str) -> str:
        return f"{self._prefix}.{key}" if self._prefix else key

    def error(self, key: str, message: str) -> ConfigError:
        """A `~hardmix.exceptions.ConfigError` for the field ``key``."""
        path = self.path(key)
        line = self._lines.get(path)
        if line is None:
            line = self._lines.get(path.split("[")[0].rsplit(".", 1)[0])
        return ConfigError(path, message, line)

    def condition_options(self, data: Mapping[str, Any]) -> Dict[str, Any]:
        if not isinstance(data, Mapping):
            raise ConfigError(
                self._prefix or "<config>", "must be a mapping", self._lines.get(self._prefix)
            )
        for key in sorted(set(map(str, data)) - set(self.option_spec)):
            logger.warning("%s: unknown configuration key, ignoring", self.path(key))

        options = {}
        for key, validator in self.option_spec.items():
            if isinstance(validator, type) and issubclass(validator, SectionOptions):
                options[key] = validator(data.get(key), self._lines, self.path(key)).options
                continue
            if key not in data:
                options[key] = copy.deepcopy(self.defaults.get(key))
                continue
            try:
                options[key] = validator(data[key])
            except OptionError as err:
                suffix = str(err.key)
                joined = f"{key}{suffix}" if suffix.startswith("[") else f"{key}.{suffix}"
                raise self.error(joined, str(err)) from None
            except (ValueError, TypeError) as err:
                raise self.error(key, str(err)) from None
        return options


class MixtureOptions(SectionOptions):
    """Dimension, masses, and diameters of the mixture."""

    name = "mixture"
    option_spec = {
        "dim": option_positive_int,
        "mass": option_species_pair(option_positive_float),
        "diameter": option_species_pair(option_positive_float),
    }
    defaults = {
        "dim": 2,
        "mass": {"A": 1.0, "B": 1.0},
        "diameter": {"A": 0.01, "B": 0.01},
    }

    def condition_options(self, data):
        options = super().condition_options(data)
        if options["dim"] < 2:
            raise self.error("dim", f"must be at least 2, got {options['dim']}")
        return options


class InitialOptions(SectionOptions):
    """One-particle initial densities, shared by both species."""

    name = "initial"
    option_spec = {
        "profile": option_choice("gaussian", "uniform"),
        "spread": option_positive_float,
        "gamma": option_positive_float,
    }
    defaults = {"profile": "gaussian", "spread": 0.5, "gamma": 1.0}


class ScalingOptions(SectionOptions):
    """Constants of the Boltzmann-Grad scaling and the particle number."""

    name = "scaling"
    option_spec = {
        "c1": option_positive_float,
        "c2": option_positive_float,
        "b": option_positive_float,
        "n2": option_positive_int,
    }
    defaults = {"c1": 1.0, "c2": 1.0, "b": 1.0, "n2": 64}


class DynamicsOptions(SectionOptions):
    """Molecular dynamics runs and pathology scans."""

    name = "dynamics"
    option_spec = {
        "input": optional(option_str),
        "counts": option_species_pair(option_nonnegative_int),
        "t_end": option_positive_float,
        "budget": option_nonnegative_int,
        "contact_tol": option_positive_float,
        "ensemble": option_positive_int,
        "windows": option_list(option_positive_float),
    }
    defaults = {
        "input": None,
        "counts": {"A": 10, "B": 10},
        "t_end": 1.0,
        "budget": DEFAULT_EVENT_BUDGET,
        "contact_tol": CONTACT_RTOL,
        "ensemble": 200,
        "windows": [1e-4, 1e-6, 1e-8],
    }


class PDEOptions(SectionOptions):
    """Phase grid, norm weights, and Picard iteration of the PDE solver."""

    name = "pde"
    option_spec = {
        "n_velocity": option_positive_int,
        "velocity_extent": option_positive_float,
        "n_space": option_nonnegative_int,
        "space_extent": option_positive_float,
        "t_end": option_positive_float,
        "steps": option_positive_int,
        "gamma0": option_positive_float,
        "mu0": option_float,
        "tol": option_positive_float,
        "max_iter": option_positive_int,
    }
    defaults = {
        "n_velocity": 16,
        "velocity_extent": 4.0,
        "n_space": 0,
        "space_extent": 2.0,
        "t_end": 0.1,
        "steps": 10,
        "gamma0": 0.5,
        "mu0": 0.0,
        "tol": PICARD_TOL,
        "max_iter": MAX_PICARD_ITERATIONS,
    }

    def condition_options(self, data):
        options = super().condition_options(data)
        if options["n_velocity"] < 2:
            raise self.error("n_velocity", "needs at least 2 nodes")
        if options["n_space"] == 1:
            raise self.error("n_space", "needs 0 (homogeneous) or at least 2 nodes")
        return options


class PseudoOptions(SectionOptions):
    """Random histories for the pseudo-trajectory comparison."""

    name = "pseudo"
    option_spec = {
        "s": option_species_pair(option_nonnegative_int),
        "k": option_nonnegative_int,
        "t": option_positive_float,
        "histories": option_positive_int,
        "radius": option_positive_float,
        "delta": option_nonnegative_float,
    }
    defaults = {
        "s": {"A": 1, "B": 1},
        "k": 4,
        "t": 1.0,
        "histories": 100,
        "radius": 3.0,
        "delta": 0.0,
    }


class DuhamelOptions(SectionOptions):
    """Monte Carlo evaluation of the truncated Duhamel series."""

    name = "duhamel"
    option_spec = {
        "s": option_species_pair(option_nonnegative_int),
        "x": optional(option_list(option_list(option_float))),
        "n": option_nonnegative_int,
        "t": option_positive_float,
        "flavor": option_choice("boltzmann", "bbgky"),
        "radius": option_positive_float,
        "delta": option_nonnegative_float,
        "samples": option_positive_int,
        "truncate": option_bool,
        "phi": optional(option_mapping),
    }
    defaults = {
        "s": {"A": 1, "B": 0},
        "x": None,
        "n": 2,
        "t": 0.1,
        "flavor": "boltzmann",
        "radius": 4.0,
        "delta": 0.0,
        "samples": 2000,
        "truncate": False,
        "phi": None,
    }


class HistogramOptions(SectionOptions):
    """Cells of the histogram estimates of marginals."""

    option_spec = {
        "space_extent": option_positive_float,
        "space_bins": option_positive_int,
        "velocity_extent": option_positive_float,
        "velocity_bins": option_positive_int,
    }
    defaults = {
        "space_extent": 1.5,
        "space_bins": 6,
        "velocity_extent": 3.0,
        "velocity_bins": 6,
    }


class ChaosOptions(SectionOptions):
    """Propagation-of-chaos experiment along a sequence of scaled points."""

    name = "chaos"
    option_spec = {
        "n2": option_list(option_positive_int),
        "ensemble": option_positive_int,
        "t": option_nonnegative_float,
        "reference": option_choice("initial", "pde"),
        "probes": option_positive_int,
        "permutations": option_positive_int,
        "nodes": option_positive_int,
        "space_nodes": option_positive_int,
        "grid": HistogramOptions,
        "observables": optional(option_list(option_mapping)),
    }
    defaults = {
        "n2": [16, 32, 64],
        "ensemble": 200,
        "t": 0.0,
        "reference": "initial",
        "probes": 64,
        "permutations": 8,
        "nodes": 24,
        "space_nodes": 2,
        "observables": None,
    }


class _TopLevelOptions(SectionOptions):
    option_spec = {
        "schema": option_str,
        "command": option_choice(*COMMANDS),
        "seed": option_seed,
        "output": option_str,
        "format": option_choice(*FORMATS),
        "time_unit": option_choice(*TIME_UNITS),
        "mixture": MixtureOptions,
        "initial": InitialOptions,
        "scaling": ScalingOptions,
        "dynamics": DynamicsOptions,
        "pde": PDEOptions,
        "pseudo": PseudoOptions,
        "duhamel": DuhamelOptions,
        "chaos": ChaosOptions,
    }
    defaults = {
        "schema": CONFIG_SCHEMA,
        "command": None,
        "seed": 0,
        "output": "results",
        "format": "csv",
        "time_unit": "absolute",
    }


SECTIONS = ("mixture", "initial", "scaling", "dynamics", "pde", "pseudo", "duhamel", "chaos")


def _check_schema(schema: str, lines: Dict[str, int]):
    try:
        found, supported = Version(schema), Version(CONFIG_SCHEMA)
    except InvalidVersion:
        raise ConfigError("schema", f"{schema!r} is not a version", lines.get("schema")) from None
    if found.major != supported.major:
        raise ConfigError(
            "schema",
            f"version {schema} is not supported, expected {supported.major}.x",
            lines.get("schema"),
        )
    if found > supported:
        logger.warning(
            "schema %s is newer than %s; unknown fields are ignored", schema, CONFIG_SCHEMA
        )


@dataclass(frozen=True)
class RunConfig:
    """
    A validated run configuration.

    ``sections`` holds the normalized mapping of every section, defaults
    filled in; the attribute of the same name returns one section.

    Examples
    --------
    >>> config = RunConfig.from_mapping({"command": "scaling", "scaling": {"n2": 100}})
    >>> config.scaling["n2"], config.mixture["dim"]
    (100, 2)
    >>> RunConfig.from_yaml(config.to_yaml()) == config
    True
    """

    command: str
    seed: int = 0
    output: str = "results"
    format: str = "csv"
    schema: str = CONFIG_SCHEMA
    time_unit: str = "absolute"
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict, repr=False)

    def __getattr__(self, name: str):
        if name in SECTIONS:
            return self.sections[name]
        raise AttributeError(f"{type(self).__name__!r} has no attribute {name!r}")

    @property
    def masses(self):
        """:math:`(M_1, M_2)`."""
        return self.mixture["mass"]["A"], self.mixture["mass"]["B"]

    @property
    def grad_scaling(self) -> GradScaling:
        return GradScaling(
            self.scaling["c1"], self.scaling["c2"], self.scaling["b"], self.mixture["dim"]
        )

    def with_overrides(self, **changes) -> "RunConfig":
        """A copy with top-level fields or ``section.field`` values replaced."""
        data = self.to_dict()
        for key, value in changes.items():
            if value is None:
                continue
            section, _, name = key.partition("__")
            if name:
                data[section][name] = value
            else:
                data[key] = value
        return type(self).from_mapping(data)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form; `from_mapping` inverts it."""
        data = {
            "schema": self.schema,
            "command": self.command,
            "seed": self.seed,
            "output": self.output,
            "format": self.format,
            "time_unit": self.time_unit,
        }
        data.update(copy.deepcopy(self.sections))
        return data

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], lines: Optional[Dict[str, int]] = None
    ) -> "RunConfig":
        """Validate ``data``; ``lines`` maps dotted fields to YAML lines."""
        lines = {} if lines is None else lines
        options = _TopLevelOptions(data, lines, "").options
        if options["command"] is None:
            raise ConfigError("command", f"is required, one of {', '.join(COMMANDS)}")
        _check_schema(options["schema"], lines)
        sections = {name: options.pop(name) for name in SECTIONS}
        config = cls(sections=sections, **options)
        _cross_check(config, lines)
        return config

    @classmethod
    def from_yaml(cls, text: str, source: str = "<string>") -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as err:
            mark = getattr(err, "problem_mark", None)
            line = None if mark is None else mark.line + 1
            problem = getattr(err, "problem", None) or str(err)
            raise ConfigError(source, f"not valid YAML: {problem}", line) from None
        if data is None:
            data = {}
        return cls.from_mapping(data, _line_index(text))


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate the run configuration at ``path``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(str(path), f"cannot read configuration: {err.strerror}") from None
    config = RunConfig.from_yaml(text, source=str(path))
    logger.debug("loaded %s configuration from %s", config.command, path)
    return config


def _cross_check(config: RunConfig, lines: Dict[str, int]):
    """Constraints spanning several fields or sections."""

    def fail(path, message):
        raise ConfigError(path, message, lines.get(path))

    dim = config.mixture["dim"]
    realized = []
    if config.command in ("scaling", "duhamel"):
        realized.append(("scaling.n2", config.scaling["n2"]))
    if config.command == "chaos-test":
        realized.extend((f"chaos.n2[{i}]", n) for i, n in enumerate(config.chaos["n2"]))
    for path, n2 in realized:
        try:
            realize(config.grad_scaling, n2)
        except ScalingInfeasibleError as err:
            fail(path, str(err))

    duhamel = config.duhamel
    size = duhamel["s"]["A"] + duhamel["s"]["B"]
    if size == 0:
        fail("duhamel.s", "needs at least one particle")
    if duhamel["x"] is None and size > 1:
        fail("duhamel.x", f"is required for {size} particles")
    if duhamel["x"] is not None:
        shape = np.shape(duhamel["x"])
        if shape != (size, dim):
            fail("duhamel.x", f"must list {size} positions of {dim} components")
    s = (duhamel["s"]["A"], duhamel["s"]["B"])
    if duhamel["phi"] is not None:
        try:
            velocity_function(duhamel["phi"], s, dim)
        except InvalidInputError as err:
            fail("duhamel.phi", str(err))

    if sum(config.pseudo["s"].values()) == 0:
        fail("pseudo.s", "needs at least one particle")

    chaos = config.chaos
    if chaos["reference"] == "initial" and chaos["t"] > 0:
        fail("chaos.reference", "an 'initial' reference only holds at chaos.t = 0")
    if chaos["reference"] == "pde" and config.pde["n_space"] == 0:
        fail("pde.n_space", "a chaos reference needs a space grid (n_space >= 2)")
    for index, item in enumerate(chaos["observables"] or []):
        try:
            ObservableSpec.from_dict(item, dim)
        except InvalidInputError as err:
            fail(f"chaos.observables[{index}]", str(err))
