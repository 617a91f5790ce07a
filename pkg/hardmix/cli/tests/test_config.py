"""Tests for `hardmix.cli.config`."""
import logging
import pytest
import textwrap

from hypothesis import given
from hypothesis import strategies as st

from hardmix.cli.config import (
    CONFIG_SCHEMA,
    RunConfig,
    load_config,
    option_choice,
    option_list,
    option_positive_float,
    option_seed,
    option_species_pair,
    optional,
)
from hardmix.exceptions import ConfigError


def from_text(text: str) -> RunConfig:
    return RunConfig.from_yaml(textwrap.dedent(text))


class TestValidators:
    def test_positive_float(self):
        assert option_positive_float(2) == 2.0
        for bad in (0, -1.0, True, "1", float("inf")):
            with pytest.raises(ValueError):
                option_positive_float(bad)

    @given(st.integers(min_value=0, max_value=2**64 - 1))
    def test_seed_range(self, seed):
        assert option_seed(seed) == seed

    def test_seed_out_of_range(self):
        with pytest.raises(ValueError):
            option_seed(2**64)
        with pytest.raises(ValueError):
            option_seed(-1)

    def test_species_pair(self):
        pair = option_species_pair(option_positive_float)
        assert pair({"A": 1, "B": 2.5}) == {"A": 1.0, "B": 2.5}
        assert pair([3, 4]) == {"A": 3.0, "B": 4.0}
        with pytest.raises(ValueError):
            pair({"A": 1})
        with pytest.raises(ValueError):
            pair({"A": 1, "B": 1, "C": 1})

    def test_list_and_optional(self):
        validator = optional(option_list(option_positive_float))
        assert validator(None) is None
        assert validator([1, 2]) == [1.0, 2.0]
        with pytest.raises(ValueError):
            validator([])

    def test_choice(self):
        validator = option_choice("csv", "jsonl")
        assert validator("csv") == "csv"
        with pytest.raises(ValueError, match="one of csv, jsonl"):
            validator("parquet")


class TestRunConfig:
    def test_defaults(self):
        config = from_text("command: scaling\n")
        assert config.schema == CONFIG_SCHEMA
        assert config.seed == 0
        assert config.format == "csv"
        assert config.mixture["dim"] == 2
        assert config.masses == (1.0, 1.0)
        assert config.chaos["grid"]["space_bins"] == 6
        assert config.grad_scaling.dim == 2

    def test_negative_mass_names_field_and_line(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text(
                """\
                command: simulate
                mixture:
                  dim: 2
                  mass:
                    A: -1.0
                    B: 1.0
                """
            )
        assert excinfo.value.field == "mixture.mass.A"
        assert excinfo.value.line == 5
        assert "mixture.mass.A (line 5)" in str(excinfo.value)

    def test_list_item_path(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text(
                """\
                command: chaos-test
                chaos:
                  n2: [4, -8]
                """
            )
        assert excinfo.value.field == "chaos.n2[1]"
        assert excinfo.value.line == 3

    def test_missing_command(self):
        with pytest.raises(ConfigError, match="command"):
            from_text("seed: 3\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text("command: [scaling\n")
        assert excinfo.value.line is not None

    def test_dimension_one(self):
        with pytest.raises(ConfigError, match="at least 2"):
            from_text("command: scaling\nmixture: {dim: 1}\n")

    def test_unknown_key_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="hardmix.cli.config"):
            config = from_text("command: scaling\nscaling: {n2: 32, colour: red}\n")
        assert config.scaling["n2"] == 32
        assert "scaling.colour: unknown configuration key" in caplog.text

    def test_schema(self, caplog):
        with pytest.raises(ConfigError, match="not supported"):
            from_text("schema: '2.0'\ncommand: scaling\n")
        with pytest.raises(ConfigError, match="not a version"):
            from_text("schema: latest\ncommand: scaling\n")
        with caplog.at_level(logging.WARNING, logger="hardmix.cli.config"):
            from_text("schema: '1.7'\ncommand: scaling\n")
        assert "newer" in caplog.text

    def test_round_trip(self):
        config = from_text(
            """\
            command: duhamel
            seed: 12
            mixture: {dim: 3, mass: [1.0, 4.0]}
            duhamel:
              s: {A: 1, B: 1}
              x: [[0, 0, 0], [0.5, 0, 0]]
              phi: {family: gaussian, width: 0.5}
            """
        )
        again = RunConfig.from_yaml(config.to_yaml())
        assert again == config
        assert again.duhamel["x"] == [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]

    def test_with_overrides(self):
        config = from_text("command: pseudo-compare\n")
        changed = config.with_overrides(seed=9, pseudo__k=2, output=None)
        assert changed.seed == 9
        assert changed.pseudo["k"] == 2
        assert changed.output == config.output
        assert config.pseudo["k"] == 4

    def test_load_config(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("command: scaling\nscaling: {n2: 100}\n")
        assert load_config(path).scaling["n2"] == 100
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.yaml")


class TestCrossChecks:
    def test_infeasible_scaling(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text("command: scaling\nscaling: {c1: 1.0e-6, n2: 3}\n")
        assert excinfo.value.field == "scaling.n2"

    def test_infeasible_scaling_ignored_by_other_commands(self):
        config = from_text("command: pde-solve\nscaling: {c1: 1.0e-6, n2: 3}\n")
        assert config.command == "pde-solve"

    def test_duhamel_positions(self):
        with pytest.raises(ConfigError, match="is required"):
            from_text("command: duhamel\nduhamel: {s: [1, 1]}\n")
        with pytest.raises(ConfigError, match="positions of 2 components"):
            from_text("command: duhamel\nduhamel: {s: [1, 1], x: [[0, 0, 0], [1, 0, 0]]}\n")

    def test_duhamel_phi(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text("command: duhamel\nduhamel: {phi: {family: wavelet}}\n")
        assert excinfo.value.field == "duhamel.phi"

    def test_empty_pseudo(self):
        with pytest.raises(ConfigError, match="at least one particle"):
            from_text("command: pseudo-compare\npseudo: {s: [0, 0]}\n")

    def test_chaos_reference(self):
        with pytest.raises(ConfigError, match="initial"):
            from_text("command: chaos-test\nchaos: {t: 0.1}\n")
        with pytest.raises(ConfigError) as excinfo:
            from_text("command: chaos-test\nchaos: {t: 0.1, reference: pde}\n")
        assert excinfo.value.field == "pde.n_space"
        config = from_text(
            "command: chaos-test\nchaos: {t: 0.1, reference: pde}\npde: {n_space: 4}\n"
        )
        assert config.chaos["reference"] == "pde"

    def test_chaos_observables(self):
        with pytest.raises(ConfigError) as excinfo:
            from_text(
                """\
                command: chaos-test
                chaos:
                  observables:
                    - {id: ok, s: [1, 0], phi: {family: gaussian}}
                    - {id: bad, s: [1, 0], phi: {family: gaussian, width: -1}}
                """
            )
        assert excinfo.value.field == "chaos.observables[1]"
