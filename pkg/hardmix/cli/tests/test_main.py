"""End-to-end tests of the ``hardmix`` command line."""
import json
import numpy as np
import os
import pandas as pd
import pytest
import textwrap
import warnings
import yaml

from pathlib import Path

from hardmix.cli.commands import HORIZON_MEAN_FREE_TIMES, derived_quantities
from hardmix.cli.config import RunConfig
from hardmix.cli.main import EXIT_CODES, _configure, get_parser, main
from hardmix.dynamics.flow import read_event_log
from hardmix.exceptions import ConfigError, HorizonWarning
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.io import read_configuration_csv, write_configuration_csv


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = "run.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return str(path)

    return write


def test_parser_lists_commands():
    parser = get_parser()
    args = parser.parse_args(["--threads", "2", "pseudo-compare", "run.yaml", "--k", "3"])
    assert args.action == "pseudo-compare"
    assert args.k == 3
    assert args.threads == 2
    with pytest.raises(SystemExit):
        parser.parse_args(["explode", "run.yaml"])


def test_scaling(write_config, tmp_path, capsys):
    config = write_config(
        f"""\
        command: scaling
        output: {tmp_path / "out"}
        mixture: {{dim: 3}}
        scaling: {{c1: 1.0, c2: 1.0, b: 1.0, n2: 1000}}
        """
    )
    assert main(["--threads", "1", "run", config]) == EXIT_CODES["ok"]
    data = json.loads((tmp_path / "out" / "scaling.json").read_text())
    assert data["N1"] == 1000
    assert data["N2"] == 1000
    assert data["eps1"] == pytest.approx(1000 ** -0.5)
    assert data["N1_eps1"] == pytest.approx(1.0)
    assert json.loads(capsys.readouterr().out)["N1"] == 1000


def test_manifest_echoes_config(write_config, tmp_path):
    out = tmp_path / "out"
    config = write_config(f"command: scaling\noutput: {out}\nseed: 42\n")
    assert main(["--threads", "1", "scaling", config]) == 0
    manifest = yaml.safe_load((out / "manifest.yaml").read_text())
    assert manifest["status"] == "ok"
    assert manifest["command"] == "scaling"
    assert manifest["seed"] == 42
    assert manifest["outputs"] == ["scaling.json"]
    assert manifest["wall_time"] >= 0
    assert "hardmix_version" in manifest
    assert RunConfig.from_mapping(manifest["config"]) == RunConfig.from_yaml(
        (tmp_path / "run.yaml").read_text()
    )


def test_simulate_free_particle(write_config, tmp_path):
    start = tmp_path / "start.csv"
    write_configuration_csv(Configuration([[0.1, -0.2]], [[1.0, 0.5]], [], []), start)
    out = tmp_path / "out"
    config = write_config(
        f"""\
        command: simulate
        output: {out}
        dynamics: {{input: {start}, t_end: 2.0}}
        """
    )
    assert main(["--threads", "1", "run", config]) == 0
    final = read_configuration_csv(out / "final.csv")
    np.testing.assert_allclose(final.x, [[2.1, 0.8]])
    np.testing.assert_allclose(final.v, [[1.0, 0.5]])
    assert read_event_log(out / "events.jsonl") == []
    summary = json.loads((out / "summary.json").read_text())
    assert summary["collisions"] == 0
    assert summary["pathology"] is None


def test_simulate_pathology(write_config, tmp_path):
    start = tmp_path / "start.csv"
    write_configuration_csv(
        Configuration(
            [[-2.0, 0.0], [0.0, 0.0], [2.0, 0.0]],
            [[1.0, 0.0], [0.0, 0.0], [-1.0, 0.0]],
            [],
            [],
        ),
        start,
    )
    out = tmp_path / "out"
    config = write_config(
        f"""\
        command: simulate
        output: {out}
        mixture: {{diameter: [1.0, 1.0]}}
        dynamics: {{input: {start}, t_end: 3.0}}
        """
    )
    assert main(["--threads", "1", "run", config]) == EXIT_CODES["pathology"]
    manifest = yaml.safe_load((out / "manifest.yaml").read_text())
    assert manifest["status"] == "pathology"
    assert "multiple-collision" in manifest["error"]
    assert json.loads((out / "summary.json").read_text())["pathology"] == "multiple-collision"


def test_simulate_sampled(write_config, tmp_path):
    out = tmp_path / "out"
    config = write_config(
        f"""\
        command: simulate
        output: {out}
        format: binary
        dynamics: {{counts: [4, 3], t_end: 0.5}}
        """
    )
    assert main(["--threads", "1", "run", config]) == 0
    assert (out / "initial.bin").is_file()
    assert (out / "final.bin").is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["particles"] == [4, 3]
    assert abs(summary["energy_drift"]) < 1e-10


def test_pseudo_compare_within_bounds(write_config, tmp_path):
    out = tmp_path / "out"
    config = write_config(
        f"""\
        command: pseudo-compare
        output: {out}
        pseudo: {{k: 1, histories: 12, t: 0.5}}
        """
    )
    assert main(["--threads", "2", "pseudo-compare", config, "--k", "4"]) == 0
    frame = pd.read_csv(out / "pseudo.csv")
    assert sorted(frame["history"].unique()) == list(range(12))
    assert (frame["position_deviation"] <= frame["bound"]).all()
    assert frame["within_bound"].all()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["k"] == 4
    assert summary["within_bound"]


def test_pseudo_compare_deterministic(write_config, tmp_path):
    text = """\
        command: pseudo-compare
        output: {out}
        seed: 2024
        pseudo: {{k: 2, histories: 6, t: 0.5}}
        """
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"out{threads}"
        config = write_config(text.format(out=out), name=f"run{threads}.yaml")
        assert main(["--threads", threads, "run", config]) == 0
        outputs.append((out / "pseudo.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_jsonl_tables(write_config, tmp_path):
    out = tmp_path / "out"
    config = write_config(
        f"""\
        command: pathology-scan
        output: {out}
        format: jsonl
        dynamics: {{counts: [3, 3], ensemble: 5, t_end: 0.2, windows: [1.0e-4, 1.0e-8]}}
        """
    )
    assert main(["--threads", "1", "run", config]) == 0
    table = pd.read_json(out / "pathology.jsonl", lines=True)
    assert list(table["window"]) == [1e-4, 1e-8]
    assert table["rate"].between(0, 1).all()


def test_output_directory_from_environment(write_config, tmp_path, monkeypatch):
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("HARDMIX_OUTPUT_DIR", str(override))
    config = write_config(f"command: scaling\noutput: {tmp_path / 'out'}\n")
    assert main(["--threads", "1", "run", config]) == 0
    assert (override / "scaling.json").is_file()
    assert not (tmp_path / "out").exists()


class TestCommandFlags:
    @pytest.fixture
    def configure(self, write_config):
        path = write_config(
            """\
            command: scaling
            pde: {n_space: 4}
            chaos: {n2: [16, 32, 64]}
            """
        )

        def configure(*argv):
            action, *rest = argv
            return _configure(get_parser().parse_args([action, path, *rest]))

        return configure

    def test_simulate(self, configure):
        config = configure("simulate", "--events-max", "50", "--contact-tol", "1e-7")
        assert config.command == "simulate"
        assert config.dynamics["budget"] == 50
        assert config.dynamics["contact_tol"] == 1e-7

    def test_simulate_defaults(self, configure):
        config = configure("simulate")
        assert config.dynamics["budget"] == 10**6
        assert config.dynamics["contact_tol"] == 1e-9

    def test_pde_homogeneous(self, configure):
        assert configure("pde-solve").pde["n_space"] == 4
        assert configure("pde-solve", "--homogeneous").pde["n_space"] == 0

    def test_pseudo_compare(self, configure):
        config = configure(
            "pseudo-compare", "--k", "3", "--trials", "25", "--scaling", "2", "1", "1"
        )
        assert config.pseudo["k"] == 3
        assert config.pseudo["histories"] == 25
        assert (config.scaling["c1"], config.scaling["c2"], config.scaling["b"]) == (2.0, 1.0, 1.0)

    def test_chaos_test(self, configure):
        config = configure("chaos-test", "--n-points", "2", "--ensemble", "40")
        assert config.chaos["n2"] == [16, 32]
        assert config.chaos["ensemble"] == 40

    @pytest.mark.parametrize("n_points", ["0", "4"])
    def test_chaos_points_out_of_range(self, configure, n_points):
        with pytest.raises(ConfigError, match="chaos.n2"):
            configure("chaos-test", "--n-points", n_points)

    def test_invalid_value_exits_with_input_code(self, write_config, tmp_path):
        config = write_config(f"command: simulate\noutput: {tmp_path / 'out'}\n")
        assert main(["simulate", config, "--contact-tol", "-1"]) == EXIT_CODES["input"]

    def test_events_max_aborts(self, write_config, tmp_path):
        start = tmp_path / "start.csv"
        write_configuration_csv(
            Configuration([[0.0, 0.0]], [[1.0, 0.0]], [[5.0, 0.0]], [[-1.0, 0.0]]), start
        )
        out = tmp_path / "out"
        config = write_config(
            f"""\
            command: simulate
            output: {out}
            mixture: {{diameter: [1.0, 1.0]}}
            dynamics: {{input: {start}, t_end: 3.0}}
            """
        )
        code = main(["--threads", "1", "simulate", config, "--events-max", "0"])
        assert code == EXIT_CODES["pathology"]
        assert json.loads((out / "summary.json").read_text())["pathology"] == "event-overflow"


class TestValidate:
    def test_ok(self, write_config, capsys):
        config = write_config("command: scaling\nscaling: {n2: 50}\n")
        assert main(["validate", config]) == 0
        out = capsys.readouterr().out
        assert out.startswith("ok")
        assert "mean_free_time" in out
        assert "50" in out

    def test_negative_mass(self, write_config, caplog):
        config = write_config("command: simulate\nmixture:\n  mass: {A: -1.0, B: 1.0}\n")
        assert main(["validate", config]) == EXIT_CODES["input"]
        assert "mixture.mass.A" in caplog.text

    def test_horizon_warning(self):
        config = RunConfig.from_yaml(
            "command: pde-solve\ntime_unit: mean-free-time\npde: {t_end: 2.0}\n"
        )
        with pytest.warns(HorizonWarning, match="mean free times"):
            derived = derived_quantities(config)
        assert derived["horizon"] == pytest.approx(2.0 * derived["mean_free_time"])
        assert derived["horizon_heuristic"] == pytest.approx(
            HORIZON_MEAN_FREE_TIMES * derived["mean_free_time"]
        )

    def test_no_warning_inside_horizon(self):
        config = RunConfig.from_yaml(
            "command: pde-solve\ntime_unit: mean-free-time\npde: {t_end: 0.25}\n"
        )
        with warnings.catch_warnings():
            warnings.simplefilter("error", HorizonWarning)
            derived_quantities(config)


class TestSmallRuns:
    def test_pde_solve(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config(
            f"""\
            command: pde-solve
            output: {out}
            pde: {{n_velocity: 8, velocity_extent: 3.0, t_end: 0.02, steps: 2}}
            """
        )
        assert main(["--threads", "1", "run", config]) == 0
        assert (out / "solution.csv").is_file()
        residuals = pd.read_csv(out / "residuals.csv")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["homogeneous"]
        assert summary["iterations"] == len(residuals)
        assert residuals["residual"].iloc[-1] <= 1e-8

    def test_duhamel(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config(
            f"""\
            command: duhamel
            output: {out}
            duhamel: {{n: 1, t: 0.05, samples: 200}}
            """
        )
        assert main(["--threads", "2", "run", config]) == 0
        table = pd.read_csv(out / "duhamel.csv")
        assert table["k"].tolist() == [0, 1]
        np.testing.assert_allclose(table["partial_sum"], table["term"].cumsum())

    def test_chaos_test(self, write_config, tmp_path):
        out = tmp_path / "out"
        config = write_config(
            f"""\
            command: chaos-test
            output: {out}
            chaos:
              n2: [2, 4, 8]
              ensemble: 20
              probes: 8
              permutations: 2
              nodes: 6
              space_nodes: 1
            """
        )
        assert main(["--threads", "2", "run", config]) == 0
        chaos = pd.read_csv(out / "chaos.csv")
        covariance = pd.read_csv(out / "covariance.csv")
        assert len(chaos) == 15
        assert covariance["N2"].tolist() == [2, 4, 8]
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["slopes"]) == {"density", "gaussian", "energy-A", "cross", "box"}
        assert 0.0 <= summary["decreasing_fraction"] <= 1.0


ACCEPTANCE_CONFIG = Path(__file__).parents[3] / "docs" / "first_steps" / "chaos_acceptance.yaml"


@pytest.mark.slow
def test_chaos_acceptance(tmp_path):
    """The shipped chaos-test configuration: 3 points, M = 2000, t = 0.3 mean free times."""
    if not ACCEPTANCE_CONFIG.is_file():
        pytest.skip("the acceptance configuration ships with the source tree")
    out = tmp_path / "out"
    code = main(
        ["--threads", str(os.cpu_count() or 1), "run", str(ACCEPTANCE_CONFIG), "-o", str(out)]
    )
    assert code == EXIT_CODES["ok"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["points"] == [64, 128, 256]
    assert summary["decreasing_fraction"] >= 0.8
    assert summary["covariance_decreasing"]
