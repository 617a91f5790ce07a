"""
The experiments behind the `hardmix` subcommands.

Every command takes a `RunContext` and writes its artifacts through it, so
that the manifest lists exactly the files a run produced.  All randomness is
drawn from streams spawned from the configuration seed, so reruns of one
configuration write byte-identical data files for any thread count.

+--------------------+------------------------------------------------------+
| **simulate**       | One hard-sphere trajectory: initial and final        |
|                    | configurations and the collision log.                |
+--------------------+------------------------------------------------------+
| **scaling**        | The realized Boltzmann-Grad scaling and its          |
|                    | constants, as JSON.                                  |
+--------------------+------------------------------------------------------+
| **pde-solve**      | The Boltzmann system for mixtures on a phase grid.   |
+--------------------+------------------------------------------------------+
| **pseudo-compare** | Stage deviations of coupled Boltzmann and BBGKY      |
|                    | pseudo-trajectories against their bounds.            |
+--------------------+------------------------------------------------------+
| **duhamel**        | Terms and partial sums of the truncated series.      |
+--------------------+------------------------------------------------------+
| **chaos-test**     | Observable gaps and species covariances along a      |
|                    | sequence of scaled points.                           |
+--------------------+------------------------------------------------------+
| **pathology-scan** | Pathology rates against the tolerance window.        |
+--------------------+------------------------------------------------------+
"""
__all__ = [
    "COMMAND_TABLE",
    "HORIZON_MEAN_FREE_TIMES",
    "RunContext",
    "chaos_test",
    "default_observables",
    "derived_quantities",
    "duhamel",
    "output_directory",
    "pathology_scan",
    "pde_solve",
    "pseudo_compare",
    "scaling",
    "simulate",
]

import json
import logging
import numpy as np
import os
import pandas as pd
import warnings

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

from hardmix.chaos.marginals import HistogramGrid
from hardmix.chaos.metrics import (
    ChaosPoint,
    chaos_metric,
    conditioned_ensemble,
    default_box,
    evolve_ensemble,
    species_covariance,
)
from hardmix.chaos.observables import (
    ObservableSpec,
    VelocityBox,
    VelocityGaussian,
    VelocityPolynomial,
    velocity_function,
)
from hardmix.cli.config import RunConfig
from hardmix.dynamics.flow import advance, write_event_log
from hardmix.dynamics.sampling import (
    MaxwellianDensity,
    pathology_rate,
    sample_configuration,
    sample_ensemble,
)
from hardmix.exceptions import (
    ConfigError,
    HorizonWarning,
    InvalidInputError,
    ScalingInfeasibleError,
)
from hardmix.hierarchy.duhamel import TensorizedData, truncated_series
from hardmix.hierarchy.history import random_history
from hardmix.hierarchy.pseudo import (
    Flavor,
    build_bbgky_pseudo,
    build_boltzmann_pseudo,
    compare_pseudo,
    recollision_filter,
)
from hardmix.kinetic.norms import SolverWeights
from hardmix.kinetic.pde import (
    GridDensityPair,
    PhaseGrid,
    snapshot_frame,
    solve_mixture_pde,
    write_snapshot,
    write_snapshot_csv,
)
from hardmix.mixture.configuration import Configuration, energy, total_momentum
from hardmix.mixture.io import (
    configuration_frame,
    read_configuration_binary,
    read_configuration_csv,
    write_configuration_binary,
    write_configuration_csv,
)
from hardmix.mixture.species import MixtureParams
from hardmix.scaling import mean_free_time, prefactor_defect_bound, realize
from hardmix.utils import spawn_seeds

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "HARDMIX_OUTPUT_DIR"

HORIZON_MEAN_FREE_TIMES = 0.5
"""Advisory horizon, in mean free times, of the local well-posedness theory."""


def output_directory(config: RunConfig) -> Path:
    """The output directory, ``HARDMIX_OUTPUT_DIR`` taking precedence."""
    return Path(os.environ.get(OUTPUT_DIR_ENV) or config.output)


class RunContext:
    """
    Configuration, worker threads, and artifact bookkeeping of one run.

    Parameters
    ----------
    config : `~hardmix.cli.config.RunConfig`

    threads : int
        Worker threads for ensembles and Monte Carlo sums.

    directory : path-like, optional
        Output directory, `output_directory` of ``config`` by default.
    """

    def __init__(self, config: RunConfig, threads: int = 1, directory=None):
        if threads < 1:
            raise InvalidInputError(f"threads must be positive, got {threads}")
        self.config = config
        self.threads = int(threads)
        self.directory = Path(directory) if directory is not None else output_directory(config)
        self.outputs: List[Path] = []

    def prepare(self) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        return self.directory

    def register(self, path: Path) -> Path:
        self.outputs.append(path)
        logger.info("wrote %s", path)
        return path

    def write_table(self, frame: pd.DataFrame, stem: str) -> Path:
        """
        Write a table as CSV, or as JSON lines for the ``jsonl`` format.
        Tables stay CSV under the ``binary`` format.
        """
        if self.config.format == "jsonl":
            path = self.directory / f"{stem}.jsonl"
            frame.to_json(path, orient="records", lines=True, double_precision=15)
        else:
            path = self.directory / f"{stem}.csv"
            frame.to_csv(path, index=False, float_format="%.17g")
        return self.register(path)

    def write_json(self, data: Dict[str, Any], name: str) -> Path:
        path = self.directory / name
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return self.register(path)

    def write_configuration(self, z: Configuration, stem: str) -> Path:
        fmt = self.config.format
        if fmt == "binary":
            return self.register(write_configuration_binary(z, self.directory / f"{stem}.bin"))
        if fmt == "jsonl":
            return self.write_table(configuration_frame(z), stem)
        return self.register(write_configuration_csv(z, self.directory / f"{stem}.csv"))

    def write_density_snapshot(self, pair: GridDensityPair, stem: str) -> Path:
        fmt = self.config.format
        if fmt == "binary":
            return self.register(write_snapshot(pair, self.directory / f"{stem}.bin"))
        if fmt == "jsonl":
            return self.write_table(snapshot_frame(pair), stem)
        return self.register(write_snapshot_csv(pair, self.directory / f"{stem}.csv"))

    def params(self) -> MixtureParams:
        diameter = self.config.mixture["diameter"]
        return MixtureParams(
            self.config.mixture["dim"], self.config.masses, (diameter["A"], diameter["B"])
        )

    def densities(self) -> Tuple[MaxwellianDensity, MaxwellianDensity]:
        """The initial one-particle densities :math:`(g_0, h_0)`."""
        initial = self.config.initial
        return tuple(
            MaxwellianDensity(
                self.config.mixture["dim"],
                mass=mass,
                gamma=initial["gamma"],
                spread=initial["spread"],
                profile=initial["profile"],
            )
            for mass in self.config.masses
        )

    def mean_free_time(self) -> float:
        gamma = self.config.initial["gamma"]
        return mean_free_time(self.config.grad_scaling, self.config.masses, (gamma, gamma))

    def time(self, value: float) -> float:
        """A configured time in absolute units."""
        if self.config.time_unit == "mean-free-time":
            return value * self.mean_free_time()
        return value


def _seeds(config: RunConfig, n: int):
    return spawn_seeds(config.seed, n)


def _read_input(path: str) -> Configuration:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("dynamics.input", f"no configuration file at {path}")
    if path.suffix == ".csv":
        return read_configuration_csv(path)
    return read_configuration_binary(path)


def simulate(ctx: RunContext) -> Dict[str, Any]:
    """Run the hard-sphere flow from an input or a sampled configuration."""
    dyn = ctx.config.dynamics
    params = ctx.params()
    if dyn["input"] is not None:
        z = _read_input(dyn["input"])
        if z.dim != params.dim:
            raise ConfigError(
                "dynamics.input", f"configuration is {z.dim}-dimensional, mixture is {params.dim}"
            )
    else:
        densities = ctx.densities()
        counts = (dyn["counts"]["A"], dyn["counts"]["B"])
        z = sample_configuration(
            densities, params, counts, default_box(densities), _seeds(ctx.config, 1)[0]
        ).configuration
    t_end = ctx.time(dyn["t_end"])
    result = advance(z, t_end, params, dyn["budget"], contact_tol=dyn["contact_tol"])

    ctx.write_configuration(z, "initial")
    ctx.write_configuration(result.final, "final")
    ctx.register(write_event_log(result.events, ctx.directory / "events.jsonl"))
    summary = {
        "particles": list(z.counts),
        "t_end": t_end,
        "collisions": len(result.events),
        "energy_drift": energy(result.final, params) - energy(z, params),
        "momentum_drift": float(
            np.linalg.norm(total_momentum(result.final, params) - total_momentum(z, params))
        ),
        "pathology": None if result.ok else result.pathology.kind.value,
    }
    ctx.write_json(summary, "summary.json")
    result.raise_for_pathology()
    return summary


def scaling(ctx: RunContext) -> Dict[str, Any]:
    """Realize the scaling at ``scaling.n2``."""
    config = ctx.config
    realized = realize(config.grad_scaling, config.scaling["n2"])
    dim = realized.dim
    data = realized.to_dict()
    data.update(
        {
            "N1_eps1": realized.n1 * realized.eps1 ** (dim - 1),
            "N2_eps2": realized.n2 * realized.eps2 ** (dim - 1),
            "kernel_table": config.grad_scaling.kernel_table.tolist(),
            "mean_free_time": ctx.mean_free_time(),
            "prefactor_defect_bound": prefactor_defect_bound(config.grad_scaling, (1, 1), 1),
        }
    )
    ctx.write_json(data, "scaling.json")
    return data


def _phase_grid(config: RunConfig) -> PhaseGrid:
    pde = config.pde
    homogeneous = pde["n_space"] == 0
    return PhaseGrid(
        config.mixture["dim"],
        pde["velocity_extent"],
        pde["n_velocity"],
        None if homogeneous else pde["space_extent"],
        pde["n_space"],
    )


def _initial_pair(grid: PhaseGrid, densities) -> GridDensityPair:
    g0, h0 = densities
    if grid.homogeneous:
        return GridDensityPair.from_callables(g0.velocity_density, h0.velocity_density, grid)
    return GridDensityPair.from_callables(g0, h0, grid)


def _solve(ctx: RunContext, initial: GridDensityPair, t_end: float):
    pde = ctx.config.pde
    weights = SolverWeights.for_horizon(pde["gamma0"], pde["mu0"], t_end)
    return solve_mixture_pde(
        initial,
        ctx.config.masses,
        ctx.config.grad_scaling,
        weights,
        t_end,
        steps=pde["steps"],
        tol=pde["tol"],
        max_iter=pde["max_iter"],
    )


def pde_solve(ctx: RunContext) -> Dict[str, Any]:
    """Solve the Boltzmann system for mixtures from the initial Maxwellians."""
    grid = _phase_grid(ctx.config)
    initial = _initial_pair(grid, ctx.densities())
    t_end = ctx.time(ctx.config.pde["t_end"])
    solution = _solve(ctx, initial, t_end)

    ctx.write_density_snapshot(solution.final, "solution")
    ctx.write_table(
        pd.DataFrame(
            {
                "iteration": np.arange(1, len(solution.residuals) + 1),
                "residual": solution.residuals,
            }
        ),
        "residuals",
    )
    summary = {
        "t_end": t_end,
        "homogeneous": grid.homogeneous,
        "iterations": solution.iterations,
        "residual": float(solution.residuals[-1]) if solution.residuals else 0.0,
        "bound_ratio": float(solution.bound_ratio),
        "negative": bool(solution.negative),
    }
    ctx.write_json(summary, "summary.json")
    return summary


def pseudo_compare(ctx: RunContext) -> Dict[str, Any]:
    """Compare coupled pseudo-trajectories over random histories."""
    pseudo = ctx.config.pseudo
    params = ctx.params()
    densities = ctx.densities()
    box = default_box(densities)
    s = (pseudo["s"]["A"], pseudo["s"]["B"])
    t = ctx.time(pseudo["t"])
    seeds = _seeds(ctx.config, pseudo["histories"])

    def one(index: int) -> pd.DataFrame:
        rng = np.random.default_rng(seeds[index])
        z = sample_configuration(densities, params, s, box, rng).configuration
        history = random_history(
            s, pseudo["k"], t, params.dim, pseudo["radius"], pseudo["delta"], seed=rng
        )
        bbgky = build_bbgky_pseudo(z, history, params)
        frame = compare_pseudo(build_boltzmann_pseudo(z, history, params.mass), bbgky, strict=False)
        frame.insert(0, "history", index)
        frame["recollided"] = not recollision_filter(bbgky, params).clean
        return frame

    indices = range(pseudo["histories"])
    if ctx.threads > 1:
        with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
            frames = list(pool.map(one, indices))
    else:
        frames = [one(i) for i in indices]
    table = pd.concat(frames, ignore_index=True)
    ctx.write_table(table, "pseudo")

    within = bool(table["within_bound"].all())
    if not within:
        logger.error(
            "%d stages break the proximity bounds", int((~table["within_bound"]).sum())
        )
    summary = {
        "histories": pseudo["histories"],
        "k": pseudo["k"],
        "max_position_deviation": float(table["position_deviation"].max()),
        "max_velocity_deviation": float(table["velocity_deviation"].max()),
        "recollided_fraction": float(
            table.groupby("history")["recollided"].first().mean()
        ),
        "within_bound": within,
    }
    ctx.write_json(summary, "summary.json")
    return summary


def duhamel(ctx: RunContext) -> Dict[str, Any]:
    """Estimate the truncated Duhamel series at the configured point."""
    config = ctx.config
    options = config.duhamel
    dim = config.mixture["dim"]
    s = (options["s"]["A"], options["s"]["B"])
    x_s = np.zeros((1, dim)) if options["x"] is None else np.asarray(options["x"], dtype=float)
    flavor = Flavor(options["flavor"])
    realized = realize(config.grad_scaling, config.scaling["n2"])
    separation = realized.max_eps if options["truncate"] else 0.0
    phi = None if options["phi"] is None else velocity_function(options["phi"], s, dim)
    g0, h0 = ctx.densities()

    t = ctx.time(options["t"])
    table = truncated_series(
        TensorizedData(g0, h0, separation),
        x_s,
        s,
        options["n"],
        t,
        realized if flavor is Flavor.BBGKY else config.grad_scaling,
        config.masses,
        flavor=flavor,
        radius=options["radius"],
        delta=options["delta"],
        test_function=phi,
        samples=options["samples"],
        seed=_seeds(config, 1)[0],
        threads=ctx.threads,
    )
    ctx.write_table(table, "duhamel")
    summary = {
        "t": t,
        "flavor": flavor.value,
        "orders": int(options["n"]),
        "partial_sum": float(table["partial_sum"].iloc[-1]),
        "tail": float(table["abs_term"].iloc[-1]),
    }
    ctx.write_json(summary, "summary.json")
    return summary


def default_observables(dim: int, separation: float) -> List[ObservableSpec]:
    """Five test functions of one A- and one B-velocity."""
    s = (1, 1)
    energy_terms = []
    for axis in range(dim):
        powers = np.zeros((2, dim), dtype=int)
        powers[0, axis] = 2
        energy_terms.append((1.0, powers))
    cross = np.zeros((2, dim), dtype=int)
    cross[0, 0] = cross[1, 0] = 1
    return [
        ObservableSpec(s, VelocityPolynomial.constant(s, dim), separation, "density"),
        ObservableSpec(s, VelocityGaussian(s, dim), separation, "gaussian"),
        ObservableSpec(s, VelocityPolynomial(s, dim, energy_terms), separation, "energy-A"),
        ObservableSpec(s, VelocityPolynomial(s, dim, [(1.0, cross)]), separation, "cross"),
        ObservableSpec(s, VelocityBox(s, dim, -1.0, 1.0), separation, "box"),
    ]


def _kinetic_energy(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def _chaos_reference(ctx: RunContext, densities, t: float):
    if ctx.config.chaos["reference"] == "initial":
        return densities
    initial = _initial_pair(_phase_grid(ctx.config), densities)
    if t == 0:
        return initial
    return _solve(ctx, initial, t).final


def chaos_test(ctx: RunContext) -> Dict[str, Any]:
    """Measure propagation of chaos along the configured particle numbers."""
    config = ctx.config
    options = config.chaos
    dim = config.mixture["dim"]
    grid = HistogramGrid(dim, **options["grid"])
    if options["observables"] is None:
        specs = default_observables(dim, grid.space_width)
    else:
        specs = [ObservableSpec.from_dict(item, dim) for item in options["observables"]]
    densities = ctx.densities()
    t = ctx.time(options["t"])
    seeds = _seeds(config, len(options["n2"]) + 1)

    points, rows = [], []
    for n2, seed in zip(options["n2"], seeds[1:]):
        realized = realize(config.grad_scaling, n2)
        ensemble = conditioned_ensemble(*densities, realized, options["ensemble"], seed)
        configurations, pathological = ensemble.configurations, 0
        if t > 0:
            evolved = evolve_ensemble(
                ensemble, t, realized.params(config.masses), config.dynamics["budget"], ctx.threads
            )
            configurations, pathological = evolved.configurations, evolved.pathological
        points.append(ChaosPoint(realized, configurations))
        covariance = species_covariance(configurations, _kinetic_energy, _kinetic_energy)
        rows.append(
            {
                "N1": realized.n1,
                "N2": realized.n2,
                "eps1": realized.eps1,
                "eps2": realized.eps2,
                "t": t,
                "acceptance_rate": ensemble.acceptance_rate,
                "pathological": pathological,
                "covariance": covariance.value,
                "stderr": covariance.stderr,
                "samples": covariance.samples,
            }
        )

    report = chaos_metric(
        points,
        _chaos_reference(ctx, densities, t),
        specs,
        t,
        grid,
        probes=options["probes"],
        permutations=options["permutations"],
        nodes=options["nodes"],
        space_nodes=options["space_nodes"],
        seed=seeds[0],
        threads=ctx.threads,
    )
    ctx.write_table(report.table, "chaos")
    covariances = pd.DataFrame(rows)
    ctx.write_table(covariances, "covariance")

    decreasing = {spec.spec_id: report.is_decreasing(spec.spec_id) for spec in specs}
    summary = {
        "t": t,
        "points": [int(n) for n in options["n2"]],
        "slopes": {
            key: None if np.isnan(value) else float(value) for key, value in report.slopes.items()
        },
        "decreasing": decreasing,
        "decreasing_fraction": float(np.mean(list(decreasing.values()))),
        "covariance_decreasing": bool(
            np.all(np.diff(np.abs(covariances.sort_values("N2")["covariance"])) < 0)
        ),
    }
    ctx.write_json(summary, "summary.json")
    return summary


def pathology_scan(ctx: RunContext) -> Dict[str, Any]:
    """Pathology rates of sampled trajectories for each tolerance window."""
    dyn = ctx.config.dynamics
    params = ctx.params()
    densities = ctx.densities()
    counts = (dyn["counts"]["A"], dyn["counts"]["B"])
    ensemble = sample_ensemble(
        densities,
        params,
        counts,
        default_box(densities),
        dyn["ensemble"],
        _seeds(ctx.config, 1)[0],
    )
    t_end = ctx.time(dyn["t_end"])
    table = pathology_rate(ensemble, params, t_end, dyn["windows"], dyn["budget"])
    ctx.write_table(table, "pathology")
    summary = {
        "t_end": t_end,
        "samples": len(ensemble),
        "rates": dict(zip(map(str, table["window"]), map(float, table["rate"]))),
    }
    ctx.write_json(summary, "summary.json")
    return summary


COMMAND_TABLE: Dict[str, Callable[[RunContext], Dict[str, Any]]] = {
    "simulate": simulate,
    "scaling": scaling,
    "pde-solve": pde_solve,
    "pseudo-compare": pseudo_compare,
    "duhamel": duhamel,
    "chaos-test": chaos_test,
    "pathology-scan": pathology_scan,
}

_COMMAND_TIMES = {
    "simulate": ("dynamics", "t_end"),
    "pathology-scan": ("dynamics", "t_end"),
    "pde-solve": ("pde", "t_end"),
    "pseudo-compare": ("pseudo", "t"),
    "duhamel": ("duhamel", "t"),
    "chaos-test": ("chaos", "t"),
}


def derived_quantities(config: RunConfig) -> Dict[str, Any]:
    """
    Quantities derived from ``config`` without running it: the realized
    scaling, the mean free time, and the horizon of the command against the
    advisory horizon of `HORIZON_MEAN_FREE_TIMES` mean free times.

    Warns
    -----
    `~hardmix.exceptions.HorizonWarning`
        If the command's horizon exceeds the advisory horizon.
    """
    ctx = RunContext(config, directory=".")
    derived: Dict[str, Any] = {"command": config.command, "dim": config.mixture["dim"]}
    try:
        realized = realize(config.grad_scaling, config.scaling["n2"])
        derived.update(N1=realized.n1, N2=realized.n2, eps1=realized.eps1, eps2=realized.eps2)
    except ScalingInfeasibleError as err:
        derived["scaling"] = str(err)
    tau = ctx.mean_free_time()
    derived["mean_free_time"] = tau
    derived["horizon_heuristic"] = HORIZON_MEAN_FREE_TIMES * tau

    if config.command in _COMMAND_TIMES:
        section, key = _COMMAND_TIMES[config.command]
        horizon = ctx.time(getattr(config, section)[key])
        derived["horizon"] = horizon
        if horizon > derived["horizon_heuristic"]:
            message = (
                f"{section}.{key} = {horizon:.4g} exceeds {HORIZON_MEAN_FREE_TIMES} mean "
                f"free times ({derived['horizon_heuristic']:.4g})"
            )
            logger.warning(message)
            warnings.warn(message, HorizonWarning, stacklevel=2)
    return derived
