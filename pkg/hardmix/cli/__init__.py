"""
The `hardmix.cli` sub-package holds the run configuration, the experiment
runners, and the ``hardmix`` entry point.  Runs are driven by one YAML file;
see `hardmix.cli.config` for its fields.
"""
__all__ = ["RunConfig", "RunContext", "derived_quantities", "load_config", "write_manifest"]

from hardmix.cli import commands, config, manifest
from hardmix.cli.commands import RunContext, derived_quantities
from hardmix.cli.config import RunConfig, load_config
from hardmix.cli.manifest import write_manifest
