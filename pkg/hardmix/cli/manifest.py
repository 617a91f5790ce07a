"""
Run manifests: a ``manifest.yaml`` written next to the artifacts of every run,
echoing the configuration with the seed, the package version, the ``git
describe`` of the source tree, and the wall time.
"""
__all__ = ["MANIFEST_NAME", "ManifestRenderer", "git_describe", "write_manifest"]

import logging
import subprocess

from datetime import datetime, timezone
from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from hardmix import __version__
from hardmix.cli.config import RunConfig
from hardmix.utils import package_dir, templates_dir

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.yaml"


def git_describe(path: Union[str, Path] = package_dir) -> str:
    """``git describe --always --dirty`` of the tree holding ``path``."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=path,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else "unknown"


class ManifestRenderer:
    """
    Render manifest templates.  Templates are looked up in ``search_path``
    first and then in `~hardmix.utils.templates_dir`.
    """

    def __init__(self, search_path: Optional[Iterable[Union[str, Path]]] = None):
        paths = [str(p) for p in (search_path or [])] + [str(templates_dir)]
        self.env = Environment(
            loader=FileSystemLoader(paths),
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )

    def render(self, template_name: str, context: Dict[str, Any]) -> str:
        try:
            template = self.env.get_template(template_name)
        except TemplateNotFound:
            logger.error("manifest template %s not found", template_name)
            raise
        return template.render(context)


def write_manifest(
    directory: Union[str, Path],
    config: RunConfig,
    outputs: Iterable[Union[str, Path]],
    started: datetime,
    wall_time: float,
    threads: int,
    status: str = "ok",
    error: Optional[str] = None,
    renderer: Optional[ManifestRenderer] = None,
) -> Path:
    """Render the manifest of a run into ``directory``."""
    directory = Path(directory)
    names = []
    for output in outputs:
        output = Path(output)
        try:
            names.append(str(output.relative_to(directory)))
        except ValueError:
            names.append(str(output))
    context = {
        "command": config.command,
        "status": status,
        "error": error,
        "seed": config.seed,
        "threads": threads,
        "version": __version__,
        "git": git_describe(),
        "started": started.astimezone(timezone.utc).isoformat(timespec="seconds"),
        "wall_time": wall_time,
        "outputs": names,
        "config_yaml": config.to_yaml(),
    }
    text = (renderer or ManifestRenderer()).render(MANIFEST_NAME, context)
    path = directory / MANIFEST_NAME
    path.write_text(text)
    logger.debug("wrote manifest %s", path)
    return path
