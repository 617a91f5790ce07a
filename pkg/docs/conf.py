#!/usr/bin/env python3
#
# hardmix documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys

from datetime import datetime
from packaging.version import Version

sys.path.insert(0, os.path.abspath(".."))
sys.path.insert(0, os.path.abspath("."))

from hardmix import __version__ as release

if False:
    # for annotation, does not need real import
    from sphinx.application import Sphinx

# -- General configuration ------------------------------------------------
autosummary_generate = True
automodapi_group_order = (
    "modules",
    "classes",
    "exceptions",
    "warnings",
    "functions",
    "variables",
)

# If your documentation needs a minimal Sphinx version, state it here.

needs_sphinx = "4.4"

extensions = [
    # plasmapy_sphinx provides the theme and the automodapi directives
    "plasmapy_sphinx.theme",
    "plasmapy_sphinx.ext.autodoc",
    "plasmapy_sphinx.ext.directives",
    # other 3rd party extensions
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx_copybutton",
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pandas": ("https://pandas.pydata.org/pandas-docs/stable/", None),
    "pytest": ("https://docs.pytest.org/en/stable/", None),
}

autoclass_content = "both"
autodoc_typehints_format = "short"

# Add any paths that contain templates here, relative to this directory.
templates_path = ["_templates"]

source_suffix = ".rst"

# The root toctree document.
root_doc = "index"

# General information about the project.
project = "hardmix"
author = "hardmix developers"
copyright = f"2026–{datetime.utcnow().year}, {author}"

# The full version, including alpha/beta/rc tags.
#  Note: If hardmix.__version__ can not be defined then it is set to 'unknown'.
#        However, release needs to be a semantic style version number, so set
#        the 'unknown' case to ''.
release = "" if release == "unknown" else release
revision = ""
if release != "":
    pv = Version(release)
    release = pv.public
    revision = "" if pv.local is None else pv.local[1:]
version = ".".join(release.split(".")[:2])  # short X.Y version

# This is added to the end of RST files; substitutions used globally live there.
rst_epilog = ""
with open("common_links.rst") as cl:
    rst_epilog += cl.read()

language = "en"

exclude_patterns = [
    "_build",
    "Thumbs.db",
    ".DS_Store",
    "common_links.rst",
]

default_role = "py:obj"

pygments_style = "default"

python_role = "py:.*"

nitpick_ignore_regex = [
    (python_role, "and"),
    (python_role, "array .*"),
    (python_role, "array_like"),
    (python_role, "callable"),
    (python_role, ".*integer.*"),
    (python_role, "iterable"),
    (python_role, "optional"),
    (python_role, "or"),
    (python_role, "path-like"),
    (python_role, ".*real number.*"),
    (python_role, "shape.*"),
]

# -- Options for HTML output ----------------------------------------------

html_theme = "plasmapy_theme"
html_theme_options = {
    "logo_only": False,
}

modindex_common_prefix = ["hardmix."]

htmlhelp_basename = "hardmixdoc"

latex_documents = [
    (root_doc, "hardmix.tex", "hardmix Documentation", author, "manual")
]

man_pages = [(root_doc, "hardmix", "hardmix Documentation", [author], 1)]


def setup(app: "Sphinx") -> None:
    app.add_config_value("revision", "", True)
