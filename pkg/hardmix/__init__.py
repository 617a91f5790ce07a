"""
`hardmix` is a library and command line tool for two-species hard-sphere
mixtures in the Boltzmann-Grad regime.  It simulates the exact particle
dynamics, evaluates the collision operators of the BBGKY and Boltzmann
hierarchies, solves the Boltzmann system for mixtures, and provides the
statistics needed to test propagation of chaos at desk scale.

.. contents:: Content
   :local:

Installation
------------

`hardmix` is installed from its source tree with ``pip``.

.. code-block:: bash

    pip install .

or, for development with the testing tools,

.. code-block:: bash

    pip install -e .[tests]

Command Line
------------

All experiments are driven from a single YAML configuration file.

.. code-block:: bash

    hardmix run config.yaml
    hardmix validate config.yaml

The Rundown
-----------

`hardmix.mixture`
~~~~~~~~~~~~~~~~~

   Species algebra, phase-space configurations, the mass-weighted collision
   law, the impact operator, and the conserved quantities.

`hardmix.dynamics`
~~~~~~~~~~~~~~~~~~

   The event-driven flow of the mixture: contact times, the event queue,
   pathology detection, forward and backward evolution, and rejection
   sampling onto the phase space.

`hardmix.scaling`
~~~~~~~~~~~~~~~~~

   Boltzmann-Grad parameter algebra: particle numbers and diameters from the
   limit constants, kernel constants, and BBGKY prefactors.

`hardmix.kinetic`
~~~~~~~~~~~~~~~~~

   Sphere and velocity quadratures, the bilinear collision kernels, the
   hierarchy collision operators, and the mild-solution solver for the
   Boltzmann system for mixtures.

`hardmix.hierarchy`
~~~~~~~~~~~~~~~~~~~

   Collision histories, separated time simplices, Boltzmann and BBGKY
   pseudo-trajectories, recollision detection, and Monte Carlo evaluation of
   Duhamel iterates.

`hardmix.chaos`
~~~~~~~~~~~~~~~

   Histogram estimates of mixed marginals, observables, good-configuration
   checks, and propagation-of-chaos diagnostics.

`hardmix.cli`
~~~~~~~~~~~~~

   Run configuration, the experiment runners, and the ``hardmix`` entry
   point.
"""
__all__ = ["__version__"]

# hardmix relies on importlib.metadata, new in Python 3.8
import sys

if sys.version_info < (3, 8):  # coverage: ignore
    raise ImportError("hardmix does not support Python < 3.8")

from importlib.metadata import version, PackageNotFoundError

from hardmix import (
    chaos,
    dynamics,
    exceptions,
    hierarchy,
    kinetic,
    mixture,
    scaling,
    utils,
)

# define version
try:
    #: `hardmix` version string, from the installed distribution metadata
    __version__ = version("hardmix")
except PackageNotFoundError:
    # package is not installed
    fallback_version = "unknown"
    try:
        # code most likely being used from source
        # if setuptools_scm is installed then generate a version
        from setuptools_scm import get_version

        __version__ = get_version(
            root="..", relative_to=__file__, fallback_version=fallback_version
        )
        del get_version
        warn_add = "setuptools_scm failed to detect the version"
    except ModuleNotFoundError:
        # setuptools_scm is not installed
        __version__ = fallback_version
        warn_add = "setuptools_scm is not installed"

    if __version__ == fallback_version:
        from warnings import warn

        warn(
            f"hardmix.__version__ not generated (set to 'unknown'), "
            f"hardmix is not an installed package and {warn_add}.",
            RuntimeWarning,
        )

        del warn
    del fallback_version, warn_add

del sys
