"""Python front end for the aao core: experiment runs and spectral helpers."""

import json

from . import _core
from ._core import (
    NumericalError,
    bh_cubic_roots,
    bh_discrete_spectrum,
    is_discrete_spectrum,
    is_eigenvalue_pair,
    spectral_eigenvalues,
)

COMMANDS = ("spectrum", "reconstruct", "link-check", "spc")


def default_config():
    return json.loads(_core.default_config())


def run(command, **config):
    """Run one experiment; keyword arguments override config keys.

    Returns {"outputs": [...], "results": {...}} and writes output_dir/manifest.json.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}, expected one of {COMMANDS}")
    return json.loads(_core.run(command, json.dumps(config)))


__all__ = [
    "COMMANDS",
    "NumericalError",
    "bh_cubic_roots",
    "bh_discrete_spectrum",
    "default_config",
    "is_discrete_spectrum",
    "is_eigenvalue_pair",
    "run",
    "spectral_eigenvalues",
]
