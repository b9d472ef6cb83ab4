"""Reinforced-concrete topology optimization: hybrid continuum/truss designs
with a bimodulus concrete model."""

from ._rcto import (
    Error,
    Problem,
    aci,
    build_problem,
    check_gradients,
    export_bundle,
    load_problem,
    optimize,
    read_bundle,
    validate,
)

__all__ = [
    "Error",
    "Problem",
    "aci",
    "build_problem",
    "check_gradients",
    "density_grid",
    "export_bundle",
    "load_problem",
    "optimize",
    "read_bundle",
    "validate",
]


def density_grid(result, nx, ny):
    """Element densities as an (ny, nx) array with row 0 at the bottom."""
    return result["density"].reshape(nx, ny).T
