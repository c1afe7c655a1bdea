"""Numerical period maps, Beltrami deformations and Hodge-bundle sections on flat tori."""
from .errors import HodgeLabError
from .extension import ExtensionProblem, ExtensionSolution, cohomology_class, solve_extension
from .hodge_algebra import BlockMatrix, BlockPartition, HodgeFrame, HodgeType, Polarization, block_lu, in_unipotent_orbit
from .period_lab import BeltramiFamily, compare_sections, oracle_period, orbit_scan, preset
from .torus import BeltramiDifferential, FourierForm, GradedForm, TorusGeometry

__all__ = [
    "BeltramiDifferential",
    "BeltramiFamily",
    "BlockMatrix",
    "BlockPartition",
    "ExtensionProblem",
    "ExtensionSolution",
    "FourierForm",
    "GradedForm",
    "HodgeFrame",
    "HodgeLabError",
    "HodgeType",
    "Polarization",
    "TorusGeometry",
    "block_lu",
    "cohomology_class",
    "compare_sections",
    "in_unipotent_orbit",
    "oracle_period",
    "orbit_scan",
    "preset",
    "solve_extension",
]
