"""Numerics for G2 calibrations, associative planes and flat-torus Seiberg-Witten theory."""
from .calibration import G2Structure, associator_defect, chi, cross, phi0, phi_value
from .exterior import KForm, hodge, interior, pullback, wedge
from .grassmann import (
    ConvergenceError,
    OrientedPlane3,
    chi_defect,
    dchi_rank,
    project_to_associative,
    random_plane,
)
from .quat_oct import Splitting, build_splitting, omul, qmul
from .spin_reps import Spin4Element, SpinC4Element, embed_so4_g2, g2_lie_algebra, rep, sigma

__all__ = [
    "G2Structure", "associator_defect", "chi", "cross", "phi0", "phi_value",
    "KForm", "hodge", "interior", "pullback", "wedge",
    "ConvergenceError", "OrientedPlane3", "chi_defect", "dchi_rank",
    "project_to_associative", "random_plane",
    "Splitting", "build_splitting", "omul", "qmul",
    "Spin4Element", "SpinC4Element", "embed_so4_g2", "g2_lie_algebra", "rep", "sigma",
]
