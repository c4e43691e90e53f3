"""EIT vector-magnetometry toolkit for the Rb-87 D2 line.

Forward-simulates probe-transmission spectra of a lin-perp-lin pump/probe
Lambda system in an arbitrary static magnetic field (full 13-sublevel
master equation plus a closed-form 9-level analytic model) and inverts
measured or simulated spectra to recover the field magnitude and direction.
"""

from zeeman_eit.atomic_structure import (
    PhysicalConstants,
    build_dipole_table,
    build_level_scheme,
    dipole_element,
    wigner3j,
    zeeman_shift,
)
from zeeman_eit.field_geometry import (
    FieldGeometry,
    SphericalComponents,
    decompose_probe,
    decompose_pump,
    geometry_from_fields,
)

__version__ = "0.1.0"

__all__ = [
    "PhysicalConstants",
    "FieldGeometry",
    "SphericalComponents",
    "build_dipole_table",
    "build_level_scheme",
    "decompose_probe",
    "decompose_pump",
    "dipole_element",
    "geometry_from_fields",
    "wigner3j",
    "zeeman_shift",
    "__version__",
]
