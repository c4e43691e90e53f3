"""Beam polarization decomposition in the magnetic-field (quantization) frame.

Both beams propagate along z with linear, mutually orthogonal polarizations
in the x-y plane: the probe axis makes an angle phi with x, the pump axis
the same angle with y.  The static field B lies in the x-z plane at an
angle theta from z.  Spherical components are taken about z' || B:

    pi      = E_z'
    sigma+  = -(E_x' + i E_y') / sqrt(2)
    sigma-  = +(E_x' - i E_y') / sqrt(2)

so that |pi|^2 + |sigma+|^2 + |sigma-|^2 = |E|^2 and the two beams stay
orthogonal in the rotated frame for every (phi, theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from zeeman_eit.errors import GeometryError


class BeamRole(Enum):
    PROBE = "probe"
    PUMP = "pump"


@dataclass(frozen=True)
class BeamField:
    """Electric-field magnitude in Rabi-normalized units (MHz)."""

    amplitude: float
    role: BeamRole

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("beam amplitude must be nonnegative")


@dataclass(frozen=True)
class FieldGeometry:
    """Static-field geometry: coil components, derived direction and magnitude.

    theta = atan2(beta_t, beta_l) is the angle of B from the propagation
    axis; phi is the polarization-axis rotation.  Angles in radians.
    """

    beta_l: float
    beta_t: float
    phi: float
    theta: float
    b_mag: float


def geometry_from_fields(beta_l: float, beta_t: float, phi: float) -> FieldGeometry:
    """Build the geometry from longitudinal/transverse coil fields (Gauss)."""
    if beta_l < 0 or beta_t < 0:
        raise GeometryError("coil fields must be nonnegative (first-quadrant geometry)")
    if beta_l == 0 and beta_t == 0:
        raise GeometryError("both field components are zero: quantization axis undefined")
    return FieldGeometry(
        beta_l=beta_l,
        beta_t=beta_t,
        phi=phi,
        theta=math.atan2(beta_t, beta_l),
        b_mag=math.hypot(beta_l, beta_t),
    )


def geometry_from_direction(theta: float, b_mag: float, phi: float) -> FieldGeometry:
    """Build the geometry from a direction theta (radians) and magnitude |B|."""
    if b_mag <= 0:
        raise GeometryError("field magnitude must be positive")
    if not 0 <= theta <= math.pi / 2:
        raise GeometryError("theta must lie in [0, pi/2]")
    return FieldGeometry(
        beta_l=b_mag * math.cos(theta),
        beta_t=b_mag * math.sin(theta),
        phi=phi,
        theta=theta,
        b_mag=b_mag,
    )


@dataclass(frozen=True)
class SphericalComponents:
    """pi / sigma+ / sigma- complex amplitudes of one beam about z' || B."""

    pi: complex
    sigma_plus: complex
    sigma_minus: complex

    @property
    def power(self) -> float:
        return abs(self.pi) ** 2 + abs(self.sigma_plus) ** 2 + abs(self.sigma_minus) ** 2

    def component(self, q: int) -> complex:
        if q == 0:
            return self.pi
        if q == 1:
            return self.sigma_plus
        if q == -1:
            return self.sigma_minus
        raise ValueError(f"polarization index q={q} must be in {{-1, 0, +1}}")


def _spherical_from_cartesian(e_x: float, e_y: float, e_z: float) -> SphericalComponents:
    return SphericalComponents(
        pi=complex(e_z, 0.0),
        sigma_plus=-(e_x + 1j * e_y) / math.sqrt(2),
        sigma_minus=+(e_x - 1j * e_y) / math.sqrt(2),
    )


def decompose_probe(e_p: float, phi: float, theta: float) -> SphericalComponents:
    """Spherical components of the probe beam (polarization at phi from x).

    pi = E_p cos(phi) sin(theta); sigma+- = -+(E_p/sqrt2)(cos(phi)cos(theta) +- i sin(phi)).
    """
    if e_p < 0:
        raise ValueError("probe amplitude must be nonnegative")
    return _spherical_from_cartesian(
        e_x=e_p * math.cos(phi) * math.cos(theta),
        e_y=e_p * math.sin(phi),
        e_z=e_p * math.cos(phi) * math.sin(theta),
    )


def decompose_pump(e_c: float, phi: float, theta: float) -> SphericalComponents:
    """Spherical components of the pump beam (polarization at phi from y).

    The pump polarization unit vector is (-sin(phi), cos(phi), 0), so
    pi = -E_c sin(phi) sin(theta).  This sign keeps the pump orthogonal to
    the probe in the rotated frame; it is unobservable in any |.|^2.
    """
    if e_c < 0:
        raise ValueError("pump amplitude must be nonnegative")
    return _spherical_from_cartesian(
        e_x=-e_c * math.sin(phi) * math.cos(theta),
        e_y=e_c * math.cos(phi),
        e_z=-e_c * math.sin(phi) * math.sin(theta),
    )


def hermitian_overlap(a: SphericalComponents, b: SphericalComponents) -> complex:
    """Hermitian inner product of two decompositions (zero for lin-perp-lin)."""
    return (
        a.pi * b.pi.conjugate()
        + a.sigma_plus * b.sigma_plus.conjugate()
        + a.sigma_minus * b.sigma_minus.conjugate()
    )
