"""Rb-87 D2 sublevel structure: the 13-level scheme, dipole couplings, Zeeman shifts.

The model space is the lin-perp-lin Lambda system built from the two
5S1/2 ground hyperfine manifolds F=1 (3 sublevels) and F=2 (5 sublevels)
plus the 5P3/2 excited manifold F'=2 (5 sublevels).  All energies are
expressed in MHz so hbar never appears explicitly; magnetic shifts are
linear (low-field) Zeeman only.

Dipole amplitudes are reduced-matrix-element-normalized: the F' -> F
reduced element is set to 1 and absolute strengths are absorbed into the
Rabi-frequency scale of the driving beams.  Only ratios of dipole
elements enter the observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction


class Manifold(Enum):
    GROUND_F1 = "ground_F1"
    GROUND_F2 = "ground_F2"
    EXCITED_F2 = "excited_F2"


# Total angular momentum per manifold.
MANIFOLD_F = {
    Manifold.GROUND_F1: 1,
    Manifold.GROUND_F2: 2,
    Manifold.EXCITED_F2: 2,
}

# Lande factors g_F ~ g_J * (F(F+1) + J(J+1) - I(I+1)) / (2 F(F+1)) with
# I = 3/2, g_J(5S1/2) ~ 2, g_J(5P3/2) ~ 4/3.  The ground values are what
# give the uniform 0.6998 MHz/Gauss two-photon peak grid.
MANIFOLD_G_F = {
    Manifold.GROUND_F1: -0.5,
    Manifold.GROUND_F2: +0.5,
    Manifold.EXCITED_F2: 2.0 / 3.0,
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in the MHz / Gauss unit system.

    mu_B: magnetic moment per field (MHz/Gauss); mu_B/2 = 0.6998 MHz/G is
    the slope of the consecutive EIT peak spacing versus |B|.
    Gamma: natural linewidth of the D2 excited state (MHz).
    epsilon0_scale: susceptibility normalization, folded into the overall
    number-density scale.
    """

    mu_B: float = 1.3996
    Gamma: float = 6.066
    hbar_convention: str = "all energies in MHz; hbar = 1"
    epsilon0_scale: float = 1.0

    def __post_init__(self):
        if self.mu_B <= 0 or self.Gamma <= 0 or self.epsilon0_scale <= 0:
            raise ValueError("physical constants must be strictly positive")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class QuantumLevel:
    """One Zeeman sublevel, identified by (manifold, m_F)."""

    manifold: Manifold
    F: int
    m_F: int
    g_F: float

    def __post_init__(self):
        if self.F != MANIFOLD_F[self.manifold]:
            raise ValueError(f"manifold {self.manifold} requires F={MANIFOLD_F[self.manifold]}")
        if abs(self.m_F) > self.F:
            raise ValueError(f"|m_F|={abs(self.m_F)} exceeds F={self.F}")
        if self.g_F != MANIFOLD_G_F[self.manifold]:
            raise ValueError(f"manifold {self.manifold} requires g_F={MANIFOLD_G_F[self.manifold]}")

    @property
    def is_excited(self) -> bool:
        return self.manifold is Manifold.EXCITED_F2

    @property
    def is_ground(self) -> bool:
        return not self.is_excited


def make_level(manifold: Manifold, m_F: int) -> QuantumLevel:
    return QuantumLevel(manifold, MANIFOLD_F[manifold], m_F, MANIFOLD_G_F[manifold])


@dataclass(frozen=True)
class LevelScheme:
    """The 13 sublevels in canonical order with a (manifold, m_F) index map.

    Order: F=1 m=-1..+1, F=2 m=-2..+2, F'=2 m=-2..+2.
    """

    levels: tuple
    index: dict

    def __post_init__(self):
        if len(self.levels) != 13:
            raise ValueError("level scheme must contain exactly 13 levels")
        if len(self.index) != 13:
            raise ValueError("index map must be a bijection over the 13 levels")

    def index_of(self, manifold: Manifold, m_F: int) -> int:
        return self.index[(manifold, m_F)]

    @property
    def f1_indices(self) -> tuple:
        return tuple(i for i, lv in enumerate(self.levels) if lv.manifold is Manifold.GROUND_F1)

    @property
    def f2_indices(self) -> tuple:
        return tuple(i for i, lv in enumerate(self.levels) if lv.manifold is Manifold.GROUND_F2)

    @property
    def ground_indices(self) -> tuple:
        return tuple(i for i, lv in enumerate(self.levels) if lv.is_ground)

    @property
    def excited_indices(self) -> tuple:
        return tuple(i for i, lv in enumerate(self.levels) if lv.is_excited)


def build_level_scheme() -> LevelScheme:
    """Construct the 13-level scheme in canonical order."""
    levels = []
    for manifold in (Manifold.GROUND_F1, Manifold.GROUND_F2, Manifold.EXCITED_F2):
        f = MANIFOLD_F[manifold]
        for m in range(-f, f + 1):
            levels.append(make_level(manifold, m))
    index = {(lv.manifold, lv.m_F): i for i, lv in enumerate(levels)}
    return LevelScheme(tuple(levels), index)


def _twice(x) -> int:
    """Return 2x as an int, rejecting non-half-integer input."""
    doubled = 2 * x
    rounded = round(doubled)
    if abs(doubled - rounded) > 1e-9:
        raise ValueError(f"{x} is not a half-integer")
    return int(rounded)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol via the Racah factorial sum in exact rationals.

    Arguments may be integers or half-integers.  Returns exactly 0.0 when
    m1+m2+m3 != 0 or the triangle inequality fails.  The sum is carried in
    Fraction arithmetic and converted to float through a single square
    root, so small-j values are accurate to machine precision.
    """
    tj = [_twice(j) for j in (j1, j2, j3)]
    tm = [_twice(m) for m in (m1, m2, m3)]
    for j, m in zip(tj, tm):
        if j < 0:
            raise ValueError("angular momenta must be nonnegative")
        if (j + m) % 2 != 0:
            raise ValueError("m must differ from j by an integer")
        if abs(m) > j:
            raise ValueError("|m| may not exceed j")

    if sum(tm) != 0:
        return 0.0
    if tj[2] > tj[0] + tj[1] or tj[2] < abs(tj[0] - tj[1]):
        return 0.0
    if (tj[0] + tj[1] + tj[2]) % 2 != 0:
        return 0.0

    def fact(two_n: int) -> int:
        # arguments are guaranteed even (true integers) at this point
        return math.factorial(two_n // 2)

    t1, t2, t3 = tj
    u1, u2, u3 = tm

    k_min = max(0, (t2 - t3 - u1) // 2, (t1 - t3 + u2) // 2)
    k_max = min((t1 + t2 - t3) // 2, (t1 - u1) // 2, (t2 + u2) // 2)
    if k_max < k_min:
        return 0.0

    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = (
            math.factorial(k)
            * fact(t1 + t2 - t3 - 2 * k)
            * fact(t1 - u1 - 2 * k)
            * fact(t2 + u2 - 2 * k)
            * fact(t3 - t2 + u1 + 2 * k)
            * fact(t3 - t1 - u2 + 2 * k)
        )
        total += Fraction((-1) ** k, denom)
    if total == 0:
        return 0.0

    radicand = Fraction(
        fact(t1 + t2 - t3) * fact(t1 - t2 + t3) * fact(-t1 + t2 + t3),
        fact(t1 + t2 + t3 + 2),
    )
    radicand *= (
        fact(t1 + u1) * fact(t1 - u1)
        * fact(t2 + u2) * fact(t2 - u2)
        * fact(t3 + u3) * fact(t3 - u3)
    )

    phase = -1 if ((t1 - t2 - u3) // 2) % 2 else 1
    sign = phase * (1 if total > 0 else -1)
    value_sq = total * total * radicand
    return sign * math.sqrt(value_sq.numerator / value_sq.denominator)


def dipole_element(e: QuantumLevel, g: QuantumLevel, q: int) -> float:
    """Dipole amplitude <e|d_q|g> with the reduced element normalized to 1.

    Returns (-1)^(F_e - 1 + m_g) * 3j(F_e, 1, F_g; -m_e, q, m_g); zero
    exactly unless m_e = m_g + q.
    """
    if q not in (-1, 0, 1):
        raise ValueError(f"polarization index q={q} must be in {{-1, 0, +1}}")
    if not e.is_excited:
        raise ValueError("first argument must be an excited level")
    if not g.is_ground:
        raise ValueError("second argument must be a ground level")
    if e.m_F != g.m_F + q:
        return 0.0
    phase = -1 if (e.F - 1 + g.m_F) % 2 else 1
    return phase * wigner3j(e.F, 1, g.F, -e.m_F, q, g.m_F)


@dataclass(frozen=True)
class DipoleTable:
    """All nonzero couplings (excited index, ground index) -> amplitude, with q."""

    entries: dict
    q: dict

    def amplitude(self, e_idx: int, g_idx: int) -> float:
        return self.entries.get((e_idx, g_idx), 0.0)


def build_dipole_table(scheme: LevelScheme) -> DipoleTable:
    """Tabulate every dipole-allowed (excited, ground) pair of the scheme."""
    entries = {}
    qmap = {}
    for e_idx in scheme.excited_indices:
        e = scheme.levels[e_idx]
        for g_idx in scheme.ground_indices:
            g = scheme.levels[g_idx]
            q = e.m_F - g.m_F
            if q not in (-1, 0, 1):
                continue
            amp = dipole_element(e, g, q)
            if amp != 0.0:
                entries[(e_idx, g_idx)] = amp
                qmap[(e_idx, g_idx)] = q
    return DipoleTable(entries, qmap)


def zeeman_shift(level: QuantumLevel, b_gauss: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Linear Zeeman shift mu_B * g_F * m_F * B in MHz."""
    if b_gauss < 0:
        raise ValueError("field magnitude must be nonnegative")
    return constants.mu_B * level.g_F * level.m_F * b_gauss
