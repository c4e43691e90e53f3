"""Steady state of the 13-level master equation and the probe susceptibility.

The density matrix obeys

    drho/dt = -i[H, rho] - (1/2){R, rho} + Lambda_A(rho) + Lambda_gamma

with H the RWA Hamiltonian (probe on F=1 -> F'=2, pump on F=2 -> F'=2,
Zeeman shifts on the diagonal), R the depopulation matrix (natural decay
plus transit relaxation), Lambda_A the optical repopulation routed by
squared dipole elements, and Lambda_gamma the transit refresh feeding the
eight ground sublevels equally.  Flattening rho row-major gives 169
coupled linear equations; one is replaced by the trace constraint and the
dense system is solved directly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from zeeman_eit.atomic_structure import (
    DEFAULT_CONSTANTS,
    DipoleTable,
    LevelScheme,
    Manifold,
    PhysicalConstants,
    build_dipole_table,
    build_level_scheme,
    zeeman_shift,
)
from zeeman_eit.errors import NumericalFailure
from zeeman_eit.field_geometry import (
    FieldGeometry,
    SphericalComponents,
    decompose_probe,
    decompose_pump,
)
from zeeman_eit.spectra import Spectrum

N_LEVELS = 13
N_EQUATIONS = N_LEVELS * N_LEVELS

# Saturation intensity used to convert beam intensity to a total Rabi scale.
I_SAT_MW_CM2 = 1.669

# Defaults: the paper quotes only the ground-state decoherence (~30 kHz);
# the transit rate is an exposed knob.
DEFAULT_GAMMA_TRANSIT = 0.010
DEFAULT_GAMMA_GROUND = 0.030

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-8
RESIDUAL_TOL = 1e-9


def intensity_to_rabi(intensity_mw_cm2: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Total Rabi scale Omega = Gamma * sqrt(I / (2 I_sat)) in MHz."""
    if intensity_mw_cm2 < 0:
        raise ValueError("intensity must be nonnegative")
    return constants.Gamma * math.sqrt(intensity_mw_cm2 / (2.0 * I_SAT_MW_CM2))


@dataclass(frozen=True)
class DensityMatrix:
    """13x13 Hermitian, unit-trace steady-state solution."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=complex))
        if self.rho.shape != (N_LEVELS, N_LEVELS):
            raise ValueError("density matrix must be 13x13")

    @property
    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    @property
    def trace_error(self) -> float:
        return float(abs(np.trace(self.rho) - 1.0))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())

    def population(self, idx: int) -> float:
        return float(self.rho[idx, idx].real)


@dataclass(frozen=True)
class RWAHamiltonian:
    """Rotating-frame Hamiltonian (MHz) with the detunings it was built at."""

    H: np.ndarray
    detuning_probe: float
    detuning_pump: float

    def __post_init__(self):
        object.__setattr__(self, "H", np.asarray(self.H, dtype=complex))
        if self.H.shape != (N_LEVELS, N_LEVELS):
            raise ValueError("Hamiltonian must be 13x13")


@dataclass(frozen=True)
class RelaxationModel:
    """Depopulation rates and repopulation operators of the master equation."""

    Gamma: float
    gamma_transit: float
    gamma_ground: float
    R: np.ndarray               # diagonal depopulation rates, length 13
    Lambda_A: np.ndarray        # branching[g, e]: excited -> ground feed rates
    Lambda_gamma: np.ndarray    # constant population injection, length 13

    def __post_init__(self):
        if np.any(np.asarray(self.R) < 0):
            raise ValueError("depopulation rates must be nonnegative")


@dataclass(frozen=True)
class RabiSet:
    """Complex Rabi frequency per dipole-allowed transition (MHz)."""

    couplings: dict  # (e_idx, g_idx) -> complex


def build_rabi_set(
    scheme: LevelScheme,
    dipoles: DipoleTable,
    probe: SphericalComponents,
    pump: SphericalComponents,
) -> RabiSet:
    """Attach each beam's spherical component to its dipole-allowed transitions."""
    couplings = {}
    f1 = set(scheme.f1_indices)
    for (e_idx, g_idx), amp in dipoles.entries.items():
        q = dipoles.q[(e_idx, g_idx)]
        beam = probe if g_idx in f1 else pump
        omega = beam.component(q) * amp
        if omega != 0:
            couplings[(e_idx, g_idx)] = omega
    return RabiSet(couplings)


def build_hamiltonian(
    scheme: LevelScheme,
    probe: SphericalComponents,
    pump: SphericalComponents,
    dipoles: DipoleTable,
    delta_p: float,
    delta_c: float,
    b_gauss: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> RWAHamiltonian:
    """Assemble the rotating-frame Hamiltonian at one probe/pump detuning.

    Diagonal: F=1 grounds carry their Zeeman shift; excited levels carry
    zeeman - delta_p; F=2 grounds carry zeeman - delta_p + delta_c, so a
    two-photon resonance sits at delta_p = delta_c + (ground Zeeman
    difference).  Off-diagonal: -Omega/2 on each dipole-allowed pair.
    """
    if not (math.isfinite(delta_p) and math.isfinite(delta_c)):
        raise ValueError("detunings must be finite")
    if b_gauss < 0:
        raise ValueError("field magnitude must be nonnegative")

    H = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    for i, level in enumerate(scheme.levels):
        shift = zeeman_shift(level, b_gauss, constants)
        if level.manifold is Manifold.GROUND_F1:
            H[i, i] = shift
        elif level.manifold is Manifold.GROUND_F2:
            H[i, i] = shift - delta_p + delta_c
        else:
            H[i, i] = shift - delta_p

    rabi = build_rabi_set(scheme, dipoles, probe, pump)
    for (e_idx, g_idx), omega in rabi.couplings.items():
        H[e_idx, g_idx] = -0.5 * omega
        H[g_idx, e_idx] = np.conj(H[e_idx, g_idx])

    residual = float(np.max(np.abs(H - H.conj().T)))
    if residual > 1e-12:
        raise NumericalFailure("Hamiltonian assembly lost hermiticity",
                               diagnostics={"residual": residual})
    return RWAHamiltonian(H, detuning_probe=delta_p, detuning_pump=delta_c)


def build_relaxation(
    scheme: LevelScheme,
    dipoles: DipoleTable,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    gamma_transit: float = DEFAULT_GAMMA_TRANSIT,
    gamma_ground: float = DEFAULT_GAMMA_GROUND,
) -> RelaxationModel:
    """Build depopulation and repopulation operators.

    Excited levels decay at Gamma (+ transit); each excited level's
    population branches to ground sublevels proportionally to the squared
    dipole elements, normalized so the total branching is Gamma.  Transit
    refresh injects population equally into the 8 ground sublevels.
    """
    if gamma_transit < 0 or gamma_ground < 0:
        raise ValueError("relaxation rates must be nonnegative")

    R = np.zeros(N_LEVELS)
    for i in scheme.excited_indices:
        R[i] = constants.Gamma + gamma_transit
    for i in scheme.ground_indices:
        R[i] = gamma_transit

    branching = np.zeros((N_LEVELS, N_LEVELS))
    for e_idx in scheme.excited_indices:
        weights = np.zeros(N_LEVELS)
        for g_idx in scheme.ground_indices:
            weights[g_idx] = dipoles.amplitude(e_idx, g_idx) ** 2
        total = weights.sum()
        branching[:, e_idx] = constants.Gamma * weights / total

    injection = np.zeros(N_LEVELS)
    n_ground = len(scheme.ground_indices)
    for g_idx in scheme.ground_indices:
        injection[g_idx] = gamma_transit / n_ground

    return RelaxationModel(
        Gamma=constants.Gamma,
        gamma_transit=gamma_transit,
        gamma_ground=gamma_ground,
        R=R,
        Lambda_A=branching,
        Lambda_gamma=injection,
    )


def _build_generator(H: np.ndarray, relax: RelaxationModel, scheme: LevelScheme):
    """Row-major superoperator L and constant term c with d(vec rho)/dt = L x + c."""
    eye = np.eye(N_LEVELS)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    R = np.diag(relax.R)
    L -= 0.5 * (np.kron(R, eye) + np.kron(eye, R))

    # optical repopulation: rho_gg gains branching[g, e] * rho_ee
    for g_idx in scheme.ground_indices:
        row = g_idx * N_LEVELS + g_idx
        for e_idx in scheme.excited_indices:
            L[row, e_idx * N_LEVELS + e_idx] += relax.Lambda_A[g_idx, e_idx]

    # extra pure dephasing of ground-state coherences
    ground = set(scheme.ground_indices)
    if relax.gamma_ground > 0:
        for i in ground:
            for j in ground:
                if i != j:
                    k = i * N_LEVELS + j
                    L[k, k] -= relax.gamma_ground

    c = np.zeros(N_EQUATIONS, dtype=complex)
    for g_idx in scheme.ground_indices:
        c[g_idx * N_LEVELS + g_idx] = relax.Lambda_gamma[g_idx]
    return L, c


def steady_state(H: RWAHamiltonian, relax: RelaxationModel,
                 scheme: LevelScheme | None = None) -> DensityMatrix:
    """Solve 0 = L rho + Lambda_gamma with one row traded for Tr rho = 1."""
    if scheme is None:
        scheme = build_level_scheme()
    L, c = _build_generator(H.H, relax, scheme)

    A = L.copy()
    b = -c
    # replace the d rho_00/dt equation with the trace constraint
    A[0, :] = 0.0
    for i in range(N_LEVELS):
        A[0, i * N_LEVELS + i] = 1.0
    b[0] = 1.0

    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            "singular Liouvillian",
            diagnostics={"condition": float(np.linalg.cond(A))},
        ) from exc

    residual = float(np.max(np.abs(A @ x - b)))
    if residual > RESIDUAL_TOL or not np.all(np.isfinite(x)):
        raise NumericalFailure(
            "steady-state solve exceeded residual tolerance",
            diagnostics={"residual": residual, "condition": float(np.linalg.cond(A))},
        )

    rho = x.reshape(N_LEVELS, N_LEVELS)
    state = DensityMatrix(rho)
    generator_residual = float(np.abs(np.trace((L @ x + c).reshape(N_LEVELS, N_LEVELS))))
    if state.trace_error > TRACE_TOL or generator_residual > 10 * RESIDUAL_TOL:
        raise NumericalFailure(
            "steady state violates trace preservation",
            diagnostics={"trace_error": state.trace_error,
                         "generator_trace": generator_residual},
        )
    return state


def susceptibility(
    rho: DensityMatrix,
    dipoles: DipoleTable,
    probe: SphericalComponents,
    scheme: LevelScheme | None = None,
    n0_scale: float = 1.0,
) -> complex:
    """Probe susceptibility: optical coherences projected on the probe mode.

    chi = n0 * sum_{e,g in F=1} conj(E_p^q) mu_eg rho_eg / |E_p|^2, which
    weights each coherence by the component that drives it and keeps
    Im chi >= 0 for absorption.  chi is independent of the probe amplitude
    in the linear-response regime.
    """
    if scheme is None:
        scheme = build_level_scheme()
    power = probe.power
    if power == 0:
        raise ValueError("probe amplitude is zero: susceptibility undefined")
    total = 0.0 + 0.0j
    f1 = set(scheme.f1_indices)
    for (e_idx, g_idx), amp in dipoles.entries.items():
        if g_idx not in f1:
            continue
        q = dipoles.q[(e_idx, g_idx)]
        weight = np.conj(probe.component(q))
        if weight != 0:
            total += weight * amp * rho.rho[e_idx, g_idx]
    return n0_scale * total / power


@dataclass(frozen=True)
class SusceptibilitySample:
    delta_p: float
    chi: complex

    @property
    def absorption(self) -> float:
        return self.chi.imag

    def __post_init__(self):
        if not (math.isfinite(self.chi.real) and math.isfinite(self.chi.imag)):
            raise ValueError("susceptibility must be finite")


@dataclass(frozen=True)
class SimulationParams:
    """Everything the full-solver scan depends on.

    probe_rabi / pump_rabi are the total Rabi scales (MHz) applied to the
    beam amplitudes before the per-transition component and dipole
    factors.  optical_depth sets the Beer-Lambert conversion
    T = exp(-alpha * Im chi / max Im chi); ln 2 makes the strongest
    absorption point transmit 0.5.
    """

    geometry: FieldGeometry
    probe_rabi: float
    pump_rabi: float
    delta_c: float = 0.0
    gamma_transit: float = DEFAULT_GAMMA_TRANSIT
    gamma_ground: float = DEFAULT_GAMMA_GROUND
    n0_scale: float = 1.0
    optical_depth: float = math.log(2.0)
    doppler_average: bool = False
    doppler_fwhm: float = 512.0
    doppler_points: int = 21
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.probe_rabi < 0 or self.pump_rabi < 0:
            raise ValueError("Rabi scales must be nonnegative")
        if self.doppler_points < 1 or self.doppler_fwhm <= 0:
            raise ValueError("invalid Doppler grid")


def resolve_threads(requested: int | None = None) -> int:
    """Worker count for scan parallelism, capped by ZEEMAN_EIT_THREADS."""
    cap = os.environ.get("ZEEMAN_EIT_THREADS")
    limit = max(1, int(cap)) if cap else (os.cpu_count() or 1)
    if requested is None:
        return limit
    return max(1, min(requested, limit))


def _velocity_grid(params: SimulationParams):
    """Gauss-Hermite nodes/weights over the Doppler Gaussian (kv in MHz)."""
    if not params.doppler_average:
        return np.array([0.0]), np.array([1.0])
    nodes, weights = np.polynomial.hermite.hermgauss(params.doppler_points)
    sigma = params.doppler_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return nodes * sigma * math.sqrt(2.0), weights / math.sqrt(math.pi)


def solve_detuning(params: SimulationParams, delta_p: float,
                   scheme: LevelScheme | None = None,
                   dipoles: DipoleTable | None = None,
                   relax: RelaxationModel | None = None) -> SusceptibilitySample:
    """Steady-state susceptibility at a single probe detuning."""
    if scheme is None:
        scheme = build_level_scheme()
    if dipoles is None:
        dipoles = build_dipole_table(scheme)
    if relax is None:
        relax = build_relaxation(scheme, dipoles, params.constants,
                                 params.gamma_transit, params.gamma_ground)
    geom = params.geometry
    probe = decompose_probe(params.probe_rabi, geom.phi, geom.theta)
    pump = decompose_pump(params.pump_rabi, geom.phi, geom.theta)

    if params.probe_rabi == 0:
        return SusceptibilitySample(delta_p=delta_p, chi=0j)

    nodes, weights = _velocity_grid(params)
    chi = 0j
    for kv, w in zip(nodes, weights):
        # copropagating beams: both detunings shift by the same kv, so the
        # two-photon condition is Doppler-free
        H = build_hamiltonian(scheme, probe, pump, dipoles,
                              delta_p + kv, params.delta_c + kv,
                              geom.b_mag, params.constants)
        rho = steady_state(H, relax, scheme)
        chi += w * susceptibility(rho, dipoles, probe, scheme, params.n0_scale)
    return SusceptibilitySample(delta_p=delta_p, chi=chi)


def probe_scan(params: SimulationParams, grid, threads: int | None = None) -> Spectrum:
    """Scan the probe over a detuning grid (pump fixed at params.delta_c).

    Grid points are independent pure solves; they may run on a thread
    pool (capped by ZEEMAN_EIT_THREADS) with deterministic ordered
    assembly.  Individual failures are re-raised tagged with the
    offending detuning.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("detuning grid is empty")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("detuning grid must be sorted strictly increasing")

    scheme = build_level_scheme()
    dipoles = build_dipole_table(scheme)
    relax = build_relaxation(scheme, dipoles, params.constants,
                             params.gamma_transit, params.gamma_ground)

    def solve_one(delta_p: float):
        try:
            return solve_detuning(params, delta_p, scheme, dipoles, relax)
        except NumericalFailure as exc:
            raise NumericalFailure(
                f"scan failed at delta_p = {delta_p:.6g} MHz: {exc}",
                diagnostics={"delta_p": delta_p, **exc.diagnostics},
            ) from exc

    n_workers = resolve_threads(threads)
    if n_workers > 1 and grid.size > 8:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            samples = list(pool.map(solve_one, grid))
    else:
        samples = [solve_one(d) for d in grid]

    absorption = np.array([s.absorption for s in samples])
    scale = float(np.max(np.abs(absorption)))
    normalized = absorption / scale if scale > 0 else absorption
    transmission = np.exp(-params.optical_depth * normalized)

    geom = params.geometry
    metadata = {
        "source": "simulated",
        "model": "full",
        "theta_deg": math.degrees(geom.theta),
        "phi_deg": math.degrees(geom.phi),
        "beta_l_gauss": geom.beta_l,
        "beta_t_gauss": geom.beta_t,
        "b_mag_gauss": geom.b_mag,
        "delta_c_mhz": params.delta_c,
        "doppler_average": params.doppler_average,
        "absorption_scale": scale,
    }
    return Spectrum(grid, absorption, transmission=transmission, metadata=metadata)
