"""
Radical-pair spin master equations on the two-electron basis {S, T+, T0, T-}.

Every variant shares the Hamiltonian commutator and the recombination trace
loss -k_S Tr(Q_S rho) - k_T Tr(Q_T rho); they differ only in how fast the
singlet-triplet coherences decay.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..core.linalg import (
    HERMITIAN_TOL,
    Superoperator,
    anticommutator,
    check_density_matrix,
    commutator,
    purity,
    rk4_evolve,
    sandwich,
    von_neumann_entropy,
)
from ..errors import (
    InvalidConfig,
    NonzeroHamiltonian,
    PluginContractViolation,
    StepTooLarge,
    VanishedPopulation,
)
from ..models.spin import SPIN_BASIS, InitialState, MasterEquationSpec, MasterEquationVariant, RPParams

logger = logging.getLogger(__name__)

DIM = len(SPIN_BASIS)
STEP_SAFETY = 0.01
RATE_FLOOR = 1e-12
VANISHED_TRACE = 1e-12

PluginFn = Callable[[RPParams, np.ndarray], np.ndarray]
_PLUGINS: Dict[str, PluginFn] = {}


@dataclass(frozen=True)
class SpinTrajectory:
    times: np.ndarray
    states: np.ndarray   # (n_t, 4, 4)
    label: str = ""

    @property
    def traces(self) -> np.ndarray:
        return np.real(np.trace(self.states, axis1=1, axis2=2))


# --- States and projectors ---

def basis_state(label: str) -> np.ndarray:
    try:
        index = SPIN_BASIS.index(label)
    except ValueError:
        raise InvalidConfig(f"unknown spin basis state '{label}'")
    psi = np.zeros(DIM, dtype=complex)
    psi[index] = 1.0
    return psi


def singlet_state() -> np.ndarray:
    return basis_state("S")


def triplet_states() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return basis_state("T+"), basis_state("T0"), basis_state("T-")


def coherent_initial_state() -> np.ndarray:
    """(|S> + |T0>) / sqrt(2)."""
    return (basis_state("S") + basis_state("T0")) / np.sqrt(2.0)


def projectors() -> Tuple[np.ndarray, np.ndarray]:
    s = singlet_state()
    Q_S = np.outer(s, s.conj())
    return Q_S, np.eye(DIM, dtype=complex) - Q_S


def initial_state(selector: InitialState) -> np.ndarray:
    if selector is InitialState.MIXED:
        return np.eye(DIM, dtype=complex) / DIM
    psi = {
        InitialState.COHERENT: coherent_initial_state,
        InitialState.SINGLET: singlet_state,
        InitialState.T0: lambda: basis_state("T0"),
    }[selector]()
    return np.outer(psi, psi.conj())


# --- Plugin registry ---

def register_plugin(name: str):
    """Register `fn(params, rho) -> drho/dt` under `name` for the plugin variant."""
    def decorator(fn: PluginFn) -> PluginFn:
        if name in _PLUGINS:
            logger.warning(f"Replacing master-equation plugin '{name}'")
        _PLUGINS[name] = fn
        return fn
    return decorator


def get_plugin(name: str) -> PluginFn:
    try:
        return _PLUGINS[name]
    except KeyError:
        raise InvalidConfig(f"no master-equation plugin registered as '{name}' "
                            f"(known: {sorted(_PLUGINS)})")


def registered_plugins() -> Tuple[str, ...]:
    return tuple(sorted(_PLUGINS))


def _check_plugin_output(name: str, drho: np.ndarray) -> np.ndarray:
    drho = np.asarray(drho, dtype=complex)
    if drho.shape != (DIM, DIM):
        raise PluginContractViolation(f"plugin '{name}' returned shape {drho.shape}")
    scale = max(float(np.max(np.abs(drho))), 1.0)
    if np.max(np.abs(drho - drho.conj().T)) > HERMITIAN_TOL * scale:
        raise PluginContractViolation(f"plugin '{name}' returned a non-Hermitian derivative")
    if float(np.trace(drho).real) > HERMITIAN_TOL * scale:
        raise PluginContractViolation(f"plugin '{name}' increases the trace")
    return drho


# --- Superoperators ---

def dephasing_superoperator(rho: np.ndarray) -> np.ndarray:
    """D_S[rho] = Q_S rho + rho Q_S - 2 Q_S rho Q_S; traceless, acts only on S-T coherences."""
    Q_S, _ = projectors()
    return anticommutator(Q_S, rho) - 2.0 * sandwich(Q_S, rho)


def _haberkorn(params: RPParams, rho: np.ndarray, H: np.ndarray, Q_S: np.ndarray, Q_T: np.ndarray) -> np.ndarray:
    return (-1j * commutator(H, rho)
            - 0.5 * params.k_S * anticommutator(Q_S, rho)
            - 0.5 * params.k_T * anticommutator(Q_T, rho))


def liouvillian(spec: MasterEquationSpec, params: RPParams, rho: np.ndarray) -> np.ndarray:
    """
    d(rho)/dt for the selected master equation.

    Raises:
        PluginContractViolation: a plugin returned a non-Hermitian or trace-increasing derivative.
    """
    Q_S, Q_T = projectors()
    return _derivative(spec, params, np.asarray(rho, dtype=complex), params.hamiltonian_matrix(), Q_S, Q_T)


def _derivative(spec: MasterEquationSpec, params: RPParams, rho: np.ndarray,
                H: np.ndarray, Q_S: np.ndarray, Q_T: np.ndarray) -> np.ndarray:
    variant = spec.variant
    if variant is MasterEquationVariant.HABERKORN:
        return _haberkorn(params, rho, H, Q_S, Q_T)
    if variant is MasterEquationVariant.JONES_HORE:
        return (-1j * commutator(H, rho)
                - params.k_S * (rho - sandwich(Q_T, rho))
                - params.k_T * (rho - sandwich(Q_S, rho)))
    if variant is MasterEquationVariant.DEPHASING:
        rate = 0.5 * spec.eta * (params.k_S + params.k_T)
        return _haberkorn(params, rho, H, Q_S, Q_T) - rate * dephasing_superoperator(rho)
    return _check_plugin_output(spec.name, get_plugin(spec.name)(params, rho))


def make_deriv(spec: MasterEquationSpec, params: RPParams) -> Superoperator:
    if spec.variant is MasterEquationVariant.PLUGIN:
        get_plugin(spec.name)
    H = params.hamiltonian_matrix()
    Q_S, Q_T = projectors()
    return lambda rho: _derivative(spec, params, rho, H, Q_S, Q_T)


@register_plugin("measurement_dephasing")
def measurement_dephasing(params: RPParams, rho: np.ndarray) -> np.ndarray:
    """
    Qualitative stand-in for a measurement-based recombination theory: Haberkorn
    plus half the Jones-Hore extra S-T dephasing. Entropy rises from zero and
    returns to zero as the pair ends up in the triplet.
    """
    spec = MasterEquationSpec(variant=MasterEquationVariant.DEPHASING, eta=0.5)
    return liouvillian(spec, params, rho)


# --- Closed forms (H = 0) ---

def coherence_decay_rate(spec: MasterEquationSpec, params: RPParams) -> float:
    """Decay rate of the S-T off-diagonal block when H = 0."""
    mean = 0.5 * (params.k_S + params.k_T)
    if spec.variant is MasterEquationVariant.HABERKORN:
        return mean
    if spec.variant is MasterEquationVariant.JONES_HORE:
        return 2.0 * mean
    if spec.variant is MasterEquationVariant.DEPHASING:
        return mean * (1.0 + spec.eta)
    raise InvalidConfig(f"no closed form for {spec.label}")


def _require_zero_hamiltonian(params: RPParams):
    if np.any(params.hamiltonian_matrix() != 0):
        raise NonzeroHamiltonian("closed forms need H_spin = 0")


def closed_form(spec: MasterEquationSpec, params: RPParams, rho0: np.ndarray, t: float) -> np.ndarray:
    """
    Analytic rho(t) for H = 0: the SS block decays at k_S, the TT block at k_T
    and the S-T coherences at `coherence_decay_rate`.

    Raises:
        NonzeroHamiltonian: H_spin is not zero.
    """
    _require_zero_hamiltonian(params)
    rho0 = np.asarray(rho0, dtype=complex)
    Q_S, Q_T = projectors()
    gamma = coherence_decay_rate(spec, params)
    return (np.exp(-params.k_S * t) * sandwich(Q_S, rho0)
            + np.exp(-params.k_T * t) * sandwich(Q_T, rho0)
            + np.exp(-gamma * t) * (Q_S @ rho0 @ Q_T + Q_T @ rho0 @ Q_S))


def closed_form_haberkorn(params: RPParams, rho0: np.ndarray, t: float) -> np.ndarray:
    """
    rho(t) = E rho0 E with E = exp(-(k_S Q_S + k_T Q_T) t / 2); pure states stay pure.

    Raises:
        NonzeroHamiltonian: H_spin is not zero.
    """
    _require_zero_hamiltonian(params)
    Q_S, Q_T = projectors()
    E = np.exp(-0.5 * params.k_S * t) * Q_S + np.exp(-0.5 * params.k_T * t) * Q_T
    return E @ np.asarray(rho0, dtype=complex) @ E


# --- Integration and diagnostics ---

def max_stable_step(params: RPParams) -> float:
    scale = max(params.k_S, params.k_T, float(np.max(np.abs(params.hamiltonian_matrix()))), RATE_FLOOR)
    return STEP_SAFETY / scale


def evolve(spec: MasterEquationSpec, params: RPParams, rho0: np.ndarray, t_max: float, dt: float) -> SpinTrajectory:
    """
    Fixed-step RK4 trajectory from rho0 to t_max, every step kept.

    Raises:
        StepTooLarge: dt exceeds 0.01 / max(k_S, k_T, |H|_max), or the integrator lost positivity.
    """
    limit = max_stable_step(params)
    if dt > limit * (1.0 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds {limit:.3e} for these rates")
    rho0 = check_density_matrix(rho0, "rho0")
    n_steps = int(round(t_max / dt))
    logger.info(f"Evolving {spec.label} for {n_steps} steps (dt={dt})")
    states = rk4_evolve(make_deriv(spec, params), rho0, dt, n_steps)
    return SpinTrajectory(times=np.arange(n_steps + 1) * dt, states=states, label=spec.label)


def _normalized(traj: SpinTrajectory) -> np.ndarray:
    traces = traj.traces
    if np.any(traces <= VANISHED_TRACE):
        n = int(np.flatnonzero(traces <= VANISHED_TRACE)[0])
        raise VanishedPopulation(f"trace {traces[n]:.3e} at t={traj.times[n]}")
    return traj.states / traces[:, None, None]


def entropy_series(traj: SpinTrajectory) -> np.ndarray:
    """S(rho / Tr rho) per sample, in nats."""
    return np.array([von_neumann_entropy(rho) for rho in _normalized(traj)])


def purity_series(traj: SpinTrajectory) -> np.ndarray:
    return np.array([purity(rho) for rho in _normalized(traj)])


def st_coherence_series(traj: SpinTrajectory) -> np.ndarray:
    """|rho_{S,T0}| / Tr rho per sample."""
    s, t0 = SPIN_BASIS.index("S"), SPIN_BASIS.index("T0")
    return np.abs(_normalized(traj)[:, s, t0])


def yields(traj: SpinTrajectory, params: RPParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cumulative singlet and triplet yields and the surviving pair population."""
    Q_S, Q_T = projectors()
    p_S = np.real(np.einsum("ij,tji->t", Q_S, traj.states))
    p_T = np.real(np.einsum("ij,tji->t", Q_T, traj.states))
    Y_S = params.k_S * cumulative_trapezoid(p_S, traj.times, initial=0.0)
    Y_T = params.k_T * cumulative_trapezoid(p_T, traj.times, initial=0.0)
    return Y_S, Y_T, traj.traces


def trace_flow_residual(spec: MasterEquationSpec, params: RPParams, traj: SpinTrajectory) -> float:
    """max_t |Tr L(rho) + k_S Tr(Q_S rho) + k_T Tr(Q_T rho)| over the trajectory."""
    Q_S, Q_T = projectors()
    worst = 0.0
    for rho in traj.states:
        flow = np.trace(liouvillian(spec, params, rho)).real
        loss = params.k_S * np.trace(Q_S @ rho).real + params.k_T * np.trace(Q_T @ rho).real
        worst = max(worst, abs(flow + loss))
    return float(worst)
