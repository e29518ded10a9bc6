"""
Order-by-order perturbation theory for the ET model.

All amplitudes use the interaction picture, c_n(t) = exp(i E_n t) <n|psi(t)>,
with the reactant starting in |R> (c_R^(0) = 1). Detunings are measured from
the reactant: Delta_i = omega_{P*_i} - omega_R and delta_k = omega_k - omega_R.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import NoResonantState, RegimeViolation, ResonantDenominator, StructuralViolation
from .et_model import RESONANCE_TOL, ETModel, propagate_exact

logger = logging.getLogger(__name__)

PHASE_CONVENTION = "interaction picture: c_n(t) = exp(+i E_n t) <n|psi(t)>, hbar = 1"
REGIME_LIMIT = 0.3
SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class PerturbationResult:
    order: int
    target: str
    amplitude: complex
    t: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude is not finite")


def sinc(x):
    """sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def phase_integral(x, t: float):
    """
    (exp(i x t) - 1) / x, which tends to i t as x -> 0.

    Equals i times the integral of exp(i x s) over s in [0, t].
    """
    x = np.asarray(x, dtype=float)
    return 1j * t * np.exp(0.5j * x * t) * sinc(0.5 * x * t)


def ramp_integral(x, t: float):
    """Integral of s exp(i x s) over s in [0, t]: [exp(i x t)(1 - i x t) - 1] / x^2."""
    x = np.asarray(x, dtype=float)
    xt = x * t
    small = np.abs(xt) < SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    closed = (np.exp(1j * xt) * (1.0 - 1j * xt) - 1.0) / safe ** 2
    series = t * t * (0.5 + 1j * xt / 3.0 - xt ** 2 / 8.0)
    return np.where(small, series, closed)


def _resonant_mask(model: ETModel) -> np.ndarray:
    return np.abs(model.manifold_offsets) < RESONANCE_TOL


def first_order_intermediate(model: ETModel, i: int, t: float, resonant_limit: bool = False) -> complex:
    """
    c^(1)_{P*_i}(t) = lambda_i (1 - exp(i Delta_i t)) / Delta_i.

    Raises:
        ResonantDenominator: Delta_i vanishes and the resonant-limit branch (-i lambda_i t) was not requested.
    """
    delta = float(model.manifold_offsets[i])
    lam = float(model.tunneling[i])
    if abs(delta) < RESONANCE_TOL:
        if not resonant_limit:
            raise ResonantDenominator(f"P*_{i + 1} is resonant with R; request the resonant limit")
        return complex(-1j * lam * t)
    return complex(lam * (1.0 - np.exp(1j * delta * t)) / delta)


def first_order_product(model: ETModel, t: float) -> np.ndarray:
    """
    c^(1)_{P,k}(t) for every mode, from the direct R-product matrix elements.

    Raises:
        StructuralViolation: the Hamiltonian couples R directly to a product state.
    """
    direct = model.hamiltonian[0, model.product_slice]
    if np.any(direct != 0):
        bad = int(np.flatnonzero(direct)[0])
        raise StructuralViolation(f"direct coupling between R and (P,1_{bad + 1})")
    # -V_{kR} times the first-order kernel; V_{kR} is zero by the check above
    return -np.conj(direct) * phase_integral(model.mode_offsets, t)


def detuning_weighted_sum(model: ETModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    sum_i lambda_i c_{i,k} / Delta_i for every mode, and its one-sided (Delta_i > 0) part.

    Terms are paired by |Delta_i| and each pair is added before the pairs are
    accumulated, so a symmetric manifold with uniform couplings sums to exactly 0.

    Raises:
        ResonantDenominator: an intermediate sits at omega_R.
    """
    offsets = model.manifold_offsets
    if np.any(_resonant_mask(model)):
        raise ResonantDenominator("the manifold holds a state at omega_R; use second_order_resonant")
    terms = model.tunneling[:, None] * model.decay / offsets[:, None]

    groups: Dict[float, List[int]] = {}
    for i, delta in enumerate(offsets):
        groups.setdefault(abs(float(delta)), []).append(i)
    paired = np.zeros(model.n_modes, dtype=float)
    unpaired = np.zeros(model.n_modes, dtype=float)
    for members in groups.values():
        partial = np.zeros(model.n_modes, dtype=float)
        for i in members:
            partial = partial + terms[i]
        if len(members) > 1:
            paired = paired + partial
        else:
            unpaired = unpaired + partial
    one_sided = np.sum(terms[offsets > 0], axis=0)
    return paired + unpaired, one_sided


def second_order_product(model: ETModel, k: int, t: float) -> complex:
    """Coherent second-order amplitude of mode k: i t exp(i delta_k t/2) sinc(delta_k t/2) sum_i lambda_i c_{i,k}/Delta_i."""
    return complex(second_order_coherent(model, t)[k])


def second_order_coherent(model: ETModel, t: float) -> np.ndarray:
    """Coherent second-order amplitude (virtual intermediates only) for every mode at time t."""
    inner, _ = detuning_weighted_sum(model)
    return phase_integral(model.mode_offsets, t) * inner


def second_order_resonant(model: ETModel, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product amplitude routed through the intermediate sitting at omega_R.

    exact = -lambda c_k [exp(i delta_k t)(1 - i delta_k t) - 1] / delta_k^2,
    which tends to -lambda c_k t^2 / 2. The returned limit carries the leading
    phase, -(t^2/2) lambda c_k exp(2 i delta_k t / 3).

    Raises:
        NoResonantState: no intermediate at omega_R.
    """
    idx = np.flatnonzero(_resonant_mask(model))
    if idx.size == 0:
        raise NoResonantState("resonant_flag is off or the resonant state was removed")
    i = int(idx[0])
    return resonant_amplitudes(model.tunneling[i] * model.decay[i], model.mode_offsets, t)


def resonant_amplitudes(coupling, delta, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact and small-detuning product amplitudes for tunneling-times-decay coupling `coupling`."""
    coupling = np.asarray(coupling, dtype=float)
    delta = np.asarray(delta, dtype=float)
    exact = -coupling * ramp_integral(delta, t)
    limit = -0.5 * t * t * coupling * np.exp(2j * delta * t / 3.0)
    return exact, limit


def real_transition_term(model: ETModel, t: float) -> np.ndarray:
    """
    Second-order product amplitude carried by actual population of the
    off-resonant intermediates: -sum_i lambda_i c_{i,k}/Delta_i (exp(i(delta_k - Delta_i)t) - 1)/(delta_k - Delta_i).
    """
    off = ~_resonant_mask(model)
    offsets = model.manifold_offsets[off]
    weights = model.tunneling[off, None] * model.decay[off] / offsets[:, None]
    detuning = model.mode_offsets[None, :] - offsets[:, None]
    return -np.sum(weights * phase_integral(detuning, t), axis=0)


def second_order_full(model: ETModel, t: float) -> np.ndarray:
    """Complete second-order product amplitude for every mode."""
    return real_transition_term(model, t) + _coherent_prediction(model, t)


def _coherent_prediction(model: ETModel, t: float) -> np.ndarray:
    """Coherent amplitude, including the resonant intermediate when there is one."""
    resonant = _resonant_mask(model)
    if not np.any(resonant):
        return second_order_coherent(model, t)
    exact, _ = second_order_resonant(model, t)
    off = ~resonant
    inner = np.sum(model.tunneling[off, None] * model.decay[off] / model.manifold_offsets[off, None], axis=0)
    return exact + phase_integral(model.mode_offsets, t) * inner


def interaction_picture_products(model: ETModel, t_grid: np.ndarray) -> np.ndarray:
    """Exact c_{P,k}(t) in the interaction picture, shape (len(t_grid), K)."""
    traj = propagate_exact(model, np.asarray(t_grid, dtype=float))
    energies = model.energies[model.product_slice]
    return traj.c_Pk * np.exp(1j * np.outer(traj.times, energies))


@dataclass
class PerturbationReport:
    t_grid: np.ndarray
    mode_detunings: np.ndarray
    max_exact: np.ndarray
    max_coherent: np.ndarray
    max_real_transition: np.ndarray
    max_coherent_residual: np.ndarray
    max_deviation_coherent: np.ndarray
    max_deviation_full: np.ndarray
    final_coherent: List[PerturbationResult] = field(default_factory=list)
    phase_convention: str = PHASE_CONVENTION
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        rows = [
            {
                "mode": k + 1,
                "delta_k": float(self.mode_detunings[k]),
                "max_exact": float(self.max_exact[k]),
                "max_coherent": float(self.max_coherent[k]),
                "max_real_transition": float(self.max_real_transition[k]),
                "max_coherent_residual": float(self.max_coherent_residual[k]),
                "max_deviation_coherent": float(self.max_deviation_coherent[k]),
                "max_deviation_full": float(self.max_deviation_full[k]),
            }
            for k in range(self.mode_detunings.shape[0])
        ]
        return {
            "phase_convention": self.phase_convention,
            "t_grid": [float(t) for t in self.t_grid],
            "modes": rows,
            "final_coherent": [
                {"order": r.order, "target": r.target, "t": r.t,
                 "re": float(r.amplitude.real), "im": float(r.amplitude.imag)}
                for r in self.final_coherent
            ],
            "notes": list(self.notes),
        }


def perturbative_vs_exact(model: ETModel, t_grid, rate: Optional[float] = None) -> PerturbationReport:
    """
    Compare exact product amplitudes with the second-order predictions.

    The coherent residual is the exact amplitude minus its real-transition
    part; it is what survives of a direct R-P coherence at second order.

    Raises:
        RegimeViolation: k * max(t_grid) exceeds 0.3.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if rate is None:
        rate = 2.0 * np.pi * float(np.max(np.abs(model.tunneling))) ** 2 * model.manifold_density
    if rate * float(np.max(t_grid)) > REGIME_LIMIT:
        raise RegimeViolation(f"k t = {rate * np.max(t_grid):.3f} exceeds {REGIME_LIMIT}")

    exact = interaction_picture_products(model, t_grid)
    shape = (t_grid.shape[0], model.n_modes)
    coherent = np.empty(shape, dtype=complex)
    real = np.empty(shape, dtype=complex)
    for n, t in enumerate(t_grid):
        coherent[n] = _coherent_prediction(model, t)
        real[n] = real_transition_term(model, t)
    residual = exact - real

    report = PerturbationReport(
        t_grid=t_grid,
        mode_detunings=model.mode_offsets.copy(),
        max_exact=np.max(np.abs(exact), axis=0),
        max_coherent=np.max(np.abs(coherent), axis=0),
        max_real_transition=np.max(np.abs(real), axis=0),
        max_coherent_residual=np.max(np.abs(residual), axis=0),
        max_deviation_coherent=np.max(np.abs(exact - coherent), axis=0),
        max_deviation_full=np.max(np.abs(residual - coherent), axis=0),
        final_coherent=[
            PerturbationResult(order=2, target=f"P,1_{k + 1}", amplitude=complex(coherent[-1, k]), t=float(t_grid[-1]))
            for k in range(model.n_modes)
        ],
    )
    logger.info(f"Perturbative comparison over {len(t_grid)} times: "
                f"max coherent residual {np.max(report.max_coherent_residual):.3e}, "
                f"max real-transition {np.max(report.max_real_transition):.3e}")
    return report
