"""
Reactant / intermediate-manifold / product model of a two-step electron transfer.

The single-excitation basis reachable from the reactant is

    [R] + [P*_1 .. P*_n] + [(P, 1_k) for k = 1..K]

with the product level as the zero of energy, so (P, 1_k) has energy omega_k.
The tunneling Hamiltonian couples R to every P*_i, the decay Hamiltonian couples
each P*_i to the (P, 1_k) states; R and the product sector are never coupled directly.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..core.linalg import NORM_TOL, Propagator
from ..errors import (
    DegenerateManifold,
    DegenerateRates,
    InvalidConfig,
    NonPositiveData,
    NonUniformCoupling,
)
from ..models.et import CouplingProfile, ETConfig

logger = logging.getLogger(__name__)

RESONANCE_TOL = 1e-12


@dataclass(frozen=True)
class ETModel:
    """
    Single-excitation ET Hamiltonian in the basis R, P*_1..P*_n, (P,1_1)..(P,1_K).

    dim = 1 + n_states + K, where n_states is M, or M + 1 when resonant_flag adds
    a state at omega_R to an even grid. photon_occupation holds the photon
    configuration of every basis state: -1 for the vacuum (R and every P*_i), k for 1_k.
    """

    config: ETConfig
    manifold_offsets: np.ndarray   # omega_{P*_i} - omega_R, exact grid values
    mode_offsets: np.ndarray       # omega_k - omega_R
    tunneling: np.ndarray          # lambda_i
    decay: np.ndarray              # c_{i,k}, shape (n_states, K)
    hamiltonian: np.ndarray
    photon_occupation: np.ndarray

    @property
    def n_states(self) -> int:
        return self.manifold_offsets.shape[0]

    @property
    def n_modes(self) -> int:
        return self.mode_offsets.shape[0]

    @property
    def dim(self) -> int:
        return 1 + self.n_states + self.n_modes

    @property
    def energies(self) -> np.ndarray:
        return np.real(np.diag(self.hamiltonian)).copy()

    @property
    def basis(self) -> list:
        return (["R"] + [f"P*_{i + 1}" for i in range(self.n_states)]
                + [f"(P,1_{k + 1})" for k in range(self.n_modes)])

    @property
    def manifold_density(self) -> float:
        """rho* at omega_R: inverse level spacing of the manifold grid."""
        M, W = self.config.n_intermediate, self.config.manifold_width
        return (M - 1) / W if M > 1 else 1.0 / W

    @property
    def mode_density(self) -> float:
        K, W = self.config.n_modes, self.config.mode_width
        return (K - 1) / W if K > 1 else 1.0 / W

    @property
    def channel_density(self) -> float:
        """Density of the modes a single intermediate decays into."""
        if self.config.coupling_profile is CouplingProfile.CHANNEL:
            return self.mode_density / self.n_states
        return self.mode_density

    @property
    def heisenberg_time(self) -> float:
        return 2.0 * np.pi * self.manifold_density

    @property
    def product_slice(self) -> slice:
        return slice(1 + self.n_states, self.dim)


@dataclass(frozen=True)
class WaveTrajectory:
    """Schroedinger-picture amplitudes; arrays are time-major."""

    times: np.ndarray
    c_R: np.ndarray        # (n_t,)
    c_Pstar: np.ndarray    # (n_t, n_states)
    c_Pk: np.ndarray       # (n_t, K)
    model: Optional[ETModel] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class Populations:
    times: np.ndarray
    P_R: np.ndarray
    P_Pstar: np.ndarray
    P_P: np.ndarray


def _grid(n: int, width: float) -> np.ndarray:
    """n equally spaced offsets over [-width/2, width/2], end points included."""
    if n == 1:
        return np.zeros(1)
    spacing = width / (n - 1)
    return (np.arange(n) - (n - 1) / 2.0) * spacing


def manifold_offsets(cfg: ETConfig) -> np.ndarray:
    M, W = cfg.n_intermediate, cfg.manifold_width
    if cfg.resonant_flag:
        offsets = _grid(M, W)
        if M % 2 == 0:
            offsets = np.sort(np.append(offsets, 0.0))
    elif M == 1:
        offsets = np.array([W / 2.0])
    else:
        offsets = _grid(M, W)
        if np.any(np.abs(offsets) < RESONANCE_TOL):
            raise DegenerateManifold(
                f"an intermediate sits at omega_R (odd M={M} grid) while resonant_flag is false")
    if cfg.omit_below:
        below = np.flatnonzero(offsets < 0)
        if cfg.omit_below > below.size:
            raise InvalidConfig(f"omit_below={cfg.omit_below} exceeds the {below.size} sub-resonant states")
        drop = below[np.argsort(-offsets[below])][:cfg.omit_below]
        offsets = np.delete(offsets, drop)
    return offsets


def _couplings(cfg: ETConfig, offsets: np.ndarray, modes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n, K = offsets.shape[0], modes.shape[0]
    if cfg.tunneling_couplings is not None:
        tunneling = np.asarray(cfg.tunneling_couplings, dtype=float)
        if tunneling.shape != (n,):
            raise InvalidConfig(f"tunneling_couplings needs {n} entries, got {tunneling.shape}")
    else:
        tunneling = np.full(n, cfg.lam)

    if cfg.decay_couplings is not None:
        decay = np.asarray(cfg.decay_couplings, dtype=float)
        if decay.shape != (n, K):
            raise InvalidConfig(f"decay_couplings needs shape {(n, K)}, got {decay.shape}")
    elif cfg.coupling_profile is CouplingProfile.SQRT_OMEGA:
        omega_k = cfg.omega_R + modes
        if np.any(omega_k <= 0):
            raise InvalidConfig("sqrt_omega profile needs positive mode energies")
        decay = np.tile(cfg.g * np.sqrt(omega_k / cfg.omega_R), (n, 1))
    elif cfg.coupling_profile is CouplingProfile.CHANNEL:
        decay = np.zeros((n, K))
        k = np.arange(K)
        decay[k % n, k] = cfg.g
    else:
        decay = np.full((n, K), cfg.g)
    return tunneling, decay


def build_model(cfg: ETConfig) -> ETModel:
    """
    Assemble the Hamiltonian for one configuration.

    Raises:
        InvalidConfig: non-positive widths or counts, or mis-shaped coupling tables.
        DegenerateManifold: an intermediate lands on omega_R without resonant_flag.
    """
    if cfg.n_intermediate < 1 or cfg.n_modes < 1:
        raise InvalidConfig("n_intermediate and n_modes must be positive")
    if not (cfg.manifold_width > 0 and cfg.mode_width > 0):
        raise InvalidConfig("manifold_width and mode_width must be positive")

    offsets = manifold_offsets(cfg)
    modes = _grid(cfg.n_modes, cfg.mode_width)
    tunneling, decay = _couplings(cfg, offsets, modes)

    n, K = offsets.shape[0], modes.shape[0]
    dim = 1 + n + K
    H = np.zeros((dim, dim), dtype=complex)
    H[0, 0] = cfg.omega_R
    idx = np.arange(1, 1 + n)
    H[idx, idx] = cfg.omega_R + offsets
    pk = np.arange(1 + n, dim)
    H[pk, pk] = cfg.omega_R + modes
    H[0, 1:1 + n] = tunneling
    H[1:1 + n, 1 + n:] = decay
    H = np.triu(H) + np.triu(H, 1).conj().T

    model = ETModel(config=cfg, manifold_offsets=offsets, mode_offsets=modes,
                    tunneling=tunneling, decay=decay, hamiltonian=H,
                    photon_occupation=np.concatenate([np.full(1 + n, -1), np.arange(K)]))
    if cfg.t_max >= 0.5 * model.heisenberg_time:
        logger.warning(f"t_max={cfg.t_max} exceeds half the Heisenberg time "
                       f"{model.heisenberg_time:.1f}; recurrences may appear")
    logger.info(f"Built ET model: dim={dim}, intermediates={n}, modes={K}, "
                f"profile={cfg.coupling_profile.value}")
    return model


def golden_rule_rates(model: ETModel) -> Tuple[float, float]:
    """k = 2 pi lambda^2 rho*(omega_R) and Gamma = 2 pi g^2 rho_ph (hbar = 1)."""
    cfg = model.config
    if cfg.has_coupling_tables or cfg.coupling_profile is CouplingProfile.SQRT_OMEGA:
        raise NonUniformCoupling("golden-rule rates need uniform couplings")
    k = 2.0 * np.pi * cfg.lam ** 2 * model.manifold_density
    Gamma = 2.0 * np.pi * cfg.g ** 2 * model.channel_density
    return float(k), float(Gamma)


def effective_reactant_rate(model: ETModel) -> float:
    """
    Reactant decay rate once the intermediates are themselves decaying.

    With independent channels every intermediate is a Lorentzian of width Gamma,
    which spreads manifold density outside the band edges. With a shared
    continuum and uniform couplings, tunneling and decay act through the same
    collective intermediate state, which suppresses the rate by 1 + pi rho* Gamma / 2.
    """
    k, Gamma = golden_rule_rates(model)
    if Gamma == 0.0:
        return k
    if model.config.coupling_profile is CouplingProfile.CHANNEL:
        half_band = 0.5 * model.config.manifold_width + 0.5 / model.manifold_density
        return float(k * (2.0 / np.pi) * np.arctan(half_band / (0.5 * Gamma)))
    return float(k / (1.0 + 0.5 * np.pi * model.manifold_density * Gamma))


def sample_times(cfg: ETConfig) -> np.ndarray:
    n = int(round(cfg.t_max / cfg.dt_sample))
    return np.arange(n + 1) * cfg.dt_sample


def propagate_exact(model: ETModel, times: Optional[np.ndarray] = None) -> WaveTrajectory:
    """Evolve |R> under the full Hamiltonian at every sample time."""
    if times is None:
        times = sample_times(model.config)
    psi0 = np.zeros(model.dim, dtype=complex)
    psi0[0] = 1.0
    logger.info(f"Propagating ET model (dim={model.dim}) over {len(times)} samples")
    psi = Propagator(model.hamiltonian).evolve(psi0, times)
    drift = float(np.max(np.abs(np.sum(np.abs(psi) ** 2, axis=1) - 1.0)))
    if drift > NORM_TOL:
        logger.warning(f"Norm drift {drift:.2e} exceeds {NORM_TOL}")
    n = model.n_states
    return WaveTrajectory(times=np.asarray(times, dtype=float), c_R=psi[:, 0],
                          c_Pstar=psi[:, 1:1 + n], c_Pk=psi[:, 1 + n:], model=model)


def populations(traj: WaveTrajectory) -> Populations:
    return Populations(
        times=traj.times,
        P_R=np.abs(traj.c_R) ** 2,
        P_Pstar=np.sum(np.abs(traj.c_Pstar) ** 2, axis=1),
        P_P=np.sum(np.abs(traj.c_Pk) ** 2, axis=1),
    )


def classical_two_step(k: float, Gamma: float, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    First-order sequential kinetics R -(k)-> P* -(Gamma)-> P.

    Raises:
        DegenerateRates: k and Gamma coincide; `classical_two_step_confluent` covers that limit.
    """
    if k <= 0 or Gamma <= 0:
        raise ValueError("rates must be positive")
    if abs(k - Gamma) < 1e-12 * max(k, Gamma):
        raise DegenerateRates(f"k={k} and Gamma={Gamma} coincide; use the confluent formula")
    t = np.asarray(times, dtype=float)
    ek, eG = np.exp(-k * t), np.exp(-Gamma * t)
    P_R = ek
    P_Pstar = k * (ek - eG) / (Gamma - k)
    P_P = 1.0 - (Gamma * ek - k * eG) / (Gamma - k)
    return P_R, P_Pstar, P_P


def classical_two_step_confluent(k: float, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=float)
    ek = np.exp(-k * t)
    return ek, k * t * ek, 1.0 - ek - k * t * ek


def _photon_labels(model: ETModel) -> Tuple[np.ndarray, np.ndarray]:
    """Photon configuration of each R-sector and product-sector basis state (-1 = vacuum)."""
    occupation = model.photon_occupation
    return occupation[0:1], occupation[model.product_slice]


def reduced_coherence(traj: WaveTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """
    <R| Tr_photons |psi><psi| |P> and the amplitude-level proxy max_k |c_R conj(c_{P,k})|.

    The partial trace pairs reactant and product components that share a photon
    configuration; the reactant holds none and every product state holds one.
    """
    if traj.model is not None:
        r_labels, p_labels = _photon_labels(traj.model)
    else:
        r_labels, p_labels = np.array([-1]), np.arange(traj.c_Pk.shape[1])
    c_R = traj.c_R[:, None]
    shared = r_labels[:, None] == p_labels[None, :]
    r_idx, p_idx = np.nonzero(shared)
    rho_RP = np.sum(c_R[:, r_idx] * np.conj(traj.c_Pk[:, p_idx]), axis=1)
    if traj.c_Pk.shape[1]:
        bound = np.max(np.abs(traj.c_R[:, None] * np.conj(traj.c_Pk)), axis=1)
    else:
        bound = np.zeros(traj.times.shape)
    return rho_RP.astype(complex), bound


def fit_decay_rate(times: np.ndarray, series: np.ndarray, window: Tuple[float, float],
                   floor: float = 0.0) -> float:
    """
    Least-squares slope of ln(series) over the window, sign flipped.

    With a positive floor the fit stops at the first in-window sample at or
    below it, so the fitted span shrinks as the decay speeds up.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(series, dtype=float)
    mask = (t >= window[0]) & (t <= window[1])
    if floor > 0.0:
        below = np.flatnonzero(mask & (y <= floor))
        if below.size:
            mask[below[0]:] = False
    if np.count_nonzero(mask) < 2:
        raise NonPositiveData(f"fewer than two samples inside window {window}")
    if np.any(y[mask] <= 0):
        raise NonPositiveData("series must be strictly positive on the fit window")
    slope, _ = np.polyfit(t[mask], np.log(y[mask]), 1)
    return float(-slope)
