"""Complex linear algebra used by every simulation module.

Operators, density matrices and state vectors are plain complex ``numpy``
arrays; the ``check_*`` helpers enforce their invariants at the boundaries.
Units: hbar = 1, energies in one arbitrary unit, time in its inverse.
"""
import logging
from typing import Callable, List, Tuple

import numpy as np

from ..errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NegativeEigenvalue,
    NonHermitianInput,
    NotNormalized,
    StepTooLarge,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
TRACE_TOL = 1e-8
EIGEN_CLAMP = 1e-10
PURE_THRESHOLD = 1e-9
RK4_TRACE_GROWTH = 1e-6
RK4_NEGATIVITY = 1e-6

Superoperator = Callable[[np.ndarray], np.ndarray]


# --- Invariant checks ---

def _as_square(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    return A


def check_hermitian(H: np.ndarray, name: str = "H") -> np.ndarray:
    """Return H as a complex array, raising NonHermitianInput if it is not Hermitian."""
    H = _as_square(H, name)
    if not np.all(np.isfinite(H)):
        raise NonHermitianInput(f"{name} contains non-finite entries")
    scale = float(np.max(np.abs(H)))
    asym = float(np.max(np.abs(H - H.conj().T)))
    if asym > HERMITIAN_TOL * scale:
        raise NonHermitianInput(f"{name} is not Hermitian (max asymmetry {asym:.3e})")
    if float(np.max(np.abs(np.diag(H).imag))) > HERMITIAN_TOL:
        raise NonHermitianInput(f"{name} has complex diagonal entries")
    return H


def check_state(psi: np.ndarray, dim: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.shape[0] != dim:
        raise DimensionMismatch(f"state of shape {psi.shape} does not match operator dim {dim}")
    return psi


def check_density_matrix(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Validate Hermiticity, positivity (>= -1e-10) and 0 < trace <= 1 + 1e-10."""
    rho = check_hermitian(rho, name)
    tr = float(np.trace(rho).real)
    if not 0.0 < tr <= 1.0 + EIGEN_CLAMP:
        raise NotNormalized(f"{name} trace {tr} outside (0, 1]")
    lowest = float(np.linalg.eigvalsh(rho)[0])
    if lowest < -EIGEN_CLAMP:
        raise NegativeEigenvalue(f"{name} has eigenvalue {lowest:.3e}")
    return rho


# --- Algebra helpers ---

def _match(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    return A, B


def adjoint(A: np.ndarray) -> np.ndarray:
    return np.asarray(A, dtype=complex).conj().T


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape[-1] != B.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A, B = _match(A, B)
    return A @ B - B @ A


def anticommutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A, B = _match(A, B)
    return A @ B + B @ A


def trace(A: np.ndarray) -> complex:
    return complex(np.trace(_as_square(A, "A")))


def sandwich(P: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """P rho P."""
    P, rho = _match(P, rho)
    return P @ rho @ P


def hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


# --- Spectral tools ---

def eigh(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hermitian eigendecomposition H = U diag(w) U^dagger.

    Returns:
        (w, U): ascending real eigenvalues and the unitary eigenvector matrix (columns).

    Raises:
        NonHermitianInput: H fails the Hermitian invariant.
        ConvergenceFailure: LAPACK did not converge.
    """
    H = check_hermitian(H)
    try:
        w, U = np.linalg.eigh(hermitize(H))
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailure(f"eigendecomposition did not converge: {e}") from e
    return w, U


class Propagator:
    """Unitary evolution exp(-iHt) built from a single eigendecomposition."""

    def __init__(self, H: np.ndarray):
        self.energies, self.vectors = eigh(H)
        self.dim = self.energies.shape[0]

    def evolve(self, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Amplitudes at every time, shape (len(times), dim)."""
        psi0 = check_state(psi0, self.dim)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        coeffs = self.vectors.conj().T @ psi0
        phases = np.exp(-1j * np.outer(times, self.energies))
        return (phases * coeffs) @ self.vectors.T


def propagate(H: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt) psi0 via eigendecomposition."""
    return Propagator(H).evolve(psi0, np.array([t]))[0]


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.vdot(rho, rho)))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """
    S = -Tr(rho ln rho) in nats for a unit-trace density matrix.

    Eigenvalues in [-1e-10, 0) are clamped to zero; a state whose largest
    eigenvalue is within 1e-9 of one is reported as exactly pure.
    """
    rho = check_hermitian(rho, "rho")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotNormalized(f"entropy needs unit trace, got {tr}")
    lam = np.linalg.eigvalsh(hermitize(rho))
    if lam[0] < -EIGEN_CLAMP:
        raise NegativeEigenvalue(f"eigenvalue {lam[0]:.3e} below clamp")
    if lam[-1] >= 1.0 - PURE_THRESHOLD:
        return 0.0
    lam = lam[lam > 0.0]
    S = float(-np.sum(lam * np.log(lam)))
    return min(max(S, 0.0), float(np.log(rho.shape[0])))


# --- Fixed-step integrator ---

def rk4_evolve(deriv: Superoperator, rho0: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    """
    Classic fourth-order Runge-Kutta for d(rho)/dt = deriv(rho).

    The state is re-symmetrized after every step. Returns an array of shape
    (n_steps + 1, dim, dim) starting with rho0.

    Raises:
        StepTooLarge: the trace grew above 1 + 1e-6 or an eigenvalue fell below -1e-6.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}")
    rho = hermitize(check_hermitian(rho0, "rho0"))
    out = np.empty((n_steps + 1,) + rho.shape, dtype=complex)
    out[0] = rho
    half = 0.5 * dt
    for n in range(1, n_steps + 1):
        k1 = deriv(rho)
        k2 = deriv(rho + half * k1)
        k3 = deriv(rho + half * k2)
        k4 = deriv(rho + dt * k3)
        rho = hermitize(rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        tr = float(np.trace(rho).real)
        if tr > 1.0 + RK4_TRACE_GROWTH:
            raise StepTooLarge(f"trace grew to {tr:.8f} at step {n} (dt={dt})")
        lowest = float(np.linalg.eigvalsh(rho)[0])
        if lowest < -RK4_NEGATIVITY:
            raise StepTooLarge(f"eigenvalue {lowest:.3e} at step {n} (dt={dt})")
        out[n] = rho
    return out


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (A + A.conj().T)


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = A @ A.conj().T
    return hermitize(rho / np.trace(rho).real)


def hermitian_basis(dim: int) -> List[np.ndarray]:
    """The dim**2 elementary Hermitian matrices (diagonal, symmetric and antisymmetric pairs)."""
    basis = []
    for i in range(dim):
        for j in range(dim):
            E = np.zeros((dim, dim), dtype=complex)
            if i == j:
                E[i, i] = 1.0
            elif i < j:
                E[i, j] = E[j, i] = 1.0
            else:
                E[j, i] = -1j
                E[i, j] = 1j
            basis.append(E)
    return basis
