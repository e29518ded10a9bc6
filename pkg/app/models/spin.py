from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional
from enum import Enum

import numpy as np

# Basis order used everywhere: singlet, then the triplet manifold
SPIN_BASIS = ("S", "T+", "T0", "T-")


class ComplexMatrix(BaseModel):
    """Complex matrix as separate real and imaginary parts (JSON has no complex type)."""

    model_config = ConfigDict(extra="forbid")

    re: List[List[float]]
    im: Optional[List[List[float]]] = None

    def to_array(self) -> np.ndarray:
        A = np.array(self.re, dtype=complex)
        if self.im is not None:
            A = A + 1j * np.array(self.im, dtype=float)
        return A

    @classmethod
    def from_array(cls, A: np.ndarray) -> "ComplexMatrix":
        A = np.asarray(A, dtype=complex)
        im = A.imag.tolist() if np.any(A.imag) else None
        return cls(re=A.real.tolist(), im=im)


class RPParams(BaseModel):
    """Recombination rates and spin Hamiltonian of a two-electron radical pair."""

    model_config = ConfigDict(extra="forbid")

    k_S: float = Field(1.0, ge=0, allow_inf_nan=False, description="Singlet recombination rate")
    k_T: float = Field(0.0, ge=0, allow_inf_nan=False, description="Triplet recombination rate")
    hamiltonian: Optional[ComplexMatrix] = Field(
        None, description="4x4 Hermitian spin Hamiltonian in the S, T+, T0, T- basis; zero if omitted")

    @field_validator("hamiltonian")
    @classmethod
    def _hermitian_4x4(cls, v):
        if v is None:
            return v
        try:
            H = v.to_array()
        except ValueError as e:
            raise ValueError(f"hamiltonian is not a rectangular matrix: {e}")
        if H.shape != (4, 4):
            raise ValueError(f"hamiltonian must be 4x4, got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("hamiltonian has non-finite entries")
        if np.max(np.abs(H - H.conj().T)) > 1e-12 * np.max(np.abs(H)):
            raise ValueError("hamiltonian must be Hermitian")
        return v

    def hamiltonian_matrix(self) -> np.ndarray:
        if self.hamiltonian is None:
            return np.zeros((4, 4), dtype=complex)
        return self.hamiltonian.to_array()

    @classmethod
    def from_matrix(cls, k_S: float, k_T: float, H: np.ndarray) -> "RPParams":
        return cls(k_S=k_S, k_T=k_T, hamiltonian=ComplexMatrix.from_array(H))


class MasterEquationVariant(str, Enum):
    HABERKORN = "haberkorn"
    JONES_HORE = "jones_hore"
    DEPHASING = "dephasing_family"
    PLUGIN = "plugin"


class MasterEquationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    variant: MasterEquationVariant
    eta: float = Field(0.0, ge=0, description="Extra S-T dephasing strength (dephasing_family only)")
    name: Optional[str] = Field(None, description="Registered plugin name (plugin only)")

    @model_validator(mode="after")
    def _plugin_named(self):
        if self.variant is MasterEquationVariant.PLUGIN and not self.name:
            raise ValueError("plugin variant requires a name")
        return self

    @property
    def label(self) -> str:
        if self.variant is MasterEquationVariant.DEPHASING:
            return f"dephasing(eta={self.eta:g})"
        if self.variant is MasterEquationVariant.PLUGIN:
            return f"plugin:{self.name}"
        return self.variant.value


class InitialState(str, Enum):
    COHERENT = "coherent_s_t0"  # (|S> + |T0>)/sqrt(2)
    SINGLET = "singlet"
    T0 = "t0"
    MIXED = "mixed"             # identity / 4


def default_variants() -> List[MasterEquationSpec]:
    return [
        MasterEquationSpec(variant=MasterEquationVariant.HABERKORN),
        MasterEquationSpec(variant=MasterEquationVariant.JONES_HORE),
        MasterEquationSpec(variant=MasterEquationVariant.DEPHASING, eta=0.5),
    ]


class SpinSection(RPParams):
    """Spin experiment: rates, Hamiltonian, master equations to compare and the time grid."""

    variants: List[MasterEquationSpec] = Field(default_factory=default_variants, min_length=1)
    initial_state: InitialState = InitialState.COHERENT
    t_max: float = Field(20.0, gt=0, description="Final time (k_S t_max = 20 for k_S = 1)")
    dt: float = Field(1e-3, gt=0, description="RK4 step")
    output_every: int = Field(10, ge=1, description="Write every n-th RK4 sample")

    def params(self) -> RPParams:
        return RPParams(k_S=self.k_S, k_T=self.k_T, hamiltonian=self.hamiltonian)
