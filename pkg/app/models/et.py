from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import List, Optional, Tuple
from enum import Enum


class CouplingProfile(str, Enum):
    UNIFORM = "uniform"        # c_{i,k} = g for every intermediate and mode
    SQRT_OMEGA = "sqrt_omega"  # c_{i,k} = g * sqrt(omega_k / omega_R)
    CHANNEL = "channel"        # intermediate i couples only to modes k with k % n_states == i


class ETConfig(BaseModel):
    """Parameters of the reactant / intermediate-manifold / product-plus-photon model."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    omega_R: float = Field(10.0, description="Reactant energy (product level is the zero)")
    n_intermediate: int = Field(201, ge=1, description="Number of intermediate states M")
    manifold_width: float = Field(2.0, gt=0, description="Width W of the intermediate manifold")
    lam: float = Field(0.01, alias="lambda", description="Uniform tunneling coupling")
    tunneling_couplings: Optional[List[float]] = Field(
        None, description="Per-state tunneling couplings, overrides lambda")
    n_modes: int = Field(201, ge=1, description="Number of photon modes K")
    mode_width: float = Field(2.0, gt=0, description="Width W_ph of the photon mode window")
    g: float = Field(0.03, description="Uniform decay coupling")
    decay_couplings: Optional[List[List[float]]] = Field(
        None, description="Per-(i,k) decay couplings, overrides g and coupling_profile")
    coupling_profile: CouplingProfile = Field(CouplingProfile.UNIFORM)
    resonant_flag: bool = Field(
        True, description="Place one intermediate exactly at omega_R (odd M grids already contain it)")
    omit_below: int = Field(0, ge=0, description="Drop this many sub-resonant intermediates, closest first")
    t_max: float = Field(80.0, gt=0)
    dt_sample: float = Field(0.1, gt=0)
    fit_window: Tuple[float, float] = Field((5.0, 50.0), description="Window for the reactant decay fit")
    fit_floor: float = Field(0.05, ge=0, lt=1, description="Stop the decay fit once P_R drops to this level")

    @field_validator("fit_window")
    @classmethod
    def _ordered_window(cls, v):
        if not v[0] < v[1]:
            raise ValueError("fit_window must be increasing")
        return v

    @property
    def has_coupling_tables(self) -> bool:
        return self.tunneling_couplings is not None or self.decay_couplings is not None

    @classmethod
    def baseline(cls, **overrides) -> "ETConfig":
        """omega_R=10, M=201, W=2, lambda=0.01, K=201, W_ph=2, g=0.03 (Gamma/k = 9)."""
        return cls(**overrides)

    @classmethod
    def sequential(cls, **overrides) -> "ETConfig":
        """
        Independent decay channels, one per intermediate, so the photon continuum
        does not couple intermediates to each other. Golden-rule k = 0.0628 and
        Gamma = 0.5655 (Gamma/k = 9) with every recurrence time beyond t_max.
        """
        values = dict(
            omega_R=10.0, n_intermediate=33, manifold_width=1.6, lam=0.0005 ** 0.5,
            n_modes=826, mode_width=2.5, g=0.009 ** 0.5,
            coupling_profile=CouplingProfile.CHANNEL, resonant_flag=True,
            t_max=55.0, dt_sample=0.1, fit_window=(5.0, 50.0),
        )
        values.update(overrides)
        return cls(**values)
