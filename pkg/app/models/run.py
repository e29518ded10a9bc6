from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional
from enum import Enum

from .et import ETConfig
from .spin import SpinSection


class Experiment(str, Enum):
    ET_SIM = "et-sim"
    RP_SIM = "rp-sim"
    VERIFY = "verify"
    SWEEP = "sweep"


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    parameter: str = Field(..., min_length=1, description="Dotted key, e.g. 'model.lambda' or 'spin.k_S'")
    values: List[float] = Field(..., min_length=1)
    experiment: Experiment = Field(Experiment.ET_SIM, description="Experiment run at every point")
    parallel: bool = Field(False, description="Run points in worker processes")
    max_workers: Optional[int] = Field(None, ge=1)

    @field_validator("experiment")
    @classmethod
    def _simulations_only(cls, v):
        if v not in (Experiment.ET_SIM, Experiment.RP_SIM):
            raise ValueError("sweep points must run et-sim or rp-sim")
        return v


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    experiment: Experiment
    model: Optional[ETConfig] = None
    spin: Optional[SpinSection] = None
    sweep: Optional[SweepSection] = None
    output_dir: Optional[str] = None
    seed: int = Field(12345, description="Seed for randomized verification properties")

    @model_validator(mode="after")
    def _apply_defaults(self):
        # Sections an experiment reads are filled with their defaults when omitted
        wants_model = self.experiment in (Experiment.ET_SIM, Experiment.VERIFY) or (
            self.sweep is not None and self.sweep.experiment is Experiment.ET_SIM)
        wants_spin = self.experiment in (Experiment.RP_SIM, Experiment.VERIFY) or (
            self.sweep is not None and self.sweep.experiment is Experiment.RP_SIM)
        if wants_model and self.model is None:
            self.model = ETConfig()
        if wants_spin and self.spin is None:
            self.spin = SpinSection()
        return self
