from .et import CouplingProfile, ETConfig
from .run import Experiment, RunConfig, SweepSection
from .spin import (
    SPIN_BASIS,
    ComplexMatrix,
    InitialState,
    MasterEquationSpec,
    MasterEquationVariant,
    RPParams,
    SpinSection,
)
from .table import TimeSeriesTable
