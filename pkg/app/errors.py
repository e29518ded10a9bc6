"""Exception hierarchy shared by every rplab module."""


class RPLabError(Exception):
    """Base class for all errors raised by rplab."""


# --- linalg-core ---
class NonHermitianInput(RPLabError):
    pass


class ConvergenceFailure(RPLabError):
    pass


class DimensionMismatch(RPLabError):
    pass


class NotNormalized(RPLabError):
    pass


class NegativeEigenvalue(RPLabError):
    pass


class StepTooLarge(RPLabError):
    pass


# --- et-model ---
class InvalidConfig(RPLabError):
    pass


class DegenerateManifold(RPLabError):
    pass


class NonUniformCoupling(RPLabError):
    pass


class DegenerateRates(RPLabError):
    pass


class NonPositiveData(RPLabError):
    pass


# --- perturbation ---
class ResonantDenominator(RPLabError):
    pass


class StructuralViolation(RPLabError):
    pass


class NoResonantState(RPLabError):
    pass


class RegimeViolation(RPLabError):
    pass


# --- spin-master ---
class NonzeroHamiltonian(RPLabError):
    pass


class VanishedPopulation(RPLabError):
    pass


class PluginContractViolation(RPLabError):
    pass


# --- cli-io ---
class ConfigParseError(RPLabError):
    pass


class ConfigValidationError(RPLabError):
    """Invalid config value; `key_path` is the dotted location, e.g. ``spin.k_S``."""

    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")


class OutputError(RPLabError):
    pass
