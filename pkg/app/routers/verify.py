"""
Self-verification suite: every invariant and acceptance property, run against
seeded inputs, reported as pass/fail with the measured value and its threshold.
"""
import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .. import __version__
from ..core.linalg import (
    eigh,
    hermitian_basis,
    propagate,
    random_density_matrix,
    random_hermitian,
    rk4_evolve,
    von_neumann_entropy,
)
from ..errors import RPLabError
from ..io import write_json
from ..models.et import ETConfig
from ..models.run import RunConfig
from ..models.spin import InitialState, MasterEquationSpec, MasterEquationVariant, RPParams, SpinSection
from ..physics import et_model, perturbation, spin_master
from ..physics.spin_master import SpinTrajectory

logger = logging.getLogger(__name__)

JONES_HORE_ENTROPY_AT_ONE = 0.4146

HABERKORN = MasterEquationSpec(variant=MasterEquationVariant.HABERKORN)
JONES_HORE = MasterEquationSpec(variant=MasterEquationVariant.JONES_HORE)
STAND_IN = MasterEquationSpec(variant=MasterEquationVariant.PLUGIN, name="measurement_dephasing")


@dataclass
class PropertyResult:
    name: str
    module: str
    passed: bool
    measured: Optional[float]
    threshold: Optional[float]
    detail: str = ""


CheckFn = Callable[["VerifyContext"], PropertyResult]
CHECKS: List[CheckFn] = []


def check(module: str):
    def decorator(fn: CheckFn) -> CheckFn:
        fn.module = module
        CHECKS.append(fn)
        return fn
    return decorator


def _result(name: str, module: str, measured: float, threshold: float, passed: bool, detail: str = "") -> PropertyResult:
    return PropertyResult(name=name, module=module, passed=bool(passed),
                          measured=float(measured), threshold=float(threshold), detail=detail)


class VerifyContext:
    """Shared, lazily computed inputs: one decomposition or trajectory serves several properties."""

    def __init__(self, config: RunConfig):
        self.seed = config.seed
        self.model_cfg: ETConfig = config.model or ETConfig.baseline()
        self.spin: SpinSection = config.spin or SpinSection()
        self._scenarios: Dict[str, SpinTrajectory] = {}

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    @cached_property
    def sequential(self):
        """Independent-channel preset: model, trajectory, populations and fitted reactant rate."""
        model = et_model.build_model(ETConfig.sequential())
        traj = et_model.propagate_exact(model)
        pops = et_model.populations(traj)
        k_fit = et_model.fit_decay_rate(traj.times, pops.P_R, model.config.fit_window)
        return model, traj, pops, k_fit

    @cached_property
    def model(self) -> et_model.ETModel:
        return et_model.build_model(self.model_cfg)

    @cached_property
    def trajectory(self) -> et_model.WaveTrajectory:
        return et_model.propagate_exact(self.model)

    def weak_model(self, omit_below: int = 0) -> et_model.ETModel:
        cfg = ETConfig(n_intermediate=200, resonant_flag=False, lam=1e-4, g=1e-4, t_max=3.0,
                       omit_below=omit_below)
        return et_model.build_model(cfg)

    @cached_property
    def weak_symmetric(self) -> et_model.ETModel:
        return self.weak_model()

    @cached_property
    def weak_asymmetric(self) -> et_model.ETModel:
        return self.weak_model(omit_below=1)

    @cached_property
    def weak_t_grid(self) -> np.ndarray:
        return np.linspace(0.5, 3.0, 6)

    @cached_property
    def symmetric_report(self) -> perturbation.PerturbationReport:
        return perturbation.perturbative_vs_exact(self.weak_symmetric, self.weak_t_grid)

    @cached_property
    def asymmetric_report(self) -> perturbation.PerturbationReport:
        return perturbation.perturbative_vs_exact(self.weak_asymmetric, self.weak_t_grid)

    @property
    def k_S(self) -> float:
        return self.spin.k_S if self.spin.k_S > 0 else 1.0

    @cached_property
    def scenario_params(self) -> RPParams:
        return RPParams(k_S=self.k_S, k_T=0.0)

    @cached_property
    def scenario_rho0(self) -> np.ndarray:
        return spin_master.initial_state(InitialState.COHERENT)

    @cached_property
    def scenario_dt(self) -> float:
        return min(self.spin.dt, 1e-3 / self.k_S)

    def scenario(self, spec: MasterEquationSpec) -> SpinTrajectory:
        if spec.label not in self._scenarios:
            self._scenarios[spec.label] = spin_master.evolve(spec, self.scenario_params, self.scenario_rho0,
                                                   20.0 / self.k_S, self.scenario_dt)
        return self._scenarios[spec.label]

    def sample_at(self, traj: SpinTrajectory, t: float) -> int:
        return int(np.argmin(np.abs(traj.times - t)))


# --- linalg-core ---

@check("linalg-core")
def eigh_reconstruction(ctx: VerifyContext) -> PropertyResult:
    rng = ctx.rng(1)
    worst, unitarity = 0.0, 0.0
    for dim in (10, 50, 200):
        H = random_hermitian(dim, rng)
        w, U = eigh(H)
        worst = max(worst, float(np.max(np.abs((U * w) @ U.conj().T - H)) / np.max(np.abs(H))))
        unitarity = max(unitarity, float(np.max(np.abs(U.conj().T @ U - np.eye(dim)))))
    return _result("eigh_reconstruction", "linalg-core", worst, 1e-9,
                   worst <= 1e-9 and unitarity <= 1e-10, f"max |U^dag U - I| = {unitarity:.2e}")


@check("linalg-core")
def propagation_unitarity(ctx: VerifyContext) -> PropertyResult:
    rng = ctx.rng(2)
    norm_dev, energy_dev = 0.0, 0.0
    for _ in range(1000):
        H = random_hermitian(6, rng)
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        psi_t = propagate(H, psi, rng.uniform(0.0, 10.0))
        norm_dev = max(norm_dev, abs(np.linalg.norm(psi_t) - 1.0))
        e0 = np.vdot(psi, H @ psi).real
        e1 = np.vdot(psi_t, H @ psi_t).real
        energy_dev = max(energy_dev, abs(e1 - e0) / np.max(np.abs(H)))
    return _result("propagation_unitarity", "linalg-core", norm_dev, 1e-10,
                   norm_dev <= 1e-10 and energy_dev <= 1e-10, f"relative energy drift {energy_dev:.2e}")


@check("linalg-core")
def entropy_bounds(ctx: VerifyContext) -> PropertyResult:
    rng = ctx.rng(3)
    violations = 0
    for n in range(200):
        dim = 2 + n % 5
        S = von_neumann_entropy(random_density_matrix(dim, rng))
        if not 0.0 <= S <= np.log(dim):
            violations += 1
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        if von_neumann_entropy(np.outer(psi, psi.conj())) != 0.0:
            violations += 1
    return _result("entropy_bounds", "linalg-core", violations, 0, violations == 0)


def _decay_error(dt: float, t_end: float = 2.0) -> float:
    out = rk4_evolve(lambda r: -r, np.array([[1.0 + 0j]]), dt, int(round(t_end / dt)))
    return abs(out[-1, 0, 0].real - np.exp(-t_end))


@check("linalg-core")
def rk4_order(ctx: VerifyContext) -> PropertyResult:
    ratio = _decay_error(0.2) / _decay_error(0.1)
    return _result("rk4_order", "linalg-core", ratio, 14.0, ratio >= 14.0, "error ratio when dt is halved")


# --- et-model ---

@check("et-model")
def golden_rule_rate(ctx: VerifyContext) -> PropertyResult:
    cfg = ctx.model_cfg.model_copy(update={"g": 0.0})
    model = et_model.build_model(cfg)
    traj = et_model.propagate_exact(model)
    k, _ = et_model.golden_rule_rates(model)
    k_fit = et_model.fit_decay_rate(traj.times, et_model.populations(traj).P_R, cfg.fit_window)
    rel = abs(k_fit / k - 1.0)
    return _result("golden_rule_rate", "et-model", rel, 0.05, rel <= 0.05,
                   f"k_fitted={k_fit:.6f}, k_golden={k:.6f} (decay channel closed)")


@check("et-model")
def shared_continuum_suppression(ctx: VerifyContext) -> PropertyResult:
    model = et_model.build_model(ETConfig.baseline())
    traj = et_model.propagate_exact(model)
    k, _ = et_model.golden_rule_rates(model)
    k_fit = et_model.fit_decay_rate(traj.times, et_model.populations(traj).P_R, model.config.fit_window)
    ratio = k_fit / k
    return _result("shared_continuum_suppression", "et-model", ratio, 0.25, ratio < 0.25,
                   f"k_fitted={k_fit:.6f}, predicted {et_model.effective_reactant_rate(model):.6f}")


@check("et-model")
def two_step_kinetics(ctx: VerifyContext) -> PropertyResult:
    model, traj, pops, k_fit = ctx.sequential
    _, Gamma = et_model.golden_rule_rates(model)
    mask = traj.times <= 50.0
    _, _, P_P = et_model.classical_two_step(k_fit, Gamma, traj.times[mask])
    rms = float(np.sqrt(np.mean((pops.P_P[mask] - P_P) ** 2)))
    return _result("two_step_kinetics", "et-model", rms, 0.02, rms <= 0.02,
                   f"k_fitted={k_fit:.5f}, Gamma={Gamma:.5f}")


@check("et-model")
def broadened_reactant_rate(ctx: VerifyContext) -> PropertyResult:
    model, _, _, k_fit = ctx.sequential
    predicted = et_model.effective_reactant_rate(model)
    rel = abs(k_fit / predicted - 1.0)
    return _result("broadened_reactant_rate", "et-model", rel, 0.10, rel <= 0.10,
                   f"k_fitted={k_fit:.5f}, predicted={predicted:.5f}")


@check("et-model")
def reduced_coherence_zero(ctx: VerifyContext) -> PropertyResult:
    rho_RP, _ = et_model.reduced_coherence(ctx.trajectory)
    worst = float(np.max(np.abs(rho_RP)))
    return _result("reduced_coherence_zero", "et-model", worst, 1e-15, worst <= 1e-15)


@check("et-model")
def population_conservation(ctx: VerifyContext) -> PropertyResult:
    pops = et_model.populations(ctx.trajectory)
    worst = float(np.max(np.abs(pops.P_R + pops.P_Pstar + pops.P_P - 1.0)))
    return _result("population_conservation", "et-model", worst, 1e-10, worst <= 1e-10)


@check("et-model")
def structural_sparsity(ctx: VerifyContext) -> PropertyResult:
    model = ctx.model
    upper = np.triu(model.hamiltonian, 1)
    expected = np.count_nonzero(model.tunneling) + np.count_nonzero(model.decay)
    direct = np.count_nonzero(model.hamiltonian[0, model.product_slice])
    mismatch = abs(np.count_nonzero(upper) - expected) + direct
    return _result("structural_sparsity", "et-model", mismatch, 0, mismatch == 0,
                   f"{expected} coupling pairs expected, {direct} direct R-product elements")


# --- perturbation ---

@check("perturbation")
def odd_function_cancellation(ctx: VerifyContext) -> PropertyResult:
    model = ctx.weak_symmetric
    inner, one_sided = perturbation.detuning_weighted_sum(model)
    rng = ctx.rng(4)
    worst = 0.0
    for k, t in zip(rng.integers(0, model.n_modes, 20), rng.uniform(0.5, 30.0, 20)):
        kernel = perturbation.phase_integral(model.mode_offsets[k], t)
        worst = max(worst, float(abs(kernel * inner[k]) / abs(kernel * one_sided[k])))
    return _result("odd_function_cancellation", "perturbation", worst, 1e-12, worst <= 1e-12)


@check("perturbation")
def deleted_state_residual(ctx: VerifyContext) -> PropertyResult:
    sym, asym = ctx.weak_symmetric, ctx.weak_asymmetric
    inner, _ = perturbation.detuning_weighted_sum(asym)
    i = int(np.argmax(np.where(sym.manifold_offsets < 0, sym.manifold_offsets, -np.inf)))
    deleted = sym.tunneling[i] * sym.decay[i] / sym.manifold_offsets[i]
    rel = float(np.max(np.abs(np.abs(inner) - np.abs(deleted)) / np.abs(deleted)))
    return _result("deleted_state_residual", "perturbation", rel, 1e-12, rel <= 1e-12)


@check("perturbation")
def resonant_limit(ctx: VerifyContext) -> PropertyResult:
    worst = 0.0
    for x in (0.01, 0.05, 0.1):
        for t in (1.0, 30.0):
            exact, limit = perturbation.resonant_amplitudes(1e-4, x / t, t)
            rel = float(abs(exact - limit) / abs(limit))
            worst = max(worst, rel / (x * x / 6.0 + 1e-9))
    return _result("resonant_limit", "perturbation", worst, 1.0, worst <= 1.0,
                   "relative error as a fraction of (delta t)^2/6")


@check("perturbation")
def phase_averaging(ctx: VerifyContext) -> PropertyResult:
    model = et_model.build_model(ETConfig.baseline())
    exact, _ = perturbation.second_order_resonant(model, 30.0)
    ratio = float(abs(np.sum(exact)) / np.sum(np.abs(exact)))
    return _result("phase_averaging", "perturbation", ratio, 0.05, ratio < 0.05)


@check("perturbation")
def coherent_residual_suppressed(ctx: VerifyContext) -> PropertyResult:
    scale = float(np.max(ctx.asymmetric_report.max_coherent))
    ratio = float(np.max(ctx.symmetric_report.max_coherent_residual)) / scale
    return _result("coherent_residual_suppressed", "perturbation", ratio, 0.1, ratio <= 0.1,
                   "symmetric residual relative to the asymmetric coherent scale")


@check("perturbation")
def asymmetric_coherent_amplitude(ctx: VerifyContext) -> PropertyResult:
    report = ctx.asymmetric_report
    rel = float(np.max(report.max_deviation_full) / np.max(report.max_coherent))
    return _result("asymmetric_coherent_amplitude", "perturbation", rel, 0.1, rel <= 0.1)


@check("perturbation")
def full_second_order(ctx: VerifyContext) -> PropertyResult:
    worst = max(float(np.max(r.max_deviation_full) / np.max(r.max_exact))
                for r in (ctx.symmetric_report, ctx.asymmetric_report))
    return _result("full_second_order", "perturbation", worst, 0.01, worst <= 0.01)


# --- spin-master ---

@check("spin-master")
def haberkorn_zero_entropy(ctx: VerifyContext) -> PropertyResult:
    worst = float(np.max(spin_master.entropy_series(ctx.scenario(HABERKORN))))
    return _result("haberkorn_zero_entropy", "spin-master", worst, 1e-9, worst <= 1e-9)


@check("spin-master")
def jones_hore_entropy(ctx: VerifyContext) -> PropertyResult:
    traj = ctx.scenario(JONES_HORE)
    S = spin_master.entropy_series(traj)
    at_one = float(S[ctx.sample_at(traj, 1.0 / ctx.k_S)])
    dev = abs(at_one - JONES_HORE_ENTROPY_AT_ONE)
    passed = dev <= 1e-3 and np.max(S) > 0.4 and S[-1] < 1e-3
    return _result("jones_hore_entropy", "spin-master", dev, 1e-3, passed,
                   f"S(k_S t=1)={at_one:.5f}, max={np.max(S):.5f}, final={S[-1]:.2e}")


@check("spin-master")
def stand_in_entropy_shape(ctx: VerifyContext) -> PropertyResult:
    S = spin_master.entropy_series(ctx.scenario(STAND_IN))
    peak = float(np.max(S))
    return _result("stand_in_entropy_shape", "spin-master", peak, 0.05, peak > 0.05 and S[-1] < 1e-3,
                   f"final={S[-1]:.2e}")


@check("spin-master")
def closed_form_agreement(ctx: VerifyContext) -> PropertyResult:
    worst = 0.0
    for spec in (HABERKORN, JONES_HORE):
        traj = ctx.scenario(spec)
        for t, rho in zip(traj.times, traj.states):
            if spec is HABERKORN:
                ref = spin_master.closed_form_haberkorn(ctx.scenario_params, ctx.scenario_rho0, t)
            else:
                ref = spin_master.closed_form(spec, ctx.scenario_params, ctx.scenario_rho0, t)
            worst = max(worst, float(np.max(np.abs(rho - ref))))
    return _result("closed_form_agreement", "spin-master", worst, 1e-8, worst <= 1e-8)


@check("spin-master")
def spin_rk4_order(ctx: VerifyContext) -> PropertyResult:
    params, rho0 = ctx.scenario_params, ctx.scenario_rho0
    t_end = 2.0 / ctx.k_S
    ref = spin_master.closed_form(JONES_HORE, params, rho0, t_end)
    errors = []
    for dt in (0.2 / ctx.k_S, 0.1 / ctx.k_S):
        out = rk4_evolve(spin_master.make_deriv(JONES_HORE, params), rho0, dt, int(round(t_end / dt)))
        errors.append(float(np.max(np.abs(out[-1] - ref))))
    ratio = errors[0] / errors[1]
    return _result("spin_rk4_order", "spin-master", ratio, 14.0, ratio >= 14.0)


@check("spin-master")
def superoperator_identity(ctx: VerifyContext) -> PropertyResult:
    rng = ctx.rng(5)
    k_S, k_T = ctx.k_S, max(ctx.spin.k_T, 0.5 * ctx.k_S)
    params = RPParams.from_matrix(k_S, k_T, random_hermitian(4, rng))
    eta_one = MasterEquationSpec(variant=MasterEquationVariant.DEPHASING, eta=1.0)
    worst = 0.0
    for E in hermitian_basis(4):
        jh = spin_master.liouvillian(JONES_HORE, params, E)
        hab = spin_master.liouvillian(HABERKORN, params, E)
        worst = max(worst,
                    float(np.max(np.abs(jh - spin_master.liouvillian(eta_one, params, E)))),
                    float(np.max(np.abs(jh - hab + 0.5 * (k_S + k_T) * spin_master.dephasing_superoperator(E)))))
    return _result("superoperator_identity", "spin-master", worst, 1e-12, worst <= 1e-12)


@check("spin-master")
def trace_flow(ctx: VerifyContext) -> PropertyResult:
    worst = 0.0
    for spec in (HABERKORN, JONES_HORE, STAND_IN):
        traj = ctx.scenario(spec)
        thinned = SpinTrajectory(times=traj.times[::50], states=traj.states[::50], label=traj.label)
        worst = max(worst, spin_master.trace_flow_residual(spec, ctx.scenario_params, thinned))
    threshold = 1e-8 * ctx.k_S
    return _result("trace_flow", "spin-master", worst, threshold, worst <= threshold)


@check("spin-master")
def yield_conservation(ctx: VerifyContext) -> PropertyResult:
    worst, final_dev = 0.0, 0.0
    for spec in (HABERKORN, JONES_HORE, STAND_IN):
        Y_S, Y_T, survival = spin_master.yields(ctx.scenario(spec), ctx.scenario_params)
        worst = max(worst, float(np.max(np.abs(Y_S + Y_T + survival - 1.0))))
        final_dev = max(final_dev, abs(Y_S[-1] - 0.5), abs(survival[-1] - 0.5))
    return _result("yield_conservation", "spin-master", worst, 1e-6, worst <= 1e-6 and final_dev <= 1e-3,
                   f"max |Y_S(end) - 1/2|, |survival(end) - 1/2| = {final_dev:.2e}")


@check("spin-master")
def dephasing_positivity(ctx: VerifyContext) -> PropertyResult:
    rng = ctx.rng(6)
    spec = MasterEquationSpec(variant=MasterEquationVariant.DEPHASING, eta=0.5)
    params = RPParams.from_matrix(1.0, 0.5, 0.5 * random_hermitian(4, rng))
    dt = spin_master.max_stable_step(params)
    lowest = np.inf
    for _ in range(100):
        traj = spin_master.evolve(spec, params, random_density_matrix(4, rng), 1.0, dt)
        lowest = min(lowest, float(np.min(np.linalg.eigvalsh(traj.states))))
    return _result("dephasing_positivity", "spin-master", lowest, -1e-8, lowest >= -1e-8)


@check("spin-master")
def purity_dichotomy(ctx: VerifyContext) -> PropertyResult:
    hab = spin_master.purity_series(ctx.scenario(HABERKORN))
    stand_in_traj = ctx.scenario(STAND_IN)
    stand_in = spin_master.purity_series(stand_in_traj)
    hab_dev = float(np.max(np.abs(hab - 1.0)))
    at_one = float(stand_in[ctx.sample_at(stand_in_traj, 1.0 / ctx.k_S)])
    passed = hab_dev <= 1e-8 and at_one < 1.0 - 1e-4 and stand_in[-1] > 1.0 - 1e-3
    return _result("purity_dichotomy", "spin-master", hab_dev, 1e-8, passed,
                   f"stand-in purity {at_one:.5f} at k_S t=1, {stand_in[-1]:.6f} at the end")


def run_checks(config: RunConfig) -> List[PropertyResult]:
    ctx = VerifyContext(config)
    results = []
    for fn in CHECKS:
        name = fn.__name__
        try:
            result = fn(ctx)
        except RPLabError as e:
            logger.error(f"Property {name} raised {type(e).__name__}: {e}")
            result = PropertyResult(name=name, module=fn.module, passed=False, measured=None, threshold=None,
                                    detail=f"{type(e).__name__}: {e}")
        except Exception as e:
            logger.error(f"Property {name} crashed with {type(e).__name__}: {e}", exc_info=True)
            result = PropertyResult(name=name, module=fn.module, passed=False, measured=None, threshold=None,
                                    detail=f"{type(e).__name__}: {e}")
        status = "pass" if result.passed else "FAIL"
        logger.info(f"[{status}] {result.name}: measured={result.measured} threshold={result.threshold}")
        results.append(result)
    return results


def run_verify(config: RunConfig, out_dir: Path, echo: Dict[str, Any]) -> Dict[str, Any]:
    """Run the suite and write verify_report.json; the report lists every failing property."""
    logger.info(f"Starting verify experiment ({len(CHECKS)} properties, seed={config.seed})")
    results = run_checks(config)
    failures = [r.name for r in results if not r.passed]
    report = {
        "version": __version__,
        "seed": config.seed,
        "phase_convention": perturbation.PHASE_CONVENTION,
        "passed": not failures,
        "failures": failures,
        "properties": [dict(asdict(r), status="pass" if r.passed else "fail") for r in results],
    }
    write_json(report, out_dir / "verify_report.json")
    if failures:
        logger.error(f"Verification failed for {len(failures)} properties: {', '.join(failures)}")
    else:
        logger.info("verify completed successfully: all properties pass")
    return report
