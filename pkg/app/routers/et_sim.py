import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from .. import __version__
from ..errors import DegenerateRates, NonPositiveData, NonUniformCoupling
from ..io import write_json, write_table
from ..models.et import ETConfig
from ..models.table import TimeSeriesTable
from ..physics.et_model import (
    build_model,
    classical_two_step,
    classical_two_step_confluent,
    effective_reactant_rate,
    fit_decay_rate,
    golden_rule_rates,
    populations,
    propagate_exact,
    reduced_coherence,
)
from ..physics.perturbation import PHASE_CONVENTION

logger = logging.getLogger(__name__)


def _classical_columns(k: Optional[float], Gamma: Optional[float], times: np.ndarray) -> Dict[str, np.ndarray]:
    if k is None or Gamma is None or k <= 0 or Gamma <= 0:
        logger.warning("Skipping classical kinetics columns: rates unavailable or zero")
        return {}
    try:
        P_R, P_Pstar, P_P = classical_two_step(k, Gamma, times)
    except DegenerateRates:
        logger.info("k equals Gamma, using the confluent two-step solution")
        P_R, P_Pstar, P_P = classical_two_step_confluent(k, times)
    return {"classical_P_R": P_R, "classical_P_Pstar": P_Pstar, "classical_P_P": P_P}


def run_et_sim(model_cfg: ETConfig, out_dir: Path, echo: Dict[str, Any]) -> Dict[str, Any]:
    """
    Exact propagation of one ET configuration.

    Writes populations.csv, amplitudes.csv and rates.json into out_dir and
    returns the rates summary.
    """
    logger.info("Starting et-sim experiment")
    model = build_model(model_cfg)
    traj = propagate_exact(model)
    pops = populations(traj)
    rho_RP, bound = reduced_coherence(traj)

    try:
        k_golden, Gamma = golden_rule_rates(model)
        k_effective = effective_reactant_rate(model)
    except NonUniformCoupling as e:
        logger.warning(f"Golden-rule rates unavailable: {e}")
        k_golden = Gamma = k_effective = None

    try:
        k_fitted = fit_decay_rate(traj.times, pops.P_R, model_cfg.fit_window, floor=model_cfg.fit_floor)
    except NonPositiveData as e:
        logger.warning(f"Could not fit the reactant decay: {e}")
        k_fitted = None

    metadata = {"version": __version__, "phase_convention": PHASE_CONVENTION, "config": echo}
    columns = {
        "t": traj.times,
        "P_R": pops.P_R,
        "P_Pstar": pops.P_Pstar,
        "P_P": pops.P_P,
        "coherence_bound": bound,
    }
    columns.update(_classical_columns(k_fitted, Gamma, traj.times))
    write_table(TimeSeriesTable.from_columns(columns, metadata), out_dir / "populations.csv")

    amplitudes = {
        "t": traj.times,
        "abs_c_R": np.abs(traj.c_R),
        "max_abs_c_Pstar": np.max(np.abs(traj.c_Pstar), axis=1),
        "max_abs_c_Pk": np.max(np.abs(traj.c_Pk), axis=1),
        "abs_rho_RP_reduced": np.abs(rho_RP),
    }
    write_table(TimeSeriesTable.from_columns(amplitudes, metadata), out_dir / "amplitudes.csv")

    rates = {
        "k_golden": k_golden,
        "Gamma_golden": Gamma,
        "k_effective": k_effective,
        "k_fitted": k_fitted,
        "fit_window": list(model_cfg.fit_window),
        "fit_floor": model_cfg.fit_floor,
        "dim": model.dim,
        "heisenberg_time": model.heisenberg_time,
        "max_abs_rho_RP_reduced": float(np.max(np.abs(rho_RP))),
    }
    write_json(rates, out_dir / "rates.json")
    logger.info(f"et-sim completed successfully: k_fitted={k_fitted}, k_golden={k_golden}, Gamma={Gamma}")
    return rates
