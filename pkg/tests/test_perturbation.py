import dataclasses

import numpy as np
import pytest

from app.errors import (
    NoResonantState,
    RegimeViolation,
    ResonantDenominator,
    StructuralViolation,
)
from app.models.et import ETConfig
from app.physics import et_model, perturbation


def weak_config(**overrides) -> ETConfig:
    values = dict(n_intermediate=200, resonant_flag=False, lam=1e-4, g=1e-4, t_max=3.0)
    values.update(overrides)
    return ETConfig(**values)


@pytest.fixture(scope="module")
def weak_symmetric():
    return et_model.build_model(weak_config())


@pytest.fixture(scope="module")
def weak_asymmetric():
    return et_model.build_model(weak_config(omit_below=1))


@pytest.fixture(scope="module")
def t_grid():
    return np.linspace(0.5, 3.0, 6)


class TestKernels:
    def test_sinc(self):
        assert perturbation.sinc(0.0) == 1.0
        assert perturbation.sinc(np.pi) == pytest.approx(0.0, abs=1e-15)
        assert perturbation.sinc(1.0) == pytest.approx(np.sin(1.0))

    def test_phase_integral_limit(self):
        assert perturbation.phase_integral(0.0, 2.5) == pytest.approx(2.5j)

    @pytest.mark.parametrize("x", [-1.3, 0.3, 4.0])
    def test_phase_integral_closed_form(self, x):
        t = 2.0
        assert perturbation.phase_integral(x, t) == pytest.approx((np.exp(1j * x * t) - 1) / x, rel=1e-13)

    @pytest.mark.parametrize("x", [0.0, 1e-7, 0.7, -2.0])
    def test_ramp_integral_matches_quadrature(self, x):
        t = 2.0
        s = np.linspace(0.0, t, 20001)
        y = s * np.exp(1j * x * s)
        quad = np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(s))
        assert perturbation.ramp_integral(x, t) == pytest.approx(quad, rel=1e-6)

    def test_result_validation(self):
        perturbation.PerturbationResult(order=2, target="P,1", amplitude=1e-6 + 0j, t=1.0)
        with pytest.raises(ValueError):
            perturbation.PerturbationResult(order=3, target="P,1", amplitude=0j, t=1.0)
        with pytest.raises(ValueError):
            perturbation.PerturbationResult(order=1, target="P*_1", amplitude=complex(np.nan, 0), t=1.0)


class TestFirstOrder:
    def test_intermediate_matches_exact_weak_coupling(self):
        model = et_model.build_model(ETConfig(n_intermediate=1, n_modes=1, resonant_flag=False,
                                              lam=1e-4, g=0.0, t_max=2.0))
        t = 2.0
        traj = et_model.propagate_exact(model, np.array([t]))
        exact = traj.c_Pstar[0, 0] * np.exp(1j * model.energies[1] * t)
        predicted = perturbation.first_order_intermediate(model, 0, t)
        assert predicted == pytest.approx(exact, rel=1e-3)
        assert abs(predicted) == pytest.approx(2e-4 * abs(np.sin(0.5 * t)), rel=1e-12)

    def test_resonant_intermediate(self, baseline_model):
        i = int(np.flatnonzero(baseline_model.manifold_offsets == 0.0)[0])
        with pytest.raises(ResonantDenominator):
            perturbation.first_order_intermediate(baseline_model, i, 1.0)
        amp = perturbation.first_order_intermediate(baseline_model, i, 3.0, resonant_limit=True)
        assert amp == pytest.approx(-0.03j)

    def test_product_vanishes(self, weak_symmetric):
        np.testing.assert_array_equal(perturbation.first_order_product(weak_symmetric, 2.0), 0.0)

    def test_direct_coupling_detected(self, weak_symmetric):
        H = weak_symmetric.hamiltonian.copy()
        H[0, -1] = H[-1, 0] = 1e-3
        broken = dataclasses.replace(weak_symmetric, hamiltonian=H)
        with pytest.raises(StructuralViolation):
            perturbation.first_order_product(broken, 2.0)


class TestDetuningSum:
    def test_symmetric_manifold_cancels(self, weak_symmetric):
        inner, one_sided = perturbation.detuning_weighted_sum(weak_symmetric)
        assert np.max(np.abs(inner)) <= 1e-12 * np.max(np.abs(one_sided))
        assert np.max(np.abs(one_sided)) > 0.0

    def test_deleted_state_leaves_its_partner(self, weak_symmetric, weak_asymmetric):
        inner, _ = perturbation.detuning_weighted_sum(weak_asymmetric)
        offsets = weak_symmetric.manifold_offsets
        a = -np.max(offsets[offsets < 0])
        np.testing.assert_allclose(inner, 1e-8 / a, rtol=1e-12)

    def test_resonant_state_rejected(self, baseline_model):
        with pytest.raises(ResonantDenominator):
            perturbation.detuning_weighted_sum(baseline_model)

    def test_coherent_amplitude_is_bilinear(self, weak_asymmetric):
        doubled = et_model.build_model(weak_config(omit_below=1, lam=2e-4, g=3e-4))
        np.testing.assert_allclose(perturbation.second_order_coherent(doubled, 2.0),
                                   6.0 * perturbation.second_order_coherent(weak_asymmetric, 2.0), rtol=1e-12)

    def test_single_mode_accessor(self, weak_asymmetric):
        full = perturbation.second_order_coherent(weak_asymmetric, 1.5)
        assert perturbation.second_order_product(weak_asymmetric, 7, 1.5) == full[7]


class TestResonant:
    def test_no_resonant_state(self, weak_symmetric):
        with pytest.raises(NoResonantState):
            perturbation.second_order_resonant(weak_symmetric, 1.0)

    def test_zero_detuning(self):
        exact, limit = perturbation.resonant_amplitudes(1e-4, 0.0, 4.0)
        assert exact == pytest.approx(-8e-4)
        assert limit == pytest.approx(-8e-4)

    @pytest.mark.parametrize("x", [0.01, 0.05, 0.1])
    @pytest.mark.parametrize("t", [1.0, 30.0])
    def test_small_detuning_limit(self, x, t):
        exact, limit = perturbation.resonant_amplitudes(1e-4, x / t, t)
        assert abs(exact - limit) / abs(limit) <= x * x / 6.0

    def test_phase_averaging_over_modes(self, baseline_model):
        exact, _ = perturbation.second_order_resonant(baseline_model, 30.0)
        assert abs(np.sum(exact)) / np.sum(np.abs(exact)) < 0.05


class TestPerturbativeVsExact:
    @pytest.fixture(scope="class")
    def reports(self, weak_symmetric, weak_asymmetric, t_grid):
        return (perturbation.perturbative_vs_exact(weak_symmetric, t_grid),
                perturbation.perturbative_vs_exact(weak_asymmetric, t_grid))

    def test_regime_guard(self, baseline_model):
        with pytest.raises(RegimeViolation):
            perturbation.perturbative_vs_exact(baseline_model, [10.0])

    def test_explicit_rate_overrides_guard(self, weak_symmetric):
        with pytest.raises(RegimeViolation):
            perturbation.perturbative_vs_exact(weak_symmetric, [3.0], rate=0.2)

    def test_full_second_order_matches_exact(self, reports):
        for report in reports:
            assert np.max(report.max_deviation_full) <= 0.01 * np.max(report.max_exact)

    def test_symmetric_residual_is_suppressed(self, reports):
        symmetric, asymmetric = reports
        assert np.max(symmetric.max_coherent_residual) <= 0.1 * np.max(asymmetric.max_coherent)

    def test_asymmetric_coherent_amplitude(self, reports):
        _, asymmetric = reports
        assert np.max(asymmetric.max_deviation_full) <= 0.1 * np.max(asymmetric.max_coherent)

    def test_real_transitions_dominate_symmetric_exact(self, reports):
        symmetric, _ = reports
        assert np.max(symmetric.max_deviation_coherent) > 0.5 * np.max(symmetric.max_exact)

    def test_report_serialization(self, reports, weak_symmetric, t_grid):
        data = reports[0].to_dict()
        assert data["phase_convention"] == perturbation.PHASE_CONVENTION
        assert data["t_grid"] == pytest.approx(list(t_grid))
        assert len(data["modes"]) == weak_symmetric.n_modes
        assert data["modes"][0]["mode"] == 1
        assert set(data["modes"][0]) >= {"delta_k", "max_exact", "max_deviation_full"}

    def test_final_coherent_amplitudes(self, reports, weak_asymmetric, t_grid):
        _, asymmetric = reports
        final = asymmetric.final_coherent
        assert len(final) == weak_asymmetric.n_modes
        assert all(r.order == 2 and r.t == t_grid[-1] for r in final)
        assert final[0].target == "P,1_1"
        expected = perturbation.second_order_product(weak_asymmetric, 0, t_grid[-1])
        assert final[0].amplitude == pytest.approx(expected, rel=1e-10)
        assert all(abs(r.amplitude) <= m * (1 + 1e-12) for r, m in zip(final, asymmetric.max_coherent))
        rows = asymmetric.to_dict()["final_coherent"]
        assert rows[0]["re"] == pytest.approx(expected.real, rel=1e-10)
