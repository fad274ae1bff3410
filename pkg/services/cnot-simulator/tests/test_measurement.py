import cmath
import math

import numpy as np
import pytest

from circuits import GateConfig, basis_input, cnot_apply, product_input
from core_state import JointState, JonesVector, Polarization, normalized, overlap_modulus_sq, scale, squared_norm
from exceptions import ConfigurationError, EmptyOutcomeError, FitError, PreconditionError
from measurement import (
    POL_PAIRS,
    CoincidenceWindow,
    FringeFit,
    analyzer_outcomes,
    analyzer_project,
    binomial_stderr,
    coincidence_postselect,
    concurrence,
    fidelity,
    fidelity_from_state,
    fidelity_stderr,
    fit_fringe,
    fringe_scan,
    ideal_entangled_state,
    polarization_histogram,
    postselected_output,
    pzt_volts_to_phase,
    state_concurrence,
    truth_table,
    two_qubit_amplitudes,
)

H, V = Polarization.H, Polarization.V

CNOT_TABLE = np.array([
    [0.25, 0.0, 0.0, 0.0],
    [0.0, 0.25, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.25],
    [0.0, 0.0, 0.25, 0.0],
])


def test_coincidence_window_is_strict():
    w = CoincidenceWindow(10)
    assert w.accepts(9) and w.accepts(-9)
    assert not w.accepts(10)
    assert w.seconds == pytest.approx(1e-9)
    with pytest.raises(ConfigurationError):
        CoincidenceWindow(0)


def test_truth_table_is_cnot(gate, window):
    table = truth_table(gate, window)
    np.testing.assert_allclose(table.probabilities, CNOT_TABLE, atol=1e-12)
    np.testing.assert_allclose(table.success_probabilities, [0.25] * 4, atol=1e-12)


def test_truth_table_frame(gate, window):
    frame = truth_table(gate, window).to_frame()
    assert list(frame.columns) == ["input", "output", "probability"]
    assert len(frame) == 16
    row = frame[(frame.input == "VH") & (frame.output == "VV")]
    assert row.probability.iloc[0] == pytest.approx(0.25)


def test_truth_table_with_window_at_least_delay(gate):
    table = truth_table(gate, CoincidenceWindow(20))
    np.testing.assert_allclose(table.probabilities[0], [0.25, 0.25, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(table.success_probabilities, [0.5] * 4, atol=1e-12)


@pytest.mark.parametrize("control", [H, V])
@pytest.mark.parametrize("target", [H, V])
def test_kept_and_rejected_probability_sum_to_one(gate, window, control, target):
    out = cnot_apply(basis_input(control, target, gate), gate)
    kept, p = coincidence_postselect(out, gate.detector_port_1, gate.detector_port_2, window)

    rejected = sum(
        abs(a) ** 2 for (m1, m2), a in out.items()
        if (m1, m2) not in kept.amplitudes
    )
    assert p == pytest.approx(0.25, abs=1e-12)
    assert p + rejected == pytest.approx(1.0, abs=1e-12)


def test_postselect_requires_normalized_state(gate, window):
    out = cnot_apply(basis_input(H, H, gate), gate)
    with pytest.raises(PreconditionError):
        coincidence_postselect(scale(out, 0.5), 0, 1, window)


def test_superposition_success_probability(gate, window, diagonal_jones):
    _, success = postselected_output(gate, window, diagonal_jones)
    assert success == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("theta", [0.0, math.pi / 3, math.pi / 2, math.pi, 3 * math.pi / 2, 5.9])
def test_postselected_state_is_entangled(window, diagonal_jones, theta):
    cfg = GateConfig(theta1=theta)
    kept, _ = postselected_output(cfg, window, diagonal_jones)
    assert overlap_modulus_sq(normalized(kept), ideal_entangled_state(cfg)) == pytest.approx(1.0, abs=1e-12)


def test_histogram_of_entangled_output(gate, window):
    kept, _ = postselected_output(gate, window)
    hist = polarization_histogram(kept)
    assert hist == pytest.approx({"HH": 0.5, "HV": 0.0, "VH": 0.0, "VV": 0.5}, abs=1e-12)


def test_histogram_of_empty_state_raises():
    with pytest.raises(EmptyOutcomeError):
        polarization_histogram(JointState({}, {0}, {1}))


def test_two_qubit_amplitudes_follow_input(window):
    cfg = GateConfig(theta2=0.4)
    jones = JonesVector.from_unnormalized(0.6, 0.8)
    kept, _ = postselected_output(cfg, window, jones)
    amps = two_qubit_amplitudes(kept)
    np.testing.assert_allclose(amps, [0.3, 0.0, 0.0, 0.4 * np.exp(0.4j)], atol=1e-12)


@pytest.mark.parametrize("alpha, beta, expected", [
    (1.0, 0.0, 0.0),
    (math.sqrt(0.9), math.sqrt(0.1), 0.6),
    (1 / math.sqrt(2), 1 / math.sqrt(2), 1.0),
])
def test_state_concurrence(gate, window, alpha, beta, expected):
    kept, _ = postselected_output(gate, window, JonesVector(alpha, beta))
    assert state_concurrence(kept) == pytest.approx(expected, abs=1e-12)


def test_concurrence_of_product_and_bell_states():
    assert concurrence([1, 0, 0, 0]) == 0.0
    r = 1 / math.sqrt(2)
    assert concurrence([r, 0, 0, r]) == pytest.approx(1.0)
    assert concurrence([0.5, 0.5, 0.5, 0.5]) == pytest.approx(0.0)


def test_analyzer_outcomes_are_complete(gate, window):
    kept, success = postselected_output(gate.with_theta(1.1), window)
    outcomes = analyzer_outcomes(kept, 45.0, 45.0)
    assert sum(outcomes.values()) == pytest.approx(success, abs=1e-12)
    assert outcomes["++"] == pytest.approx((1 + math.cos(1.1)) / 16, abs=1e-12)
    assert outcomes["+-"] == pytest.approx((1 - math.cos(1.1)) / 16, abs=1e-12)


def test_analyzer_at_zero_degrees_selects_hh(gate, window):
    kept, _ = postselected_output(gate, window)
    assert analyzer_project(kept, 0.0, 0.0) == pytest.approx(0.125, abs=1e-12)
    assert analyzer_project(kept, 90.0, 90.0) == pytest.approx(0.125, abs=1e-12)
    assert analyzer_project(kept, 0.0, 90.0) == pytest.approx(0.0, abs=1e-12)


def test_fringe_scan_closed_form(gate, window):
    thetas = np.linspace(0.0, 2 * math.pi, 25)
    samples = fringe_scan(gate, thetas, window)
    expected = (1 + np.cos(thetas)) / 16
    np.testing.assert_allclose([p for _, p in samples], expected, atol=1e-12)

    fit = fit_fringe(samples)
    assert fit.visibility == pytest.approx(1.0, abs=1e-9)
    assert fit.amplitude == pytest.approx(1 / 16, abs=1e-12)
    assert fit.phase == pytest.approx(0.0, abs=1e-9)


def test_fit_fringe_recovers_parameters():
    truth = FringeFit(amplitude=800.0, visibility=0.44, phase=0.7)
    thetas = np.linspace(0.0, 4 * math.pi, 40)
    fit = fit_fringe(list(zip(thetas, truth.model(thetas))))
    assert fit.amplitude == pytest.approx(800.0)
    assert fit.visibility == pytest.approx(0.44)
    assert fit.phase == pytest.approx(0.7)
    assert fit.visibility_stderr == pytest.approx(0.0, abs=1e-9)


def test_fit_fringe_rejects_degenerate_input():
    with pytest.raises(FitError):
        fit_fringe([(0.0, 1.0)])
    with pytest.raises(FitError):
        fit_fringe([(0.0, 1.0), (0.0, 1.1), (2 * math.pi, 0.9)])
    with pytest.raises(FitError):
        fit_fringe([(0.0, 1.0), (0.5, 0.9), (1.0, 0.8)])
    with pytest.raises(FitError):
        fit_fringe([(t, -1.0) for t in np.linspace(0, 2 * math.pi, 8, endpoint=False)])


def test_fit_without_residual_freedom_has_nan_stderr():
    fit = fit_fringe([(0.0, 2.0), (2 * math.pi / 3, 0.5), (4 * math.pi / 3, 0.5)])
    assert math.isnan(fit.visibility_stderr)
    assert fit.visibility == pytest.approx(1.0)


def test_fidelity():
    assert fidelity(0.44, 0.41, 0.44) == pytest.approx(0.645)
    assert fidelity(0.5, 0.5, 1.0) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        fidelity(0.5, 0.5, 1.2)


def test_fidelity_from_ideal_state(gate, window):
    kept, _ = postselected_output(gate, window)
    assert fidelity_from_state(kept, 1.0) == pytest.approx(1.0)


def test_pzt_volts_to_phase():
    assert pzt_volts_to_phase(840 / 69) == pytest.approx(2 * math.pi, abs=1e-6)
    assert pzt_volts_to_phase(0.0) == 0.0
    with pytest.raises(PreconditionError):
        pzt_volts_to_phase(1.0, 69.0, 0.0)


def test_basis_outputs_are_product_states(gate, window):
    for control, target in POL_PAIRS:
        out = cnot_apply(product_input(JonesVector.of(control), target, gate), gate)
        kept, _ = coincidence_postselect(out, 0, 1, window)
        assert state_concurrence(kept) == pytest.approx(0.0, abs=1e-12)
        assert squared_norm(kept) == pytest.approx(0.25, abs=1e-12)


def test_histogram_values_are_real_floats(gate, window, diagonal_jones):
    kept, _ = postselected_output(gate.with_theta(0.9), window, diagonal_jones)
    hist = polarization_histogram(kept)
    assert all(type(v) is float for v in hist.values())
    assert sum(hist.values()) == pytest.approx(1.0)


@pytest.mark.parametrize("delta", [0.0, 0.3, -1.2, math.pi, 4.0])
def test_fringe_depends_only_on_phase_sum(window, delta):
    thetas = np.linspace(0.0, 2 * math.pi, 9)
    base = GateConfig(theta1=0.4, theta2=0.2)
    shifted = GateConfig(theta1=0.4 + delta, theta2=0.2 - delta)

    for (_, p), (_, q) in zip(fringe_scan(base, thetas, window), fringe_scan(shifted, thetas, window)):
        assert p == pytest.approx(q, abs=1e-12)

    kept, _ = postselected_output(base, window)
    kept_shifted, _ = postselected_output(shifted, window)
    assert analyzer_project(kept, 45.0, 45.0) == pytest.approx(analyzer_project(kept_shifted, 45.0, 45.0), abs=1e-12)


@pytest.mark.parametrize("p_hh, p_vv", [(0.0, 0.0), (0.2, 0.3), (0.44, 0.41), (0.5, 0.5)])
def test_fidelity_is_monotone_in_each_argument(p_hh, p_vv):
    step = 0.05
    for v in (0.0, 0.4, 0.9):
        f = fidelity(p_hh, p_vv, v)
        assert fidelity(p_hh + step, p_vv, v) > f
        assert fidelity(p_hh, p_vv + step, v) > f
        assert fidelity(p_hh, p_vv, v + step) > f
        assert 0.0 <= f <= 1.0


@pytest.mark.parametrize("visibility", [0.0, 0.3, 0.7, 1.0])
@pytest.mark.parametrize("phase", [-3.0, -math.pi / 2, 0.0, 1.0, math.pi])
def test_fit_fringe_recovers_grid(visibility, phase):
    truth = FringeFit(amplitude=50.0, visibility=visibility, phase=phase)
    thetas = np.linspace(0.0, 2 * math.pi, 25)
    fit = fit_fringe(list(zip(thetas, truth.model(thetas))))

    assert fit.amplitude == pytest.approx(50.0, abs=1e-9)
    assert fit.visibility == pytest.approx(visibility, abs=1e-9)
    assert -math.pi < fit.phase <= math.pi
    if visibility > 0.0:
        # phases compared on the circle
        assert cmath.exp(1j * fit.phase) == pytest.approx(cmath.exp(1j * phase), abs=1e-9)


@pytest.mark.parametrize("alpha", np.linspace(0.0, 1.0, 11))
def test_concurrence_is_twice_alpha_beta(gate, window, alpha):
    beta = math.sqrt(1.0 - alpha ** 2)
    kept, _ = postselected_output(gate.with_theta(0.6), window, JonesVector(alpha, beta * np.exp(0.3j)))
    assert state_concurrence(kept) == pytest.approx(2 * alpha * beta, abs=1e-12)


def test_binomial_stderr():
    assert binomial_stderr(0.5, 100) == pytest.approx(0.05)
    assert binomial_stderr(0.0, 100) == 0.0
    assert binomial_stderr(1.0, 100) == 0.0
    assert math.isnan(binomial_stderr(0.5, 0))


def test_fidelity_stderr():
    # P_HH + P_VV = 1 carries no binomial spread, only the visibility error remains
    assert fidelity_stderr(0.5, 0.5, 100, 0.0) == 0.0
    assert fidelity_stderr(0.5, 0.5, 100, 0.02) == pytest.approx(0.01)
    assert fidelity_stderr(0.25, 0.25, 100, 0.0) == pytest.approx(0.025)
    assert fidelity_stderr(0.25, 0.25, 100, 0.1) == pytest.approx(0.5 * math.sqrt(0.05 ** 2 + 0.1 ** 2))
    assert math.isnan(fidelity_stderr(0.5, 0.5, 0, 0.0))
