import cmath
import math

import numpy as np
import pytest

from core_state import Mode, Polarization, SinglePhotonState, squared_norm
from elements import (
    ElementAction,
    ElementKind,
    apply_bs,
    apply_delay,
    apply_hwp,
    apply_pbs,
    basis_window,
    compose,
    hwp_matrix,
    lift_to_matrix,
)
from exceptions import ConfigurationError, PreconditionError

H, V = Polarization.H, Polarization.V
R = 1 / math.sqrt(2)


@pytest.mark.parametrize("angle", [0.0, 10.0, 22.5, 45.0, 67.5, 133.0])
def test_hwp_matrix_is_unitary_hermitian(angle):
    m = hwp_matrix(angle)
    np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
    assert np.linalg.det(m).real == pytest.approx(-1.0)


def test_hwp_45_swaps_polarizations():
    np.testing.assert_allclose(hwp_matrix(45.0), [[0, 1], [1, 0]], atol=1e-12)
    np.testing.assert_allclose(hwp_matrix(0.0), [[1, 0], [0, -1]], atol=1e-12)


def test_apply_bs_splits_with_reflection_phase():
    out = apply_bs(SinglePhotonState.basis(Mode(0, H, 4)), 0, 1)
    assert out[Mode(0, H, 4)] == pytest.approx(R)
    assert out[Mode(1, H, 4)] == pytest.approx(1j * R)

    back = apply_bs(SinglePhotonState.basis(Mode(1, V)), 0, 1)
    assert back[Mode(0, V)] == pytest.approx(1j * R)
    assert back[Mode(1, V)] == pytest.approx(R)


def test_apply_bs_rejects_equal_ports():
    with pytest.raises(PreconditionError):
        apply_bs(SinglePhotonState.basis(Mode(0, H)), 2, 2)


def test_apply_pbs_routes_and_recombines():
    state = SinglePhotonState({Mode(0, H): 0.6, Mode(0, V): 0.8j})
    split = apply_pbs(state, 0, 10, 11)
    assert split[Mode(10, H)] == pytest.approx(0.6)
    assert split[Mode(11, V)] == pytest.approx(0.8j)
    assert split.ports() == frozenset({10, 11})

    assert dict(apply_pbs(split, 0, 10, 11).amplitudes) == dict(state.amplitudes)


def test_apply_pbs_leaves_other_modes():
    state = SinglePhotonState.basis(Mode(10, V))
    assert dict(apply_pbs(state, 0, 10, 11).amplitudes) == dict(state.amplitudes)


def test_apply_delay_shifts_and_phases():
    state = SinglePhotonState({Mode(0, H, 0): R, Mode(1, V, 2): R})
    out = apply_delay(state, 1, 19, math.pi / 2)
    assert out[Mode(0, H, 0)] == pytest.approx(R)
    assert out[Mode(1, V, 21)] == pytest.approx(1j * R)

    with pytest.raises(PreconditionError):
        apply_delay(state, 1, -1, 0.0)


def test_apply_hwp_acts_per_time_bin():
    state = SinglePhotonState({Mode(3, H, 0): R, Mode(3, H, 5): R})
    out = apply_hwp(state, 3, 45.0)
    assert out[Mode(3, V, 0)] == pytest.approx(R)
    assert out[Mode(3, V, 5)] == pytest.approx(R)
    assert squared_norm(out) == pytest.approx(1.0)


def test_element_action_validation():
    with pytest.raises(ConfigurationError):
        ElementAction(ElementKind.BS, (0,))
    with pytest.raises(ConfigurationError):
        ElementAction.bs(1, 1)
    with pytest.raises(ConfigurationError):
        ElementAction.delay(0, -3)


def test_compose_applies_left_to_right():
    path = compose([ElementAction.hwp(0, 45.0), ElementAction.pbs(0, 10, 11)])
    out = path(SinglePhotonState.basis(Mode(0, H)))
    assert out[Mode(11, V)] == pytest.approx(1.0)


ACTIONS = [
    ElementAction.bs(0, 1),
    ElementAction.pbs(0, 1, 2),
    ElementAction.hwp(1, 22.5),
    ElementAction.hwp(0, 73.0),
    ElementAction.delay(2, 3, 1.1),
    ElementAction.delay(0, 0, -0.4),
]


@pytest.mark.parametrize("action", ACTIONS, ids=lambda a: f"{a.kind.value}{a.ports}")
def test_every_element_action_is_unitary(action):
    basis = basis_window([0, 1, 2], range(0, 4))
    matrix, out_modes = lift_to_matrix(action, basis)

    assert len(out_modes) == len(basis)
    np.testing.assert_allclose(matrix.conj().T @ matrix, np.eye(len(basis)), atol=1e-12)


def test_element_actions_preserve_norm_of_superposition():
    rng = np.random.default_rng(7)
    raw = rng.normal(size=6) + 1j * rng.normal(size=6)
    raw /= np.linalg.norm(raw)
    modes = basis_window([0, 1, 2], [0])
    state = SinglePhotonState(dict(zip(modes, raw)))

    for action in ACTIONS:
        assert squared_norm(action(state)) == pytest.approx(1.0, abs=1e-12)


def test_delay_phase_factor():
    out = ElementAction.delay(0, 2, 0.3)(SinglePhotonState.basis(Mode(0, H)))
    assert out[Mode(0, H, 2)] == pytest.approx(cmath.exp(0.3j))


def _random_state(ports, t_range, seed):
    rng = np.random.default_rng(seed)
    modes = basis_window(ports, t_range)
    raw = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    raw /= np.linalg.norm(raw)
    return SinglePhotonState(dict(zip(modes, raw)))


def _assert_same_amplitudes(a, b):
    for mode in set(a.amplitudes) | set(b.amplitudes):
        assert a[mode] == pytest.approx(b[mode], abs=1e-12)


@pytest.mark.parametrize("d1, phi1, d2, phi2", [
    (0, 0.0, 0, 0.0),
    (1, 0.4, 2, -1.1),
    (19, math.pi / 2, 19, math.pi / 2),
    (3, 2.9, 0, 1.7),
    (5, -0.3, 7, 6.0),
])
def test_delays_compose_with_adding_phases(d1, phi1, d2, phi2):
    state = _random_state([0, 1], [0, 2], seed=d1 + d2)
    twice = apply_delay(apply_delay(state, 1, d1, phi1), 1, d2, phi2)
    once = apply_delay(state, 1, d1 + d2, phi1 + phi2)
    _assert_same_amplitudes(twice, once)


DISJOINT_PAIRS = [
    (ElementAction.hwp(0, 22.5), ElementAction.delay(1, 3, 0.8)),
    (ElementAction.bs(0, 1), ElementAction.pbs(2, 3, 4)),
    (ElementAction.hwp(2, 61.0), ElementAction.bs(0, 1)),
    (ElementAction.delay(4, 2, -1.3), ElementAction.pbs(0, 1, 2)),
    (ElementAction.hwp(3, 10.0), ElementAction.hwp(4, 45.0)),
]


@pytest.mark.parametrize("first, second", DISJOINT_PAIRS,
                         ids=lambda a: f"{a.kind.value}{a.ports}")
def test_elements_on_disjoint_ports_commute(first, second):
    assert not set(first.ports) & set(second.ports)
    state = _random_state([0, 1, 2, 3, 4], [0, 1], seed=3)
    _assert_same_amplitudes(second(first(state)), first(second(state)))


@pytest.mark.parametrize("pol", [H, V])
@pytest.mark.parametrize("t", [0, 4])
def test_bs_applied_twice_swaps_ports(pol, t):
    for port_in, port_out in ((0, 1), (1, 0)):
        out = apply_bs(apply_bs(SinglePhotonState.basis(Mode(port_in, pol, t)), 0, 1), 0, 1)
        assert out[Mode(port_out, pol, t)] == pytest.approx(1j, abs=1e-12)
        assert out[Mode(port_in, pol, t)] == pytest.approx(0.0, abs=1e-12)
        assert squared_norm(out) == pytest.approx(1.0, abs=1e-12)
