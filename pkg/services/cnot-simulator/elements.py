"""
Optical Elements
Norm-preserving actions of BS, PBS, HWP and delay/phase on single-photon states
"""
import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
import structlog

from core_state import Mode, Polarization, SinglePhotonState, accumulate
from exceptions import ConfigurationError, PreconditionError

logger = structlog.get_logger()

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_POL_INDEX = {Polarization.H: 0, Polarization.V: 1}
_INDEX_POL = (Polarization.H, Polarization.V)


def hwp_matrix(angle_deg: float) -> np.ndarray:
    """
    Jones matrix of a half-wave plate with fast axis at angle_deg from horizontal

    [[cos 2t, sin 2t], [sin 2t, -cos 2t]] on the (H, V) basis; real, unitary,
    Hermitian, det = -1.
    """
    two_theta = 2.0 * math.radians(angle_deg)
    c, s = math.cos(two_theta), math.sin(two_theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def apply_bs(state: SinglePhotonState, port_a: int, port_b: int) -> SinglePhotonState:
    """Symmetric 50/50 beam splitter, reflection carries phase i"""
    if port_a == port_b:
        raise PreconditionError(f"BS ports must differ, got {port_a} twice")

    terms = []
    for mode, amp in state.items():
        if mode.port == port_a:
            terms.append((mode, amp * _INV_SQRT2))
            terms.append((mode.moved(port_b), amp * 1j * _INV_SQRT2))
        elif mode.port == port_b:
            terms.append((mode.moved(port_a), amp * 1j * _INV_SQRT2))
            terms.append((mode, amp * _INV_SQRT2))
        else:
            terms.append((mode, amp))
    return SinglePhotonState(accumulate(terms))


def apply_pbs(state: SinglePhotonState, in_port: int, h_port: int, v_port: int) -> SinglePhotonState:
    """
    Polarizing beam splitter: H on in_port exits h_port, V exits v_port

    Realised as the mode permutation (in, H) <-> (h_port, H) and
    (in, V) <-> (v_port, V). The permutation is its own inverse, so the same
    call recombines the two paths onto in_port.
    """
    if len({in_port, h_port, v_port}) != 3:
        raise PreconditionError(f"PBS ports must be distinct, got {(in_port, h_port, v_port)}")

    swaps = {
        (in_port, Polarization.H): h_port,
        (h_port, Polarization.H): in_port,
        (in_port, Polarization.V): v_port,
        (v_port, Polarization.V): in_port,
    }
    terms = []
    for mode, amp in state.items():
        target = swaps.get((mode.port, mode.pol))
        terms.append((mode.moved(target) if target is not None else mode, amp))
    return SinglePhotonState(accumulate(terms))


def apply_delay(state: SinglePhotonState, port: int, delay_bins: int, phase_rad: float) -> SinglePhotonState:
    """Shift every amplitude on port by delay_bins and multiply by exp(i*phase)"""
    if delay_bins < 0:
        raise PreconditionError(f"delay_bins must be non-negative, got {delay_bins}")

    phase = complex(math.cos(phase_rad), math.sin(phase_rad))
    terms = [
        (mode.shifted(delay_bins), amp * phase) if mode.port == port else (mode, amp)
        for mode, amp in state.items()
    ]
    return SinglePhotonState(accumulate(terms))


def apply_hwp(state: SinglePhotonState, port: int, angle_deg: float) -> SinglePhotonState:
    """Apply hwp_matrix(angle_deg) to the (H, V) pair at every (port, t)"""
    matrix = hwp_matrix(angle_deg)
    terms = []
    for mode, amp in state.items():
        if mode.port != port:
            terms.append((mode, amp))
            continue
        column = matrix[:, _POL_INDEX[mode.pol]]
        for row, pol in enumerate(_INDEX_POL):
            terms.append((Mode(port, pol, mode.t), amp * column[row]))
    return SinglePhotonState(accumulate(terms))


class ElementKind(str, Enum):
    BS = "BS"
    PBS = "PBS"
    HWP = "HWP"
    DELAY = "DELAY"


_PORT_COUNT = {ElementKind.BS: 2, ElementKind.PBS: 3, ElementKind.HWP: 1, ElementKind.DELAY: 1}


@dataclass(frozen=True)
class ElementAction:
    """One optical element placed on specific ports"""

    kind: ElementKind
    ports: Tuple[int, ...]
    angle_deg: float = 0.0
    delay_bins: int = 0
    phase_rad: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        expected = _PORT_COUNT[self.kind]
        if len(self.ports) != expected:
            raise ConfigurationError(f"{self.kind.value} takes {expected} port(s), got {self.ports}")
        if len(set(self.ports)) != len(self.ports):
            raise ConfigurationError(f"{self.kind.value} ports must be distinct, got {self.ports}")
        if self.delay_bins < 0:
            raise ConfigurationError(f"delay_bins must be non-negative, got {self.delay_bins}")

    @classmethod
    def bs(cls, port_a: int, port_b: int) -> "ElementAction":
        return cls(ElementKind.BS, (port_a, port_b))

    @classmethod
    def pbs(cls, in_port: int, h_port: int, v_port: int) -> "ElementAction":
        return cls(ElementKind.PBS, (in_port, h_port, v_port))

    @classmethod
    def hwp(cls, port: int, angle_deg: float) -> "ElementAction":
        return cls(ElementKind.HWP, (port,), angle_deg=angle_deg)

    @classmethod
    def delay(cls, port: int, delay_bins: int, phase_rad: float = 0.0) -> "ElementAction":
        return cls(ElementKind.DELAY, (port,), delay_bins=delay_bins, phase_rad=phase_rad)

    def __call__(self, state: SinglePhotonState) -> SinglePhotonState:
        if self.kind is ElementKind.BS:
            return apply_bs(state, *self.ports)
        if self.kind is ElementKind.PBS:
            return apply_pbs(state, *self.ports)
        if self.kind is ElementKind.HWP:
            return apply_hwp(state, self.ports[0], self.angle_deg)
        return apply_delay(state, self.ports[0], self.delay_bins, self.phase_rad)


def compose(actions: Sequence[ElementAction]) -> Callable[[SinglePhotonState], SinglePhotonState]:
    """Chain element actions left to right"""
    return lambda state: reduce(lambda s, action: action(s), actions, state)


def basis_window(ports: Iterable[int], t_range: Iterable[int]) -> List[Mode]:
    """All modes on the given ports and time bins, canonical order"""
    t_values = list(t_range)
    return sorted(
        (Mode(p, pol, t) for p in ports for pol in _INDEX_POL for t in t_values),
        key=Mode.sort_key,
    )


def lift_to_matrix(
    action: Callable[[SinglePhotonState], SinglePhotonState],
    basis: Sequence[Mode],
) -> Tuple[np.ndarray, List[Mode]]:
    """
    Matrix of a single-photon map on a finite basis

    Columns are the images of the basis modes; rows are every mode those
    images touch. U^H U = 1 on the result means the map is an isometry on
    the span of the basis.
    """
    images = [action(SinglePhotonState.basis(mode)) for mode in basis]
    out_modes = sorted({m for image in images for m in image.amplitudes}, key=Mode.sort_key)
    row = {m: i for i, m in enumerate(out_modes)}

    matrix = np.zeros((len(out_modes), len(basis)), dtype=complex)
    for j, image in enumerate(images):
        for mode, amp in image.items():
            matrix[row[mode], j] = amp
    return matrix, out_modes
