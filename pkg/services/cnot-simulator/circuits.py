"""
Interferometer Circuits
Interferometer 1 (PBS pair), interferometer 2 (BS pair with HWP), the CNOT gate
built from them, and cascades of gates with the coincidence-timing check
"""
import itertools
import math
from dataclasses import dataclass, replace
from functools import reduce
from typing import List, Sequence, Tuple

import structlog

from core_state import (
    JointState,
    JonesVector,
    Mode,
    Polarization,
    SinglePhotonState,
    apply_to_arm,
    tensor,
)
from elements import ElementAction, compose
from exceptions import ConfigurationError, PreconditionError

logger = structlog.get_logger()

# Internal path ports are allocated per cascade stage above this base
INTERNAL_PORT_BASE = 100
PORTS_PER_STAGE = 4

HWP_FLIP_DEG = 45.0
# Two reflections on the symmetric BS contribute i * i = -1 on the long path of
# interferometer 2; it is absorbed into theta2 by offsetting the applied phase.
BS_ROUND_TRIP_PHASE = math.pi


@dataclass(frozen=True)
class GateConfig:
    """
    One CNOT gate

    Each photon enters on its arm's main port and the detector output leaves
    on the same port label, so cascaded gates chain without relabelling.
    """

    delay_bins: int = 19
    theta1: float = 0.0
    theta2: float = 0.0
    detector_port_1: int = 0
    detector_port_2: int = 1
    stage: int = 0

    def __post_init__(self):
        if self.delay_bins < 1:
            raise ConfigurationError(f"delay_bins must be >= 1, got {self.delay_bins}")
        if self.detector_port_1 == self.detector_port_2:
            raise ConfigurationError("detector ports of the two arms must differ")
        if max(self.detector_port_1, self.detector_port_2) >= INTERNAL_PORT_BASE:
            raise ConfigurationError(f"detector ports must be below {INTERNAL_PORT_BASE}")
        if self.stage < 0:
            raise ConfigurationError(f"stage must be non-negative, got {self.stage}")

    @property
    def short_port_1(self) -> int:
        return INTERNAL_PORT_BASE + PORTS_PER_STAGE * self.stage

    @property
    def long_port_1(self) -> int:
        return self.short_port_1 + 1

    @property
    def long_port_2(self) -> int:
        """Long path of interferometer 2; also its non-detector output"""
        return self.short_port_1 + 2

    @property
    def arm1_ports(self) -> frozenset:
        return frozenset({self.detector_port_1, self.short_port_1, self.long_port_1})

    @property
    def arm2_ports(self) -> frozenset:
        return frozenset({self.detector_port_2, self.long_port_2})

    @property
    def theta(self) -> float:
        return self.theta1 + self.theta2

    def with_theta(self, theta: float) -> "GateConfig":
        """Same gate with theta1 + theta2 = theta (theta2 kept)"""
        return replace(self, theta1=theta - self.theta2)


@dataclass(frozen=True)
class CascadeConfig:
    """Ordered gates sharing detector ports, measured with one coincidence window"""

    gates: Tuple[GateConfig, ...]
    window_bins: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.gates:
            raise ConfigurationError("cascade needs at least one gate")
        if self.window_bins < 1:
            raise ConfigurationError(f"window_bins must be >= 1, got {self.window_bins}")
        if self.window_bins >= self.min_delay:
            raise ConfigurationError(
                f"window_bins ({self.window_bins}) must be smaller than the shortest gate delay ({self.min_delay})"
            )
        if len({g.stage for g in self.gates}) != len(self.gates):
            raise ConfigurationError("cascade gates need distinct stages")

    @classmethod
    def from_delays(cls, delays_bins: Sequence[int], window_bins: int, base: GateConfig = None) -> "CascadeConfig":
        base = base or GateConfig()
        gates = tuple(replace(base, delay_bins=d, stage=k) for k, d in enumerate(delays_bins))
        return cls(gates, window_bins)

    @property
    def delays(self) -> Tuple[int, ...]:
        return tuple(g.delay_bins for g in self.gates)

    @property
    def min_delay(self) -> int:
        return min(self.delays)


def interferometer1_elements(cfg: GateConfig) -> List[ElementAction]:
    return [
        ElementAction.pbs(cfg.detector_port_1, cfg.short_port_1, cfg.long_port_1),
        ElementAction.delay(cfg.long_port_1, cfg.delay_bins, cfg.theta1),
        ElementAction.pbs(cfg.detector_port_1, cfg.short_port_1, cfg.long_port_1),
    ]


def interferometer2_elements(cfg: GateConfig) -> List[ElementAction]:
    return [
        ElementAction.bs(cfg.detector_port_2, cfg.long_port_2),
        ElementAction.hwp(cfg.long_port_2, HWP_FLIP_DEG),
        ElementAction.delay(cfg.long_port_2, cfg.delay_bins, cfg.theta2 - BS_ROUND_TRIP_PHASE),
        ElementAction.bs(cfg.detector_port_2, cfg.long_port_2),
    ]


def _require_port(state: SinglePhotonState, port: int, name: str):
    stray = sorted(state.ports() - {port})
    if stray:
        raise PreconditionError(f"{name} input must be on port {port}, found amplitude on {stray}")


def interferometer1(state: SinglePhotonState, cfg: GateConfig) -> SinglePhotonState:
    """
    Polarization-dependent delay: H takes the short path, V the long one

    H@t -> H@t and V@t -> exp(i*theta1) V@(t + delay) on the detector port.
    """
    _require_port(state, cfg.detector_port_1, "interferometer1")
    return compose(interferometer1_elements(cfg))(state)


def interferometer2(state: SinglePhotonState, cfg: GateConfig) -> SinglePhotonState:
    """
    50/50 split with a polarization flip on the long path

    On the detector port P@t -> 1/2 P@t + 1/2 exp(i*theta2) P'@(t + delay),
    P' the flipped polarization; the other half of the probability exits
    cfg.long_port_2.
    """
    _require_port(state, cfg.detector_port_2, "interferometer2")
    return compose(interferometer2_elements(cfg))(state)


def cnot_apply(joint: JointState, cfg: GateConfig, check_ports: bool = True) -> JointState:
    """
    Run the control photon through interferometer 1 and the target through interferometer 2

    Args:
        joint: Two-photon state, photons on the detector (= input) ports
        cfg: Gate configuration
        check_ports: Enforce the input-port precondition (cascades disable it
            after the first stage, where dumped amplitude sits on other ports)

    Returns:
        Output joint state including the non-detector port of interferometer 2
    """
    if check_ports:
        bad = [
            (m1, m2) for (m1, m2) in joint.amplitudes
            if m1.port != cfg.detector_port_1 or m2.port != cfg.detector_port_2
        ]
        if bad:
            raise PreconditionError(f"cnot_apply input must sit on ports {cfg.detector_port_1}/{cfg.detector_port_2}: {bad[0]}")

    arm1_map = compose(interferometer1_elements(cfg))
    arm2_map = compose(interferometer2_elements(cfg))
    out = apply_to_arm(joint, 1, arm1_map, extra_ports=cfg.arm1_ports)
    return apply_to_arm(out, 2, arm2_map, extra_ports=cfg.arm2_ports)


def cascade_apply(joint: JointState, cascade: CascadeConfig) -> JointState:
    """Feed the state through every gate in order; time bins accumulate"""
    return reduce(
        lambda state, item: cnot_apply(state, item[1], check_ports=item[0] == 0),
        enumerate(cascade.gates),
        joint,
    )


def product_input(jones: JonesVector, target: Polarization, cfg: GateConfig = None) -> JointState:
    """Product input (alpha|H> + beta|V>)_1 |target>_2 on the gate's input ports"""
    cfg = cfg or GateConfig()
    control = SinglePhotonState.from_jones(jones, cfg.detector_port_1)
    target_state = SinglePhotonState.basis(Mode(cfg.detector_port_2, target))
    return tensor(control, target_state, arm1_ports=cfg.arm1_ports, arm2_ports=cfg.arm2_ports)


def basis_input(control: Polarization, target: Polarization, cfg: GateConfig = None) -> JointState:
    return product_input(JonesVector.of(control), target, cfg)


@dataclass(frozen=True)
class TimingConflict:
    """A branch combination that lands inside the window although the photons took different paths"""

    photon1_branches: Tuple[str, ...]
    photon2_branches: Tuple[str, ...]
    delta_bins: int

    def label(self) -> str:
        return f"photon1={''.join(self.photon1_branches)} photon2={''.join(self.photon2_branches)}"


def _arrival(delays: Sequence[int], branches: Sequence[int]) -> int:
    return sum(d for d, long_path in zip(delays, branches) if long_path)


def validate_cascade_timing(cascade: CascadeConfig) -> List[TimingConflict]:
    """
    Enumerate every short/long branch of both photons through every gate

    A combination is intended only when both photons took the same path in
    every gate (arrival difference exactly 0). Any other combination whose
    |arrival difference| is below the window produces unwanted coincidences
    and is reported. An empty list means the cascade is coincidence-safe.
    """
    if cascade.window_bins >= cascade.min_delay:
        raise ConfigurationError(
            f"window_bins ({cascade.window_bins}) must be smaller than the shortest gate delay ({cascade.min_delay})"
        )

    delays = cascade.delays
    branch_sets = list(itertools.product((0, 1), repeat=len(delays)))
    conflicts = []
    for b1 in branch_sets:
        t1 = _arrival(delays, b1)
        for b2 in branch_sets:
            if b1 == b2:
                continue
            delta = t1 - _arrival(delays, b2)
            if abs(delta) < cascade.window_bins:
                conflicts.append(TimingConflict(
                    photon1_branches=tuple("L" if b else "S" for b in b1),
                    photon2_branches=tuple("L" if b else "S" for b in b2),
                    delta_bins=delta,
                ))

    logger.info("Cascade timing checked",
                delays=list(delays),
                window_bins=cascade.window_bins,
                conflicts=len(conflicts))
    return conflicts
