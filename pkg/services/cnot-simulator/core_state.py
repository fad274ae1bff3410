"""
Photon States
Basis modes, sparse single-photon and two-photon states, and the numeric
predicates (norm, overlap, phase-invariant comparison) used by every other module
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Callable, Dict, FrozenSet, Iterable, Mapping, NamedTuple, Optional, Tuple, Union

import structlog

from exceptions import ConfigurationError, PreconditionError

logger = structlog.get_logger()

AMPLITUDE_EPSILON = 1e-15
NORM_TOLERANCE = 1e-12
DEFAULT_BIN_DURATION_S = 1.0e-10  # 0.1 ns, detector resolution scale
SPEED_OF_LIGHT = 299_792_458.0  # m/s


class Polarization(str, Enum):
    """Photon polarization, H codes |0> and V codes |1>"""

    H = "H"
    V = "V"

    def flipped(self) -> "Polarization":
        return Polarization.V if self is Polarization.H else Polarization.H


@dataclass(frozen=True)
class JonesVector:
    """Normalized polarization state alpha|H> + beta|V>"""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise PreconditionError(f"Jones vector not normalized: |alpha|^2 + |beta|^2 = {norm!r}")

    @classmethod
    def from_unnormalized(cls, alpha: complex, beta: complex) -> "JonesVector":
        norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if norm == 0.0:
            raise PreconditionError("Jones vector with zero norm")
        return cls(alpha / norm, beta / norm)

    @classmethod
    def of(cls, pol: Polarization) -> "JonesVector":
        return cls(1.0, 0.0) if pol is Polarization.H else cls(0.0, 1.0)

    def amplitude(self, pol: Polarization) -> complex:
        return self.alpha if pol is Polarization.H else self.beta


@dataclass(frozen=True)
class TimeBin:
    """Discretized arrival time, index counted in units of bin_duration seconds"""

    index: int
    bin_duration: float = DEFAULT_BIN_DURATION_S

    def __post_init__(self):
        if self.bin_duration <= 0:
            raise ConfigurationError(f"bin_duration must be positive, got {self.bin_duration}")

    @property
    def seconds(self) -> float:
        return self.index * self.bin_duration


class Mode(NamedTuple):
    """Single-photon basis label (spatial port, polarization, time bin)"""

    port: int
    pol: Polarization
    t: int = 0

    def sort_key(self) -> Tuple[int, str, int]:
        return (self.port, self.pol.value, self.t)

    def shifted(self, delay_bins: int) -> "Mode":
        return Mode(self.port, self.pol, self.t + delay_bins)

    def moved(self, port: int) -> "Mode":
        return Mode(port, self.pol, self.t)


JointKey = Tuple[Mode, Mode]


def _pair_key(key: JointKey):
    return (key[0].sort_key(), key[1].sort_key())


def accumulate(terms: Iterable[Tuple[object, complex]], start: complex = 0j) -> Dict[object, complex]:
    """Sum values that land on the same key; start=0.0 keeps real weights real"""
    out: Dict[object, complex] = {}
    for key, amp in terms:
        out[key] = out.get(key, start) + amp
    return out


@dataclass(frozen=True)
class SinglePhotonState:
    """Sparse single-photon wavefunction: Mode -> amplitude"""

    amplitudes: Mapping[Mode, complex] = field(default_factory=dict)

    def __post_init__(self):
        kept = {m: complex(a) for m, a in self.amplitudes.items() if abs(a) >= AMPLITUDE_EPSILON}
        ordered = dict(sorted(kept.items(), key=lambda item: item[0].sort_key()))
        object.__setattr__(self, "amplitudes", MappingProxyType(ordered))
        norm = sum(abs(a) ** 2 for a in ordered.values())
        if norm > 1.0 + NORM_TOLERANCE:
            raise PreconditionError(f"Single-photon state norm exceeds 1: {norm!r}")

    @classmethod
    def basis(cls, mode: Mode) -> "SinglePhotonState":
        return cls({mode: 1.0})

    @classmethod
    def from_jones(cls, jones: JonesVector, port: int, t: int = 0) -> "SinglePhotonState":
        return cls({
            Mode(port, Polarization.H, t): jones.alpha,
            Mode(port, Polarization.V, t): jones.beta,
        })

    def __getitem__(self, mode: Mode) -> complex:
        return self.amplitudes.get(mode, 0j)

    def __len__(self) -> int:
        return len(self.amplitudes)

    def items(self):
        return self.amplitudes.items()

    def ports(self) -> FrozenSet[int]:
        return frozenset(m.port for m in self.amplitudes)

    def at_port(self, port: int) -> "SinglePhotonState":
        return SinglePhotonState({m: a for m, a in self.amplitudes.items() if m.port == port})


@dataclass(frozen=True)
class JointState:
    """
    Sparse two-photon state: (arm-1 mode, arm-2 mode) -> amplitude

    The two photons are distinguishable by arm; first-slot modes live on
    arm1_ports, second-slot modes on arm2_ports.
    """

    amplitudes: Mapping[JointKey, complex]
    arm1_ports: FrozenSet[int]
    arm2_ports: FrozenSet[int]

    def __post_init__(self):
        arm1 = frozenset(self.arm1_ports)
        arm2 = frozenset(self.arm2_ports)
        if arm1 & arm2:
            raise ConfigurationError(f"Arm port sets overlap: {sorted(arm1 & arm2)}")
        object.__setattr__(self, "arm1_ports", arm1)
        object.__setattr__(self, "arm2_ports", arm2)

        kept = {}
        for (m1, m2), amp in self.amplitudes.items():
            if abs(amp) < AMPLITUDE_EPSILON:
                continue
            if m1.port not in arm1 or m2.port not in arm2:
                raise ConfigurationError(f"Mode pair {(m1, m2)} outside arm ports {sorted(arm1)} / {sorted(arm2)}")
            kept[(m1, m2)] = complex(amp)
        ordered = dict(sorted(kept.items(), key=lambda item: _pair_key(item[0])))
        object.__setattr__(self, "amplitudes", MappingProxyType(ordered))

        norm = sum(abs(a) ** 2 for a in ordered.values())
        if norm > 1.0 + NORM_TOLERANCE:
            raise PreconditionError(f"Joint state norm exceeds 1: {norm!r}")

    def __getitem__(self, key: JointKey) -> complex:
        return self.amplitudes.get(key, 0j)

    def __len__(self) -> int:
        return len(self.amplitudes)

    def items(self):
        return self.amplitudes.items()

    def with_amplitudes(self, amplitudes: Mapping[JointKey, complex]) -> "JointState":
        return JointState(amplitudes, self.arm1_ports, self.arm2_ports)


State = Union[SinglePhotonState, JointState]


def squared_norm(state: State) -> float:
    """Sum of |amplitude|^2 over the stored entries"""
    return float(sum(abs(a) ** 2 for a in state.amplitudes.values()))


def is_normalized(state: State, tol: float = NORM_TOLERANCE) -> bool:
    return abs(squared_norm(state) - 1.0) <= tol


def scale(state: State, factor: complex) -> State:
    """Multiply every amplitude by factor"""
    scaled = {k: a * factor for k, a in state.amplitudes.items()}
    if isinstance(state, JointState):
        return state.with_amplitudes(scaled)
    return SinglePhotonState(scaled)


def normalized(state: State) -> State:
    norm = squared_norm(state)
    if norm == 0.0:
        raise PreconditionError("Cannot normalize a zero-norm state")
    return scale(state, 1.0 / math.sqrt(norm))


def tensor(
    s1: SinglePhotonState,
    s2: SinglePhotonState,
    arm1_ports: Optional[Iterable[int]] = None,
    arm2_ports: Optional[Iterable[int]] = None,
    strict: bool = True,
) -> JointState:
    """
    Product state of an arm-1 photon and an arm-2 photon

    Args:
        s1, s2: Single-photon states, normalized unless strict is False
        arm1_ports, arm2_ports: Port sets of each arm (default: ports in use)
        strict: Enforce the normalization precondition

    Returns:
        JointState with amplitude s1[m1] * s2[m2] on (m1, m2)
    """
    if strict:
        for name, s in (("s1", s1), ("s2", s2)):
            if not is_normalized(s):
                raise PreconditionError(f"{name} is not normalized: {squared_norm(s)!r}")

    ports1 = frozenset(arm1_ports) if arm1_ports is not None else s1.ports()
    ports2 = frozenset(arm2_ports) if arm2_ports is not None else s2.ports()
    if ports1 & ports2:
        raise ConfigurationError(f"Arm port sets overlap: {sorted(ports1 & ports2)}")

    amplitudes = {
        (m1, m2): a1 * a2
        for m1, a1 in s1.items()
        for m2, a2 in s2.items()
    }
    return JointState(amplitudes, ports1, ports2)


def inner_product(a: JointState, b: JointState) -> complex:
    """<a|b>"""
    return sum((amp.conjugate() * b[key] for key, amp in a.items()), 0j)


def overlap_modulus_sq(a: JointState, b: JointState) -> float:
    """
    |<a|b>|^2 for normalized joint states

    Invariant under a global phase on either argument, so it is the
    comparison used for "equal up to global phase".
    """
    for name, s in (("a", a), ("b", b)):
        if not is_normalized(s):
            raise PreconditionError(f"overlap_modulus_sq: {name} is not normalized ({squared_norm(s)!r})")
    return abs(inner_product(a, b)) ** 2


SinglePhotonMap = Callable[[SinglePhotonState], SinglePhotonState]


def apply_to_arm(
    joint: JointState,
    arm: int,
    single_photon_map: SinglePhotonMap,
    extra_ports: Iterable[int] = (),
) -> JointState:
    """
    Lift a linear single-photon map to one arm of a joint state

    The map is evaluated once per distinct basis mode of that arm and
    combined linearly with the joint amplitudes.
    """
    if arm not in (1, 2):
        raise ConfigurationError(f"arm must be 1 or 2, got {arm}")

    images: Dict[Mode, SinglePhotonState] = {}
    terms = []
    for (m1, m2), amp in joint.items():
        local = m1 if arm == 1 else m2
        if local not in images:
            images[local] = single_photon_map(SinglePhotonState.basis(local))
        for out_mode, out_amp in images[local].items():
            key = (out_mode, m2) if arm == 1 else (m1, out_mode)
            terms.append((key, amp * out_amp))

    new_ports = set(extra_ports)
    for image in images.values():
        new_ports |= image.ports()
    arm1 = joint.arm1_ports | new_ports if arm == 1 else joint.arm1_ports
    arm2 = joint.arm2_ports | new_ports if arm == 2 else joint.arm2_ports
    return JointState(accumulate(terms), arm1, arm2)


def _fmt(x: float) -> str:
    return format(x + 0.0, ".15g")


def serialize(state: State) -> str:
    """
    Canonical text form, one line per stored amplitude in canonical mode order

    Single-photon lines read `port,pol,t,re,im`; joint lines carry both modes,
    `port1,pol1,t1,port2,pol2,t2,re,im`.
    """
    lines = []
    for key, amp in state.items():
        modes = key if isinstance(state, JointState) else (key,)
        labels = [f"{m.port},{m.pol.value},{m.t}" for m in modes]
        lines.append(",".join(labels + [_fmt(amp.real), _fmt(amp.imag)]))
    return "\n".join(lines) + ("\n" if lines else "")


def path_difference_to_delay(path_m: float) -> float:
    """Arrival-time difference in seconds for a path difference in metres"""
    return path_m / SPEED_OF_LIGHT


def delay_to_bins(delay_s: float, bin_duration: float = DEFAULT_BIN_DURATION_S) -> Tuple[int, float]:
    """
    Round a delay to the nearest whole number of time bins

    Returns:
        (bins, relative rounding error)
    """
    if bin_duration <= 0:
        raise ConfigurationError(f"bin_duration must be positive, got {bin_duration}")
    bins = int(round(delay_s / bin_duration))
    rel_error = abs(bins * bin_duration - delay_s) / delay_s if delay_s else 0.0
    return bins, rel_error
