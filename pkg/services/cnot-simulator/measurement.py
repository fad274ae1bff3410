"""
Coincidence Measurement
Coincidence-window post-selection, polarization analysis, truth tables,
fringe scans and fits, and the fidelity / concurrence metrics
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from circuits import GateConfig, basis_input, cnot_apply, product_input
from core_state import (
    DEFAULT_BIN_DURATION_S,
    NORM_TOLERANCE,
    JointState,
    JonesVector,
    Mode,
    Polarization,
    accumulate,
    is_normalized,
    squared_norm,
)
from elements import hwp_matrix
from exceptions import ConfigurationError, EmptyOutcomeError, FitError, PreconditionError

logger = structlog.get_logger()

H, V = Polarization.H, Polarization.V
POL_PAIRS: Tuple[Tuple[Polarization, Polarization], ...] = ((H, H), (H, V), (V, H), (V, V))
POL_LABELS: Tuple[str, ...] = tuple(p1.value + p2.value for p1, p2 in POL_PAIRS)
ANALYZER_LABELS: Tuple[str, ...] = ("++", "+-", "-+", "--")
# (input row, output column) of the CNOT action HH->HH, HV->HV, VH->VV, VV->VH
CNOT_CELLS: Tuple[Tuple[int, int], ...] = ((0, 0), (1, 1), (2, 3), (3, 2))

DEFAULT_ANALYZER_DEG = 45.0
DEFAULT_NM_PER_VOLT = 69.0
DEFAULT_WAVELENGTH_NM = 840.0


@dataclass(frozen=True)
class CoincidenceWindow:
    """Coincidence window dT expressed in time bins"""

    window_bins: int
    bin_duration: float = DEFAULT_BIN_DURATION_S

    def __post_init__(self):
        if self.window_bins < 1:
            raise ConfigurationError(f"window_bins must be >= 1, got {self.window_bins}")
        if self.bin_duration <= 0:
            raise ConfigurationError(f"bin_duration must be positive, got {self.bin_duration}")

    @property
    def seconds(self) -> float:
        return self.window_bins * self.bin_duration

    def accepts(self, delta_bins: int) -> bool:
        # Strict: |t1 - t2| * bin < dT
        return abs(delta_bins) < self.window_bins


@dataclass(frozen=True)
class TruthTable:
    """
    Unconditional post-selected probabilities

    Rows are the inputs HH, HV, VH, VV; columns the detected outputs in the
    same order. Each row sums to that input's success probability.
    """

    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (4, 4):
            raise ConfigurationError(f"truth table must be 4x4, got {probs.shape}")
        if np.any(probs < -NORM_TOLERANCE) or np.any(probs > 1 + NORM_TOLERANCE):
            raise ConfigurationError("truth table entries must lie in [0, 1]")
        object.__setattr__(self, "probabilities", probs)

    @property
    def success_probabilities(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    def renormalized(self) -> np.ndarray:
        """Per-input histograms, each row summing to 1 (rows with no success stay 0)"""
        sums = self.success_probabilities
        safe = np.where(sums > 0, sums, 1.0)
        return self.probabilities / safe[:, None]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"input": inp, "output": out, "probability": float(self.probabilities[i, j])}
            for i, inp in enumerate(POL_LABELS)
            for j, out in enumerate(POL_LABELS)
        ]
        return pd.DataFrame(rows, columns=["input", "output", "probability"])


@dataclass(frozen=True)
class FringeFit:
    """c(theta) = A (1 + V cos(theta + phi))"""

    amplitude: float
    visibility: float
    phase: float
    visibility_stderr: float = float("nan")

    def model(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        return self.amplitude * (1.0 + self.visibility * np.cos(thetas + self.phase))


def coincidence_postselect(
    joint: JointState,
    d1_port: int,
    d2_port: int,
    w: CoincidenceWindow,
) -> Tuple[JointState, float]:
    """
    Keep the branches that register as a coincidence

    Args:
        joint: Normalized two-photon state
        d1_port, d2_port: Detector ports of arm 1 and arm 2
        w: Coincidence window

    Returns:
        (kept part, unnormalized; its probability)
    """
    if not is_normalized(joint):
        raise PreconditionError(f"coincidence_postselect needs a normalized state, norm^2 = {squared_norm(joint)!r}")

    kept = {
        (m1, m2): amp
        for (m1, m2), amp in joint.items()
        if m1.port == d1_port and m2.port == d2_port and w.accepts(m1.t - m2.t)
    }
    state = joint.with_amplitudes(kept)
    return state, squared_norm(state)


def polarization_histogram(kept: JointState) -> Dict[str, float]:
    """Share of |amplitude|^2 per polarization pair, summed over time bins, normalized to 1"""
    total = squared_norm(kept)
    if total == 0.0:
        raise EmptyOutcomeError("no post-selected probability to histogram")

    weights = accumulate(
        ((m1.pol.value + m2.pol.value, abs(a) ** 2) for (m1, m2), a in kept.items()),
        start=0.0,
    )
    return {label: float(weights.get(label, 0.0)) / total for label in POL_LABELS}


def truth_table(cfg: GateConfig, w: CoincidenceWindow) -> TruthTable:
    """CNOT + post-selection for the four basis inputs"""
    probs = np.zeros((4, 4))
    for i, (control, target) in enumerate(POL_PAIRS):
        out = cnot_apply(basis_input(control, target, cfg), cfg)
        kept, success = coincidence_postselect(out, cfg.detector_port_1, cfg.detector_port_2, w)
        if success > 0.0:
            hist = polarization_histogram(kept)
            probs[i] = [success * hist[label] for label in POL_LABELS]

    logger.info("Truth table computed",
                delay_bins=cfg.delay_bins,
                window_bins=w.window_bins,
                success=[round(float(s), 12) for s in probs.sum(axis=1)])
    return TruthTable(probs)


def relative_time_amplitudes(kept: JointState) -> Dict[Tuple[Polarization, Polarization, int], complex]:
    """
    Coherent sum of branches grouped by (pol1, pol2, t1 - t2)

    The pump is continuous-wave, so a pair's emission time is unknown and
    branches that differ only by a common shift of both arrival times cannot
    be told apart by a coincidence measurement.
    """
    return accumulate(((m1.pol, m2.pol, m1.t - m2.t), amp) for (m1, m2), amp in kept.items())


def two_qubit_amplitudes(kept: JointState) -> np.ndarray:
    """Polarization amplitudes (HH, HV, VH, VV) of the zero-delay coincidence sector"""
    amps = relative_time_amplitudes(kept)
    return np.array([amps.get((p1, p2, 0), 0j) for p1, p2 in POL_PAIRS], dtype=complex)


def analyzer_project(kept: JointState, angle1_deg: float, angle2_deg: float) -> float:
    """
    Probability that both photons pass their analyzer

    Each analyzer rotates the polarization by angle_deg (a HWP at angle/2)
    and keeps the transmitted (H) port of its PBS.
    """
    rotation = np.kron(hwp_matrix(angle1_deg / 2.0), hwp_matrix(angle2_deg / 2.0))
    sectors: Dict[int, np.ndarray] = {}
    for (p1, p2, dt), amp in relative_time_amplitudes(kept).items():
        vec = sectors.setdefault(dt, np.zeros(4, dtype=complex))
        vec[POL_PAIRS.index((p1, p2))] += amp

    # row 0 of the rotated vector is the doubly transmitted HH component
    return float(sum(abs(rotation[0] @ vec) ** 2 for vec in sectors.values()))


def analyzer_outcomes(kept: JointState, angle1_deg: float, angle2_deg: float) -> Dict[str, float]:
    """Probabilities of the four analyzer port pairs; '-' is the reflected port"""
    return {
        "++": analyzer_project(kept, angle1_deg, angle2_deg),
        "+-": analyzer_project(kept, angle1_deg, angle2_deg + 90.0),
        "-+": analyzer_project(kept, angle1_deg + 90.0, angle2_deg),
        "--": analyzer_project(kept, angle1_deg + 90.0, angle2_deg + 90.0),
    }


def postselected_output(
    cfg: GateConfig,
    w: CoincidenceWindow,
    jones: Optional[JonesVector] = None,
    target: Polarization = H,
) -> Tuple[JointState, float]:
    """CNOT of a product input, post-selected; defaults to (|H> + |V>)/sqrt 2 control"""
    jones = jones or JonesVector.from_unnormalized(1.0, 1.0)
    out = cnot_apply(product_input(jones, target, cfg), cfg)
    return coincidence_postselect(out, cfg.detector_port_1, cfg.detector_port_2, w)


def ideal_entangled_state(cfg: GateConfig) -> JointState:
    """(|H@0 H@0> + e^{i theta} |V@d V@d>) / sqrt 2 on the detector ports"""
    d = cfg.delay_bins
    amp = 1.0 / math.sqrt(2.0)
    phase = complex(math.cos(cfg.theta), math.sin(cfg.theta))
    return JointState(
        {
            (Mode(cfg.detector_port_1, H, 0), Mode(cfg.detector_port_2, H, 0)): amp,
            (Mode(cfg.detector_port_1, V, d), Mode(cfg.detector_port_2, V, d)): amp * phase,
        },
        cfg.arm1_ports,
        cfg.arm2_ports,
    )


def fringe_scan(
    cfg: GateConfig,
    thetas: Sequence[float],
    w: CoincidenceWindow,
    jones: Optional[JonesVector] = None,
    analyzer_deg: Tuple[float, float] = (DEFAULT_ANALYZER_DEG, DEFAULT_ANALYZER_DEG),
) -> List[Tuple[float, float]]:
    """
    Unconditional doubly-transmitted probability versus theta = theta1 + theta2

    Ideal closed form for the default input and analyzers: (1 + cos theta) / 16.
    """
    if len(thetas) == 0:
        raise PreconditionError("fringe_scan needs at least one theta")

    samples = []
    for theta in thetas:
        kept, _ = postselected_output(cfg.with_theta(float(theta)), w, jones)
        samples.append((float(theta), analyzer_project(kept, *analyzer_deg)))
    return samples


def _largest_circular_gap(thetas: np.ndarray) -> float:
    wrapped = np.sort(np.unique(np.round(np.mod(thetas, 2 * math.pi), 12)))
    gaps = np.diff(np.concatenate([wrapped, [wrapped[0] + 2 * math.pi]]))
    return float(gaps.max())


def fit_fringe(samples: Sequence[Tuple[float, float]]) -> FringeFit:
    """
    Linear least squares of c = A + B cos(theta) + C sin(theta)

    Returns:
        FringeFit with A, V = sqrt(B^2 + C^2) / A, phi = atan2(-C, B) and the
        delta-method standard error of V (NaN without residual freedom)
    """
    if len(samples) < 3:
        raise FitError(f"need at least 3 samples, got {len(samples)}")

    thetas = np.array([s[0] for s in samples], dtype=float)
    values = np.array([s[1] for s in samples], dtype=float)
    distinct = np.unique(np.round(np.mod(thetas, 2 * math.pi), 12))
    if distinct.size < 3:
        raise FitError(f"need at least 3 distinct theta values, got {distinct.size}")
    if _largest_circular_gap(thetas) >= math.pi:
        raise FitError("theta samples must span more than half a period")

    design = np.column_stack([np.ones_like(thetas), np.cos(thetas), np.sin(thetas)])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("degenerate design matrix")

    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    a, b, c = (float(x) for x in coef)
    if a <= 0.0:
        raise FitError(f"fitted mean level must be positive, got {a}")

    radius = math.hypot(b, c)
    visibility = radius / a
    phase = math.atan2(-c, b)
    if phase <= -math.pi:
        phase += 2 * math.pi

    stderr = float("nan")
    dof = len(values) - 3
    if dof > 0:
        residual = values - design @ coef
        cov = float(residual @ residual) / dof * np.linalg.inv(design.T @ design)
        if radius > 0.0:
            grad = np.array([-visibility / a, b / (a * radius), c / (a * radius)])
        else:
            grad = np.array([0.0, 1.0 / a, 0.0])
        stderr = float(math.sqrt(max(grad @ cov @ grad, 0.0)))

    return FringeFit(amplitude=a, visibility=visibility, phase=phase, visibility_stderr=stderr)


def fidelity(p_hh: float, p_vv: float, v: float) -> float:
    """Entanglement fidelity proxy F = (P_HH + P_VV + V) / 2"""
    for name, value in (("p_hh", p_hh), ("p_vv", p_vv), ("v", v)):
        if not 0.0 <= value <= 1.0:
            raise PreconditionError(f"fidelity: {name} must lie in [0, 1], got {value}")
    return (p_hh + p_vv + v) / 2.0


def fidelity_from_state(kept: JointState, visibility: float) -> float:
    hist = polarization_histogram(kept)
    return fidelity(hist["HH"], hist["VV"], visibility)


def binomial_stderr(fraction: float, total: int) -> float:
    """Standard error sqrt(f (1 - f) / N) of a fraction of N counts; NaN when N = 0"""
    if total <= 0:
        return float("nan")
    return math.sqrt(max(fraction * (1.0 - fraction), 0.0) / total)


def fidelity_stderr(p_hh: float, p_vv: float, total: int, v_stderr: float) -> float:
    """
    Standard error of fidelity(p_hh, p_vv, v)

    P_HH + P_VV is a single binomial fraction of the `total` histogram counts;
    V comes from a separate fringe measurement with error v_stderr.
    """
    sum_err = binomial_stderr(p_hh + p_vv, total)
    return 0.5 * math.sqrt(sum_err ** 2 + v_stderr ** 2)


def concurrence(amplitudes: Sequence[complex]) -> float:
    """C = 2 |a_HH a_VV - a_HV a_VH| of a normalized two-qubit pure state"""
    a_hh, a_hv, a_vh, a_vv = (complex(a) for a in amplitudes)
    return 2.0 * abs(a_hh * a_vv - a_hv * a_vh)


def state_concurrence(kept: JointState) -> float:
    """Concurrence of the normalized zero-delay polarization state"""
    amps = two_qubit_amplitudes(kept)
    norm = float(np.vdot(amps, amps).real)
    if norm == 0.0:
        raise EmptyOutcomeError("no zero-delay coincidence amplitude")
    return concurrence(amps / math.sqrt(norm))


def pzt_volts_to_phase(
    volts: float,
    nm_per_volt: float = DEFAULT_NM_PER_VOLT,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
) -> float:
    """Phase change 2 pi * volts * nm_per_volt / wavelength_nm of the PZT-driven long path"""
    if wavelength_nm <= 0:
        raise PreconditionError(f"wavelength_nm must be positive, got {wavelength_nm}")
    return 2.0 * math.pi * volts * nm_per_volt / wavelength_nm
