"""
Monte Carlo Counting Experiments
Turns ideal probabilities into Poisson-sampled coincidence counts with detector
efficiency, accidental background, polarization leakage and phase jitter
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from circuits import GateConfig
from core_state import DEFAULT_BIN_DURATION_S, JonesVector, Polarization
from exceptions import ConfigurationError, PreconditionError
from measurement import (
    ANALYZER_LABELS,
    CNOT_CELLS,
    DEFAULT_ANALYZER_DEG,
    POL_LABELS,
    CoincidenceWindow,
    TruthTable,
    analyzer_outcomes,
    binomial_stderr,
    polarization_histogram,
    postselected_output,
    pzt_volts_to_phase,
    truth_table,
)

logger = structlog.get_logger()

DEFAULT_WINDOW_BINS = 10
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class NoiseConfig:
    """
    Counting-experiment conditions

    dark_rate_1/2 count every uncorrelated single at that detector (dark
    counts, stray light, unpaired photons); they set the accidental floor.
    """

    pair_rate: float = 20000.0  # pairs/s at the interferometer inputs
    efficiency_1: float = 1.0
    efficiency_2: float = 1.0
    dark_rate_1: float = 0.0  # counts/s
    dark_rate_2: float = 0.0
    phase_jitter_sigma: float = 0.0  # rad, std of theta1 + theta2
    leakage: float = 0.0  # per-photon recorded-polarization flip probability
    integration_s: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("pair_rate", "dark_rate_1", "dark_rate_2", "phase_jitter_sigma", "integration_s"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("efficiency_1", "efficiency_2"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {getattr(self, name)}")
        if not 0.0 <= self.leakage < 1.0:
            raise ConfigurationError(f"leakage must lie in [0, 1), got {self.leakage}")
        if not 0 <= self.seed < MAX_SEED:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def jitter_factor(self) -> float:
        """Visibility multiplier exp(-sigma^2 / 2) of Gaussian phase jitter"""
        return math.exp(-self.phase_jitter_sigma ** 2 / 2.0)


@dataclass(frozen=True)
class CountRecord:
    """Counts of one outcome over one integration"""

    label: str
    counts: int
    integration_s: float
    seed: int
    expected: float = 0.0
    theta_rad: Optional[float] = None
    volts: Optional[float] = None

    def __post_init__(self):
        if self.counts < 0:
            raise ConfigurationError(f"counts must be non-negative, got {self.counts}")

    @property
    def poisson_err(self) -> float:
        return math.sqrt(self.counts)


def cell_rng(seed: int, cell_index: int) -> np.random.Generator:
    """
    Independent substream for one cell

    SeedSequence(seed, spawn_key=(cell_index,)) feeding PCG64 through
    numpy's default_rng; the stream depends only on (seed, cell_index).
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cell_index,)))


def sample_counts(mean: float, seed: int, cell_index: int = 0) -> int:
    """Poisson sample with the given mean, deterministic in (seed, cell_index)"""
    if mean < 0:
        raise PreconditionError(f"mean must be non-negative, got {mean}")
    return int(cell_rng(seed, cell_index).poisson(mean))


def expected_coincidences(p: float, n: NoiseConfig, window_s: float = DEFAULT_WINDOW_BINS * DEFAULT_BIN_DURATION_S) -> float:
    """
    Mean coincidence counts of a cell with probability p

    pair_rate * T * p * eta1 * eta2 plus the accidental floor
    dark_rate_1 * dark_rate_2 * dT * T.

    dark_rate_i is the total uncorrelated singles rate at detector i with
    unpaired signal photons included; pair_rate does not add to it.
    """
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"p must lie in [0, 1], got {p}")
    signal = n.pair_rate * n.integration_s * p * n.efficiency_1 * n.efficiency_2
    accidentals = n.dark_rate_1 * n.dark_rate_2 * window_s * n.integration_s
    return signal + accidentals


def leakage_matrix(leakage: float) -> np.ndarray:
    """
    Row-stochastic map of true to recorded outcomes (HH, HV, VH, VV order)

    Each photon's recorded polarization flips independently with probability leakage.
    """
    single = np.array([[1.0 - leakage, leakage], [leakage, 1.0 - leakage]])
    return np.kron(single, single)


def _clip_probability(p: float) -> float:
    return float(min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class TruthTableExperiment:
    ideal: TruthTable
    expected: np.ndarray
    records: Tuple[Tuple[CountRecord, ...], ...]
    renormalized: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.array([[r.counts for r in row] for row in self.records])

    @property
    def diagonal(self) -> np.ndarray:
        """Renormalized estimates of the four correct CNOT outputs"""
        return np.array([self.renormalized[i, j] for i, j in CNOT_CELLS])

    @property
    def renormalized_err(self) -> np.ndarray:
        """Binomial standard error of each renormalized cell within its input row"""
        totals = self.counts.sum(axis=1)
        return np.array([
            [binomial_stderr(float(self.renormalized[i, j]), int(totals[i])) for j in range(4)]
            for i in range(4)
        ])

    def to_frame(self) -> pd.DataFrame:
        frame = self.ideal.to_frame()
        frame["counts"] = self.counts.ravel()
        frame["renormalized"] = self.renormalized.ravel()
        frame["renormalized_err"] = self.renormalized_err.ravel()
        return frame


def _renormalize_rows(counts: np.ndarray) -> np.ndarray:
    sums = counts.sum(axis=1, keepdims=True).astype(float)
    return np.divide(counts, sums, out=np.zeros(counts.shape, dtype=float), where=sums > 0)


def run_truth_table_experiment(cfg: GateConfig, w: CoincidenceWindow, n: NoiseConfig) -> TruthTableExperiment:
    """
    Sample the 16 input/analyzer cells of the truth-table measurement

    Ideal probabilities are degraded by leakage, accidentals are added, and
    each cell is Poisson-sampled from its own substream (cell = 4 * input + output).
    """
    if n.leakage >= 0.5:
        logger.warning("Leakage at or beyond the fully depolarized limit", leakage=n.leakage)

    ideal = truth_table(cfg, w)
    degraded = ideal.probabilities @ leakage_matrix(n.leakage)

    expected = np.zeros((4, 4))
    records = []
    for i, inp in enumerate(POL_LABELS):
        row = []
        for j, out in enumerate(POL_LABELS):
            cell = 4 * i + j
            mean = expected_coincidences(_clip_probability(degraded[i, j]), n, w.seconds)
            expected[i, j] = mean
            row.append(CountRecord(
                label=f"{inp}->{out}",
                counts=sample_counts(mean, n.seed, cell),
                integration_s=n.integration_s,
                seed=n.seed,
                expected=mean,
            ))
        records.append(tuple(row))

    counts = np.array([[r.counts for r in row] for row in records])
    renormalized = _renormalize_rows(counts)

    logger.info("Truth-table experiment sampled",
                seed=n.seed,
                total_counts=int(counts.sum()),
                diagonal=[round(float(renormalized[i, j]), 4) for i, j in CNOT_CELLS])
    return TruthTableExperiment(ideal=ideal, expected=expected, records=tuple(records), renormalized=renormalized)


@dataclass(frozen=True)
class EntangleExperiment:
    success_probability: float
    ideal_histogram: dict
    records: Tuple[CountRecord, ...]
    renormalized: dict

    @property
    def total_counts(self) -> int:
        return sum(r.counts for r in self.records)

    @property
    def renormalized_err(self) -> dict:
        return {label: binomial_stderr(p, self.total_counts) for label, p in self.renormalized.items()}


def run_entangle_experiment(
    cfg: GateConfig,
    w: CoincidenceWindow,
    n: NoiseConfig,
    jones: Optional[JonesVector] = None,
    target: Polarization = Polarization.H,
) -> EntangleExperiment:
    """Polarization histogram of the post-selected superposition input, with leakage and accidentals"""
    kept, success = postselected_output(cfg, w, jones, target)
    hist = polarization_histogram(kept)
    unconditional = np.array([success * hist[label] for label in POL_LABELS]) @ leakage_matrix(n.leakage)

    records = []
    for k, label in enumerate(POL_LABELS):
        mean = expected_coincidences(_clip_probability(unconditional[k]), n, w.seconds)
        records.append(CountRecord(
            label=label,
            counts=sample_counts(mean, n.seed, k),
            integration_s=n.integration_s,
            seed=n.seed,
            expected=mean,
        ))

    total = sum(r.counts for r in records)
    renormalized = {r.label: (r.counts / total if total else 0.0) for r in records}
    logger.info("Entangle experiment sampled", seed=n.seed, total_counts=total, **renormalized)
    return EntangleExperiment(
        success_probability=success,
        ideal_histogram=hist,
        records=tuple(records),
        renormalized=renormalized,
    )


def noisy_fringe_probability(
    cfg: GateConfig,
    theta: float,
    w: CoincidenceWindow,
    n: NoiseConfig,
    jones: Optional[JonesVector] = None,
    analyzer_deg: Tuple[float, float] = (DEFAULT_ANALYZER_DEG, DEFAULT_ANALYZER_DEG),
) -> float:
    """
    Recorded doubly-transmitted probability at theta with jitter and leakage

    Analyzer outcomes are first harmonics in theta, so averaging over Gaussian
    jitter keeps the mean (half-sum at theta and theta + pi) and scales the
    oscillating part by exp(-sigma^2 / 2). Leakage then mixes the four
    analyzer outcomes like truth-table cells.
    """
    kept_here, _ = postselected_output(cfg.with_theta(theta), w, jones)
    kept_opposite, _ = postselected_output(cfg.with_theta(theta + math.pi), w, jones)
    here = np.array([analyzer_outcomes(kept_here, *analyzer_deg)[k] for k in ANALYZER_LABELS])
    opposite = np.array([analyzer_outcomes(kept_opposite, *analyzer_deg)[k] for k in ANALYZER_LABELS])

    mean = (here + opposite) / 2.0
    jittered = mean + n.jitter_factor * (here - mean)
    return _clip_probability(float(jittered @ leakage_matrix(n.leakage)[:, 0]))


def run_fringe_experiment(
    cfg: GateConfig,
    voltages: Sequence[float],
    n: NoiseConfig,
    nm_per_volt: float,
    wavelength_nm: float,
    w: Optional[CoincidenceWindow] = None,
    jones: Optional[JonesVector] = None,
    analyzer_deg: Tuple[float, float] = (DEFAULT_ANALYZER_DEG, DEFAULT_ANALYZER_DEG),
) -> List[CountRecord]:
    """
    PZT voltage sweep of the two-photon fringe

    theta = theta1 + theta2 + pzt phase; point k is sampled from substream k.
    """
    if len(voltages) == 0:
        raise PreconditionError("run_fringe_experiment needs at least one voltage")
    w = w or CoincidenceWindow(DEFAULT_WINDOW_BINS)

    records = []
    for k, volts in enumerate(voltages):
        theta = cfg.theta + pzt_volts_to_phase(volts, nm_per_volt, wavelength_nm)
        p = noisy_fringe_probability(cfg, theta, w, n, jones, analyzer_deg)
        mean = expected_coincidences(p, n, w.seconds)
        records.append(CountRecord(
            label="++",
            counts=sample_counts(mean, n.seed, k),
            integration_s=n.integration_s,
            seed=n.seed,
            expected=mean,
            theta_rad=theta,
            volts=float(volts),
        ))

    logger.info("Fringe experiment sampled",
                seed=n.seed,
                points=len(records),
                jitter_factor=round(n.jitter_factor, 6))
    return records
