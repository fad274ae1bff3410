#!/usr/bin/env python3
"""
CNOT Simulator CLI
Runs truth-table, entangle, fringe and cascade-check experiments and writes CSV/SVG results
"""
import argparse
import logging
import math
import os
import sys
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

import metrics
from circuits import validate_cascade_timing
from config import ExperimentConfig, load_config
from exceptions import (
    ConfigParseError,
    ConfigurationError,
    ConfigValidationError,
    FitError,
    SimulationError,
)
from measurement import (
    CNOT_CELLS,
    POL_LABELS,
    FringeFit,
    fidelity,
    fidelity_stderr,
    fit_fringe,
    fringe_scan,
    polarization_histogram,
    postselected_output,
    pzt_volts_to_phase,
    state_concurrence,
    truth_table,
)
from montecarlo import run_entangle_experiment, run_fringe_experiment, run_truth_table_experiment
from plotting import plot_fringe

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

DEFAULT_PREFIX = "cnot"
DEFAULT_SWEEP_POINTS = 25
# PZT sweep used for the Monte Carlo visibility of `entangle` (about two fringe periods)
ENTANGLE_SWEEP_VOLTS = tuple(float(v) for v in range(25))

RunResult = Tuple[int, List[str], Dict[str, float]]


def configure_logging():
    """JSON logs to stderr; stdout is reserved for reports"""
    level = getattr(logging, os.getenv('LOG_LEVEL', 'INFO').upper(), logging.INFO)
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        logger.error("Invalid arguments", error=message)
        raise SystemExit(EXIT_VALIDATION)


def parse_sweep(sweep: str, option: str) -> np.ndarray:
    """
    Parse start:stop:step into an inclusive grid

    Raises:
        ConfigValidationError: malformed sweep, non-positive step or stop < start
    """
    try:
        start, stop, step = (float(part) for part in sweep.split(":"))
    except ValueError:
        raise ConfigValidationError(option, f"expected start:stop:step, got {sweep!r}")
    if step <= 0 or stop < start:
        raise ConfigValidationError(option, f"need step > 0 and stop >= start, got {sweep!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def write_csv(path: str, frame: pd.DataFrame, config_hash: str, seed: int) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_sha256={config_hash} seed={seed}\n")
        frame.to_csv(fh, index=False, float_format="%.15g", lineterminator="\n")
    logger.info("CSV written", path=path, rows=len(frame))
    return path


def cmd_truth_table(config: ExperimentConfig, args: argparse.Namespace) -> RunResult:
    """`<prefix>_truth.csv`: ideal probabilities, or Monte Carlo counts renormalized per input"""
    cfg, w = config.gate_config(), config.coincidence_window()
    noise = config.noise_config(args.seed)
    path = f"{args.out}_truth.csv"

    if args.montecarlo:
        experiment = run_truth_table_experiment(cfg, w, noise)
        frame = experiment.to_frame()
        headline = {
            "success_probability": float(experiment.ideal.success_probabilities.mean()),
            "diagonal_mean": float(experiment.diagonal.mean()),
        }
    else:
        table = truth_table(cfg, w)
        frame = table.to_frame()
        headline = {
            "success_probability": float(table.success_probabilities.mean()),
            "diagonal_mean": float(np.mean([table.renormalized()[i, j] for i, j in CNOT_CELLS])),
        }

    metrics.postselection_probability.set(headline["success_probability"])
    return EXIT_OK, [write_csv(path, frame, config.config_hash(), noise.seed)], headline


def _state_label(key) -> str:
    m1, m2 = key
    return f"{m1.port}{m1.pol.value}@{m1.t}|{m2.port}{m2.pol.value}@{m2.t}"


def _ideal_visibility(config: ExperimentConfig) -> float:
    thetas = np.linspace(0.0, 2.0 * math.pi, DEFAULT_SWEEP_POINTS)
    samples = fringe_scan(config.gate_config(), thetas, config.coincidence_window(), config.jones())
    return fit_fringe(samples).visibility


def cmd_entangle(config: ExperimentConfig, args: argparse.Namespace) -> RunResult:
    """
    `<prefix>_entangle.csv`: post-selected state, success probability, histogram, concurrence, fidelity

    Monte Carlo runs fill the stderr column (Poisson for counts, binomial for
    the histogram, fit error for V, propagated error for F); exact values carry 0.
    """
    cfg, w = config.gate_config(), config.coincidence_window()
    noise = config.noise_config(args.seed)
    jones = config.jones()

    kept, success = postselected_output(cfg, w, jones, config.target())
    rows = [
        {"section": "state", "label": _state_label(key), "value": amp.real, "imag": amp.imag, "stderr": 0.0}
        for key, amp in kept.items()
    ]
    rows.append({"section": "success", "label": "probability", "value": success, "imag": 0.0, "stderr": 0.0})

    if args.montecarlo:
        experiment = run_entangle_experiment(cfg, w, noise, jones, config.target())
        histogram, histogram_err = experiment.renormalized, experiment.renormalized_err
        rows.extend(
            {"section": "counts", "label": r.label, "value": float(r.counts), "imag": 0.0, "stderr": r.poisson_err}
            for r in experiment.records
        )
        records = run_fringe_experiment(
            cfg, ENTANGLE_SWEEP_VOLTS, noise, config.pzt.nm_per_volt, config.pzt.wavelength_nm, w, jones
        )
        fit = fit_fringe([(r.theta_rad, float(r.counts)) for r in records])
        visibility, visibility_err = fit.visibility, fit.visibility_stderr
    else:
        histogram = polarization_histogram(kept)
        histogram_err = {label: 0.0 for label in POL_LABELS}
        visibility, visibility_err = _ideal_visibility(config), 0.0

    state_c = state_concurrence(kept)
    f = fidelity(histogram["HH"], histogram["VV"], min(max(visibility, 0.0), 1.0))
    if args.montecarlo:
        f_err = fidelity_stderr(histogram["HH"], histogram["VV"], experiment.total_counts, visibility_err)
    else:
        f_err = 0.0

    rows.extend(
        {"section": "histogram", "label": label, "value": histogram[label], "imag": 0.0, "stderr": histogram_err[label]}
        for label in POL_LABELS
    )
    rows.append({"section": "concurrence", "label": "C", "value": state_c, "imag": 0.0, "stderr": 0.0})
    rows.append({"section": "fringe", "label": "V", "value": visibility, "imag": 0.0, "stderr": visibility_err})
    rows.append({"section": "fidelity", "label": "F", "value": f, "imag": 0.0, "stderr": f_err})

    logger.info("Entangled state analysed",
                success=round(success, 12),
                concurrence=round(state_c, 12),
                visibility=round(visibility, 6),
                fidelity=round(f, 6),
                fidelity_stderr=round(f_err, 6))

    frame = pd.DataFrame(rows, columns=["section", "label", "value", "imag", "stderr"])

    path = write_csv(f"{args.out}_entangle.csv", frame, config.config_hash(), noise.seed)
    metrics.postselection_probability.set(success)
    metrics.fringe_visibility.set(visibility)
    headline = {"success_probability": success, "concurrence": state_c, "visibility": visibility, "fidelity": f}
    return EXIT_OK, [path], headline


def _sweep(config: ExperimentConfig, args: argparse.Namespace) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """(volts or None, theta) of the requested sweep; defaults to 25 points over one period"""
    base = config.gate_config().theta
    k, wavelength = config.pzt.nm_per_volt, config.pzt.wavelength_nm
    if args.volts:
        volts = parse_sweep(args.volts, "--volts")
        return volts, np.array([base + pzt_volts_to_phase(v, k, wavelength) for v in volts])
    if args.theta:
        return None, parse_sweep(args.theta, "--theta")
    return None, np.linspace(0.0, 2.0 * math.pi, DEFAULT_SWEEP_POINTS)


def cmd_fringe(config: ExperimentConfig, args: argparse.Namespace) -> RunResult:
    """`<prefix>_fringe.csv`, `<prefix>_fringe_fit.csv` and `<prefix>_fringe.svg`; prints `A,V,phi`"""
    cfg, w = config.gate_config(), config.coincidence_window()
    noise = config.noise_config(args.seed)
    k, wavelength = config.pzt.nm_per_volt, config.pzt.wavelength_nm
    volts, thetas = _sweep(config, args)

    ideal = fringe_scan(cfg, thetas, w, config.jones())
    frame = pd.DataFrame({
        "volts": volts if volts is not None else np.full(len(thetas), np.nan),
        "theta_rad": thetas,
        "probability": [p for _, p in ideal],
        "counts": np.full(len(thetas), np.nan),
        "poisson_err": np.full(len(thetas), np.nan),
    })

    if args.montecarlo:
        drive = volts if volts is not None else (thetas - cfg.theta) * wavelength / (2.0 * math.pi * k)
        records = run_fringe_experiment(cfg, list(drive), noise, k, wavelength, w, config.jones())
        frame["counts"] = [r.counts for r in records]
        frame["counts"] = frame["counts"].astype("Int64")
        frame["poisson_err"] = [r.poisson_err for r in records]
        samples = [(theta, float(r.counts)) for theta, r in zip(thetas, records)]
        errors = frame["poisson_err"].to_numpy(dtype=float)
        ylabel = "coincidences"
    else:
        samples = ideal
        errors = None
        ylabel = "probability"

    config_hash = config.config_hash()
    artifacts = [write_csv(f"{args.out}_fringe.csv", frame, config_hash, noise.seed)]

    fit: Optional[FringeFit] = None
    try:
        fit = fit_fringe(samples)
    except FitError as e:
        logger.warning("Fringe fit failed", error=str(e), points=len(samples))

    svg_path = f"{args.out}_fringe.svg"
    plot_fringe(thetas, [value for _, value in samples], svg_path, fit=fit, errors=errors, ylabel=ylabel)
    artifacts.append(svg_path)

    if fit is None:
        return EXIT_RUNTIME, artifacts, {}

    fit_frame = pd.DataFrame([{
        "A": fit.amplitude,
        "V": fit.visibility,
        "phi": fit.phase,
        "V_stderr": fit.visibility_stderr,
    }])
    artifacts.append(write_csv(f"{args.out}_fringe_fit.csv", fit_frame, config_hash, noise.seed))
    print(f"{fit.amplitude:.12g},{fit.visibility:.12g},{fit.phase:.12g}")

    metrics.fringe_visibility.set(fit.visibility)
    return EXIT_OK, artifacts, {"amplitude": fit.amplitude, "visibility": fit.visibility}


def cmd_cascade_check(config: ExperimentConfig, args: argparse.Namespace) -> RunResult:
    """Print the cascade delays, the window and SAFE or every conflicting branch pair"""
    cascade = config.cascade_config()
    conflicts = validate_cascade_timing(cascade)

    print(f"delays_bins: {','.join(str(d) for d in cascade.delays)}")
    print(f"window_bins: {cascade.window_bins}")
    if not conflicts:
        print("SAFE")
        return EXIT_OK, [], {"conflicts": 0.0}

    for conflict in conflicts:
        print(f"CONFLICT {conflict.label()} delta_bins={conflict.delta_bins}")
    return EXIT_VALIDATION, [], {"conflicts": float(len(conflicts))}


COMMANDS = {
    "truth-table": cmd_truth_table,
    "entangle": cmd_entangle,
    "fringe": cmd_fringe,
    "cascade-check": cmd_cascade_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', help="Experiment TOML file (nominal setup if omitted)", dest="config", type=str)
    common.add_argument('--seed', help="Override noise.seed (unsigned 64-bit)", dest="seed", type=int)
    common.add_argument('--out', help="Output file prefix", dest="out", type=str, default=DEFAULT_PREFIX)
    common.add_argument('--metrics-file', help="Write Prometheus metrics to this file", dest="metrics_file", type=str)
    common.add_argument('--mlflow', help="Log the run to MLflow", dest="mlflow", action="store_true")

    def add_mode(sub):
        mode = sub.add_mutually_exclusive_group()
        mode.add_argument('--ideal', help="Exact probabilities (default)", dest="montecarlo", action="store_false")
        mode.add_argument('--montecarlo', help="Poisson-sampled counts with the noise section", dest="montecarlo", action="store_true")
        sub.set_defaults(montecarlo=False)

    parser = _ArgumentParser(description="Polarization and time-bin CNOT gate simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)

    add_mode(subparsers.add_parser('truth-table', parents=[common], help="CNOT truth table"))
    add_mode(subparsers.add_parser('entangle', parents=[common], help="Post-selected entangled state"))

    fringe = subparsers.add_parser('fringe', parents=[common], help="Two-photon interference fringe")
    add_mode(fringe)
    sweep = fringe.add_mutually_exclusive_group()
    sweep.add_argument('--volts', help="PZT sweep start:stop:step (V)", dest="volts", type=str)
    sweep.add_argument('--theta', help="Phase sweep start:stop:step (rad)", dest="theta", type=str)

    subparsers.add_parser('cascade-check', parents=[common], help="Coincidence timing check of the cascade section")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    started = time.perf_counter()

    try:
        config = load_config(args.config)
        exit_code, artifacts, headline = COMMANDS[args.command](config, args)
    except (ConfigValidationError, ConfigParseError, ConfigurationError) as e:
        logger.error("Invalid configuration", command=args.command, error=str(e))
        return EXIT_VALIDATION
    except (SimulationError, OSError) as e:
        logger.error("Run failed", command=args.command, error=str(e))
        return EXIT_RUNTIME

    duration = time.perf_counter() - started
    metrics.record_run(args.command, duration)
    logger.info("Run finished", command=args.command, exit_code=exit_code, duration_s=round(duration, 3))

    if args.metrics_file:
        try:
            metrics.write_metrics(args.metrics_file)
        except OSError as e:
            logger.error("Could not write metrics", path=args.metrics_file, error=str(e))
            return EXIT_RUNTIME

    if args.mlflow:
        from tracking import log_run
        log_run(args.command, config.flat_params(), headline, artifacts)

    return exit_code


if __name__ == "__main__":
    sys.exit(main())
