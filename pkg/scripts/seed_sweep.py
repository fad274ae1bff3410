#!/usr/bin/env python3
"""
Seed Sweep for the Calibrated Noise Model
Re-runs the Monte Carlo truth table and fringe over many seeds and reports how often both land in the measured bands
"""
import argparse
import os
import sys

import numpy as np
import structlog

SERVICE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "services", "cnot-simulator")
sys.path.insert(0, SERVICE_DIR)

from config import load_config  # noqa: E402
from measurement import fit_fringe  # noqa: E402
from montecarlo import run_fringe_experiment, run_truth_table_experiment  # noqa: E402

logger = structlog.get_logger()

DIAGONAL_BAND = (0.92, 1.0)
VISIBILITY_BAND = (0.28, 0.60)
SWEEP_VOLTS = [float(v) for v in range(25)]


def run_seed(config, seed):
    """Diagonal of the renormalized truth table and fitted fringe visibility for one seed"""
    cfg = config.gate_config()
    w = config.coincidence_window()
    n = config.noise_config(seed=seed)

    diagonal = run_truth_table_experiment(cfg, w, n).diagonal
    records = run_fringe_experiment(cfg, SWEEP_VOLTS, n, config.pzt.nm_per_volt, config.pzt.wavelength_nm, w)
    visibility = fit_fringe([(r.theta_rad, float(r.counts)) for r in records]).visibility
    return diagonal, visibility


def main():
    parser = argparse.ArgumentParser(description="Seed sweep of the calibrated noise model")
    parser.add_argument('-c', '--config', dest='config',
                        default=os.path.join(SERVICE_DIR, "configs", "calibrated_noise.toml"),
                        help="experiment TOML file")
    parser.add_argument('-n', '--seeds', dest='seeds', type=int, default=100,
                        help="number of seeds, starting at 0")
    args = parser.parse_args()

    logger.info("Starting seed sweep", config=args.config, seeds=args.seeds)

    try:
        config = load_config(args.config)
        diagonal_ok = 0
        visibility_ok = 0
        both_ok = 0
        for seed in range(args.seeds):
            diagonal, visibility = run_seed(config, seed)
            d_ok = bool(np.all((diagonal >= DIAGONAL_BAND[0]) & (diagonal <= DIAGONAL_BAND[1])))
            v_ok = VISIBILITY_BAND[0] <= visibility <= VISIBILITY_BAND[1]
            diagonal_ok += d_ok
            visibility_ok += v_ok
            both_ok += d_ok and v_ok
            logger.debug("Seed done", seed=seed, diagonal_min=float(diagonal.min()), visibility=visibility)

        logger.info("Seed sweep finished", seeds=args.seeds, passed=both_ok)
        print(f"seeds: {args.seeds}")
        print(f"diagonal in [{DIAGONAL_BAND[0]}, {DIAGONAL_BAND[1]}]: {diagonal_ok / args.seeds:.2f}")
        print(f"visibility in [{VISIBILITY_BAND[0]}, {VISIBILITY_BAND[1]}]: {visibility_ok / args.seeds:.2f}")
        print(f"both: {both_ok / args.seeds:.2f}")

    except Exception as e:
        logger.error("Seed sweep failed", error=str(e))
        sys.exit(1)


if __name__ == "__main__":
    main()
