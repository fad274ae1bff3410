"""
Fringe Plot
Coincidence fringe (measured dots, fitted curve) rendered to a byte-stable SVG
"""
from typing import Optional, Sequence

import matplotlib
matplotlib.use('Agg')  # Non-interactive backend
import matplotlib.pyplot as plt
import numpy as np
import structlog

from measurement import FringeFit

logger = structlog.get_logger()

SVG_HASH_SALT = "cnot-simulator"
CURVE_POINTS = 400


def plot_fringe(
    thetas: Sequence[float],
    values: Sequence[float],
    path: str,
    fit: Optional[FringeFit] = None,
    errors: Optional[Sequence[float]] = None,
    ylabel: str = "coincidences",
):
    """
    Save the fringe as SVG

    Args:
        thetas: Phase of each point (rad)
        values: Counts or probabilities
        path: Output file
        fit: Fitted model drawn as a curve, if available
        errors: Error bars (Poisson), if available
        ylabel: Y axis label
    """
    thetas = np.asarray(thetas, dtype=float)
    values = np.asarray(values, dtype=float)

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        try:
            ax.errorbar(thetas, values, yerr=errors, fmt="o", color="tab:blue", label="data")
            if fit is not None:
                grid = np.linspace(thetas.min(), thetas.max(), CURVE_POINTS)
                ax.plot(grid, fit.model(grid), color="tab:red",
                        label=f"fit V={fit.visibility:.3f}")
            ax.set_xlabel("theta1 + theta2 (rad)")
            ax.set_ylabel(ylabel)
            ax.legend(loc="upper right")
            ax.grid(True, alpha=0.3)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

    logger.info("Fringe plot saved", path=path, points=len(thetas))
