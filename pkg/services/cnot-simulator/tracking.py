"""
MLflow Tracking
Optional logging of simulator runs (params, headline metrics, output files) to MLflow
"""
import os
from datetime import datetime
from typing import Dict, Iterable, Optional

import structlog

logger = structlog.get_logger()

EXPERIMENT_NAME = "cnot_simulations"


def log_run(
    command: str,
    params: Dict[str, object],
    metrics: Dict[str, float],
    artifacts: Iterable[str] = (),
    tracking_uri: Optional[str] = None,
) -> Optional[str]:
    """
    Log one run to MLflow

    Failures are logged and swallowed; the simulation result never depends on tracking.

    Returns:
        MLflow run id, or None if logging failed
    """
    try:
        import mlflow

        mlflow.set_tracking_uri(tracking_uri or os.getenv('MLFLOW_TRACKING_URI', 'http://localhost:5000'))
        mlflow.set_experiment(EXPERIMENT_NAME)

        with mlflow.start_run(run_name=f"{command}_{datetime.now().strftime('%Y%m%d_%H%M%S')}") as run:
            mlflow.log_param("command", command)
            mlflow.log_params({key: value for key, value in params.items() if value is not None})
            mlflow.log_metrics({key: float(value) for key, value in metrics.items()})
            for path in artifacts:
                mlflow.log_artifact(path)

            logger.info("Logged to MLflow", run_id=run.info.run_id)
            return run.info.run_id

    except Exception as e:
        logger.error("Error logging to MLflow", error=str(e))
        return None
