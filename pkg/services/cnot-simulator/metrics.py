"""
Run Metrics
Prometheus counters and gauges for batch runs, exported as a text file
"""
from prometheus_client import CollectorRegistry, Counter, Gauge, write_to_textfile
import structlog

logger = structlog.get_logger()

registry = CollectorRegistry()

runs_total = Counter(
    'cnot_sim_runs_total',
    'Simulator runs by command',
    ['command'],
    registry=registry,
)
run_duration = Gauge(
    'cnot_sim_run_duration_seconds',
    'Wall time of the last run by command',
    ['command'],
    registry=registry,
)
postselection_probability = Gauge(
    'cnot_sim_postselection_probability',
    'Coincidence post-selection probability of the last run',
    registry=registry,
)
fringe_visibility = Gauge(
    'cnot_sim_fringe_visibility',
    'Fitted fringe visibility of the last run',
    registry=registry,
)


def record_run(command: str, duration_s: float):
    runs_total.labels(command=command).inc()
    run_duration.labels(command=command).set(duration_s)


def write_metrics(path: str):
    """Write the registry in Prometheus text format"""
    write_to_textfile(path, registry)
    logger.info("Metrics written", path=path)
