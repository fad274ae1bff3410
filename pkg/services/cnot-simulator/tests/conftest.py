import math
import sys
from pathlib import Path

import pytest

SERVICE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(SERVICE_DIR))

from circuits import GateConfig  # noqa: E402
from core_state import JonesVector  # noqa: E402
from measurement import CoincidenceWindow  # noqa: E402

CONFIG_DIR = SERVICE_DIR / "configs"


@pytest.fixture
def gate():
    return GateConfig()


@pytest.fixture
def window():
    return CoincidenceWindow(10)


@pytest.fixture
def diagonal_jones():
    return JonesVector(1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture
def config_dir():
    return CONFIG_DIR
