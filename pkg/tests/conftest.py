import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FOUR_CITY = [[0, 10, 15, 20], [10, 0, 35, 25], [15, 35, 0, 30], [20, 25, 30, 0]]


@pytest.fixture
def four_city():
    from qtsp.instances import TspInstance

    return TspInstance(np.array(FOUR_CITY, dtype=float))
