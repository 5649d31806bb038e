import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_swarm(rng, n, pos_scale=2.0, pitch_range=(0.2, 1.3)):
    """Random swarm away from angle-domain boundaries (FD-probe safe)."""
    from swarmcover.geometry import DroneState, SwarmState

    drones = tuple(
        DroneState(
            p=rng.uniform(-pos_scale, pos_scale, 3),
            yaw=rng.uniform(-np.pi, np.pi),
            pitch=rng.uniform(*pitch_range),
        )
        for _ in range(n)
    )
    return SwarmState(drones=drones)
