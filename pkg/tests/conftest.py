import numpy as np
import pytest

from d2dreuse import Scenario
from d2dreuse.cli import gen_scenario


def blocked_scenario(num_due, seed, n_blocked=2, wall_count=10):
    """Random drop with the first n_blocked BS links heavily walled."""
    sc = gen_scenario(num_due, seed=seed)
    walls = np.array(sc.walls)
    for k in range(min(n_blocked, num_due)):
        walls[0, k] = wall_count
    return Scenario(
        num_bs=sc.num_bs,
        num_due=sc.num_due,
        positions=sc.positions,
        tx_power_dbm=sc.tx_power_dbm,
        bandwidth_hz=sc.bandwidth_hz,
        noise_psd_dbm_hz=sc.noise_psd_dbm_hz,
        pathloss=sc.pathloss,
        walls=walls,
        seed=sc.seed,
    )


def two_cluster_scenario():
    """Five DUEs in a hand-built blockage topology: one relay pair on the
    left, one relay serving two blocked users on the right."""
    positions = np.array(
        [
            [100.0, 100.0],  # BS
            [40.0, 100.0],   # DUE 1, BS link blocked, near DUE 2
            [55.0, 100.0],   # DUE 2, relay for DUE 1
            [150.0, 100.0],  # DUE 3, relay for DUEs 4 and 5
            [162.0, 92.0],   # DUE 4, BS link blocked
            [162.0, 108.0],  # DUE 5, BS link blocked
        ]
    )
    walls = np.zeros((6, 5), dtype=int)
    walls[0, 0] = 12
    walls[0, 3] = 12
    walls[0, 4] = 12
    return Scenario(
        num_bs=1,
        num_due=5,
        positions=positions,
        tx_power_dbm=np.array([30.0, 20.0, 20.0, 20.0, 20.0, 20.0]),
        walls=walls,
        seed=0,
    )


@pytest.fixture
def five_due_blockage():
    return two_cluster_scenario()
