import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_coc.channel import (
    CELL_RADIUS_M,
    MIN_USER_DISTANCE_M,
    RING_DISTANCE_M,
    PowerDbm,
    channel_gain,
    dbm_to_linear,
    generate_topology,
    linear_to_dbm,
    path_loss_db,
)
from noma_coc.domain import SystemParams
from noma_coc.errors import ConfigurationError


def test_dbm_reference_points():
    assert dbm_to_linear(0.0) == 1.0
    assert dbm_to_linear(30.0) == pytest.approx(1000.0)
    assert dbm_to_linear(-30.0) == pytest.approx(1e-3)
    # budget from the default parameter table
    assert dbm_to_linear(46.02) == pytest.approx(39994.47497610978, rel=1e-12)


@given(st.floats(min_value=-200.0, max_value=100.0))
def test_dbm_round_trip(p_dbm):
    assert linear_to_dbm(dbm_to_linear(p_dbm)) == pytest.approx(p_dbm, abs=1e-9)


def test_linear_to_dbm_rejects_nonpositive():
    with pytest.raises(ConfigurationError):
        linear_to_dbm(0.0)
    with pytest.raises(ConfigurationError):
        linear_to_dbm(-1.0)


def test_power_wrappers_round_trip():
    p = PowerDbm(10.0).linear()
    assert p.value == pytest.approx(10.0)
    assert p.dbm().value == pytest.approx(10.0)
    with pytest.raises(ConfigurationError):
        from noma_coc.channel import PowerLinear

        PowerLinear(-1.0)


def test_path_loss_values():
    # 38 + 30*log10(d): frozen reference points
    assert path_loss_db(1.0) == pytest.approx(38.0)
    assert path_loss_db(10.0) == pytest.approx(68.0)
    assert path_loss_db(20.0) == pytest.approx(77.03089986991944, rel=1e-12)
    assert path_loss_db(100.0) == pytest.approx(98.0)
    with pytest.raises(ConfigurationError):
        path_loss_db(0.0)


def test_channel_gain_monotone_decreasing():
    distances = [20.0, 50.0, 120.0, 240.0, 360.0]
    gains = [channel_gain(d) for d in distances]
    assert all(a > b for a, b in zip(gains, gains[1:]))
    assert channel_gain(20.0) == pytest.approx(10 ** (-77.03089986991944 / 10), rel=1e-12)
    assert channel_gain(20.0, fading=0.5) == pytest.approx(channel_gain(20.0) * 0.5)


def test_topology_shape_and_determinism():
    sc1 = generate_topology(3, 4, 3, seed=11)
    sc2 = generate_topology(3, 4, 3, seed=11)
    assert sc1.to_json() == sc2.to_json()
    assert len(sc1.bss) == 4
    assert sc1.failed_bs().id == 0
    assert len(sc1.users) == 3 * 4 + 3
    assert len(sc1.failed_users()) == 3
    assert len(sc1.clusters) == 6
    # two users per cluster at q=2 and four users per cell
    assert all(len(c.members) == 2 for c in sc1.clusters)


def test_topology_seed_changes_draw():
    assert generate_topology(3, 4, 3, seed=1).to_json() != generate_topology(3, 4, 3, seed=2).to_json()


def test_topology_geometry():
    sc = generate_topology(4, 3, 2, seed=5)
    for bs in sc.compensating_bss():
        assert math.hypot(bs.x, bs.y) == pytest.approx(RING_DISTANCE_M)
        for u in sc.connected_users(bs.id):
            d = math.hypot(u.x - bs.x, u.y - bs.y)
            assert MIN_USER_DISTANCE_M <= d <= CELL_RADIUS_M + 1e-9
    for u in sc.failed_users():
        assert MIN_USER_DISTANCE_M <= math.hypot(u.x, u.y) <= CELL_RADIUS_M + 1e-9


def test_topology_gain_ordering_invariant():
    for seed in range(20):
        sc = generate_topology(3, 4, 4, seed=seed)
        failed_ids = [u.id for u in sc.failed_users()]
        for bs in sc.compensating_bss():
            own_min = min(sc.gains[bs.id][u.id] for u in sc.connected_users(bs.id))
            failed_max = max(sc.gains[bs.id][u] for u in failed_ids)
            assert failed_max <= own_min


def test_topology_cluster_membership_partition():
    sc = generate_topology(3, 5, 2, seed=3)
    for bs in sc.compensating_bss():
        member_lists = [c.members for c in sc.clusters_of(bs.id)]
        flat = [u for m in member_lists for u in m]
        assert sorted(flat) == sorted(u.id for u in sc.connected_users(bs.id))
        for members in member_lists:
            gains = [sc.gains[bs.id][u] for u in members]
            assert gains == sorted(gains, reverse=True)


def test_topology_rejects_overloaded_config():
    # 7 failed users but only 3 cells * 2 clusters = 6 slots
    with pytest.raises(ConfigurationError):
        generate_topology(3, 4, 7, seed=0)
    with pytest.raises(ConfigurationError):
        generate_topology(0, 4, 1, seed=0)


def test_topology_custom_params():
    params = SystemParams(q=3)
    sc = generate_topology(2, 6, 2, seed=9, params=params)
    assert all(len(c.members) == 3 for c in sc.clusters)
    assert len(sc.clusters) == 4
