"""Unit conversions, the path-loss channel model, and random topology generation.

All power arithmetic inside the package is in linear milliwatts; dBm appears
only at I/O boundaries (CLI flags, serialized files).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import BaseStation, Scenario, SystemParams, User, sort_and_cluster
from .errors import ConfigurationError

CELL_RADIUS_M = 120.0
MIN_USER_DISTANCE_M = 20.0

# Compensating BSs sit on a ring at twice the cell radius so that each covers
# a disk adjacent to the failed cell and failed users stay farther from every
# compensating BS than that BS's own users (with high probability).
RING_DISTANCE_M = 2.0 * CELL_RADIUS_M

_MAX_RESAMPLES = 1000


@dataclass(frozen=True)
class PowerDbm:
    """Power in dBm, used only at I/O boundaries."""

    value: float

    def linear(self) -> "PowerLinear":
        return PowerLinear(dbm_to_linear(self.value))


@dataclass(frozen=True)
class PowerLinear:
    """Power in linear mW."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ConfigurationError(f"linear power must be >= 0, got {self.value}")

    def dbm(self) -> PowerDbm:
        return PowerDbm(linear_to_dbm(self.value))


def dbm_to_linear(p_dbm: float) -> float:
    """Convert dBm to linear mW."""
    return 10.0 ** (p_dbm / 10.0)


def linear_to_dbm(p_mw: float) -> float:
    """Convert linear mW to dBm."""
    if p_mw <= 0:
        raise ConfigurationError(f"cannot express non-positive power {p_mw} mW in dBm")
    return 10.0 * math.log10(p_mw)


def path_loss_db(d_m: float) -> float:
    """Path loss 38 + 30*log10(d) dB at distance d meters."""
    if d_m <= 0:
        raise ConfigurationError(f"distance must be positive, got {d_m}")
    return 38.0 + 30.0 * math.log10(d_m)


def channel_gain(d_m: float, fading: float = 1.0) -> float:
    """Linear power gain at distance d; purely distance-based (no fading by default).

    ``fading`` is a multiplicative hook for future small-scale models.
    """
    return fading * 10.0 ** (-path_loss_db(d_m) / 10.0)


def _sample_in_annulus(rng: np.random.Generator, cx: float, cy: float) -> tuple[float, float]:
    # Uniform over the annulus [MIN_USER_DISTANCE_M, CELL_RADIUS_M] around (cx, cy).
    r = math.sqrt(
        rng.uniform(MIN_USER_DISTANCE_M**2, CELL_RADIUS_M**2)
    )
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return cx + r * math.cos(theta), cy + r * math.sin(theta)


def generate_topology(
    n_compensating: int,
    users_per_cell: int,
    n_failed: int,
    seed: int,
    params: SystemParams | None = None,
) -> Scenario:
    """Generate a random outage scenario.

    One failed BS at the origin; ``n_compensating`` BSs on a ring around it,
    each serving ``users_per_cell`` connected users sampled uniformly in the
    [20, 120] m annulus. ``n_failed`` users are sampled in the failed cell.
    Scenarios whose gains violate the connected-above-failed ordering for any
    compensating cell are resampled (count recorded on the scenario).
    """
    params = params or SystemParams()
    if n_compensating < 1 or users_per_cell < 1 or n_failed < 0:
        raise ConfigurationError("counts must be positive")
    clusters_per_cell = -(-users_per_cell // params.q)
    if n_failed > n_compensating * clusters_per_cell:
        raise ConfigurationError(
            f"{n_failed} failed users exceed the {n_compensating * clusters_per_cell} "
            "available clusters; at most one failed user per cluster"
        )

    rng = np.random.default_rng(seed)
    for resamples in range(_MAX_RESAMPLES):
        scenario = _draw_scenario(
            rng, n_compensating, users_per_cell, n_failed, seed, params
        )
        if _gain_ordering_holds(scenario):
            scenario.resamples = resamples
            return scenario
    raise ConfigurationError(
        f"could not draw a scenario with valid gain ordering in {_MAX_RESAMPLES} tries"
    )


def _draw_scenario(rng, n_comp, users_per_cell, n_failed, seed, params) -> Scenario:
    bss = [BaseStation(id=0, x=0.0, y=0.0, failed=True)]
    for i in range(n_comp):
        angle = 2.0 * math.pi * i / n_comp
        bss.append(
            BaseStation(
                id=i + 1,
                x=RING_DISTANCE_M * math.cos(angle),
                y=RING_DISTANCE_M * math.sin(angle),
                failed=False,
            )
        )

    users: list[User] = []
    uid = 0
    for bs in bss[1:]:
        for _ in range(users_per_cell):
            x, y = _sample_in_annulus(rng, bs.x, bs.y)
            users.append(User(id=uid, home_bs=bs.id, x=x, y=y))
            uid += 1
    for _ in range(n_failed):
        x, y = _sample_in_annulus(rng, 0.0, 0.0)
        users.append(User(id=uid, home_bs=0, x=x, y=y))
        uid += 1

    gains = {
        bs.id: {
            u.id: channel_gain(math.hypot(u.x - bs.x, u.y - bs.y)) for u in users
        }
        for bs in bss
    }

    clusters = []
    for bs in bss[1:]:
        own = [u.id for u in users if u.home_bs == bs.id]
        clusters.extend(sort_and_cluster(bs.id, own, gains[bs.id], params.q))

    return Scenario(
        bss=bss, users=users, gains=gains, params=params, clusters=clusters, seed=seed
    )


def _gain_ordering_holds(scenario: Scenario) -> bool:
    failed = scenario.failed_users()
    if not failed:
        return True
    for bs in scenario.compensating_bss():
        own_min = min(
            scenario.gains[bs.id][u.id] for u in scenario.users if u.home_bs == bs.id
        )
        failed_max = max(scenario.gains[bs.id][u.id] for u in failed)
        if failed_max > own_min:
            return False
    return True
