"""Heuristic failed-user association.

Each compensating BS keeps its connected users at (approximately) their
pre-outage SE with less power, freeing a per-cluster budget for one failed
user. Two approximations provide the post-outage connected powers:

  * uniform scaling (isolated cells): the noise floor is negligible next to
    intra-cluster interference, so scaling every member power by the ratio
    delta of the minimum top-user power to its pre-outage power preserves all
    SINRs;
  * rank-order recursion (co-channel interference): with the floor
    sigma^2 + |D_n|*i_max no single scale works, so each member's power is
    adjusted in decoding order to reproduce its pre-outage SINR exactly.

The freed budgets feed a candidate SE table over (failed user, cluster)
pairs; a greedy argmax loop then assigns users one at a time, zeroing the
chosen user's row and cluster's column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import SolverConfig
from .domain import (
    AssociationMap,
    InterferenceConfig,
    PowerSolution,
    Scenario,
    SystemParams,
    failed_se,
)
from .errors import ContractError, DegenerateClusterError
from .solver import make_instance, solve_pre_outage

_BUDGET_SLACK = 1e-12  # tolerated negative budget from float roundoff


@dataclass(frozen=True)
class ClusterBudget:
    """Power a cluster can lend to one failed user, and how it was freed."""

    bs_id: int
    cluster_idx: int
    delta: float | None  # uniform scale factor; None on the recursion path
    pre_powers: np.ndarray
    post_powers: np.ndarray
    budget: float


def min_power_top_user(gains: np.ndarray, params: SystemParams, extra_floor: float = 0.0) -> float:
    """Smallest power meeting s_min for the cluster's top-gain user, who is
    decoded first and sees no intra-cluster interference."""
    if len(gains) == 0:
        raise ContractError("cluster has no members")
    return (params.sigma2 + extra_floor) / float(gains[0]) * (2.0**params.s_min - 1.0)


def prop1_powers(
    gains: np.ndarray, pre_powers: np.ndarray, params: SystemParams
) -> tuple[float, np.ndarray]:
    """Uniform-scaling approximation: shrink every member power by
    delta = (minimum top-user power) / (pre-outage top-user power).

    With the noise floor negligible against intra-cluster interference, all
    SINRs are ratios of member powers, so a common scale preserves them.
    """
    pre_powers = np.asarray(pre_powers, dtype=float)
    p_top = float(pre_powers[0])
    if p_top <= 0.0:
        raise DegenerateClusterError("pre-outage top-user power is zero")
    delta = min(min_power_top_user(gains, params) / p_top, 1.0)
    return delta, delta * pre_powers


def prop2_powers(
    gains: np.ndarray,
    pre_powers: np.ndarray,
    params: SystemParams,
    extra_floor: float,
) -> np.ndarray:
    """Rank-order recursion: give the top user its minimum power, then adjust
    each later member so its SINR (with floor sigma^2 + extra_floor) exactly
    matches the pre-outage value."""
    gains = np.asarray(gains, dtype=float)
    pre_powers = np.asarray(pre_powers, dtype=float)
    if float(pre_powers[0]) <= 0.0:
        raise DegenerateClusterError("pre-outage top-user power is zero")
    floor = params.sigma2 + extra_floor
    post = np.empty_like(pre_powers)
    post[0] = min(min_power_top_user(gains, params, extra_floor), pre_powers[0])
    cum_post, cum_pre = post[0], pre_powers[0]
    for k in range(1, len(pre_powers)):
        h = gains[k]
        post[k] = pre_powers[k] * (h * cum_post + floor) / (h * cum_pre + floor)
        cum_post += post[k]
        cum_pre += pre_powers[k]
    return post


def cluster_budget(
    bs_id: int,
    cluster_idx: int,
    pre_powers: np.ndarray,
    post_powers: np.ndarray,
    delta: float | None = None,
) -> ClusterBudget:
    """Budget freed by a cluster: pre-outage total minus post-outage total."""
    budget = float(np.sum(pre_powers) - np.sum(post_powers))
    if budget < -_BUDGET_SLACK:
        raise ContractError(f"negative cluster budget {budget:.3e} (cluster {cluster_idx})")
    return ClusterBudget(
        bs_id=bs_id,
        cluster_idx=cluster_idx,
        delta=delta,
        pre_powers=np.asarray(pre_powers, dtype=float),
        post_powers=np.asarray(post_powers, dtype=float),
        budget=max(budget, 0.0),
    )


def candidate_se(
    budget: ClusterBudget, h_f: float, params: SystemParams, extra_floor: float = 0.0
) -> float:
    """SE the failed user would get from this cluster's whole budget. Shares
    the failed-user SE implementation so the two formulas cannot drift."""
    return failed_se(budget.post_powers, budget.budget, h_f, params.sigma2, extra_floor)


def compute_budgets(
    scenario: Scenario,
    icfg: InterferenceConfig | None = None,
    config: SolverConfig | None = None,
) -> dict[tuple[int, int], ClusterBudget]:
    """Pre-outage solve per compensating BS, then one budget per cluster."""
    budgets: dict[tuple[int, int], ClusterBudget] = {}
    for bs in scenario.compensating_bss():
        inst = make_instance(scenario, bs.id, "pre_outage", icfg=icfg)
        sol = solve_pre_outage(inst, config)
        floor = icfg.extra_floor(scenario, bs.id) if icfg else 0.0
        for cl_idx, cluster in enumerate(scenario.clusters_of(bs.id)):
            gains = scenario.cluster_gains(cluster)
            pre = sol.p_connected[(bs.id, cl_idx)]
            if floor > 0.0:
                delta, post = None, prop2_powers(gains, pre, scenario.params, floor)
            else:
                # no co-channel interferers: the interference problem reduces
                # to the plain one, so use the plain scaling rule
                delta, post = prop1_powers(gains, pre, scenario.params)
            budgets[(bs.id, cl_idx)] = cluster_budget(bs.id, cl_idx, pre, post, delta)
    return budgets


def pre_solution(budgets: dict[tuple[int, int], ClusterBudget]) -> PowerSolution:
    """Pre-outage powers recorded in the budgets, as a PowerSolution."""
    sol = PowerSolution()
    for (bs, cl), b in budgets.items():
        sol.p_connected[(bs, cl)] = np.asarray(b.pre_powers, dtype=float)
    return sol


def greedy_associate(
    scenario: Scenario,
    budgets: dict[tuple[int, int], ClusterBudget],
    icfg: InterferenceConfig | None = None,
) -> AssociationMap:
    """Assign each failed user to a distinct cluster by repeated global argmax
    over the candidate SE table, zeroing the winner's row and column.

    Ties break lexicographically on (bs, cluster, user). When every remaining
    candidate is zero, leftover users are placed on remaining clusters in
    descending channel gain and flagged.
    """
    users = [u.id for u in scenario.failed_users()]
    if len(users) > len(budgets):
        raise ContractError(
            f"{len(users)} failed users exceed {len(budgets)} candidate clusters"
        )
    floors = {
        bs.id: icfg.extra_floor(scenario, bs.id) if icfg else 0.0
        for bs in scenario.compensating_bss()
    }
    candidates = sorted(
        (
            (candidate_se(b, scenario.gains[key[0]][uid], scenario.params, floors[key[0]]),
             key, uid)
            for uid in users
            for key, b in budgets.items()
        ),
        key=lambda c: (-c[0], c[1], c[2]),
    )
    # One descending scan over the sorted table reproduces the repeated
    # global-argmax-with-zeroing loop: after removing a user's row and a
    # cluster's column, the next valid entry in sorted order is the new argmax.
    remaining_users = set(users)
    remaining_keys = set(budgets)
    assoc = AssociationMap()
    for se, key, uid in candidates:
        if se <= 0.0 or not remaining_users:
            break
        if uid in remaining_users and key in remaining_keys:
            assoc.entries[uid] = key
            remaining_users.discard(uid)
            remaining_keys.discard(key)
    for uid in sorted(remaining_users):
        key = max(remaining_keys, key=lambda k: (scenario.gains[k[0]][uid], -k[0], -k[1]))
        assoc.entries[uid] = key
        assoc.flagged.add(uid)
        remaining_keys.discard(key)
    assoc.validate(scenario)
    return assoc


def associate(
    scenario: Scenario,
    icfg: InterferenceConfig | None = None,
    config: SolverConfig | None = None,
) -> tuple[AssociationMap, dict[tuple[int, int], ClusterBudget]]:
    """Full heuristic association pipeline for a scenario."""
    budgets = compute_budgets(scenario, icfg, config)
    return greedy_associate(scenario, budgets, icfg), budgets
