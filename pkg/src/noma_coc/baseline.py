"""Brute-force optimal baseline: enumerate every injective association of
failed users to clusters and solve the convex power allocation for each.

The enumeration count is P(L, U^f) = L!/(L-U^f)!, so this only runs at desk
scale. Per-BS solves are memoized on (bs, its cluster->user assignment):
BSs are independent, which collapses the P(L, U^f) full solves to far fewer
distinct per-BS subproblems.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from .barrier import SolverConfig
from .domain import AssociationMap, InterferenceConfig, PowerSolution, Scenario
from .errors import BudgetExceededError, ContractError, InfeasibleError
from .solver import (
    make_instance,
    solve_compensation,
    solve_compensation_interference,
    solve_pre_outage,
)


@dataclass(frozen=True)
class EnumerationBudget:
    max_associations: int = 1_000_000
    max_wall_time: float = 3600.0

    def __post_init__(self):
        if self.max_associations <= 0 or self.max_wall_time <= 0:
            raise ContractError("enumeration budget must be positive")


@dataclass
class OptResult:
    assoc: AssociationMap | None
    solution: PowerSolution | None
    objective: float
    enumerated: int
    infeasible: int
    distinct_solves: int


def enumerate_associations(scenario: Scenario, budget: EnumerationBudget | None = None):
    """Yield all P(L, U^f) injective failed-user-to-cluster maps, in the
    deterministic order of itertools.permutations over (bs, cluster) keys."""
    budget = budget or EnumerationBudget()
    users = [u.id for u in scenario.failed_users()]
    keys = [
        (bs.id, cl_idx)
        for bs in scenario.compensating_bss()
        for cl_idx in range(len(scenario.clusters_of(bs.id)))
    ]
    if len(users) > len(keys):
        raise ContractError(f"{len(users)} failed users exceed {len(keys)} clusters")
    deadline = time.monotonic() + budget.max_wall_time
    count = 0
    for perm in itertools.permutations(keys, len(users)):
        if count >= budget.max_associations or time.monotonic() > deadline:
            raise BudgetExceededError(
                f"enumeration budget exhausted after {count} associations", completed=count
            )
        count += 1
        yield AssociationMap(entries=dict(zip(users, perm)))


def opt_noc(
    scenario: Scenario,
    icfg: InterferenceConfig | None = None,
    config: SolverConfig | None = None,
    budget: EnumerationBudget | None = None,
) -> OptResult:
    """Best feasible (association, powers) over the full enumeration.

    Infeasible associations are skipped but counted. Ties on the objective
    keep the first (lowest enumeration index) association.
    """
    solve = solve_compensation if icfg is None else solve_compensation_interference
    mode = "compensation" if icfg is None else "compensation_interference"
    cache: dict[tuple[int, tuple[tuple[int, int], ...]], PowerSolution | None] = {}
    best: OptResult = OptResult(
        assoc=None, solution=None, objective=-float("inf"),
        enumerated=0, infeasible=0, distinct_solves=0,
    )

    pre_cache: dict[int, PowerSolution] = {}

    def pre_for(bs_id: int) -> PowerSolution:
        # clusters with no failed user keep their pre-outage powers
        if bs_id not in pre_cache:
            pre_cache[bs_id] = solve_pre_outage(
                make_instance(scenario, bs_id, "pre_outage", icfg=icfg), config
            )
        return pre_cache[bs_id]

    def solve_bs(bs_id: int, assoc: AssociationMap) -> PowerSolution | None:
        key = (bs_id, tuple(sorted(assoc.by_bs(bs_id).items())))
        if key not in cache:
            try:
                inst = make_instance(
                    scenario, bs_id, mode, assoc=assoc, icfg=icfg, pre=pre_for(bs_id)
                )
                cache[key] = solve(inst, config)
            except InfeasibleError:
                cache[key] = None
            best.distinct_solves += 1
        return cache[key]

    for assoc in enumerate_associations(scenario, budget):
        best.enumerated += 1
        touched = sorted({bs for bs, _ in assoc.entries.values()})
        objective = 0.0
        parts = []
        for bs_id in touched:
            sol = solve_bs(bs_id, assoc)
            if sol is None:
                parts = None
                break
            objective += sol.objective
            parts.append(sol)
        if parts is None:
            best.infeasible += 1
            continue
        if objective > best.objective:
            merged = PowerSolution(objective=objective)
            for sol in parts:
                merged.p_connected.update(sol.p_connected)
                merged.p_failed.update(sol.p_failed)
            best.assoc, best.solution, best.objective = assoc, merged, objective
    if best.assoc is None and best.enumerated:
        raise InfeasibleError(
            f"all {best.enumerated} associations infeasible for scenario seed {scenario.seed}"
        )
    return best
