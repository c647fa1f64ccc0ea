"""Evaluation harness: fairness and SE metrics, constraint-violation
distributions, and runtime/complexity benchmarks for the four schemes
(heuristic LC_NOC, its DNN variant, brute-force OPT_NOC, and No_OC with no
compensation at all)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .association import associate, pre_solution
from .barrier import SolverConfig
from .baseline import opt_noc
from .domain import (
    AssociationMap,
    InterferenceConfig,
    PowerSolution,
    Scenario,
    check_constraints,
    connected_se,
    failed_se,
)
from .errors import ConfigurationError
from .solver import make_instance, solve_compensation, solve_compensation_interference, solve_pre_outage

SCHEMES = ("LC_NOC", "LC_NOC_DNN", "OPT_NOC", "No_OC")


def jain_fairness(se_values, total_users: int) -> float:
    """Jain index over total_users users; unserved users enter as zero SE via
    the denominator's total_users factor. All-zero input is defined as 0."""
    se = np.asarray(list(se_values), dtype=float)
    if len(se) > total_users:
        raise ConfigurationError(f"{len(se)} SE values exceed {total_users} users")
    total = se.sum()
    if total == 0.0:
        return 0.0
    return float(total**2 / (total_users * np.sum(se**2)))


@dataclass
class MetricsReport:
    scheme: str
    seed: int
    avg_failed_se: float
    avg_all_se: float
    jain: float
    served: int
    total_users: int
    connected_se: list[float]
    failed_se: list[float]
    worst_violation: float
    time_association: float
    time_power: float
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dict(vars(self))


def _all_user_se(
    scenario: Scenario,
    assoc: AssociationMap | None,
    solution: PowerSolution | None,
    icfg: InterferenceConfig | None,
) -> tuple[list[float], list[float]]:
    """Per-user SE lists (connected, failed) under a compensation solution.

    BSs absent from the solution keep their pre-outage allocation, which is
    solved here for SE accounting. Failed users without a slot get SE 0.
    """
    params = scenario.params
    conn, fail = [], []
    assoc_by_bs = {b.id: (assoc.by_bs(b.id) if assoc else {}) for b in scenario.compensating_bss()}
    for bs in scenario.compensating_bss():
        floor = icfg.extra_floor(scenario, bs.id) if icfg else 0.0
        in_solution = solution is not None and any(
            b == bs.id for b, _ in solution.p_connected
        )
        if not in_solution:
            pre = solve_pre_outage(make_instance(scenario, bs.id, "pre_outage", icfg=icfg))
        for cl_idx, cluster in enumerate(scenario.clusters_of(bs.id)):
            gains = scenario.cluster_gains(cluster)
            src = solution if in_solution else pre
            pc = np.asarray(src.p_connected[(bs.id, cl_idx)], dtype=float)
            conn.extend(connected_se(gains, np.maximum(pc, 0.0), params.sigma2, floor))
            uid = assoc_by_bs[bs.id].get(cl_idx)
            if uid is not None and in_solution:
                pf = solution.p_failed.get((bs.id, cl_idx), 0.0)
                h_f = scenario.gains[bs.id][uid]
                fail.append(failed_se(pc, max(pf, 0.0), h_f, params.sigma2, floor))
    fail.extend([0.0] * (len(scenario.failed_users()) - len(fail)))
    return conn, fail


def evaluate_scheme(
    scenario: Scenario,
    scheme: str,
    model=None,
    icfg: InterferenceConfig | None = None,
    config: SolverConfig | None = None,
) -> MetricsReport:
    """Run one scheme on one scenario and report the paper's metrics."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "LC_NOC_DNN" and model is None:
        raise ConfigurationError("LC_NOC_DNN requires a trained model")
    params = scenario.params
    solve = solve_compensation if icfg is None else solve_compensation_interference
    mode = "compensation" if icfg is None else "compensation_interference"
    assoc: AssociationMap | None = None
    solution: PowerSolution | None = None
    t_assoc = t_power = 0.0

    if scheme == "No_OC":
        pass
    elif scheme == "OPT_NOC":
        t0 = time.perf_counter()
        result = opt_noc(scenario, icfg=icfg, config=config)
        t_power = time.perf_counter() - t0
        assoc, solution = result.assoc, result.solution
    else:
        t0 = time.perf_counter()
        assoc, budgets = associate(scenario, icfg=icfg, config=config)
        t_assoc = time.perf_counter() - t0
        t0 = time.perf_counter()
        pre = pre_solution(budgets)
        solution = PowerSolution()
        for bs_id in sorted({b for b, _ in assoc.entries.values()}):
            if scheme == "LC_NOC":
                sol = solve(
                    make_instance(scenario, bs_id, mode, assoc=assoc, icfg=icfg, pre=pre), config
                )
            else:
                from .surrogate import build_input, forward

                H = build_input(scenario, bs_id, assoc, model.l_max)
                P = forward(model, H)
                sol = _solution_from_matrix(scenario, bs_id, assoc, P)
            solution.p_connected.update(sol.p_connected)
            solution.p_failed.update(sol.p_failed)
        t_power = time.perf_counter() - t0

    conn, fail = _all_user_se(scenario, assoc, solution, icfg)
    total_users = len(scenario.users)
    all_se = conn + fail
    worst = 0.0
    if solution is not None:
        worst = check_constraints(scenario, assoc, solution, icfg).worst()
    return MetricsReport(
        scheme=scheme,
        seed=scenario.seed,
        avg_failed_se=float(np.mean(fail)) if fail else 0.0,
        avg_all_se=float(np.mean(all_se)),
        jain=jain_fairness(all_se, total_users),
        served=len(conn) + sum(1 for s in fail if s > 0),
        total_users=total_users,
        connected_se=[float(s) for s in conn],
        failed_se=[float(s) for s in fail],
        worst_violation=float(worst),
        time_association=t_assoc,
        time_power=t_power,
    )


def _solution_from_matrix(scenario, bs_id, assoc, P) -> PowerSolution:
    sol = PowerSolution()
    q = scenario.params.q
    by_cluster = assoc.by_bs(bs_id)
    for cl_idx, cluster in enumerate(scenario.clusters_of(bs_id)):
        sol.p_connected[(bs_id, cl_idx)] = P[: len(cluster.members), cl_idx].copy()
        if cl_idx in by_cluster:
            sol.p_failed[(bs_id, cl_idx)] = float(P[q, cl_idx])
    return sol


def violation_cdf(reports: list[MetricsReport], s_min: float) -> np.ndarray:
    """Sorted relative min-SE shortfalls (s_min - SE)+/s_min over every
    connected user in the reports; an empirical CDF of C1 deviation."""
    vals = [
        max(s_min - se, 0.0) / s_min for r in reports for se in r.connected_se
    ]
    return np.sort(np.asarray(vals))


def runtime_bench(
    sizes: list[tuple[int, int, int]],
    repetitions: int = 3,
    seed: int = 0,
    model=None,
) -> list[dict]:
    """Median wall times per (N, users_per_cell, U^f) size: heuristic
    association, one convex solve, DNN inference (when a model is given), and
    the analytic OPT_NOC enumeration count with extrapolated time."""
    from .association import compute_budgets, greedy_associate
    from .channel import generate_topology

    rows = []
    for n_comp, users, n_failed in sizes:
        t_assoc, t_solve, t_dnn = [], [], []
        enum_count = None
        for rep in range(repetitions):
            sc = generate_topology(n_comp, users, n_failed, seed=seed + rep)
            budgets = compute_budgets(sc)
            t0 = time.perf_counter()
            assoc = greedy_associate(sc, budgets)
            t_assoc.append(time.perf_counter() - t0)
            bs_id = next(iter(sorted({b for b, _ in assoc.entries.values()})))
            inst = make_instance(sc, bs_id, "compensation", assoc=assoc, pre=pre_solution(budgets))
            t0 = time.perf_counter()
            solve_compensation(inst)
            t_solve.append(time.perf_counter() - t0)
            if model is not None:
                from .surrogate import build_input, forward

                H = build_input(sc, bs_id, assoc, model.l_max)
                t0 = time.perf_counter()
                forward(model, H)
                t_dnn.append(time.perf_counter() - t0)
            L = len(sc.clusters) - len(sc.clusters_of(sc.failed_bs().id))
            enum_count = math.perm(L, n_failed)
        row = {
            "n_compensating": n_comp,
            "users_per_cell": users,
            "n_failed": n_failed,
            "assoc_median_s": float(np.median(t_assoc)),
            "solve_median_s": float(np.median(t_solve)),
            "opt_enumerations": enum_count,
            "opt_extrapolated_s": enum_count * float(np.median(t_solve)),
        }
        if t_dnn:
            row["dnn_median_s"] = float(np.median(t_dnn))
        rows.append(row)
    return rows
