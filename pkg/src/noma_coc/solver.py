"""The three convex power-allocation solves and the independent grid oracle.

Modes:
  * pre_outage: maximize the sum SE of a BS's own users (run before failure);
  * compensation: maximize the sum SE of the failed users attached to a BS's
    clusters, keeping connected users at their minimum QoS;
  * compensation_interference: same with the co-channel floor |D_n|*i_max in
    every SE term and per-cluster received-interference caps.

The minimum-SE constraints are algebraically equivalent to affine power
bounds, so every constraint is affine and the barrier method of barrier.py
applies directly. The grid oracle never touches that canonical form: it
evaluates feasibility and objectives through the domain SE formulas, which
keeps the two routes independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import CanonicalProblem, SolveTrace, SolverConfig, solve_barrier
from .domain import (
    AssociationMap,
    InterferenceConfig,
    PowerSolution,
    Scenario,
    SystemParams,
    connected_se,
    failed_se,
    h_minus,
)
from .errors import ContractError, InfeasibleError

MODES = ("pre_outage", "compensation", "compensation_interference")


@dataclass(frozen=True)
class ClusterSpec:
    """One cluster as the solver sees it: connected gains in descending order,
    the attached failed user's gain (if any), and a total-power cap (if any).

    A cluster with ``fixed_powers`` set is frozen: it serves no failed user
    and keeps its pre-outage allocation, contributing only budget consumption.
    Clusters that do not serve a failed user keep operating as before; only
    the remaining budget is optimized."""

    gains: np.ndarray
    failed_gain: float | None = None
    cap: float | None = None
    fixed_powers: np.ndarray | None = None


@dataclass
class PAInstance:
    clusters: list[ClusterSpec]
    params: SystemParams
    mode: str
    extra_floor: float = 0.0  # |D_n| * i_max, zero outside the interference mode
    bs_id: int = -1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"unknown mode {self.mode!r}")
        for spec in self.clusters:
            g = np.asarray(spec.gains, dtype=float)
            if len(g) == 0 or np.any(g <= 0) or np.any(np.diff(g) > 0):
                raise ContractError("cluster gains must be positive and descending")


def make_instance(
    scenario: Scenario,
    bs_id: int,
    mode: str = "pre_outage",
    assoc: AssociationMap | None = None,
    icfg: InterferenceConfig | None = None,
    pre: PowerSolution | None = None,
) -> PAInstance:
    """Build a per-BS solver instance from a scenario (and an association for
    the compensation modes).

    When ``pre`` (the BS's pre-outage solution) is supplied in a compensation
    mode, clusters that serve no failed user are frozen at their pre-outage
    powers instead of entering the optimization."""
    clusters = scenario.clusters_of(bs_id)
    if not clusters:
        raise ContractError(f"BS {bs_id} has no clusters")
    by_cluster: dict[int, int] = {}
    if assoc is not None and mode != "pre_outage":
        by_cluster = assoc.by_bs(bs_id)
        for cl in by_cluster:
            if cl >= len(clusters):
                raise ContractError(f"association references unknown cluster ({bs_id},{cl})")
    extra_floor = 0.0
    specs = []
    for idx, cluster in enumerate(clusters):
        failed_gain = None
        if idx in by_cluster:
            failed_gain = scenario.gains[bs_id][by_cluster[idx]]
        cap = icfg.cluster_cap(scenario, bs_id, idx) if icfg else None
        fixed = None
        if failed_gain is None and pre is not None and mode != "pre_outage":
            fixed = np.asarray(pre.p_connected[(bs_id, idx)], dtype=float)
        specs.append(
            ClusterSpec(
                gains=scenario.cluster_gains(cluster),
                failed_gain=failed_gain,
                cap=cap,
                fixed_powers=fixed,
            )
        )
    if icfg is not None:
        extra_floor = icfg.extra_floor(scenario, bs_id)
    return PAInstance(
        clusters=specs, params=scenario.params, mode=mode, extra_floor=extra_floor, bs_id=bs_id
    )


def minimal_connected_powers(
    gains: np.ndarray, params: SystemParams, extra_floor: float = 0.0
) -> np.ndarray:
    """Smallest connected powers meeting the min-SE chain and the SIC gaps,
    computed in decoding order (each bound depends on the predecessors)."""
    gamma = 2.0**params.s_min - 1.0
    floor = params.sigma2 + extra_floor
    p = np.zeros(len(gains))
    cum = 0.0
    for r, g in enumerate(np.asarray(gains, dtype=float)):
        lb = gamma * (cum + floor / g)
        if r >= 1:
            lb = max(lb, cum + params.p_tol / h_minus(gains, r + 1))
        p[r] = lb
        cum += lb
    return p


def _fixed_total(inst: PAInstance) -> float:
    return float(
        sum(spec.fixed_powers.sum() for spec in inst.clusters if spec.fixed_powers is not None)
    )


@dataclass
class _Layout:
    conn: list[np.ndarray]  # variable indices of each cluster's connected users
    pf: list[int | None]  # variable index of each cluster's failed power
    scale: np.ndarray


def _build_layout(inst: PAInstance) -> _Layout:
    conn, pf = [], []
    scales = []
    floor = inst.params.sigma2 + inst.extra_floor
    idx = 0
    for spec in inst.clusters:
        if spec.fixed_powers is not None:
            conn.append(np.arange(idx, idx))
            pf.append(None)
            continue
        q = len(spec.gains)
        conn.append(np.arange(idx, idx + q))
        p_min = minimal_connected_powers(spec.gains, inst.params, inst.extra_floor)
        # Scale each variable to the magnitude it takes at the optimum so the
        # Newton system stays well conditioned despite the huge dynamic range.
        for g, pm in zip(spec.gains, p_min):
            scales.append(max(pm, floor / g))
        idx += q
        if inst.mode != "pre_outage" and spec.failed_gain is not None:
            pf.append(idx)
            scales.append(inst.params.p_max)
            idx += 1
        else:
            pf.append(None)
    return _Layout(conn=conn, pf=pf, scale=np.array(scales))


def canonicalize(inst: PAInstance) -> tuple[CanonicalProblem, _Layout]:
    """Express the instance in the canonical affine form of barrier.py."""
    layout = _build_layout(inst)
    n = len(layout.scale)
    s = layout.scale
    params = inst.params
    floor = params.sigma2 + inst.extra_floor
    gamma = 2.0**params.s_min - 1.0

    rows, rhs, names = [], [], []

    def add_row(coeff_p: np.ndarray, b: float, name: str) -> None:
        row = coeff_p * s
        norm = max(np.max(np.abs(row)), abs(b), 1e-300)
        rows.append(row / norm)
        rhs.append(b / norm)
        names.append(name)

    for i in range(n):
        e = np.zeros(n)
        e[i] = -1.0
        add_row(e, 0.0, f"nonneg(x{i})")

    num_rows, num0, den_rows, den0 = [], [], [], []
    for j, spec in enumerate(inst.clusters):
        if spec.fixed_powers is not None:
            continue  # frozen at pre-outage powers: feasible by construction
        gains = spec.gains
        ids = layout.conn[j]
        for r, g in enumerate(gains):
            coeff = np.zeros(n)
            coeff[ids[:r]] = gamma * g
            coeff[ids[r]] = -g
            add_row(coeff, -gamma * floor, f"C1(bs{inst.bs_id},cl{j},rank{r + 1})")
            if r >= 1:
                hmin = h_minus(gains, r + 1)
                coeff = np.zeros(n)
                coeff[ids[:r]] = hmin
                coeff[ids[r]] = -hmin
                add_row(coeff, -params.p_tol, f"SICc(bs{inst.bs_id},cl{j},rank{r + 1})")
        pf_idx = layout.pf[j]
        if pf_idx is not None:
            hf = spec.failed_gain
            hmin = h_minus(gains)
            coeff = np.zeros(n)
            coeff[ids] = hmin
            coeff[pf_idx] = -hmin
            add_row(coeff, -params.p_tol, f"SICf(bs{inst.bs_id},cl{j})")
            row = np.zeros(n)
            row[ids] = hf
            row[pf_idx] = hf
            num_rows.append(row * s)
            num0.append(floor)
            row = np.zeros(n)
            row[ids] = hf
            den_rows.append(row * s)
            den0.append(floor)
        if inst.mode == "pre_outage":
            for r, g in enumerate(gains):
                row = np.zeros(n)
                row[ids[: r + 1]] = g
                num_rows.append(row * s)
                num0.append(floor)
                row = np.zeros(n)
                row[ids[:r]] = g
                den_rows.append(row * s)
                den0.append(floor)
        if spec.cap is not None:
            coeff = np.zeros(n)
            coeff[ids] = 1.0
            if pf_idx is not None:
                coeff[pf_idx] = 1.0
            add_row(coeff, spec.cap, f"cap(bs{inst.bs_id},cl{j})")

    add_row(np.ones(n), params.p_max - _fixed_total(inst), f"budget(bs{inst.bs_id})")

    T = len(num_rows)
    prob = CanonicalProblem(
        num=np.array(num_rows).reshape(T, n),
        num0=np.array(num0, dtype=float),
        den=np.array(den_rows).reshape(T, n),
        den0=np.array(den0, dtype=float),
        G=np.array(rows),
        h=np.array(rhs, dtype=float),
        names=names,
        x_upper=params.p_max / s,
    )
    return prob, layout


def _analytic_start(inst: PAInstance, layout: _Layout) -> np.ndarray | None:
    """Strictly feasible start from the minimal-power recursion, inflated by a
    margin; None when it misses the budget or a cap (phase-I then runs)."""
    params = inst.params
    floor = params.sigma2 + inst.extra_floor
    for margin in (1.5, 1.05, 1.005):
        p = np.zeros(len(layout.scale))
        ok = True
        for j, spec in enumerate(inst.clusters):
            if spec.fixed_powers is not None:
                continue
            gains = spec.gains
            ids = layout.conn[j]
            gamma = 2.0**params.s_min - 1.0
            cum = 0.0
            for r, g in enumerate(gains):
                lb = gamma * (cum + floor / g)
                if r >= 1:
                    lb = max(lb, cum + params.p_tol / h_minus(gains, r + 1))
                lb = max(lb, floor / g * 1e-3)  # keep off the nonneg boundary
                p[ids[r]] = lb * margin
                cum += p[ids[r]]
            pf_idx = layout.pf[j]
            if pf_idx is not None:
                p[pf_idx] = (cum + params.p_tol / h_minus(gains)) * margin
            if spec.cap is not None:
                total = cum + (p[pf_idx] if pf_idx is not None else 0.0)
                if total >= spec.cap / margin:
                    ok = False
        if ok and p.sum() + _fixed_total(inst) < params.p_max / margin:
            return p / layout.scale
    return None


def _unpack(
    inst: PAInstance, layout: _Layout, x: np.ndarray
) -> PowerSolution:
    p = layout.scale * x
    sol = PowerSolution()
    params = inst.params
    floor = inst.extra_floor
    objective = 0.0
    for j, spec in enumerate(inst.clusters):
        if spec.fixed_powers is not None:
            sol.p_connected[(inst.bs_id, j)] = spec.fixed_powers.copy()
            continue
        pc = p[layout.conn[j]]
        sol.p_connected[(inst.bs_id, j)] = pc
        pf_idx = layout.pf[j]
        if pf_idx is not None:
            pf = float(p[pf_idx])
            sol.p_failed[(inst.bs_id, j)] = pf
            objective += failed_se(pc, pf, spec.failed_gain, params.sigma2, floor)
        if inst.mode == "pre_outage":
            objective += float(
                connected_se(spec.gains, pc, params.sigma2, floor).sum()
            )
    sol.objective = objective
    return sol


def _solve(
    inst: PAInstance, config: SolverConfig | None = None, trace: SolveTrace | None = None
) -> PowerSolution:
    prob, layout = canonicalize(inst)
    x0 = _analytic_start(inst, layout)
    if x0 is not None and not prob.strictly_feasible(x0):
        x0 = None
    x = solve_barrier(prob, config, x0=x0, trace=trace)
    return _unpack(inst, layout, x)


def solve_pre_outage(
    inst: PAInstance, config: SolverConfig | None = None, trace: SolveTrace | None = None
) -> PowerSolution:
    """Per-BS pre-outage allocation: maximize the BS's own sum SE."""
    if inst.mode != "pre_outage":
        raise ContractError(f"expected pre_outage instance, got {inst.mode}")
    return _solve(inst, config, trace)


def solve_compensation(
    inst: PAInstance, config: SolverConfig | None = None, trace: SolveTrace | None = None
) -> PowerSolution:
    """Compensation allocation for one BS, association fixed in the instance."""
    if inst.mode != "compensation":
        raise ContractError(f"expected compensation instance, got {inst.mode}")
    return _solve(inst, config, trace)


def solve_compensation_interference(
    inst: PAInstance, config: SolverConfig | None = None, trace: SolveTrace | None = None
) -> PowerSolution:
    """Compensation allocation with the co-channel floor and cluster caps."""
    if inst.mode != "compensation_interference":
        raise ContractError(f"expected compensation_interference instance, got {inst.mode}")
    return _solve(inst, config, trace)


# --- independent grid oracle ------------------------------------------------

_ORACLE_MAX_VARS = 3
_ORACLE_BASE_POINTS = {1: 4097, 2: 201, 3: 61}
_ORACLE_MAX_POINTS = {1: 2_000_001, 2: 3201, 3: 481}
_ORACLE_CHUNK = 1_000_000


def _oracle_evaluate(inst: PAInstance, layout: _Layout, P: np.ndarray) -> np.ndarray:
    """Objective of each candidate power vector, -inf where infeasible.

    Feasibility goes through the domain SE formulas, not the canonical form.
    """
    params = inst.params
    floor = inst.extra_floor
    obj = np.zeros(P.shape[0])
    feas = P.sum(axis=1) + _fixed_total(inst) <= params.p_max * (1 + 1e-12)
    se_tol = 1e-9
    gap_tol = params.p_tol * 1e-9
    for j, spec in enumerate(inst.clusters):
        if spec.fixed_powers is not None:
            continue
        pc = P[:, layout.conn[j]]
        gains = spec.gains
        pred = np.concatenate([np.zeros((len(P), 1)), np.cumsum(pc, axis=1)[:, :-1]], axis=1)
        sinr = pc * gains / (gains * pred + params.sigma2 + floor)
        se = np.log2(1.0 + sinr)
        feas &= np.all(se >= params.s_min - se_tol, axis=1)
        for r in range(2, len(gains) + 1):
            gap = (pc[:, r - 1] - pred[:, r - 1]) * h_minus(gains, r)
            feas &= gap >= params.p_tol - gap_tol
        total = pc.sum(axis=1)
        pf_idx = layout.pf[j]
        if pf_idx is not None:
            pf = P[:, pf_idx]
            feas &= (pf - total) * h_minus(gains) >= params.p_tol - gap_tol
            hf = spec.failed_gain
            obj += np.log2(1.0 + pf * hf / (hf * total + params.sigma2 + floor))
            total = total + pf
        if spec.cap is not None:
            feas &= total <= spec.cap * (1 + 1e-12)
        if inst.mode == "pre_outage":
            obj += se.sum(axis=1)
    obj[~feas] = -np.inf
    return obj


def grid_oracle(inst: PAInstance, step: float) -> PowerSolution:
    """Grid-search reference optimum over the box [0, p_max]^k.

    For one variable the grid is a single exhaustive pass at the requested
    step. For two or three variables an exhaustive pass at the requested step
    is computationally out of reach, so the search refines: an exhaustive
    coarse grid over the full box, then successively finer grids on a window
    around the incumbent until the spacing at the incumbent reaches ``step``.
    Optimal powers routinely span many decades below the budget (the QoS
    minimum can sit 1e-9 of p_max), so the multi-variable grids are
    log-spaced; a linear window would need thousands of rounds to travel
    from a coarse incumbent down to the true optimum. If a level finds no
    feasible point the grid is densified before giving up.
    """
    prob_layout = _build_layout(inst)
    k = len(prob_layout.scale)
    if k > _ORACLE_MAX_VARS:
        raise ContractError(f"grid oracle supports at most {_ORACLE_MAX_VARS} variables, got {k}")
    p_max = inst.params.p_max
    if k == 1:
        npts = min(int(np.ceil(p_max / step)) + 1, _ORACLE_MAX_POINTS[1])
        P = np.linspace(0.0, p_max, npts)[:, None]
        obj = np.concatenate(
            [
                _oracle_evaluate(inst, prob_layout, P[i : i + _ORACLE_CHUNK])
                for i in range(0, len(P), _ORACLE_CHUNK)
            ]
        )
        i_best = int(np.argmax(obj))
        if not np.isfinite(obj[i_best]):
            raise InfeasibleError("grid oracle found no feasible point")
        return _unpack(inst, prob_layout, P[i_best] / prob_layout.scale)

    lo = np.full(k, np.log10(p_max) - 16.0)
    hi = np.full(k, np.log10(p_max))
    npts = _ORACLE_BASE_POINTS[k]
    best_p = None
    while True:
        axes = [np.logspace(lo[i], hi[i], npts) for i in range(k)]
        mesh = np.meshgrid(*axes, indexing="ij")
        P = np.stack([m.ravel() for m in mesh], axis=1)
        if best_p is not None:
            P = np.vstack([P, best_p])  # keep the incumbent in play
        obj = np.concatenate(
            [
                _oracle_evaluate(inst, prob_layout, P[i : i + _ORACLE_CHUNK])
                for i in range(0, len(P), _ORACLE_CHUNK)
            ]
        )
        i_best = int(np.argmax(obj))
        if not np.isfinite(obj[i_best]):
            if npts * 2 - 1 <= _ORACLE_MAX_POINTS[k]:
                npts = npts * 2 - 1
                continue
            raise InfeasibleError("grid oracle found no feasible point")
        best_p = P[i_best]
        spacing = (hi - lo) / (npts - 1)
        # stop once the grid cell at the incumbent is finer than the step
        if np.all(best_p * (10.0 ** spacing - 1.0) <= step):
            break
        # The budget and SIC rows couple the variables, so the optimum can sit
        # several cells away from the incumbent; a generous window is cheap.
        half = 5.0 * spacing
        best_log = np.log10(best_p)
        lo = np.clip(best_log - half, np.log10(p_max) - 16.0, np.log10(p_max))
        hi = np.clip(best_log + half, np.log10(p_max) - 16.0, np.log10(p_max))
        hi = np.maximum(hi, lo + 1e-12)
        npts = _ORACLE_BASE_POINTS[k]

    return _unpack(inst, prob_layout, best_p / prob_layout.scale)
