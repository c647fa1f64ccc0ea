"""Training-corpus pipeline: generate labeled samples from fresh topologies,
split into train/validation/test, and augment the training split with
permuted copies.

One scenario yields one LabeledSample per compensating BS that serves at
least one failed user; the label is that BS's exact compensation solve.
Samples persist as JSONL, one sample per line, with the scenario seed
recorded for exact regeneration.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .association import associate, pre_solution
from .barrier import SolverConfig
from .channel import generate_topology
from .domain import SystemParams
from .errors import ConfigurationError, InfeasibleError
from .solver import make_instance, solve_compensation
from .surrogate import LabeledSample, augment_permutations

_MIN_ATTEMPTS = 20  # scenarios before the infeasibility-rate gate can fire


def generate_dataset(
    n_samples: int,
    n_compensating: int = 3,
    users_per_cell: int = 4,
    n_failed: int = 4,
    seed: int = 0,
    params: SystemParams | None = None,
    config: SolverConfig | None = None,
) -> list[LabeledSample]:
    """Generate at least n_samples labeled samples (truncated to exactly
    n_samples), with per-scenario seeds seed+index.

    Scenarios whose heuristic association leads to an infeasible power
    allocation are skipped and counted; a sustained rate above 50% aborts
    with diagnostics, since it means the requested configuration is too
    loaded to compensate.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    params = params or SystemParams()
    l_max = math.ceil(users_per_cell / params.q)
    samples: list[LabeledSample] = []
    index = infeasible = attempts = 0
    while len(samples) < n_samples:
        scenario_seed = seed + index
        index += 1
        attempts += 1
        scenario = generate_topology(
            n_compensating, users_per_cell, n_failed, seed=scenario_seed, params=params
        )
        try:
            assoc, budgets = associate(scenario, config=config)
            pre = pre_solution(budgets)
            per_bs = {}
            for bs_id in sorted({b for b, _ in assoc.entries.values()}):
                inst = make_instance(scenario, bs_id, "compensation", assoc=assoc, pre=pre)
                per_bs[bs_id] = solve_compensation(inst, config)
        except InfeasibleError:
            infeasible += 1
            if attempts >= _MIN_ATTEMPTS and infeasible > attempts / 2:
                raise ConfigurationError(
                    f"infeasibility rate {infeasible}/{attempts} exceeds 50%: "
                    f"N={n_compensating}, users={users_per_cell}, failed={n_failed}"
                )
            continue
        for bs_id, sol in per_bs.items():
            samples.append(_make_sample(scenario, bs_id, assoc, sol, len(samples), l_max))
    del samples[n_samples:]
    return samples


def _make_sample(scenario, bs_id, assoc, solution, sample_id, l_max) -> LabeledSample:
    from .surrogate import build_input, build_target

    q = scenario.params.q
    return LabeledSample(
        sample_id=sample_id,
        parent_id=sample_id,
        scenario_seed=scenario.seed,
        bs_id=bs_id,
        q=q,
        n_clusters=len(scenario.clusters_of(bs_id)),
        H=build_input(scenario, bs_id, assoc, l_max),
        P=build_target(solution, bs_id, q, l_max),
        meta={
            "n_compensating": len(scenario.compensating_bss()),
            "n_failed": len(scenario.failed_users()),
            "assoc": {str(cl): uid for cl, uid in sorted(assoc.by_bs(bs_id).items())},
        },
    )


def split(
    samples: list[LabeledSample], ratios: tuple[float, float, float] = (0.7, 0.15, 0.15), seed: int = 0
) -> tuple[list[LabeledSample], list[LabeledSample], list[LabeledSample]]:
    """Disjoint, exhaustive, seed-deterministic three-way split."""
    if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ConfigurationError(f"split ratios must be nonnegative and sum to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = round(ratios[0] * len(samples))
    n_val = round(ratios[1] * len(samples))
    picks = [order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]]
    return tuple([samples[i] for i in idx] for idx in picks)


def augment(samples: list[LabeledSample], factor: int, seed: int = 0) -> list[LabeledSample]:
    """Originals plus factor-1 permuted copies each. Run this on the training
    split only, after splitting, so augmented rows cannot leak across splits."""
    if factor < 1 or factor > 8:
        raise ConfigurationError(f"augmentation factor must be in [1, 8], got {factor}")
    out = list(samples)
    next_id = max((s.sample_id for s in samples), default=-1) + 1
    for s in samples:
        for aug in augment_permutations(s, factor - 1, seed=seed + s.sample_id):
            aug.sample_id = next_id
            next_id += 1
            out.append(aug)
    return out


def check_no_leakage(train, val, test) -> None:
    """Provenance audit: no ancestor id may appear in two splits."""
    groups = [{s.parent_id for s in part} for part in (train, val, test)]
    for i in range(3):
        for j in range(i + 1, 3):
            common = groups[i] & groups[j]
            if common:
                raise ConfigurationError(f"sample lineage {sorted(common)[:5]} spans two splits")


def write_samples(path: str, samples: list[LabeledSample]) -> None:
    with open(path, "w") as fh:
        for s in samples:
            doc = {
                "id": s.sample_id,
                "parent_id": s.parent_id,
                "scenario_seed": s.scenario_seed,
                "bs_id": s.bs_id,
                "q": s.q,
                "L": s.n_clusters,
                "H": [[None if math.isnan(v) else v for v in row] for row in s.H.tolist()],
                "P": s.P.tolist(),
                "meta": s.meta,
            }
            fh.write(json.dumps(doc) + "\n")


def read_samples(path: str) -> list[LabeledSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            H = np.array(
                [[math.nan if v is None else v for v in row] for row in doc["H"]], dtype=float
            )
            samples.append(
                LabeledSample(
                    sample_id=doc["id"],
                    parent_id=doc["parent_id"],
                    scenario_seed=doc["scenario_seed"],
                    bs_id=doc["bs_id"],
                    q=doc["q"],
                    n_clusters=doc["L"],
                    H=H,
                    P=np.array(doc["P"], dtype=float),
                    meta=doc["meta"],
                )
            )
    return samples
