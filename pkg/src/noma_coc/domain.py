"""Core NOMA data model: clusters, SIC ordering, spectral-efficiency formulas,
and the constraint checker used to audit every power solution.

Conventions:
  * powers and noise are linear mW, channel gains are dimensionless in (0, 1],
    spectral efficiency is bit/s/Hz;
  * cluster members are ordered by descending channel gain (SIC decoding
    order), ties broken by user id;
  * a "failed" user is one formerly served by the outage BS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError


def _dbm(value: float) -> float:
    return 10.0 ** (value / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Network-wide parameters. Defaults follow the simulation setup."""

    p_max: float = _dbm(46.02)  # per-BS power budget, mW
    p_tol: float = _dbm(-101.4)  # min received-power gap for SIC decoding, mW
    sigma2: float = _dbm(-150.0)  # noise power, mW
    s_min: float = 4.0  # per-user minimum SE, bit/s/Hz
    q: int = 2  # users per NOMA cluster
    i_max: float | None = None  # co-channel interference cap, mW (variant only)

    def __post_init__(self):
        if min(self.p_max, self.p_tol, self.sigma2) <= 0 or self.s_min < 0:
            raise ConfigurationError("powers must be positive and s_min >= 0")
        if self.q <= 0:
            raise ConfigurationError(f"cluster size must be positive, got {self.q}")

    def big_b(self, min_gain: float, max_gain: float) -> float:
        """Relaxation constant sized to be provably non-binding."""
        return 10.0 * self.p_max * (max_gain / min_gain)


@dataclass(frozen=True)
class BaseStation:
    id: int
    x: float
    y: float
    failed: bool


@dataclass(frozen=True)
class User:
    id: int
    home_bs: int
    x: float
    y: float


@dataclass(frozen=True)
class Cluster:
    """A NOMA cluster: connected members in descending-gain order, plus at
    most one failed user attached during compensation."""

    bs_id: int
    members: tuple[int, ...]
    failed_member: int | None = None


def sort_and_cluster(
    bs_id: int, user_ids: list[int], gains: dict[int, float], q: int
) -> list[Cluster]:
    """Cluster one BS's users: sort by gain descending and deal rank i to
    cluster i mod L, so high-gain users land in different clusters and pair
    with low-gain ones. The last cluster may be smaller when |users| % q != 0.
    """
    if q <= 0:
        raise ConfigurationError(f"cluster size must be positive, got {q}")
    ranked = sorted(user_ids, key=lambda u: (-gains[u], u))
    n_clusters = -(-len(ranked) // q)
    buckets: list[list[int]] = [[] for _ in range(n_clusters)]
    for rank, uid in enumerate(ranked):
        buckets[rank % n_clusters].append(uid)
    return [Cluster(bs_id=bs_id, members=tuple(b)) for b in buckets]


@dataclass
class Scenario:
    """A full network snapshot: geometry, gains, clustering, and parameters."""

    bss: list[BaseStation]
    users: list[User]
    gains: dict[int, dict[int, float]]  # gains[bs_id][user_id], linear
    params: SystemParams
    clusters: list[Cluster]
    seed: int
    resamples: int = 0

    def failed_bs(self) -> BaseStation:
        return next(b for b in self.bss if b.failed)

    def compensating_bss(self) -> list[BaseStation]:
        return [b for b in self.bss if not b.failed]

    def failed_users(self) -> list[User]:
        fid = self.failed_bs().id
        return sorted((u for u in self.users if u.home_bs == fid), key=lambda u: u.id)

    def connected_users(self, bs_id: int) -> list[User]:
        return [u for u in self.users if u.home_bs == bs_id]

    def clusters_of(self, bs_id: int) -> list[Cluster]:
        return [c for c in self.clusters if c.bs_id == bs_id]

    def cluster_gains(self, cluster: Cluster) -> np.ndarray:
        g = self.gains[cluster.bs_id]
        return np.array([g[u] for u in cluster.members])

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "resamples": self.resamples,
            "bs": [vars(b) for b in self.bss],
            "user": [vars(u) for u in self.users],
            "gain": {str(b): {str(u): g for u, g in gu.items()} for b, gu in self.gains.items()},
            "params": {
                "p_max": self.params.p_max,
                "p_tol": self.params.p_tol,
                "sigma2": self.params.sigma2,
                "s_min": self.params.s_min,
                "q": self.params.q,
                "i_max": self.params.i_max,
            },
            "cluster": [
                {"bs": c.bs_id, "members": list(c.members), "failed_member": c.failed_member}
                for c in self.clusters
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        params = SystemParams(**doc["params"])
        return cls(
            bss=[BaseStation(**b) for b in doc["bs"]],
            users=[User(**u) for u in doc["user"]],
            gains={int(b): {int(u): g for u, g in gu.items()} for b, gu in doc["gain"].items()},
            params=params,
            clusters=[
                Cluster(bs_id=c["bs"], members=tuple(c["members"]), failed_member=c["failed_member"])
                for c in doc["cluster"]
            ],
            seed=doc["seed"],
            resamples=doc.get("resamples", 0),
        )


@dataclass
class AssociationMap:
    """Failed-user association: user id -> (bs id, cluster index within BS).

    ``flagged`` holds users assigned by the exhausted-candidate fallback.
    """

    entries: dict[int, tuple[int, int]] = field(default_factory=dict)
    flagged: set[int] = field(default_factory=set)

    def validate(self, scenario: Scenario) -> None:
        targets = list(self.entries.values())
        if len(set(targets)) != len(targets):
            raise ContractError("association is not injective into clusters")
        failed_ids = {u.id for u in scenario.failed_users()}
        if set(self.entries) != failed_ids:
            raise ContractError("association is not total on failed users")
        for uid, (bs, cl) in self.entries.items():
            if cl >= len(scenario.clusters_of(bs)):
                raise ContractError(f"user {uid} assigned to unknown cluster ({bs},{cl})")

    def by_bs(self, bs_id: int) -> dict[int, int]:
        """cluster index -> failed user id, for one BS."""
        return {cl: uid for uid, (bs, cl) in self.entries.items() if bs == bs_id}

    def to_json(self) -> str:
        return json.dumps(
            {
                str(u): {"bs": bs, "cluster": cl, "fallback": u in self.flagged}
                for u, (bs, cl) in self.entries.items()
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "AssociationMap":
        doc = json.loads(text)
        entries = {int(u): (v["bs"], v["cluster"]) for u, v in doc.items()}
        flagged = {int(u) for u, v in doc.items() if v.get("fallback")}
        return cls(entries=entries, flagged=flagged)


@dataclass
class PowerSolution:
    """Per-BS power vectors keyed by (bs id, cluster index)."""

    p_connected: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    p_failed: dict[tuple[int, int], float] = field(default_factory=dict)
    objective: float = 0.0

    def bs_total(self, bs_id: int) -> float:
        total = sum(p.sum() for (b, _), p in self.p_connected.items() if b == bs_id)
        total += sum(p for (b, _), p in self.p_failed.items() if b == bs_id)
        return float(total)

    def solved_bss(self) -> list[int]:
        return sorted({b for b, _ in self.p_connected})


@dataclass(frozen=True)
class InterferenceConfig:
    """Co-channel configuration: per-cluster subchannels and the tolerated
    interference cap. Two BSs are co-channel neighbors when any pair of their
    clusters shares a subchannel."""

    i_max: float
    subchannels: dict[tuple[int, int], int]

    def neighbor_count(self, scenario: Scenario, bs_id: int) -> int:
        return len(self._neighbors(scenario, bs_id))

    def _neighbors(self, scenario: Scenario, bs_id: int) -> set[int]:
        own = {b for (b, _), sc in self.subchannels.items() if b == bs_id}
        if not own:
            return set()
        own_subs = {sc for (b, _), sc in self.subchannels.items() if b == bs_id}
        return {
            b
            for (b, _), sc in self.subchannels.items()
            if b != bs_id and sc in own_subs and not _is_failed_bs(scenario, b)
        }

    def extra_floor(self, scenario: Scenario, bs_id: int) -> float:
        return self.neighbor_count(scenario, bs_id) * self.i_max

    def cluster_cap(self, scenario: Scenario, bs_id: int, cluster_idx: int) -> float | None:
        """Total-power cap on a cluster so that its worst co-channel victim
        receives at most i_max: cap = i_max / (max victim gain from this BS)."""
        sub = self.subchannels.get((bs_id, cluster_idx))
        if sub is None:
            return None
        victim_bss = {
            b
            for (b, _), sc in self.subchannels.items()
            if sc == sub and b != bs_id and not _is_failed_bs(scenario, b)
        }
        if not victim_bss:
            return None
        failed_ids = [u.id for u in scenario.failed_users()]
        victims = [
            u.id for u in scenario.users if u.home_bs in victim_bss
        ] + failed_ids
        g_max = max(scenario.gains[bs_id][u] for u in victims)
        return self.i_max / g_max


def _is_failed_bs(scenario: Scenario, bs_id: int) -> bool:
    return scenario.failed_bs().id == bs_id


def h_minus(gains: np.ndarray, rank: int | None = None) -> float:
    """Minimum channel gain among the cluster members decoded before the
    given user: ranks 1..rank-1 for a connected user at ``rank`` (1-based,
    rank >= 2), or all connected members when ``rank`` is None (failed user).
    """
    if rank is None:
        if len(gains) == 0:
            raise ContractError("failed user's cluster has no connected members")
        return float(np.min(gains))
    if rank < 2 or rank > len(gains):
        raise ContractError(f"h_minus undefined for connected rank {rank}")
    return float(np.min(gains[: rank - 1]))


def connected_se(
    gains: np.ndarray,
    powers: np.ndarray,
    sigma2: float,
    extra_floor: float = 0.0,
) -> np.ndarray:
    """Per-user SE of a cluster's connected users under SIC decoding.

    User at rank u sees interference only from ranks 1..u-1 (weaker-gain
    users' signals are removed by SIC).
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.asarray(powers, dtype=float)
    pred = np.concatenate(([0.0], np.cumsum(powers)[:-1]))
    sinr = powers * gains / (gains * pred + extra_floor + sigma2)
    return np.log2(1.0 + sinr)


def failed_se(
    powers_connected: np.ndarray,
    p_failed: float,
    h_f: float,
    sigma2: float,
    extra_floor: float = 0.0,
) -> float:
    """SE of a cluster's failed user; it cannot cancel any connected user's
    signal, so the whole connected power of the cluster interferes."""
    interference = h_f * float(np.sum(powers_connected))
    return float(np.log2(1.0 + p_failed * h_f / (interference + extra_floor + sigma2)))


@dataclass(frozen=True)
class Violation:
    constraint: str
    entity: str
    magnitude: float


@dataclass
class ViolationReport:
    entries: list[Violation] = field(default_factory=list)

    def add(self, constraint: str, entity: str, magnitude: float) -> None:
        self.entries.append(Violation(constraint, entity, float(magnitude)))

    def feasible(self, tol: float = 1e-6) -> bool:
        return all(v.magnitude <= tol for v in self.entries)

    def worst(self, constraint: str | None = None) -> float:
        vals = [v.magnitude for v in self.entries if constraint in (None, v.constraint)]
        return max(vals, default=0.0)

    def to_json(self) -> str:
        return json.dumps([vars(v) for v in self.entries], indent=1)


def check_constraints(
    scenario: Scenario,
    assoc: AssociationMap | None,
    solution: PowerSolution,
    icfg: InterferenceConfig | None = None,
) -> ViolationReport:
    """Audit a power solution against every constraint it touches.

    Reports one entry per violated constraint instance:
      * C1 as relative SE shortfall (s_min - SE)/s_min,
      * SIC gaps (C4/C5) as received-power shortfall in mW,
      * the per-BS budget (C6) as excess over p_max in mW,
      * nonnegativity (C7/C8) as -p in mW,
      * co-channel caps (C10/C11) as excess received interference in mW.
    An empty report means the solution is feasible.
    """
    params = scenario.params
    report = ViolationReport()
    assoc_by_bs = {}
    if assoc is not None:
        for bs in scenario.compensating_bss():
            assoc_by_bs[bs.id] = assoc.by_bs(bs.id)

    for bs_id in solution.solved_bss():
        clusters = scenario.clusters_of(bs_id)
        floor = icfg.extra_floor(scenario, bs_id) if icfg else 0.0
        for cl_idx, cluster in enumerate(clusters):
            key = (bs_id, cl_idx)
            if key not in solution.p_connected:
                continue
            p = np.asarray(solution.p_connected[key], dtype=float)
            g = scenario.cluster_gains(cluster)

            for u, p_u in zip(cluster.members, p):
                if p_u < 0:
                    report.add("C8", f"user {u}", -p_u)
            se = connected_se(g, np.maximum(p, 0.0), params.sigma2, floor)
            for u, se_u in zip(cluster.members, se):
                shortfall = (params.s_min - se_u) / params.s_min if params.s_min > 0 else 0.0
                if shortfall > 0:
                    report.add("C1", f"user {u}", shortfall)
            for rank in range(2, len(p) + 1):
                gap = (p[rank - 1] - p[: rank - 1].sum()) * h_minus(g, rank)
                if gap < params.p_tol:
                    report.add("C5", f"user {cluster.members[rank - 1]}", params.p_tol - gap)

            fid = assoc_by_bs.get(bs_id, {}).get(cl_idx)
            pf = solution.p_failed.get(key)
            if fid is not None and pf is not None:
                if pf < 0:
                    report.add("C7", f"user {fid}", -pf)
                gap = (pf - p.sum()) * h_minus(g)
                if gap < params.p_tol:
                    report.add("C4", f"user {fid}", params.p_tol - gap)

            if icfg is not None:
                cap = icfg.cluster_cap(scenario, bs_id, cl_idx)
                if cap is not None:
                    total = p.sum() + (pf or 0.0)
                    if total > cap:
                        g_victim = icfg.i_max / cap
                        report.add("C10", f"cluster ({bs_id},{cl_idx})", (total - cap) * g_victim)

        total = solution.bs_total(bs_id)
        if total > params.p_max:
            report.add("C6", f"bs {bs_id}", total - params.p_max)

    if assoc is not None:
        targets = list(assoc.entries.values())
        dupes = len(targets) - len(set(targets))
        if dupes:
            report.add("C2", "association", float(dupes))
        missing = {u.id for u in scenario.failed_users()} - set(assoc.entries)
        if missing:
            report.add("C3", "association", float(len(missing)))

    return report
