"""User-centric clustering of RU antennas for orthogonal-coded transmission.

Clusters group up to 4 RU antennas with up to 6 UEs; the antenna count fixes
the orthogonal design (1 -> C111, 2 -> C222, 3 -> C334, 4 -> C468) and the
(antenna, UE) combination must be one of the 12 feasible types:

    id   antennas  UEs       id   antennas  UEs
    1    1         1         7    4         2
    2    2         1         8    3         3
    3    3         1         9    4         3
    4    4         1         10   4         4
    5    2         2         11   4         5
    6    3         2         12   4         6

Symbols of a period are dealt to the cluster's UEs round-robin in UE list
order, so with 4 UEs and 6 symbols the first two UEs get two symbols each.

The heuristic builds an assignment in three stages: one-to-one matching of
users to their strongest free RU (weakest users first), greedy pairwise
merging, then greedy addition of unused antennas.  A mutation is committed
only when it strictly increases the sum of the worst ceil(K/4) per-user
ergodic rates, evaluated by an injected rate engine; committed mutations
therefore form a monotone improvement trace.  Every candidate pair and every
(cluster, antenna) pair is examined at most once per cluster count, which
keeps the trial counters within the closed-form bounds checked by
:func:`trial_bounds`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import Deployment
from .codes import CodeSpec, T0_WINDOW, code_for_antennas

__all__ = [
    "CLUSTER_TYPES",
    "Cluster",
    "ClusterAssignment",
    "ClusteringTrace",
    "cluster_type_id",
    "is_feasible",
    "step1_one_to_one",
    "step2_merge",
    "step3_add_antennas",
    "cluster_deployment",
    "objective_worst_quartile",
    "worst_quartile_sum",
    "trial_counter",
    "trial_bounds",
    "assignment_to_json",
    "assignment_from_json",
]

# (antenna count, UE count) -> cluster type id.
CLUSTER_TYPES = {
    (1, 1): 1, (2, 1): 2, (3, 1): 3, (4, 1): 4,
    (2, 2): 5, (3, 2): 6, (4, 2): 7,
    (3, 3): 8, (4, 3): 9,
    (4, 4): 10, (4, 5): 11, (4, 6): 12,
}


def is_feasible(n_antennas: int, n_ues: int) -> bool:
    return (n_antennas, n_ues) in CLUSTER_TYPES


def cluster_type_id(n_antennas: int, n_ues: int) -> int:
    return CLUSTER_TYPES[(n_antennas, n_ues)]


@dataclass(frozen=True)
class Cluster:
    """Ordered RU antennas and UEs sharing one orthogonal design.

    ``uid`` identifies the cluster across growth mutations (an antenna
    addition keeps the uid, a merge creates a fresh one); it only matters to
    the stage-3 bookkeeping.
    """

    ru_antennas: tuple[int, ...]
    ues: tuple[int, ...]
    uid: int = 0

    def __post_init__(self):
        if not is_feasible(len(self.ru_antennas), len(self.ues)):
            raise ValueError(
                f"({len(self.ru_antennas)} antennas, {len(self.ues)} UEs) "
                "matches no feasible cluster type")

    @property
    def code(self) -> CodeSpec:
        return code_for_antennas(len(self.ru_antennas))

    @property
    def type_id(self) -> int:
        return cluster_type_id(len(self.ru_antennas), len(self.ues))

    @property
    def symbol_map(self) -> dict[int, int]:
        """Symbol index -> UE id, dealing symbols round-robin over the UEs."""
        n = len(self.ues)
        return {p: self.ues[p % n] for p in range(self.code.p_syms)}

    def symbols_for(self, ue: int) -> tuple[int, ...]:
        n = len(self.ues)
        pos = self.ues.index(ue)
        return tuple(p for p in range(self.code.p_syms) if p % n == pos)


@dataclass(frozen=True)
class ClusterAssignment:
    """Disjoint clusters covering every UE, plus the pool of unused antennas."""

    clusters: tuple[Cluster, ...]
    n_antennas_total: int

    @property
    def t0(self) -> int:
        """Interference window: lcm of the member clusters' code periods.

        Equals 8 whenever any 4-antenna cluster is present and never exceeds
        :data:`~dmimo_stfbc.codes.T0_WINDOW`; desired symbols and interfering
        symbols are both counted over this window.
        """
        return math.lcm(*(c.code.t_period for c in self.clusters))

    @property
    def used_antennas(self) -> frozenset[int]:
        return frozenset(a for c in self.clusters for a in c.ru_antennas)

    @property
    def unused_antennas(self) -> frozenset[int]:
        return frozenset(range(self.n_antennas_total)) - self.used_antennas

    def cluster_index_of(self, ue: int) -> int:
        for ci, c in enumerate(self.clusters):
            if ue in c.ues:
                return ci
        raise KeyError(f"UE {ue} is not covered by any cluster")

    def cluster_of(self, ue: int) -> Cluster:
        return self.clusters[self.cluster_index_of(ue)]

    def n_symbols_per_window(self, ue: int) -> int:
        """Symbols carried for ``ue`` within one t0-slot window."""
        c = self.cluster_of(ue)
        return len(c.symbols_for(ue)) * (self.t0 // c.code.t_period)

    def validate(self, n_ues: int) -> None:
        seen_a: set[int] = set()
        seen_u: set[int] = set()
        for c in self.clusters:
            if seen_a & set(c.ru_antennas) or seen_u & set(c.ues):
                raise ValueError("clusters overlap in antennas or UEs")
            seen_a |= set(c.ru_antennas)
            seen_u |= set(c.ues)
        if seen_u != set(range(n_ues)):
            raise ValueError("every UE must appear in exactly one cluster")
        if not all(0 <= a < self.n_antennas_total for a in seen_a):
            raise ValueError("antenna id outside deployment")


@dataclass
class ClusteringTrace:
    """Instrumentation of one clustering run (trial counts, objective path)."""

    k_users: int = 0
    merge_trials: int = 0
    add_trials: int = 0
    clusters_after_merge: int = 0
    objective_history: list[float] = field(default_factory=list)


def worst_quartile_sum(per_user_se: np.ndarray) -> float:
    """Sum of the worst ceil(K/4) per-user rates (at least one)."""
    se = np.asarray(per_user_se, dtype=float)
    q = max(1, math.ceil(len(se) / 4))
    return float(np.sort(se)[:q].sum())


def objective_worst_quartile(assignment: ClusterAssignment, dep: Deployment,
                             rate_engine) -> float:
    """Clustering objective: worst-quartile sum of per-user ergodic rates."""
    del dep  # the engine already carries the deployment
    return worst_quartile_sum(rate_engine.per_user_se(assignment))


def step1_one_to_one(dep: Deployment) -> ClusterAssignment:
    """Initial matching: weakest users first, each takes its best free RU.

    Users are ranked by ``max_m beta[m, k]`` ascending (the most isolated
    user chooses first) and take one antenna of the strongest RU that still
    has a free antenna, preferring RUs not already matched in this stage so
    the matching is one-to-one whenever K <= M.  Ties break toward the lowest
    index.
    """
    m, k_total, l = dep.n_rus, dep.n_ues, dep.l_per_ru
    if k_total > m * l:
        raise ValueError(f"fewer antennas ({m * l}) than users ({k_total})")

    best = dep.beta.max(axis=0)                       # (K,)
    order = np.lexsort((np.arange(k_total), best))    # ascending, ties by UE id
    free = np.full(m, l, dtype=int)
    touched = np.zeros(m, dtype=bool)
    clusters = []
    for k in order:
        usable = free > 0
        preferred = usable & ~touched
        pool = preferred if preferred.any() else usable
        gains = np.where(pool, dep.beta[:, k], -np.inf)
        ru = int(np.argmax(gains))                    # argmax takes lowest index on ties
        antenna = ru * l + (l - free[ru])
        free[ru] -= 1
        touched[ru] = True
        clusters.append(Cluster((antenna,), (int(k),), uid=len(clusters)))
    return ClusterAssignment(tuple(clusters), n_antennas_total=m * l)


def _priority_order(clusters: tuple[Cluster, ...], per_user_se: np.ndarray) -> list[int]:
    """Cluster indices sorted by ascending in-cluster minimum rate."""
    keys = [min(per_user_se[u] for u in c.ues) for c in clusters]
    return sorted(range(len(clusters)), key=lambda ci: (keys[ci], ci))


def step2_merge(assignment: ClusterAssignment, dep: Deployment, rate_engine,
                trace: ClusteringTrace | None = None) -> ClusterAssignment:
    """Greedy pairwise merging, most-prior pairs first.

    A merge is committed when the merged (antenna, UE) counts form a feasible
    type and the worst-quartile objective strictly increases; priorities are
    recomputed and the pair scan restarts after every commit.
    """
    clusters = list(assignment.clusters)
    next_uid = max((c.uid for c in clusters), default=-1) + 1
    while True:
        se = rate_engine.per_user_se(_as_assignment(clusters, assignment))
        base = worst_quartile_sum(se)
        order = _priority_order(tuple(clusters), se)
        committed = False
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                a, b = clusters[order[i]], clusters[order[j]]
                if trace is not None:
                    trace.merge_trials += 1
                if not is_feasible(len(a.ru_antennas) + len(b.ru_antennas),
                                   len(a.ues) + len(b.ues)):
                    continue
                merged = Cluster(a.ru_antennas + b.ru_antennas, a.ues + b.ues,
                                 uid=next_uid)
                candidate = clusters.copy()
                candidate[min(order[i], order[j])] = merged
                del candidate[max(order[i], order[j])]
                cand_assignment = _as_assignment(candidate, assignment)
                new_obj = worst_quartile_sum(rate_engine.per_user_se(cand_assignment))
                if new_obj > base:
                    clusters = candidate
                    next_uid += 1
                    if trace is not None:
                        trace.objective_history.append(new_obj)
                    committed = True
                    break
            if committed:
                break
        if not committed:
            break
    result = _as_assignment(clusters, assignment)
    if trace is not None:
        trace.clusters_after_merge = len(clusters)
    return result


def step3_add_antennas(assignment: ClusterAssignment, dep: Deployment, rate_engine,
                       trace: ClusteringTrace | None = None) -> ClusterAssignment:
    """Greedy growth: offer each unused antenna to clusters in priority order.

    Every (cluster, antenna) combination is examined at most once, which caps
    the number of trials at ``unused * clusters``; an addition is committed
    under the same strict worst-quartile improvement rule as merging, after
    which priorities are recomputed.
    """
    dep_beta = rate_engine.dep.beta
    l_per_ru = rate_engine.dep.l_per_ru

    def candidate_order(c: Cluster, unused: list[int]) -> list[int]:
        # Strongest antennas (summed long-term gain toward the cluster's
        # UEs) first; ties break toward the lowest antenna index.
        gain = {a: sum(dep_beta[a // l_per_ru, u] for u in c.ues) for a in unused}
        return sorted(unused, key=lambda a: (-gain[a], a))

    clusters = list(assignment.clusters)
    tested: set[tuple[int, int]] = set()
    while True:
        current = _as_assignment(clusters, assignment)
        se = rate_engine.per_user_se(current)
        base = worst_quartile_sum(se)
        unused = sorted(current.unused_antennas)
        order = _priority_order(tuple(clusters), se)
        committed = False
        for ci in order:
            c = clusters[ci]
            for antenna in candidate_order(c, unused):
                key = (c.uid, antenna)
                if key in tested:
                    continue
                tested.add(key)
                if trace is not None:
                    trace.add_trials += 1
                if not is_feasible(len(c.ru_antennas) + 1, len(c.ues)):
                    continue
                grown = Cluster(c.ru_antennas + (antenna,), c.ues, uid=c.uid)
                candidate = clusters.copy()
                candidate[ci] = grown
                new_obj = worst_quartile_sum(
                    rate_engine.per_user_se(_as_assignment(candidate, assignment)))
                if new_obj > base:
                    clusters = candidate
                    if trace is not None:
                        trace.objective_history.append(new_obj)
                    committed = True
                    break
            if committed:
                break
        if not committed:
            break
    return _as_assignment(clusters, assignment)


def _as_assignment(clusters: list[Cluster] | tuple[Cluster, ...],
                   template: ClusterAssignment) -> ClusterAssignment:
    return ClusterAssignment(tuple(clusters), template.n_antennas_total)


def cluster_deployment(dep: Deployment, rate_engine) -> tuple[ClusterAssignment, ClusteringTrace]:
    """Run all three stages and return the assignment with its trace."""
    trace = ClusteringTrace(k_users=dep.n_ues)
    assignment = step1_one_to_one(dep)
    trace.objective_history.append(
        worst_quartile_sum(rate_engine.per_user_se(assignment)))
    assignment = step2_merge(assignment, dep, rate_engine, trace)
    assignment = step3_add_antennas(assignment, dep, rate_engine, trace)
    assignment.validate(dep.n_ues)
    return assignment, trace


def trial_counter(trace: ClusteringTrace) -> tuple[int, int]:
    """Observed (merge, antenna-addition) trial counts of an instrumented run."""
    return trace.merge_trials, trace.add_trials


def trial_bounds(trace: ClusteringTrace, n_antennas_total: int) -> tuple[int, int]:
    """Worst-case trial counts for the run's K and final cluster count.

    Merging: scanning all pairs once per cluster count from K down to the
    final count C gives ``C(K+1, 3) - C(C, 3)`` trials.  Addition: each of
    the ``M*L - K`` unused antennas is offered to each of the C clusters at
    most once.
    """
    k, c = trace.k_users, trace.clusters_after_merge
    merge_bound = math.comb(k + 1, 3) - math.comb(c, 3)
    add_bound = (n_antennas_total - k) * c
    return merge_bound, add_bound


def assignment_to_json(assignment: ClusterAssignment) -> str:
    payload = {
        "t0": assignment.t0,
        "n_antennas_total": assignment.n_antennas_total,
        "clusters": [
            {
                "ru_antennas": list(c.ru_antennas),
                "ues": list(c.ues),
                "code": c.code.id,
                "type_id": c.type_id,
                "symbol_map": {str(p): u for p, u in c.symbol_map.items()},
            }
            for c in assignment.clusters
        ],
        "unused_antennas": sorted(assignment.unused_antennas),
    }
    return json.dumps(payload, indent=2)


def assignment_from_json(text: str | os.PathLike) -> ClusterAssignment:
    data = json.loads(text)
    clusters = tuple(
        Cluster(tuple(c["ru_antennas"]), tuple(c["ues"]), uid=i)
        for i, c in enumerate(data["clusters"])
    )
    return ClusterAssignment(clusters, n_antennas_total=int(data["n_antennas_total"]))
