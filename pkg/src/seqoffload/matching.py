"""NV-HV matching: candidate screening followed by maximum bipartite matching."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainError
from .model import ChannelParams, Role, SequentialTask, Vehicle, distance

DIST_EPS = 1e-6


@dataclass
class CandidateGraph:
    nv_ids: list[int]
    iv_ids: list[int]
    edges: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        nvs, ivs = set(self.nv_ids), set(self.iv_ids)
        for n, targets in self.edges.items():
            if n not in nvs:
                raise ValueError(f"edge from unknown NV {n}")
            if len(set(targets)) != len(targets):
                raise ValueError(f"duplicate edge from NV {n}")
            unknown = set(targets) - ivs
            if unknown:
                raise ValueError(f"edge to unknown IV {sorted(unknown)}")

    def has_edge(self, nv_id, iv_id) -> bool:
        return iv_id in self.edges.get(nv_id, ())

    def edge_set(self) -> set[tuple[int, int]]:
        return {(n, i) for n, ivs in self.edges.items() for i in ivs}

    def intersect(self, other: "CandidateGraph") -> "CandidateGraph":
        """Edges present in both graphs, over the shared vertex sets."""
        nvs = [n for n in self.nv_ids if n in set(other.nv_ids)]
        ivs = [i for i in self.iv_ids if i in set(other.iv_ids)]
        keep = self.edge_set() & other.edge_set()
        edges = {n: [i for i in ivs if (n, i) in keep] for n in nvs}
        return CandidateGraph(nvs, ivs, {n: e for n, e in edges.items() if e})


@dataclass
class Matching:
    pairs: list[tuple[int, int]]
    unmatched_nvs: list[int]

    def __len__(self):
        return len(self.pairs)

    def hv_ids(self) -> list[int]:
        return [i for _, i in self.pairs]


def in_v2v_range(a: Vehicle, b: Vehicle, d_max: float, eps: float = DIST_EPS) -> bool:
    d = distance(a.position, b.position)
    if d == 0.0:
        raise DomainError(f"vehicles {a.id} and {b.id} coincide")
    if d < d_max - eps:
        return True
    if d > d_max + eps:
        return False
    # On the boundary: accept only if the gap is closing.
    if a.x == b.x:
        return True
    rear, front = (a, b) if a.x < b.x else (b, a)
    return rear.velocity > front.velocity


def has_capacity(iv: Vehicle, task: SequentialTask) -> bool:
    return task.total_workload / iv.max_cpu < task.deadline


def build_candidates(nvs: list[Vehicle], tasks: dict[int, SequentialTask],
                     ivs: list[Vehicle], params: ChannelParams,
                     eps: float = DIST_EPS) -> CandidateGraph:
    """NV-IV edges that pass both the V2V range and the IV capacity screens."""
    edges = {}
    for nv in nvs:
        if nv.id not in tasks:
            raise KeyError(f"NV {nv.id} has no task")
        task = tasks[nv.id]
        ok = [iv.id for iv in ivs
              if in_v2v_range(nv, iv, params.d_v2v_max, eps) and has_capacity(iv, task)]
        if ok:
            edges[nv.id] = ok
    return CandidateGraph([v.id for v in nvs], [v.id for v in ivs], edges)


def max_match(graph: CandidateGraph) -> Matching:
    """Maximum-cardinality matching by repeated augmenting-path search.

    NVs are processed in ascending id and each search tries IVs in ascending
    id, so the result is a deterministic function of the graph.
    """
    adj = {n: sorted(graph.edges.get(n, ())) for n in graph.nv_ids}
    owner: dict[int, int] = {}

    def augment(n, seen):
        for i in adj[n]:
            if i in seen:
                continue
            seen.add(i)
            if i not in owner or augment(owner[i], seen):
                owner[i] = n
                return True
        return False

    for n in sorted(graph.nv_ids):
        augment(n, set())
    match_of = {n: i for i, n in owner.items()}
    pairs = [(n, match_of[n]) for n in sorted(graph.nv_ids) if n in match_of]
    unmatched = [n for n in sorted(graph.nv_ids) if n not in match_of]
    return Matching(pairs, unmatched)


def promote(ivs: list[Vehicle], matching: Matching) -> list[Vehicle]:
    """Return the IVs with matched ones relabelled as HVs."""
    helpers = set(matching.hv_ids())
    return [v.with_role(Role.HV) if v.id in helpers else v for v in ivs]
