"""Comparison policies for both tiers.

Vehicle tier: FOO (full offload, optimised f), FOM (full offload, max f),
POM (half the subtasks each, max f), BFM (back-and-forth, max f), plus the
equal/random split policies with optimised f.  RSU tier: equal bandwidth with
equal or random subtask assignment, both with optimised delay/frequency.
"""

from __future__ import annotations

import itertools
import math
from enum import Enum

import numpy as np

from . import tier1, tier2
from .errors import InfeasibleError
from .model import ChannelParams, SequentialTask, distance, v2v_gain
from .tier1 import Pair, Tier1Plan, Transfer


class PolicyId(str, Enum):
    PROPOSED = "PROPOSED"
    PROPOSED_CONTINUOUS = "PROPOSED_CONTINUOUS"
    FOO = "FOO"
    POM = "POM"
    FOM = "FOM"
    BFM = "BFM"
    EQUAL_SPLIT = "EQUAL_SPLIT"
    RANDOM_SPLIT = "RANDOM_SPLIT"
    T2_EQUAL_EQUAL = "T2_EQUAL_EQUAL"
    T2_EQUAL_RANDOM = "T2_EQUAL_RANDOM"

    @property
    def tier(self) -> int | None:
        if self is PolicyId.PROPOSED:
            return None
        if self is PolicyId.PROPOSED_CONTINUOUS:
            return 2
        return 2 if self.value.startswith("T2_") else 1


TIER1_POLICIES = [p for p in PolicyId if p.tier == 1]
TIER2_POLICIES = [p for p in PolicyId if p.tier == 2 and p is not PolicyId.PROPOSED_CONTINUOUS]


def half_split(m: int) -> int:
    """First HV subtask when the NV keeps the first ceil(M/2) subtasks."""
    return min(math.ceil(m / 2) + 1, m)


def transfers_for(owners, task: SequentialTask) -> list[tuple[int, float, str]]:
    """(receiving subtask, bits, sender) at every change of executor."""
    out = []
    prev = "nv"
    for m, o in enumerate(owners, start=1):
        if o != prev:
            out.append((m, task.data_in(m), prev))
        prev = o
    return out


def share_residual(pair: Pair, params: ChannelParams, transfers, residual: float) -> list[float]:
    """Split ``residual`` seconds among transfers to minimise their total energy."""
    nv, hv = pair
    d = distance(nv.position, hv.position)
    links = []
    for _, bits, sender in transfers:
        if sender == "nv":
            links.append((bits, v2v_gain(d, params.v2v_fading(nv.id, hv.id)), nv.weight))
        else:
            links.append((bits, v2v_gain(d, params.v2v_fading(hv.id, nv.id)), hv.weight))
    live = [i for i, (bits, _, _) in enumerate(links) if bits > 0]
    taus = [0.0] * len(links)
    if not live:
        return taus
    if len(live) == 1:
        taus[live[0]] = residual
        return taus

    def total(mu):
        return math.fsum(tier1.optimal_tau(mu, links[i][0], params.b_v2v, links[i][1],
                                           links[i][2], params.noise_density) for i in live)

    mu = tier1.solve_multiplier(total, residual, subject=nv.id)
    for i in live:
        taus[i] = tier1.optimal_tau(mu, links[i][0], params.b_v2v, links[i][1], links[i][2],
                                    params.noise_density)
    # Absorb the bisection residual in the largest transfer.
    j = max(live, key=lambda i: taus[i])
    taus[j] += residual - math.fsum(taus)
    return taus


def max_frequency_plan(pair: Pair, task: SequentialTask, params: ChannelParams,
                       owners, policy: str) -> Tier1Plan:
    """Plan at maximal CPU frequency with the leftover time spent on transfers."""
    nv, hv = pair
    freqs = [nv.max_cpu if o == "nv" else hv.max_cpu for o in owners]
    compute = math.fsum(c / f for c, f in zip(task.workloads, freqs))
    residual = task.deadline - compute
    plan_transfers = transfers_for(owners, task)
    needs_time = any(bits > 0 for _, bits, _ in plan_transfers)
    if residual < 0 or (needs_time and residual <= 0):
        raise InfeasibleError(f"{policy}: maximal-frequency compute misses the deadline",
                              constraint="deadline", subject=nv.id)
    taus = share_residual(pair, params, plan_transfers, residual)
    transfers = [Transfer(m, bits, tau, sender)
                 for (m, bits, sender), tau in zip(plan_transfers, taus)]
    try:
        plan = tier1.assemble_plan(pair, task, params, owners, freqs, transfers, policy=policy)
    except OverflowError as exc:
        raise InfeasibleError(f"{policy}: {exc}", constraint="bracket", subject=nv.id) from exc
    plan.at_cap = tuple(True for _ in owners)
    return plan


def bfm_owners(pair: Pair, task: SequentialTask) -> tuple[str, ...]:
    """Assignment whose NV workload share is nearest the NV capacity share.

    Ties go to fewer executor changes, then to the lexicographically first
    pattern (NV before HV).  At least one subtask goes to the HV.
    """
    nv, hv = pair
    target = nv.max_cpu / (nv.max_cpu + hv.max_cpu)
    c = task.workloads
    total = task.total_workload
    best, best_key = None, None
    for bits in itertools.product(("nv", "hv"), repeat=task.size):
        if "hv" not in bits:
            continue
        share = math.fsum(w for w, o in zip(c, bits) if o == "nv") / total
        changes = len(transfers_for(bits, task))
        key = (abs(share - target), changes)
        if best_key is None or key < best_key:
            best, best_key = bits, key
    return best


def run_tier1_baseline(policy, pair: Pair, task: SequentialTask, params: ChannelParams,
                       rng: np.random.Generator | None = None) -> Tier1Plan:
    policy = PolicyId(policy)
    m = task.size
    if policy is PolicyId.PROPOSED:
        return tier1.solve(pair, task, params)
    if policy is PolicyId.FOO:
        plan = tier1.solve_fixed_split(pair, task, 1, params)
    elif policy is PolicyId.EQUAL_SPLIT:
        plan = tier1.solve_fixed_split(pair, task, half_split(m), params)
    elif policy is PolicyId.RANDOM_SPLIT:
        if rng is None:
            raise ValueError("RANDOM_SPLIT needs an rng")
        options = [s for s in range(1, m + 1) if tier1.feasible(pair, task, s)]
        if not options:
            raise InfeasibleError("no feasible split", constraint="deadline", subject=pair.nv.id)
        plan = tier1.solve_fixed_split(pair, task, int(rng.choice(options)), params)
    elif policy is PolicyId.FOM:
        return max_frequency_plan(pair, task, params, ("hv",) * m, "FOM")
    elif policy is PolicyId.POM:
        s = half_split(m)
        owners = tuple("nv" if k < s else "hv" for k in range(1, m + 1))
        return max_frequency_plan(pair, task, params, owners, "POM")
    elif policy is PolicyId.BFM:
        return max_frequency_plan(pair, task, params, bfm_owners(pair, task), "BFM")
    else:
        raise ValueError(f"{policy} is not a vehicle-tier policy")
    plan.policy = policy.value
    return plan


def equal_split_vector(m: int, n_rsus: int) -> tuple[int, ...]:
    """Subtasks dealt out as evenly as possible, earlier RSUs taking the extras."""
    sizes = [m // n_rsus + (1 if r < m % n_rsus else 0) for r in range(n_rsus)]
    out = [1]
    for s in sizes[:-1]:
        out.append(out[-1] + s)
    return tuple(out)


def run_tier2_baseline(policy, inst: tier2.Tier2Instance,
                       rng: np.random.Generator | None = None) -> tier2.Tier2Plan:
    policy = PolicyId(policy)
    if policy is PolicyId.PROPOSED:
        return tier2.solve(inst)
    if policy is PolicyId.PROPOSED_CONTINUOUS:
        return tier2.solve(inst).continuous
    if policy not in (PolicyId.T2_EQUAL_EQUAL, PolicyId.T2_EQUAL_RANDOM):
        raise ValueError(f"{policy} is not an RSU-tier policy")
    if policy is PolicyId.T2_EQUAL_RANDOM and rng is None:
        raise ValueError("T2_EQUAL_RANDOM needs an rng")
    share = inst.params.b_total / inst.size
    n_rsus = len(inst.rsus)
    base = int(rng.integers(2**62)) if rng is not None else 0
    allocs, failures = {}, {}
    for nv in inst.nvs:
        ctx = tier2._NvContext(inst, nv)
        task = inst.tasks[nv.id]
        if policy is PolicyId.T2_EQUAL_EQUAL:
            split = equal_split_vector(task.size, n_rsus)
        else:
            # Per-NV priority order over the splits that can meet the deadline
            # at all; neither depends on the bandwidth share or on other NVs.
            options = [s for s in tier2.enumerate_splits(task, n_rsus)
                       if tier2.reachable(ctx, s, inst)]
            if not options:
                failures[nv.id] = "no feasible split"
                continue
            order = np.random.default_rng([base, nv.id]).permutation(len(options))
            split = options[int(order[0])]
        try:
            allocs[nv.id] = tier2.respond(ctx, split, share, inst)
        except InfeasibleError as exc:
            failures[nv.id] = str(exc.constraint)
    plan = tier2.Tier2Plan(allocs, failures=failures, policy=policy.value)
    plan.aggregate = tier2.aggregate_frequency(plan, n_rsus)
    return plan
