"""Vehicle tier: closed-form KKT allocation for one NV-HV pair.

For a fixed split index the optimal V2V delay and CPU frequencies are
explicit functions of the deadline multiplier ``lam``; ``lam`` itself is
found by bisection so that the deadline holds with equality.  The split is
then chosen by exhaustive search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import BracketOverflow, DomainError, InfeasibleError
from .model import (ChannelParams, ConstraintReport, SequentialTask, Vehicle,
                    compute_energy, distance, transmit_energy, v2v_gain)
from .numerics import BracketedRoot, bisect_root, expand_upper_bracket, lambert_w0

DEADLINE_RTOL = 1e-10
DELAY_SLACK = 1e-9


class Pair(NamedTuple):
    nv: Vehicle
    hv: Vehicle


@dataclass
class Tier1Energy:
    nv_transmit: float
    nv_compute: float
    hv_compute: float
    hv_transmit: float = 0.0
    weighted_total: float = 0.0


@dataclass
class Transfer:
    subtask: int          # first subtask computed by the receiver
    bits: float
    tau: float
    sender: str           # "nv" or "hv"


@dataclass
class Tier1Plan:
    pair: tuple[int, int]
    split: int
    tau_v2v: float
    freqs: list[float]
    lam: float | None
    energy: Tier1Energy
    total_delay: float
    owners: tuple[str, ...]
    at_cap: tuple[bool, ...] = ()
    transfers: list[Transfer] = field(default_factory=list)
    policy: str = "PROPOSED"

    @property
    def objective(self) -> float:
        return self.energy.weighted_total


def optimal_tau(lam: float, bits: float, bandwidth: float, gain: float,
                weight: float, noise: float) -> float:
    """Delay minimising ``weight * E(tau) + lam * tau`` for a Shannon link.

    ``tau = bits / (Bw (W0((g lam / (w N0 Bw) - 1) / e) + 1))``.  The same
    expression with the roles of delay and bandwidth exchanged gives the
    optimal bandwidth for a bandwidth multiplier.
    """
    if bits == 0.0:
        return 0.0
    if lam <= 0.0:
        return math.inf
    arg = (gain * lam / (weight * noise * bandwidth) - 1.0) / math.e
    d = lambert_w0(arg) + 1.0
    if d <= 0.0:
        return math.inf
    return bits / (bandwidth * d)


optimal_bandwidth = optimal_tau


def optimal_freq(lam: float, weight: float, kappa: float, cap: float) -> float:
    """``min((lam / (2 w kappa))^(1/3), cap)``."""
    if lam <= 0.0:
        return 0.0
    return min((lam / (2.0 * weight * kappa)) ** (1.0 / 3.0), cap)


def solve_multiplier(delay_of, deadline: float, subject=None) -> float:
    """Smallest multiplier whose response meets ``deadline`` with equality.

    ``delay_of`` must be non-increasing in the multiplier.  A bracket
    overflow means the deadline is only reachable in the limit and is
    reported as infeasibility.
    """
    def slack(lam):
        return deadline - delay_of(lam)

    try:
        br = expand_upper_bracket(slack, 0.0)
    except BracketOverflow as exc:
        raise InfeasibleError(f"deadline unreachable for {subject}: {exc}",
                              constraint="bracket", subject=subject) from exc
    br = BracketedRoot(br.lo, br.hi, tolerance=br.hi * 1e-16, max_iters=600)
    return bisect_root(slack, br, ftol=DEADLINE_RTOL * deadline)


def pair_gain(pair: Pair, params: ChannelParams) -> float:
    d = distance(pair.nv.position, pair.hv.position)
    return v2v_gain(d, params.v2v_fading(pair.nv.id, pair.hv.id))


def _check_weights(pair: Pair):
    if not (pair.nv.weight > 0 and pair.hv.weight > 0):
        raise DomainError("tier-1 solver needs strictly positive weights")


def min_delay(pair: Pair, task: SequentialTask, split: int) -> float:
    c = task.workloads
    return (math.fsum(c[:split - 1]) / pair.nv.max_cpu
            + math.fsum(c[split - 1:]) / pair.hv.max_cpu)


def feasible(pair: Pair, task: SequentialTask, split: int) -> bool:
    """Whether the deadline is reachable at full speed with instant transfer."""
    if not 1 <= split <= task.size:
        raise ValueError(f"split {split} outside 1..{task.size}")
    return min_delay(pair, task, split) < task.deadline


def solve_fixed_split(pair: Pair, task: SequentialTask, split: int,
                      params: ChannelParams) -> Tier1Plan:
    """Optimal delay and frequencies for a fixed split index."""
    _check_weights(pair)
    if not feasible(pair, task, split):
        raise InfeasibleError(
            f"pair {pair.nv.id}-{pair.hv.id}: split {split} misses the deadline at full speed",
            constraint="deadline", subject=pair.nv.id)
    nv, hv = pair
    c = task.workloads
    c_nv = math.fsum(c[:split - 1])
    c_hv = math.fsum(c[split - 1:])
    bits = task.data_in(split)
    gain = pair_gain(pair, params)
    bw, n0 = params.b_v2v, params.noise_density

    def delay_of(lam):
        t = optimal_tau(lam, bits, bw, gain, nv.weight, n0)
        f_hv = optimal_freq(lam, hv.weight, hv.kappa, hv.max_cpu)
        if f_hv == 0.0:
            return math.inf
        t += c_hv / f_hv
        if c_nv > 0.0:
            t += c_nv / optimal_freq(lam, nv.weight, nv.kappa, nv.max_cpu)
        return t

    lam = solve_multiplier(delay_of, task.deadline, subject=nv.id)
    f_nv = optimal_freq(lam, nv.weight, nv.kappa, nv.max_cpu)
    f_hv = optimal_freq(lam, hv.weight, hv.kappa, hv.max_cpu)
    compute = c_hv / f_hv + (c_nv / f_nv if c_nv > 0.0 else 0.0)
    tau = optimal_tau(lam, bits, bw, gain, nv.weight, n0)
    if bits > 0.0 and task.deadline - compute > 0.0:
        # The deadline is active: hand the transfer exactly the time left,
        # removing the bisection tolerance from the delay budget.
        tau = task.deadline - compute
    owners = tuple("nv" if m < split else "hv" for m in range(1, task.size + 1))
    freqs = [f_nv if o == "nv" else f_hv for o in owners]
    caps = [nv.max_cpu if o == "nv" else hv.max_cpu for o in owners]
    transfers = [Transfer(split, bits, tau, "nv")] if bits > 0 else []
    plan = assemble_plan(pair, task, params, owners, freqs, transfers, lam=lam)
    plan.at_cap = tuple(f >= cap for f, cap in zip(freqs, caps))
    return plan


def assemble_plan(pair: Pair, task: SequentialTask, params: ChannelParams,
                  owners, freqs, transfers: list[Transfer], lam=None,
                  policy: str = "PROPOSED") -> Tier1Plan:
    """Evaluate energy and delay of an explicit assignment."""
    nv, hv = pair
    c = task.workloads
    e_nv_c = math.fsum(compute_energy(nv.kappa, c[m], freqs[m])
                       for m in range(task.size) if owners[m] == "nv")
    e_hv_c = math.fsum(compute_energy(hv.kappa, c[m], freqs[m])
                       for m in range(task.size) if owners[m] == "hv")
    gain_fwd = pair_gain(pair, params)
    gain_back = v2v_gain(distance(nv.position, hv.position), params.v2v_fading(hv.id, nv.id))
    e_nv_t = e_hv_t = 0.0
    for tr in transfers:
        g = gain_fwd if tr.sender == "nv" else gain_back
        e = transmit_energy(tr.bits, tr.tau, params.b_v2v, g, params.noise_density)
        if tr.sender == "nv":
            e_nv_t += e
        else:
            e_hv_t += e
    total = nv.weight * (e_nv_t + e_nv_c) + hv.weight * (e_hv_t + e_hv_c)
    tau = math.fsum(tr.tau for tr in transfers)
    delay = tau + math.fsum(c[m] / freqs[m] for m in range(task.size))
    split = next((m + 1 for m, o in enumerate(owners) if o == "hv"), task.size + 1)
    return Tier1Plan(
        pair=(nv.id, hv.id), split=split, tau_v2v=tau, freqs=list(freqs), lam=lam,
        energy=Tier1Energy(e_nv_t, e_nv_c, e_hv_c, e_hv_t, total),
        total_delay=delay, owners=tuple(owners), transfers=list(transfers),
        policy=policy)


def solve(pair: Pair, task: SequentialTask, params: ChannelParams) -> Tier1Plan:
    """Minimum-energy plan over every split index; ties go to the smaller split."""
    best = None
    reasons = []
    for split in range(1, task.size + 1):
        try:
            plan = solve_fixed_split(pair, task, split, params)
        except InfeasibleError as exc:
            reasons.append(f"split {split}: {exc.constraint}")
            continue
        if best is None or plan.objective < best.objective:
            best = plan
    if best is None:
        raise InfeasibleError(
            f"pair {pair.nv.id}-{pair.hv.id}: no feasible split ({'; '.join(reasons)})",
            constraint="deadline", subject=pair.nv.id)
    return best


def validate(plan: Tier1Plan, pair: Pair, task: SequentialTask) -> ConstraintReport:
    """Check the split range, deadline, delay sign and per-device frequency caps."""
    report = ConstraintReport()
    m = task.size
    report.add("split_range", 1 <= plan.split <= m or plan.policy == "BFM",
               detail=f"split={plan.split}, M={m}")
    delay = math.fsum(tr.tau for tr in plan.transfers) + math.fsum(
        c / f if f > 0 else math.inf for c, f in zip(task.workloads, plan.freqs))
    report.add("deadline", delay <= task.deadline + DELAY_SLACK, delay - task.deadline)
    taus = [tr.tau for tr in plan.transfers]
    report.add("tau_nonneg", all(t >= 0 for t in taus), min(taus, default=0.0))
    nv_f = [f for f, o in zip(plan.freqs, plan.owners) if o == "nv"]
    hv_f = [f for f, o in zip(plan.freqs, plan.owners) if o == "hv"]
    report.add("nv_freq", all(0 < f <= pair.nv.max_cpu for f in nv_f),
               max(nv_f, default=0.0) - pair.nv.max_cpu)
    report.add("hv_freq", all(0 < f <= pair.hv.max_cpu for f in hv_f),
               max(hv_f, default=0.0) - pair.hv.max_cpu)
    return report
