"""RSU tier: multi-RSU collaboration for NVs left unmatched by the vehicle tier.

Given split vectors, the continuous problem alternates between two exact
block updates:

* delay step: with each NV's bandwidth fixed, bisect the NV's deadline
  multiplier so its deadline is tight, giving the V2I delay (clamped by the
  delay ceiling and the residence time in RSU 1's range) and the RSU CPU
  frequencies;
* bandwidth step: with delays fixed, bisect the bandwidth multiplier so the
  total bandwidth is fully shared.

Integer subchannel counts come from the adjacent integer points of the
continuous optimum, and split vectors from a best-response sweep.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

from .errors import BracketOverflow, ConvergenceError, DomainError, InfeasibleError
from .model import (ChannelParams, ConstraintReport, Rsu, SequentialTask, Vehicle,
                    compute_energy, distance, transmit_energy, v2i_gain)
from .numerics import BracketedRoot, bisect_root, expand_upper_bracket
from .tier1 import DELAY_SLACK, optimal_bandwidth, optimal_freq, optimal_tau, solve_multiplier

BANDWIDTH_RTOL = 1e-10
SNAP = 1e-9


@dataclass(frozen=True)
class Tier2Options:
    tol: float = 1e-6
    max_iter: int = 500
    max_sweeps: int = 50
    repair_aggregate: bool = False


@dataclass
class Tier2Instance:
    nvs: list[Vehicle]
    tasks: dict[int, SequentialTask]
    rsus: list[Rsu]
    s_n: dict[int, float]
    params: ChannelParams

    def __post_init__(self):
        if not self.nvs:
            raise DomainError("tier-2 instance needs at least one NV")
        if not self.rsus:
            raise DomainError("tier-2 instance needs at least one RSU")
        xs = [r.position[0] for r in self.rsus]
        if xs != sorted(xs):
            raise DomainError("RSUs must be ordered along +x")
        length = self.rsus[0].service_range
        for nv in self.nvs:
            if nv.id not in self.tasks:
                raise KeyError(f"NV {nv.id} has no task")
            s = self.s_n[nv.id]
            if not -1e-9 <= s <= length + 1e-9:
                raise DomainError(f"NV {nv.id}: S_n={s} outside [0, {length}]")
            if not nv.weight > 0:
                raise DomainError(f"NV {nv.id}: tier-2 solver needs a positive weight")

    @classmethod
    def from_geometry(cls, nvs, tasks, rsus, params) -> "Tier2Instance":
        """Derive each NV's travelled distance in RSU 1's range from its x."""
        first = rsus[0]
        s_n = {nv.id: min(max(nv.x - first.range_start, 0.0), first.service_range)
               for nv in nvs}
        return cls(list(nvs), dict(tasks), list(rsus), s_n, params)

    @property
    def size(self) -> int:
        return len(self.nvs)

    def subset(self, ids) -> "Tier2Instance":
        keep = set(ids)
        return Tier2Instance([v for v in self.nvs if v.id in keep], self.tasks,
                             self.rsus, self.s_n, self.params)


@dataclass
class Tier2Energy:
    nv_transmit: float
    wired: float
    rsu_compute: float
    weighted_total: float
    per_rsu_compute: list[float] = field(default_factory=list)
    per_rsu_wired: list[float] = field(default_factory=list)


@dataclass
class NvAllocation:
    nv_id: int
    split: tuple[int, ...]
    tau: float
    bandwidth: float
    freqs: list[float]
    rsu_freqs: list[float]
    lam: float
    energy: Tier2Energy
    total_delay: float
    tau_max_active: bool = False
    mobility_active: bool = False
    subchannels: int | None = None

    @property
    def objective(self) -> float:
        return self.energy.weighted_total


@dataclass
class Tier2Plan:
    allocations: dict[int, NvAllocation]
    xi: float | None = None
    iterations: int = 0
    history: list[float] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)
    aggregate: dict[int, float] = field(default_factory=dict)
    continuous: "Tier2Plan | None" = None
    policy: str = "PROPOSED"
    sweeps: int = 0

    @property
    def objective(self) -> float:
        return math.fsum(a.objective for a in self.allocations.values())

    @property
    def bandwidths(self) -> dict[int, float]:
        return {n: a.bandwidth for n, a in self.allocations.items()}

    @property
    def splits(self) -> dict[int, tuple[int, ...]]:
        return {n: a.split for n, a in self.allocations.items()}


def enumerate_splits(task_or_m, n_rsus: int):
    """Every split vector ``(1, m_2, ..., m_R)`` with ``m_r <= m_{r+1} <= M + 1``.

    Ordered with ``m_2`` in the outer loop; there are ``C(M + R - 1, R - 1)``.
    """
    if n_rsus < 1:
        raise ValueError("need at least one RSU")
    m = task_or_m.size if isinstance(task_or_m, SequentialTask) else int(task_or_m)
    for tail in itertools.combinations_with_replacement(range(1, m + 2), n_rsus - 1):
        yield (1, *tail)


def check_split(split, m: int, n_rsus: int):
    if len(split) != n_rsus or split[0] != 1:
        raise ValueError(f"split {split} must have {n_rsus} entries starting at 1")
    if any(a > b for a, b in zip(split, split[1:])) or split[-1] > m + 1:
        raise ValueError(f"split {split} must be nondecreasing and <= {m + 1}")


def rsu_workloads(task: SequentialTask, split) -> list[float]:
    bounds = list(split) + [task.size + 1]
    c = task.workloads
    return [math.fsum(c[bounds[r] - 1:bounds[r + 1] - 1]) for r in range(len(split))]


def wired_hops(task: SequentialTask, split) -> list[float]:
    """Bits RSU r forwards to RSU r+1 (zero once the task is finished)."""
    hops = []
    for r in range(len(split) - 1):
        nxt = split[r + 1]
        hops.append(task.data_in(nxt) if nxt <= task.size else 0.0)
    return hops


def rsu_kind(split, r: int, m: int) -> str:
    """``compute``, ``forward`` (TYPE 1) or ``idle`` (TYPE 2) for RSU index r."""
    if split[r] == m + 1:
        return "idle"
    end = split[r + 1] if r + 1 < len(split) else m + 1
    return "forward" if split[r] == end else "compute"


class _NvContext:
    """Per-NV constants that do not depend on split or bandwidth."""

    def __init__(self, inst: Tier2Instance, nv: Vehicle):
        p = inst.params
        self.nv = nv
        self.task = inst.tasks[nv.id]
        rsu1 = inst.rsus[0]
        d = distance(nv.position, rsu1.position, rsu1.height)
        self.gain = v2i_gain(d, p.v2i_pathloss_exponent, p.v2i_fading(nv.id, rsu1.id))
        self.setup = p.setup_delay
        self.tau_max = p.tau_max if p.tau_max is not None else self.task.deadline
        length = rsu1.service_range
        remaining = length - inst.s_n[nv.id]
        self.mobility = (remaining / nv.velocity - self.setup) if nv.velocity > 0 else math.inf
        self.tau_cap = min(self.tau_max, self.mobility)


def compute_floor(ctx: _NvContext, split, inst: Tier2Instance,
                  caps: list[float] | None = None) -> float:
    """Delay with instant upload and every RSU at its frequency cap."""
    caps = caps or [r.max_cpu for r in inst.rsus]
    loads = rsu_workloads(ctx.task, split)
    wired = inst.params.wired_delay_per_bit * math.fsum(wired_hops(ctx.task, split))
    return ctx.setup + wired + math.fsum(c / f for c, f in zip(loads, caps) if c > 0)


def reachable(ctx: _NvContext, split, inst: Tier2Instance,
              caps: list[float] | None = None) -> bool:
    """Whether ``split`` can meet the deadline with some positive upload delay."""
    return ctx.tau_cap > 0.0 and compute_floor(ctx, split, inst, caps) < ctx.task.deadline


def respond(ctx: _NvContext, split, bandwidth: float, inst: Tier2Instance,
            caps: list[float] | None = None) -> NvAllocation:
    """Optimal delay and frequencies of one NV for a fixed split and bandwidth."""
    p = inst.params
    nv, task, rsus = ctx.nv, ctx.task, inst.rsus
    caps = caps or [r.max_cpu for r in rsus]
    loads = rsu_workloads(task, split)
    hops = wired_hops(task, split)
    wired_delay = p.wired_delay_per_bit * math.fsum(hops)
    if ctx.tau_cap <= 0.0:
        raise InfeasibleError(f"NV {nv.id} leaves RSU 1's range before upload",
                              constraint="mobility", subject=nv.id)
    if not compute_floor(ctx, split, inst, caps) < task.deadline:
        raise InfeasibleError(f"NV {nv.id}: split {split} misses the deadline at full speed",
                              constraint="deadline", subject=nv.id)
    if not bandwidth > 0:
        raise InfeasibleError(f"NV {nv.id}: no bandwidth", constraint="bandwidth", subject=nv.id)
    bits = task.input_size
    n0 = p.noise_density
    active = [(c, r.weight, r.kappa, cap) for c, r, cap in zip(loads, rsus, caps) if c > 0]

    def delay_of(lam):
        t = ctx.setup + wired_delay + min(
            optimal_tau(lam, bits, bandwidth, ctx.gain, nv.weight, n0), ctx.tau_cap)
        for c, w, k, cap in active:
            f = optimal_freq(lam, w, k, cap)
            if f == 0.0:
                return math.inf
            t += c / f
        return t

    lam = solve_multiplier(delay_of, task.deadline, subject=nv.id)
    tau_free = optimal_tau(lam, bits, bandwidth, ctx.gain, nv.weight, n0)
    tau = min(tau_free, ctx.tau_cap)
    rsu_f = [optimal_freq(lam, r.weight, r.kappa, cap) if c > 0 else 0.0
             for c, r, cap in zip(loads, rsus, caps)]
    alloc = _evaluate(ctx, split, tau, bandwidth, rsu_f, lam, inst, hops, wired_delay)
    clamped = tau_free > ctx.tau_cap
    alloc.tau_max_active = clamped and ctx.tau_max <= ctx.mobility
    alloc.mobility_active = clamped and ctx.mobility < ctx.tau_max
    return alloc


def _evaluate(ctx, split, tau, bandwidth, rsu_f, lam, inst, hops, wired_delay) -> NvAllocation:
    p = inst.params
    task, rsus = ctx.task, inst.rsus
    bounds = list(split) + [task.size + 1]
    freqs = []
    per_c = []
    for r, rsu in enumerate(rsus):
        idx = range(bounds[r] - 1, bounds[r + 1] - 1)
        freqs.extend(rsu_f[r] for _ in idx)
        per_c.append(math.fsum(compute_energy(rsu.kappa, task.workloads[m], rsu_f[r])
                               for m in idx))
    per_w = [p.wired_energy_per_bit * b for b in hops] + [0.0]
    e_t = transmit_energy(task.input_size, tau, bandwidth, ctx.gain, p.noise_density)
    total = ctx.nv.weight * e_t + math.fsum(
        r.weight * (c + w) for r, c, w in zip(rsus, per_c, per_w))
    delay = (ctx.setup + tau + wired_delay
             + math.fsum(c / f for c, f in zip(task.workloads, freqs)))
    energy = Tier2Energy(e_t, math.fsum(per_w), math.fsum(per_c), total, per_c, per_w)
    return NvAllocation(ctx.nv.id, tuple(split), tau, bandwidth, freqs, list(rsu_f),
                        lam, energy, delay)


def _with_bandwidth(alloc: NvAllocation, ctx: _NvContext, bandwidth: float,
                    inst: Tier2Instance) -> float:
    """Objective of ``alloc`` if only its bandwidth changed."""
    e_t = transmit_energy(ctx.task.input_size, alloc.tau, bandwidth, ctx.gain,
                          inst.params.noise_density)
    return alloc.objective + ctx.nv.weight * (e_t - alloc.energy.nv_transmit)


def _freq_caps(inst: Tier2Instance, splits: dict, options: Tier2Options):
    """Per-NV CPU caps; with aggregate repair each RSU is shared evenly."""
    base = [r.max_cpu for r in inst.rsus]
    if not options.repair_aggregate:
        return {n: base for n in splits}
    users = [0] * len(inst.rsus)
    for n, s in splits.items():
        for r, c in enumerate(rsu_workloads(inst.tasks[n], s)):
            users[r] += c > 0
    caps = [f / max(u, 1) for f, u in zip(base, users)]
    return {n: caps for n in splits}


def aggregate_frequency(plan: Tier2Plan, n_rsus: int) -> dict[int, float]:
    agg = [0.0] * n_rsus
    for a in plan.allocations.values():
        for r, f in enumerate(a.rsu_freqs):
            agg[r] += f
    return dict(enumerate(agg))


def bandwidth_step(taus: dict[int, float], ctxs: dict[int, _NvContext],
                   inst: Tier2Instance) -> tuple[float, dict[int, float]]:
    """Bandwidth multiplier and shares that use up the total bandwidth."""
    p = inst.params
    total = p.b_total

    def shares(xi):
        return {n: optimal_bandwidth(xi, ctxs[n].task.input_size, taus[n], ctxs[n].gain,
                                     ctxs[n].nv.weight, p.noise_density) for n in taus}

    def slack(xi):
        return total - math.fsum(shares(xi).values())

    try:
        br = expand_upper_bracket(slack, 0.0)
    except BracketOverflow as exc:
        raise ConvergenceError(f"bandwidth multiplier unbounded: {exc}") from exc
    br = BracketedRoot(br.lo, br.hi, tolerance=br.hi * 1e-16, max_iters=600)
    xi = bisect_root(slack, br, ftol=BANDWIDTH_RTOL * total)
    out = shares(xi)
    # Spread the bisection residual so the shares sum to B.
    scale = total / math.fsum(out.values())
    return xi, {n: b * scale for n, b in out.items()}


def solve_continuous(inst: Tier2Instance, splits: dict[int, tuple[int, ...]],
                     options: Tier2Options = Tier2Options(),
                     init_bandwidth: dict[int, float] | None = None) -> Tier2Plan:
    """Alternating delay/bandwidth optimisation for fixed split vectors."""
    m_rsus = len(inst.rsus)
    for nv in inst.nvs:
        check_split(splits[nv.id], inst.tasks[nv.id].size, m_rsus)
    ctxs = {nv.id: _NvContext(inst, nv) for nv in inst.nvs}
    caps = _freq_caps(inst, {n: splits[n] for n in ctxs}, options)
    if init_bandwidth is None:
        bw = {n: inst.params.b_total / inst.size for n in ctxs}
    else:
        s = math.fsum(init_bandwidth[n] for n in ctxs)
        bw = {n: init_bandwidth[n] * inst.params.b_total / s for n in ctxs}

    def delay_step(bw):
        return {n: respond(ctxs[n], splits[n], bw[n], inst, caps[n]) for n in ctxs}

    allocs = delay_step(bw)
    history = [math.fsum(a.objective for a in allocs.values())]
    xi = None
    for it in range(1, options.max_iter + 1):
        xi, new_bw = bandwidth_step({n: a.tau for n, a in allocs.items()}, ctxs, inst)
        history.append(math.fsum(_with_bandwidth(allocs[n], ctxs[n], new_bw[n], inst)
                                  for n in ctxs))
        new_allocs = delay_step(new_bw)
        history.append(math.fsum(a.objective for a in new_allocs.values()))
        change = max(max(abs(new_bw[n] - bw[n]) / bw[n],
                         abs(new_allocs[n].tau - allocs[n].tau) / allocs[n].tau)
                     for n in ctxs)
        bw, allocs = new_bw, new_allocs
        if change < options.tol:
            plan = Tier2Plan(allocs, xi=xi, iterations=it, history=history)
            plan.aggregate = aggregate_frequency(plan, m_rsus)
            return plan
    raise ConvergenceError(
        f"alternating optimisation did not converge in {options.max_iter} iterations "
        f"(last relative change {change:.3g})", residual=change)


def _adjacent_integer_counts(fractions: list[float], b: int) -> tuple[list[int], list[int], int]:
    """Lower/upper integer bounds per coordinate (each >= 1) and how many to round up."""
    lower = []
    upper = []
    for x in fractions:
        r = round(x)
        if abs(x - r) <= SNAP * max(1.0, x):
            lo = hi = int(r)
        else:
            lo, hi = math.floor(x), math.ceil(x)
        lower.append(max(lo, 1))
        upper.append(max(hi, 1))
    k = b - sum(lower)
    while k < 0:
        # Forced minimum of one subchannel: take units back from the
        # coordinate that sits furthest above its continuous value.
        cands = [i for i in range(len(lower)) if lower[i] > 1]
        if not cands:
            break
        i = max(cands, key=lambda j: (lower[j] - fractions[j], -j))
        lower[i] -= 1
        upper[i] = lower[i]
        k += 1
    return lower, upper, k


def integer_candidates(bandwidths: list[float], b0: float, b: int):
    """Every adjacent integer point (counts of ``b0``) on the hyperplane ``sum = b``."""
    n = len(bandwidths)
    if n > b:
        raise InfeasibleError(f"{n} NVs cannot each get a subchannel out of {b}",
                              constraint="subchannels")
    lower, upper, k = _adjacent_integer_counts([x / b0 for x in bandwidths], b)
    free = [i for i in range(n) if upper[i] > lower[i]]
    if k < 0 or k > len(free):
        return [lower] if k == 0 else []
    out = []
    for ups in itertools.combinations(free, k):
        v = list(lower)
        for i in ups:
            v[i] = upper[i]
        out.append(v)
    return out


def discretize_subchannels(plan: Tier2Plan, inst: Tier2Instance,
                           options: Tier2Options = Tier2Options()) -> Tier2Plan:
    """Best adjacent integer subchannel vector; only delays/frequencies are re-solved."""
    p = inst.params
    ids = list(plan.allocations)
    bws = [plan.allocations[n].bandwidth for n in ids]
    ctxs = {nv.id: _NvContext(inst, nv) for nv in inst.nvs if nv.id in plan.allocations}
    caps = _freq_caps(inst, plan.splits, options)
    cache: dict[tuple[int, int], NvAllocation | None] = {}

    def score(n, count):
        key = (n, count)
        if key not in cache:
            try:
                cache[key] = respond(ctxs[n], plan.allocations[n].split, count * p.b0,
                                     inst, caps[n])
            except InfeasibleError:
                cache[key] = None
        a = cache[key]
        return math.inf if a is None else a.objective

    best, best_val = None, math.inf
    for cand in integer_candidates(bws, p.b0, p.num_subchannels):
        val = math.fsum(score(n, c) for n, c in zip(ids, cand))
        if val < best_val:
            best, best_val = cand, val
    if best is None:
        raise InfeasibleError("no feasible integer subchannel allocation",
                              constraint="subchannels")
    allocs = {}
    for n, c in zip(ids, best):
        allocs[n] = replace(cache[(n, c)], subchannels=c)
    out = Tier2Plan(allocs, xi=plan.xi, iterations=plan.iterations, history=plan.history,
                    failures=dict(plan.failures), continuous=plan, policy=plan.policy,
                    sweeps=plan.sweeps)
    out.aggregate = aggregate_frequency(out, len(inst.rsus))
    return out


def best_split(ctx: _NvContext, bandwidth: float, inst: Tier2Instance,
               caps: list[float] | None = None, current=None):
    """Split vector minimising this NV's objective at a fixed bandwidth.

    The current split is kept unless another is strictly better.
    """
    best, best_val = None, math.inf
    if current is not None:
        try:
            best_val = respond(ctx, current, bandwidth, inst, caps).objective
            best = current
        except InfeasibleError:
            pass
    for split in enumerate_splits(ctx.task, len(inst.rsus)):
        if split == current:
            continue
        try:
            val = respond(ctx, split, bandwidth, inst, caps).objective
        except InfeasibleError:
            continue
        if val < best_val * (1.0 - 1e-12):
            best, best_val = split, val
    return best


def solve(inst: Tier2Instance, options: Tier2Options = Tier2Options()) -> Tier2Plan:
    """Joint split/bandwidth/delay/frequency plan with integer subchannels.

    Starts from the equal bandwidth share, lets every NV pick its best split
    against it, then alternates continuous re-optimisation with split
    best-responses until no split changes.  NVs without any feasible split
    are dropped and reported in ``failures``.
    """
    failures: dict[int, str] = {}
    active = [nv.id for nv in inst.nvs]
    base = [r.max_cpu for r in inst.rsus]
    while True:
        if not active:
            return Tier2Plan({}, failures=failures)
        sub = inst.subset(active)
        share = inst.params.b_total / len(active)
        ctxs = {nv.id: _NvContext(sub, nv) for nv in sub.nvs}
        splits = {n: best_split(ctxs[n], share, sub, base) for n in active}
        missing = [n for n, s in splits.items() if s is None]
        if not missing:
            break
        for n in missing:
            failures[n] = "no feasible split"
        active = [n for n in active if n not in missing]

    plan = None
    bw = None
    for sweep in range(1, options.max_sweeps + 1):
        plan = solve_continuous(sub, splits, options, init_bandwidth=bw)
        plan.sweeps = sweep
        bw = plan.bandwidths
        caps = _freq_caps(sub, splits, options)
        new = {n: best_split(ctxs[n], bw[n], sub, caps[n], current=splits[n]) for n in active}
        if new == splits:
            break
        splits = new
    plan.failures = failures
    return discretize_subchannels(plan, sub, options)


def validate(plan: Tier2Plan, inst: Tier2Instance) -> ConstraintReport:
    """Check split order, deadline, mobility, delay ceiling, subchannels and RSU load."""
    report = ConstraintReport()
    p = inst.params
    n_rsus = len(inst.rsus)
    for n, a in plan.allocations.items():
        task = inst.tasks[n]
        ctx = _NvContext(inst, next(v for v in inst.nvs if v.id == n))
        s = a.split
        ok = (len(s) == n_rsus and s[0] == 1 and s[-1] <= task.size + 1
              and all(x <= y for x, y in zip(s, s[1:])))
        report.add("split_order", ok, detail=f"NV {n}: {s}")
        hops = wired_hops(task, s)
        delay = (p.setup_delay + a.tau + p.wired_delay_per_bit * math.fsum(hops)
                 + math.fsum(c / f if f > 0 else math.inf
                             for c, f in zip(task.workloads, a.freqs)))
        report.add("deadline", delay <= task.deadline + DELAY_SLACK, delay - task.deadline,
                   f"NV {n}")
        upload = p.setup_delay + a.tau
        limit = ctx.mobility + p.setup_delay
        report.add("mobility", upload <= limit + DELAY_SLACK, upload - limit, f"NV {n}")
        report.add("tau_range", 0 < a.tau <= ctx.tau_max + DELAY_SLACK, a.tau - ctx.tau_max,
                   f"NV {n}")
        for r in range(n_rsus):
            kind = rsu_kind(s, r, task.size)
            if kind == "forward":
                report.add("type1_rsu", a.energy.per_rsu_compute[r] == 0.0,
                           a.energy.per_rsu_compute[r], f"NV {n} RSU {r + 1}")
            elif kind == "idle":
                idle = a.energy.per_rsu_compute[r] + a.energy.per_rsu_wired[r]
                report.add("type2_rsu", idle == 0.0, idle, f"NV {n} RSU {r + 1}")
        for r, f in enumerate(a.rsu_freqs):
            report.add("rsu_freq", 0 <= f <= inst.rsus[r].max_cpu, f - inst.rsus[r].max_cpu,
                       f"NV {n} RSU {r + 1}")
    counts = [a.subchannels for a in plan.allocations.values()]
    if counts and all(c is not None for c in counts):
        total = sum(counts)
        report.add("subchannels", total <= p.num_subchannels and min(counts) >= 1,
                   total - p.num_subchannels)
    for r, rsu in enumerate(inst.rsus):
        load = math.fsum(a.rsu_freqs[r] for a in plan.allocations.values())
        report.add("aggregate_cpu", load <= rsu.max_cpu * (1 + 1e-12), load - rsu.max_cpu,
                   f"RSU {r + 1}")
    return report
