import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import tier1_fixed_split
from seqoffload import tier1
from seqoffload.errors import InfeasibleError
from seqoffload.model import ChannelParams, Role, SequentialTask, Vehicle
from seqoffload.tier1 import Pair, feasible, optimal_freq

PARAMS = ChannelParams()
NV = Vehicle(1, (0.0, 1.875), 25.0, 4e9, 1.5e-23, role=Role.NV)
HV = Vehicle(2, (30.0, 5.625), 20.0, 8e9, 1e-23, role=Role.HV)
TASK = SequentialTask.from_lists(1, 1.2e6, [6e7, 9e7, 3e7], [8e5, 4e5, 1e5], 0.2)

# Weighted energy per split from the SLSQP reference solver (tests/oracles.py).
ORACLE = {1: 2150.093955849079, 2: 2162.1177095598314, 3: 2316.90641573873}


def random_instance(rng, m_max=4):
    m = int(rng.integers(1, m_max + 1))
    nv = Vehicle(1, (0.0, 1.875), 25.0, rng.uniform(1e9, 10e9), rng.uniform(1e-23, 2e-23),
                 role=Role.NV)
    hv = Vehicle(2, (rng.uniform(5.0, 65.0), 1.875 + 3.75 * rng.integers(0, 3)), 20.0,
                 rng.uniform(1e9, 10e9), rng.uniform(1e-23, 2e-23), role=Role.HV)
    task = SequentialTask.from_lists(1, rng.uniform(0.1e6, 2e6), rng.uniform(1e6, 100e6, m),
                                     rng.uniform(0.1e6, 2e6, m), rng.choice([0.1, 0.2, 0.4]))
    return Pair(nv, hv), task


@pytest.mark.parametrize("split", [1, 2, 3])
def test_fixed_split_matches_frozen_oracle(split):
    plan = tier1.solve_fixed_split(Pair(NV, HV), TASK, split, PARAMS)
    assert plan.objective == pytest.approx(ORACLE[split], rel=1e-9)
    assert plan.total_delay == pytest.approx(TASK.deadline, rel=1e-6)


def test_solve_picks_cheapest_split():
    plan = tier1.solve(Pair(NV, HV), TASK, PARAMS)
    assert plan.split == 1
    assert plan.objective == pytest.approx(min(ORACLE.values()), rel=1e-9)
    assert tier1.validate(plan, Pair(NV, HV), TASK).ok


def test_optimal_freq_examples():
    assert optimal_freq(1.6e5, 1.0, 2e-23, 1e10) == pytest.approx(1.5874e9, rel=1e-4)
    cap = 3e9
    lam = 2 * 1.0 * 2e-23 * cap ** 3
    assert optimal_freq(lam, 1.0, 2e-23, cap) == pytest.approx(cap)
    assert optimal_freq(10 * lam, 1.0, 2e-23, cap) == cap


def test_feasibility_examples():
    nv = Vehicle(1, (0.0, 0.0), 20.0, 1e10, 1e-23)
    hv = Vehicle(2, (20.0, 0.0), 20.0, 1e10, 1e-23)
    task = SequentialTask.from_lists(1, 1e6, [1e9, 1e9], [1e6, 1e6], 0.3)
    assert feasible(Pair(nv, hv), task, 2)
    assert not feasible(Pair(nv, hv), task.with_deadline(0.2), 2)
    single = SequentialTask.from_lists(1, 1e6, [1e9], [1e6], 0.2)
    assert feasible(Pair(nv, hv), single, 1)


def test_single_subtask_offloads_fully():
    task = SequentialTask.from_lists(1, 1e6, [5e7], [1e5], 0.2)
    plan = tier1.solve(Pair(NV, HV), task, PARAMS)
    assert plan.split == 1 and plan.owners == ("hv",)


def test_efficient_helper_takes_everything():
    hv = Vehicle(2, (20.0, 1.875), 20.0, 10e9, 1e-25, role=Role.HV)
    nv = Vehicle(1, (0.0, 1.875), 20.0, 1e9, 2e-23, role=Role.NV)
    task = SequentialTask.from_lists(1, 1e5, [5e7] * 4, [1e6] * 4, 0.4)
    plan = tier1.solve(Pair(nv, hv), task, PARAMS)
    energies = [tier1.solve_fixed_split(Pair(nv, hv), task, s, PARAMS).objective
                for s in range(1, 5) if feasible(Pair(nv, hv), task, s)]
    assert plan.split == 1 and plan.objective == min(energies)


def test_infeasible_raises():
    task = TASK.with_deadline(0.01)
    with pytest.raises(InfeasibleError):
        tier1.solve(Pair(NV, HV), task, PARAMS)
    with pytest.raises(InfeasibleError):
        tier1.solve_fixed_split(Pair(NV, HV), task, 1, PARAMS)


def test_validator_flags_overclocked_plan():
    plan = tier1.solve(Pair(NV, HV), TASK, PARAMS)
    plan.freqs = [f * 10 for f in plan.freqs]
    report = tier1.validate(plan, Pair(NV, HV), TASK)
    assert not report.ok and report["hv_freq"][0].passed is False


def test_random_instances_against_oracle():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(25):
        pair, task = random_instance(rng)
        for split in range(1, task.size + 1):
            if not feasible(pair, task, split):
                continue
            try:
                plan = tier1.solve_fixed_split(pair, task, split, PARAMS)
            except InfeasibleError:
                continue
            ref = tier1_fixed_split(pair.nv, pair.hv, task, split)
            assert plan.objective <= ref * (1 + 5e-3)
            assert plan.objective >= ref * (1 - 5e-3)
            checked += 1
    assert checked > 20


@given(st.integers(0, 2**32 - 1))
def test_plan_properties(seed):
    pair, task = random_instance(np.random.default_rng(seed))
    try:
        plan = tier1.solve(pair, task, PARAMS)
    except InfeasibleError:
        return
    assert tier1.validate(plan, pair, task).ok
    assert abs(plan.total_delay - task.deadline) <= 1e-6 * task.deadline
    # Each frequency is either the interior KKT value or the device cap.
    for f, owner, at_cap in zip(plan.freqs, plan.owners, plan.at_cap):
        dev = pair.nv if owner == "nv" else pair.hv
        interior = (plan.lam / (2 * dev.weight * dev.kappa)) ** (1 / 3)
        assert f == pytest.approx(dev.max_cpu if at_cap else interior, rel=1e-12)
        assert at_cap == (interior >= dev.max_cpu)
    # Argmin over splits.
    for split in range(1, task.size + 1):
        try:
            other = tier1.solve_fixed_split(pair, task, split, PARAMS)
        except InfeasibleError:
            continue
        assert plan.objective <= other.objective


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 3.0))
def test_objective_non_increasing_in_deadline(seed, stretch):
    pair, task = random_instance(np.random.default_rng(seed))
    try:
        short = tier1.solve(pair, task, PARAMS)
    except InfeasibleError:
        return
    longer = tier1.solve(pair, task.with_deadline(task.deadline * stretch), PARAMS)
    assert longer.objective <= short.objective * (1 + 1e-9)


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 10.0))
def test_objective_non_increasing_in_bandwidth(seed, widen):
    pair, task = random_instance(np.random.default_rng(seed))
    try:
        narrow = tier1.solve(pair, task, PARAMS)
    except InfeasibleError:
        return
    wide = tier1.solve(pair, task, ChannelParams(b_v2v=PARAMS.b_v2v * widen))
    assert wide.objective <= narrow.objective * (1 + 1e-9)


def test_ties_go_to_smaller_split():
    # Zero intermediate data and identical devices make every split cost the same.
    nv = Vehicle(1, (0.0, 1.875), 20.0, 5e9, 1e-23, role=Role.NV)
    hv = Vehicle(2, (20.0, 1.875), 20.0, 5e9, 1e-23, role=Role.HV)
    task = SequentialTask.from_lists(1, 0.0, [5e7, 5e7, 5e7], [0.0, 0.0, 0.0], 0.2)
    costs = [tier1.solve_fixed_split(Pair(nv, hv), task, s, PARAMS).objective for s in (1, 2, 3)]
    assert max(costs) - min(costs) <= 1e-9 * min(costs)
    plan = tier1.solve(Pair(nv, hv), task, PARAMS)
    assert plan.objective == min(costs)
    assert plan.split == costs.index(min(costs)) + 1
    assert math.isclose(plan.tau_v2v, 0.0)
