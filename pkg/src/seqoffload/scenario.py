"""Seeded generation of vehicles, tasks and RSUs.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=(stream,))``, one independent stream per entity kind (see
``STREAMS``), so changing how many tasks are drawn never shifts vehicle
positions and vice versa.  Within a stream, entities are drawn one after
another with all of their attributes, so asking for more NVs only appends.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import DomainError
from .model import Role, Rsu, SequentialTask, Subtask, Vehicle

KMH = 1.0 / 3.6

STREAMS = {
    "vehicles": 0,
    "tasks": 1,
    "rsus": 2,
    "fading": 3,
    "policy": 4,
    "nvs": 5,
}


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, name, *extra)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name], *extra))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    lanes: int = 3
    lane_width: float = 3.75
    road_length: float = 200.0
    vehicle_density: float = 0.02
    speed_range: tuple[float, float] = (40 * KMH, 120 * KMH)
    nv_fraction: float = 0.5
    nv_count: int | None = None
    vehicle_cpu_range: tuple[float, float] = (1e9, 10e9)
    vehicle_kappa_range: tuple[float, float] = (1e-23, 2e-23)
    rsu_count: int = 2
    rsu_spacing: float = 200.0
    rsu_height: float = 10.0
    rsu_cpu_range: tuple[float, float] = (60e9, 120e9)
    rsu_kappa_range: tuple[float, float] = (1e-23, 2e-23)
    subtask_count: int = 8
    data_range: tuple[float, float] = (1e6, 20e6)
    workload_range: tuple[float, float] = (1e6, 1000e6)
    deadline: float = 0.2
    weight: float = 1.0
    fading: str = "none"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith("_range"):
                lo, hi = v
                if not (0 < lo <= hi):
                    raise DomainError(f"{f.name} must satisfy 0 < lo <= hi, got {v}")
        if self.lanes < 1 or self.subtask_count < 1 or self.rsu_count < 1:
            raise DomainError("lanes, subtask_count and rsu_count must be >= 1")
        if self.vehicle_density < 0:
            raise DomainError("vehicle_density must be >= 0")
        if not 0 <= self.nv_fraction <= 1:
            raise DomainError("nv_fraction must lie in [0, 1]")
        if self.nv_count is not None and self.nv_count < 0:
            raise DomainError("nv_count must be >= 0")
        positive = (self.lane_width, self.road_length, self.rsu_spacing, self.deadline)
        if any(not v > 0 for v in positive) or self.rsu_height < 0 or self.weight < 0:
            raise DomainError("geometry, deadline and weight must be positive")
        if self.fading not in ("none", "exponential"):
            raise DomainError(f"unknown fading model {self.fading!r}")

    def lane_centers(self) -> list[float]:
        return [(k + 0.5) * self.lane_width for k in range(self.lanes)]

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass
class Scenario:
    config: ScenarioConfig
    vehicles: list[Vehicle]
    tasks: dict[int, SequentialTask]
    rsus: list[Rsu]
    fading: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.vehicles, self.tasks, self.rsus))

    @property
    def nvs(self) -> list[Vehicle]:
        return [v for v in self.vehicles if v.role is Role.NV]

    @property
    def ivs(self) -> list[Vehicle]:
        return [v for v in self.vehicles if v.role is not Role.NV]


def _vehicle(rng, cfg: ScenarioConfig, vid: int, role: Role, lane: int, x: float) -> Vehicle:
    speed = rng.uniform(*cfg.speed_range)
    cpu = rng.uniform(*cfg.vehicle_cpu_range)
    kappa = rng.uniform(*cfg.vehicle_kappa_range)
    y = cfg.lane_centers()[lane]
    return Vehicle(vid, (float(x), float(y)), float(speed), float(cpu), float(kappa),
                   cfg.weight, role)


def _draw_vehicles(cfg: ScenarioConfig) -> list[Vehicle]:
    out = []
    if cfg.nv_count is not None:
        rng = stream(cfg.seed, "nvs")
        for k in range(cfg.nv_count):
            lane = int(rng.integers(cfg.lanes))
            x = rng.uniform(0.0, cfg.road_length)
            out.append(_vehicle(rng, cfg, k + 1, Role.NV, lane, x))
    rng = stream(cfg.seed, "vehicles")
    mean = cfg.vehicle_density * cfg.road_length
    for lane in range(cfg.lanes):
        count = int(rng.poisson(mean)) if mean > 0 else 0
        for _ in range(count):
            x = rng.uniform(0.0, cfg.road_length)
            is_nv = rng.uniform() < cfg.nv_fraction
            role = Role.NV if is_nv and cfg.nv_count is None else Role.IV
            vid = len(out) + 1
            out.append(_vehicle(rng, cfg, vid, role, lane, x))
    return out


def draw_task(rng, cfg: ScenarioConfig, owner: int) -> SequentialTask:
    input_size = rng.uniform(*cfg.data_range)
    workloads, outputs = [], []
    for _ in range(cfg.subtask_count):
        workloads.append(rng.uniform(*cfg.workload_range))
        outputs.append(rng.uniform(*cfg.data_range))
    return SequentialTask.from_lists(owner, input_size, workloads, outputs, cfg.deadline)


def _draw_rsus(cfg: ScenarioConfig) -> list[Rsu]:
    rng = stream(cfg.seed, "rsus")
    out = []
    for r in range(cfg.rsu_count):
        cpu = rng.uniform(*cfg.rsu_cpu_range)
        kappa = rng.uniform(*cfg.rsu_kappa_range)
        out.append(Rsu(r + 1, ((r + 0.5) * cfg.rsu_spacing, 0.0), cfg.rsu_height,
                       cfg.rsu_spacing, float(cpu), float(kappa), cfg.weight))
    return out


def draw_fading(cfg: ScenarioConfig, vehicles: list[Vehicle], rsus: list[Rsu]) -> dict:
    """Unit-mean exponential power gains per link, fixed for the whole solve."""
    if cfg.fading == "none":
        return {}
    rng = stream(cfg.seed, "fading")
    nvs = [v for v in vehicles if v.role is Role.NV]
    others = [v for v in vehicles if v.role is not Role.NV]
    out = {}
    for nv in nvs:
        for iv in others:
            out[("v2v", nv.id, iv.id)] = float(rng.exponential(1.0))
            out[("v2v", iv.id, nv.id)] = out[("v2v", nv.id, iv.id)]
        out[("v2i", nv.id, rsus[0].id)] = float(rng.exponential(1.0))
    return out


def generate(cfg: ScenarioConfig) -> Scenario:
    """Vehicles, one task per NV, and RSUs for ``cfg``; deterministic in ``cfg.seed``."""
    vehicles = _draw_vehicles(cfg)
    rng = stream(cfg.seed, "tasks")
    tasks = {v.id: draw_task(rng, cfg, v.id) for v in vehicles if v.role is Role.NV}
    rsus = _draw_rsus(cfg)
    return Scenario(cfg, vehicles, tasks, rsus, draw_fading(cfg, vehicles, rsus))


def resplit(task: SequentialTask, count: int) -> SequentialTask:
    """Evenly refine ``task`` into ``count`` subtasks with the same totals.

    ``count`` must be a multiple of ``task.size``.  Each subtask becomes
    ``count / size`` pieces; workloads and the data entering each piece are
    divided evenly, so total workload and total per-subtask input data are
    conserved.
    """
    if count % task.size:
        raise DomainError(f"{count} subtasks is not a refinement of {task.size}")
    j = count // task.size
    ins = [task.data_in(m) / j for m in range(1, task.size + 1)]
    pieces = []
    for k, sub in enumerate(task.subtasks):
        for i in range(j):
            if i < j - 1:
                out = ins[k]
            elif k + 1 < task.size:
                out = ins[k + 1]
            else:
                out = sub.output_size / j
            pieces.append(Subtask(sub.workload / j, out))
    return SequentialTask(task.owner, ins[0], tuple(pieces), task.deadline)


def to_dict(sc: Scenario) -> dict:
    """JSON-ready snapshot of a scenario."""
    return {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(sc.config).items()},
        "vehicles": [{**asdict(v), "position": list(v.position), "role": v.role.value}
                     for v in sc.vehicles],
        "tasks": {str(k): {"owner": t.owner, "input_size": t.input_size,
                           "deadline": t.deadline,
                           "workloads": t.workloads,
                           "output_sizes": [s.output_size for s in t.subtasks]}
                  for k, t in sc.tasks.items()},
        "rsus": [{**asdict(r), "position": list(r.position)} for r in sc.rsus],
        "fading": [[list(k), g] for k, g in sc.fading.items()],
    }


def from_dict(data: dict) -> Scenario:
    cfg_raw = dict(data["config"])
    for k, v in cfg_raw.items():
        if isinstance(v, list):
            cfg_raw[k] = tuple(v)
    cfg = ScenarioConfig(**cfg_raw)
    vehicles = [Vehicle(d["id"], tuple(d["position"]), d["velocity"], d["max_cpu"],
                        d["kappa"], d["weight"], Role(d["role"])) for d in data["vehicles"]]
    tasks = {int(k): SequentialTask.from_lists(t["owner"], t["input_size"], t["workloads"],
                                               t["output_sizes"], t["deadline"])
             for k, t in data["tasks"].items()}
    rsus = [Rsu(d["id"], tuple(d["position"]), d["height"], d["service_range"],
                d["max_cpu"], d["kappa"], d["weight"]) for d in data["rsus"]]
    fading = {tuple(k): g for k, g in data.get("fading", [])}
    return Scenario(cfg, vehicles, tasks, rsus, fading)


def expected_vehicle_count(cfg: ScenarioConfig) -> float:
    return cfg.lanes * cfg.vehicle_density * cfg.road_length


def poisson_sigma(cfg: ScenarioConfig) -> float:
    return math.sqrt(expected_vehicle_count(cfg))
