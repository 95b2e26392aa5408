"""Domain types plus the communication and computation cost formulas.

Everything is strict SI: bits, Hz, seconds, Joules, metres and W/Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import DomainError

# Largest exponent fed to exp() before the transmit energy is declared an
# overflow.
MAX_EXPONENT = 700.0


class Role(str, Enum):
    NV = "NV"
    IV = "IV"
    HV = "HV"


@dataclass(frozen=True)
class Vehicle:
    id: int
    position: tuple[float, float]
    velocity: float
    max_cpu: float
    kappa: float
    weight: float = 1.0
    role: Role = Role.IV

    def __post_init__(self):
        if not self.max_cpu > 0:
            raise DomainError(f"vehicle {self.id}: max_cpu must be > 0")
        if not self.kappa > 0:
            raise DomainError(f"vehicle {self.id}: kappa must be > 0")
        if self.weight < 0 or self.velocity < 0:
            raise DomainError(f"vehicle {self.id}: weight and velocity must be >= 0")

    @property
    def x(self) -> float:
        return self.position[0]

    def with_role(self, role: Role) -> "Vehicle":
        return replace(self, role=role)


@dataclass(frozen=True)
class Subtask:
    workload: float
    output_size: float


@dataclass(frozen=True)
class SequentialTask:
    """A chain of subtasks; subtask ``m`` consumes the output of ``m - 1``.

    Subtasks are 1-indexed in the public helpers.  ``data_in(m)`` is the size
    of the data entering subtask ``m``, with ``data_in(1) == input_size``; the
    output of the last subtask is the result and is never transmitted.
    """

    owner: int
    input_size: float
    subtasks: tuple[Subtask, ...]
    deadline: float

    def __post_init__(self):
        if not self.subtasks:
            raise DomainError(f"task of {self.owner}: needs at least one subtask")
        if any(s.workload <= 0 for s in self.subtasks):
            raise DomainError(f"task of {self.owner}: workloads must be > 0")
        if self.input_size < 0 or any(s.output_size < 0 for s in self.subtasks):
            raise DomainError(f"task of {self.owner}: data sizes must be >= 0")
        if not self.deadline > 0:
            raise DomainError(f"task of {self.owner}: deadline must be > 0")

    @property
    def size(self) -> int:
        return len(self.subtasks)

    @property
    def workloads(self) -> list[float]:
        return [s.workload for s in self.subtasks]

    @property
    def total_workload(self) -> float:
        return math.fsum(self.workloads)

    def data_in(self, m: int) -> float:
        if not 1 <= m <= self.size:
            raise IndexError(f"subtask index {m} out of 1..{self.size}")
        return self.input_size if m == 1 else self.subtasks[m - 2].output_size

    def with_deadline(self, deadline: float) -> "SequentialTask":
        return replace(self, deadline=deadline)

    @classmethod
    def from_lists(cls, owner, input_size, workloads, output_sizes, deadline):
        subtasks = tuple(Subtask(float(c), float(w)) for c, w in zip(workloads, output_sizes))
        return cls(owner, float(input_size), subtasks, float(deadline))


@dataclass(frozen=True)
class Rsu:
    id: int
    position: tuple[float, float]
    height: float
    service_range: float
    max_cpu: float
    kappa: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.max_cpu > 0 or not self.service_range > 0 or self.height < 0:
            raise DomainError(f"rsu {self.id}: invalid capacity/range/height")

    @property
    def range_start(self) -> float:
        return self.position[0] - 0.5 * self.service_range


@dataclass(frozen=True)
class ChannelParams:
    b_v2v: float = 10e6
    b_total: float = 100e6
    b0: float = 1e6
    num_subchannels: int = 100
    noise_density: float = 1e-14
    v2i_pathloss_exponent: float = 3.0
    fading: dict = field(default_factory=dict)
    wired_energy_per_bit: float = 1e-5
    wired_delay_per_bit: float = 1e-8
    d_v2v_max: float = 70.0
    setup_delay: float = 1e-4
    tau_max: float | None = None

    def __post_init__(self):
        positive = (self.b_v2v, self.b_total, self.b0, self.num_subchannels,
                    self.noise_density, self.v2i_pathloss_exponent,
                    self.d_v2v_max)
        if any(not v > 0 for v in positive):
            raise DomainError("channel parameters must be positive")
        if self.wired_energy_per_bit < 0 or self.wired_delay_per_bit < 0 or self.setup_delay < 0:
            raise DomainError("wired costs and setup delay must be >= 0")
        if not math.isclose(self.b0 * self.num_subchannels, self.b_total, rel_tol=1e-12):
            raise DomainError(
                f"b0 * num_subchannels = {self.b0 * self.num_subchannels} != b_total = {self.b_total}")
        if any(not g > 0 for g in self.fading.values()):
            raise DomainError("fading gains must be > 0")
        if self.tau_max is not None and not self.tau_max > 0:
            raise DomainError("tau_max must be > 0")

    def with_bandwidth(self, b_total: float | None = None, b0: float | None = None) -> "ChannelParams":
        """Copy with a new total bandwidth and/or subchannel width."""
        b_total = self.b_total if b_total is None else b_total
        b0 = self.b0 if b0 is None else b0
        count = round(b_total / b0)
        if not math.isclose(count * b0, b_total, rel_tol=1e-12):
            raise DomainError(f"b_total={b_total} is not a multiple of b0={b0}")
        return replace(self, b_total=b_total, b0=b0, num_subchannels=count)

    def v2v_fading(self, nv_id, hv_id) -> float:
        return self.fading.get(("v2v", nv_id, hv_id), 1.0)

    def v2i_fading(self, nv_id, rsu_id) -> float:
        return self.fading.get(("v2i", nv_id, rsu_id), 1.0)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    residual: float = 0.0
    detail: str = ""


@dataclass
class ConstraintReport:
    checks: list[ConstraintCheck] = field(default_factory=list)

    def add(self, name, passed, residual=0.0, detail=""):
        self.checks.append(ConstraintCheck(name, bool(passed), float(residual), detail))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> list[ConstraintCheck]:
        return [c for c in self.checks if c.name == name]


def distance(a: tuple[float, float], b: tuple[float, float], height: float = 0.0) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + height ** 2)


def v2v_pathloss_db(dist: float) -> float:
    if not dist > 0:
        raise DomainError(f"V2V distance must be > 0, got {dist}")
    return 63.3 + 17.7 * math.log10(dist)


def v2v_gain(dist: float, fading: float = 1.0) -> float:
    """Linear V2V gain ``10^(-phi/10) * h`` with ``phi = 63.3 + 17.7 log10(d)``."""
    return 10.0 ** (-v2v_pathloss_db(dist) / 10.0) * fading


def v2i_gain(dist: float, delta: float, fading: float = 1.0) -> float:
    """Linear V2I gain ``d^-delta * h``; ``dist`` is the 3-D NV-RSU distance."""
    if not dist > 0:
        raise DomainError(f"V2I distance must be > 0, got {dist}")
    return dist ** (-delta) * fading


def transmit_energy(bits: float, tau: float, bandwidth: float, gain: float, noise: float) -> float:
    """Energy to push ``bits`` through an AWGN link in ``tau`` seconds.

    Inverts the Shannon rate: ``E = (Bw N0 tau / g) (exp(bits / (tau Bw)) - 1)``.
    """
    if bits < 0:
        raise DomainError("bits must be >= 0")
    if bits == 0:
        return 0.0
    if not (tau > 0 and bandwidth > 0 and gain > 0 and noise > 0):
        raise DomainError("tau, bandwidth, gain and noise must be > 0")
    exponent = bits / (tau * bandwidth)
    if exponent > MAX_EXPONENT:
        raise OverflowError(f"transmit exponent {exponent:g} exceeds {MAX_EXPONENT}")
    return bandwidth * noise * tau / gain * math.expm1(exponent)


def wired_transfer(bits: float, params: ChannelParams) -> tuple[float, float]:
    """(energy, delay) to forward ``bits`` over one RSU-to-RSU wired hop."""
    if bits < 0:
        raise DomainError("bits must be >= 0")
    return params.wired_energy_per_bit * bits, params.wired_delay_per_bit * bits


def compute_delay(workload: float, freq: float) -> float:
    if not freq > 0:
        raise DomainError(f"frequency must be > 0, got {freq}")
    return workload / freq


def compute_energy(kappa: float, workload: float, freq: float) -> float:
    if not freq > 0:
        raise DomainError(f"frequency must be > 0, got {freq}")
    return kappa * workload * freq * freq
