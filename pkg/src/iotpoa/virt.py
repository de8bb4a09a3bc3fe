"""Validator compute model: physical machines split into virtual machines.

Weight of a (PM, VM) candidate is ``exp(u - t_upper) * s_vm / S_PM`` where u
is the PM's utilization and S_PM its unallocated cores. Lower is better.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from iotpoa.cluster import NodeEnergy

# Table 2 hardware
PM_CORES = 4.0
PM_MEM_GB = 8.0
VM_CORES = 1.0
VM_MEM_GB = 1.7

WORK_ALPHA = 1000.0      # units per task
WORK_BETA = 10.0         # units per byte
PER_CORE_RATE = 1e6      # units per second per core

BUSY_POWER_W = 0.8
IDLE_POWER_W = 0.1

_EPS = 1e-12


class NoRemainingCpu(Exception):
    pass


@dataclass
class ValidationTask:
    task_id: str
    tx_ref: str | None
    cpu_demand_cores: float
    mem_demand_gb: float
    work_units: float
    kind: str = "validate"          # validate | propose | verify
    payload: object = None

    def __post_init__(self):
        if min(self.cpu_demand_cores, self.mem_demand_gb, self.work_units) <= 0:
            raise ValueError(f"task {self.task_id}: all demands must be > 0")


@dataclass
class VirtualMachine:
    vm_id: int
    host_pm: int
    s_vm: float = VM_CORES
    mem_gb: float = VM_MEM_GB
    busy_until: float = 0.0
    cpu_committed: float = 0.0
    running: dict[str, ValidationTask] = field(default_factory=dict)
    task_queue: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.s_vm <= 0:
            raise ValueError("s_vm must be > 0")

    @property
    def cpu_free(self) -> float:
        return self.s_vm - self.cpu_committed


@dataclass
class PhysicalMachine:
    pm_id: int
    total_cores: float = PM_CORES
    total_mem_gb: float = PM_MEM_GB
    t_upper: float = 0.8
    vms: list[VirtualMachine] = field(default_factory=list)
    cpu_alloc: float = 0.0
    mem_alloc: float = 0.0
    busy_power_w: float = BUSY_POWER_W
    idle_power_w: float = IDLE_POWER_W
    cpu_weight: float = 0.5
    energy: NodeEnergy = field(default_factory=lambda: NodeEnergy(10.0))

    @classmethod
    def with_vms(cls, pm_id: int, n_vms: int = 4, s_vm: float = VM_CORES,
                 vm_mem_gb: float = VM_MEM_GB, **kw) -> "PhysicalMachine":
        pm = cls(pm_id, **kw)
        pm.vms = [VirtualMachine(i, pm_id, s_vm, vm_mem_gb) for i in range(n_vms)]
        if sum(v.s_vm for v in pm.vms) > pm.total_cores + _EPS:
            raise ValueError(f"PM {pm_id}: VM cores exceed physical cores")
        return pm

    @property
    def s_pm(self) -> float:
        """Unallocated cores."""
        return self.total_cores - self.cpu_alloc

    @property
    def mem_free(self) -> float:
        return self.total_mem_gb - self.mem_alloc


def utilization(pm: PhysicalMachine) -> float:
    w = pm.cpu_weight
    u = w * (pm.cpu_alloc / pm.total_cores) + (1.0 - w) * (pm.mem_alloc / pm.total_mem_gb)
    return min(1.0, max(0.0, u))


def ib_score(u: float, t_upper: float) -> float:
    return math.exp(u - t_upper)


def load_fraction(vm: VirtualMachine, pm: PhysicalMachine) -> float:
    s_pm = pm.s_pm
    if s_pm <= _EPS:
        raise NoRemainingCpu(f"PM {pm.pm_id} has no remaining CPU")
    return vm.s_vm / s_pm


def attractiveness(pm: PhysicalMachine, vm: VirtualMachine) -> float:
    return ib_score(utilization(pm), pm.t_upper) * load_fraction(vm, pm)


def admits(vm: VirtualMachine, pm: PhysicalMachine, task: ValidationTask) -> bool:
    return (vm.cpu_free + _EPS >= task.cpu_demand_cores
            and pm.mem_free + _EPS >= task.mem_demand_gb)


def admit_task(vm: VirtualMachine, pm: PhysicalMachine, task: ValidationTask) -> bool:
    """Commit the task's resources if they fit. Returns whether it was accepted."""
    if not admits(vm, pm, task):
        return False
    vm.cpu_committed += task.cpu_demand_cores
    pm.cpu_alloc += task.cpu_demand_cores
    pm.mem_alloc += task.mem_demand_gb
    vm.running[task.task_id] = task
    return True


def release_task(vm: VirtualMachine, pm: PhysicalMachine, task: ValidationTask) -> None:
    del vm.running[task.task_id]
    vm.cpu_committed -= task.cpu_demand_cores
    pm.cpu_alloc -= task.cpu_demand_cores
    pm.mem_alloc -= task.mem_demand_gb
    # snap accumulated rounding back to exact zero
    if not vm.running:
        vm.cpu_committed = 0.0
    if not any(v.running for v in pm.vms):
        pm.cpu_alloc = 0.0
        pm.mem_alloc = 0.0


def work_units(size_bytes: int, alpha: float = WORK_ALPHA, beta: float = WORK_BETA) -> float:
    return alpha + beta * size_bytes


def service_time(task: ValidationTask, vm: VirtualMachine,
                 per_core_rate: float = PER_CORE_RATE) -> float:
    return task.work_units / (vm.s_vm * per_core_rate)


def overload_factor(u: float, t_upper: float, penalty: float) -> float:
    """Slowdown multiplier for work started on a PM above its productivity threshold.

    1 at or below t_upper, rising linearly to 1 + penalty at full utilization.
    """
    if penalty <= 0 or u <= t_upper or t_upper >= 1.0:
        return 1.0
    return 1.0 + penalty * (u - t_upper) / (1.0 - t_upper)


def compute_energy(pm: PhysicalMachine, busy_s: float, idle_s: float,
                   now: float | None = None, cause: str = "compute") -> float:
    """Energy for a busy/idle split; debited to the PM when `now` is given."""
    if busy_s < 0 or idle_s < 0:
        raise ValueError("durations must be >= 0")
    joules = pm.busy_power_w * busy_s + pm.idle_power_w * idle_s
    if now is not None:
        pm.energy.debit(now, joules, cause)
    return joules
