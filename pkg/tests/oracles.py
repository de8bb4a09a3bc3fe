"""Independent reference computations shared by the test modules."""

import math
import random

from iotpoa import ledger
from iotpoa.consensus import ConsensusState, Validator
from iotpoa.ledger import Block, Transaction
from iotpoa.virt import PhysicalMachine, ValidationTask, admit_task


def brute_force_wbs(state: ConsensusState, task: ValidationTask):
    """Exhaustive argmin of exp(u - t_upper) * s_vm / S_PM.

    Allocations are re-derived from the running tasks rather than read from the
    PM's counters. Ties go to the lowest (pm_id, vm_id). Returns None when no
    candidate exists.
    """
    best = None
    for val in state.validators:
        if not val.active:
            continue
        pm = val.pm
        cpu = sum(t.cpu_demand_cores for vm in pm.vms for t in vm.running.values())
        mem = sum(t.mem_demand_gb for vm in pm.vms for t in vm.running.values())
        remaining = pm.total_cores - cpu
        if remaining <= 1e-12:
            continue
        w = pm.cpu_weight
        u = min(1.0, max(0.0, w * (cpu / pm.total_cores) + (1 - w) * (mem / pm.total_mem_gb)))
        for vm in pm.vms:
            used = sum(t.cpu_demand_cores for t in vm.running.values())
            if vm.s_vm - used + 1e-12 < task.cpu_demand_cores:
                continue
            if pm.total_mem_gb - mem + 1e-12 < task.mem_demand_gb:
                continue
            key = (math.exp(u - pm.t_upper) * vm.s_vm / remaining, pm.pm_id, vm.vm_id)
            if best is None or key < best:
                best = key
    return None if best is None else best[1:]


def random_fleet(rng: random.Random, max_pms: int = 8, max_vms: int = 4):
    """A random fleet with allocations on a coarse grid so ties actually happen."""
    n_pm = rng.randint(1, max_pms)
    t_upper = rng.choice([0.5, 0.8, 0.9, rng.random()])
    vals = []
    k = 0
    for p in range(n_pm):
        n_vm = rng.randint(1, max_vms)
        pm = PhysicalMachine.with_vms(p, n_vm, s_vm=4.0 / max_vms, t_upper=t_upper,
                                      cpu_weight=rng.choice([0.5, 0.5, rng.random()]))
        for vm in pm.vms:
            for _ in range(rng.randint(0, 3)):
                t = ValidationTask(f"f{k}", None, rng.choice([0.25, 0.5, 1.0]),
                                   rng.choice([0.5, 0.85, 1.7]), 1.0)
                k += 1
                admit_task(vm, pm, t)
        vals.append(Validator(f"v{p}", pm, active=rng.random() > 0.15))
    state = ConsensusState(vals, policy="wbs")
    task = ValidationTask("probe", None, rng.choice([0.25, 0.5, 1.0]),
                          rng.choice([0.5, 0.85, 1.7]), 1.0)
    return state, task


def replay_fallbacks(trace, vm_cores: float, pm_mem_gb: float) -> tuple[int, list[str]]:
    """Rebuild VM/PM allocations from task_start/task_done records and check that
    every wbs-fallback happened while the turn candidate could not take the task.

    Returns (number of fallbacks checked, problems).
    """
    vm_cpu: dict[tuple[int, int], float] = {}
    pm_mem: dict[int, float] = {}
    live: dict[str, tuple[int, int, float, float]] = {}
    pending_fallback: list[dict] = []
    checked, problems = 0, []

    def release(task_id):
        pm, vm, cpu, mem = live.pop(task_id)
        vm_cpu[(pm, vm)] -= cpu
        pm_mem[pm] -= mem

    for r in trace:
        kind = r["kind"]
        if kind == "task_start":
            # a fallback is judged against the state just before its own admission
            for sel in pending_fallback:
                if sel["task"] == r["task"]:
                    cpu, mem = r["cpu"], r["mem"]
                    key = (sel["tbs_pm"], sel["tbs_vm"])
                    vm_free = vm_cores - vm_cpu.get(key, 0.0)
                    pm_free = pm_mem_gb - pm_mem.get(sel["tbs_pm"], 0.0)
                    if vm_free + 1e-9 >= cpu and pm_free + 1e-9 >= mem:
                        problems.append(f"task {sel['task']} at t={sel['t']}: turn candidate "
                                        f"{key} had room ({vm_free:.3f} cores, {pm_free:.3f} GB)")
                    checked += 1
            pending_fallback = [s for s in pending_fallback if s["task"] != r["task"]]
            key = (r["pm"], r["vm"])
            live[r["task"]] = (r["pm"], r["vm"], r["cpu"], r["mem"])
            vm_cpu[key] = vm_cpu.get(key, 0.0) + r["cpu"]
            pm_mem[r["pm"]] = pm_mem.get(r["pm"], 0.0) + r["mem"]
        elif kind == "task_done":
            release(r["task"])
        elif kind == "select" and r["mode"] == "wbs-fallback":
            pending_fallback.append(r)
        elif (kind == "node_dead" and r.get("cls") == "validator") or \
                (kind == "downtime" and not r["active"]):
            pm = int(r["node"][1:])
            for task_id in [t for t, v in live.items() if v[0] == pm]:
                release(task_id)
    if pending_fallback:
        problems.append(f"{len(pending_fallback)} fallback selections never started")
    return checked, problems


def tamper_detected(chain, block_i: int, tx_i: int, byte_i: int) -> bool:
    """Flip one byte of a stored transaction and ask validate_chain about it.

    An encoding that no longer decodes cannot be smuggled into a block, so
    that counts as detected too.
    """
    blk = chain.blocks[block_i]
    raw = bytearray(blk.transactions[tx_i].to_bytes())
    raw[byte_i] ^= 0xFF
    try:
        bad = Transaction.from_bytes(bytes(raw))
    except ValueError:
        return True
    txs = list(blk.transactions)
    txs[tx_i] = bad
    forged = Block(blk.index, blk.timestamp, blk.merkle_root, tuple(txs),
                   blk.prev_hash, blk.block_hash, blk.proposer)
    copy = chain.copy()
    copy.blocks[block_i] = forged
    return not ledger.validate_chain(copy).ok
