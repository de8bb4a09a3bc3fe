"""PoA rounds with turn-based and weight-based placement of validation work."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from iotpoa import ledger
from iotpoa.ledger import Block, Chain, Transaction
from iotpoa.virt import (
    PhysicalMachine,
    ValidationTask,
    VirtualMachine,
    admit_task,
    admits,
    attractiveness,
)

TBS = "tbs"
WBS = "wbs"
POLICIES = (TBS, WBS)

MODE_TBS = "tbs"
MODE_FALLBACK = "wbs-fallback"
MODE_QUEUED = "queued"

COMMIT_THRESHOLD = 0.51


class NoValidators(Exception):
    pass


class NoCapacity(Exception):
    pass


@dataclass
class Validator:
    validator_id: str
    pm: PhysicalMachine
    local_chain: Chain = field(default_factory=Chain)
    mempool: dict[str, Transaction] = field(default_factory=dict)
    active: bool = True

    def vm_by_id(self, vm_id: int) -> VirtualMachine:
        return self.pm.vms[vm_id]


@dataclass
class ConsensusState:
    validators: list[Validator]
    policy: str = WBS
    round_length_s: float = 5.0
    rr_cursor: int = 0
    proposer_cursor: int = 0
    pending_queue: deque = field(default_factory=deque)
    rotation: list[tuple[int, int]] = field(init=False)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown selection policy {self.policy!r}")
        self.validators = sorted(self.validators, key=lambda v: v.pm.pm_id)
        self._by_pm = {v.pm.pm_id: v for v in self.validators}
        self.rotation = [(v.pm.pm_id, vm.vm_id)
                         for v in self.validators for vm in v.pm.vms]

    def validator_for_pm(self, pm_id: int) -> Validator:
        return self._by_pm[pm_id]

    def active(self) -> list[Validator]:
        return [v for v in self.validators if v.active]


@dataclass
class Selection:
    """Outcome of one placement decision, kept for the trace."""
    mode: str
    pm: PhysicalMachine | None
    vm: VirtualMachine | None
    tbs_pm: int
    tbs_vm: int
    tbs_admitted: bool
    weights: list[tuple[float, int, int]] | None = None


def tbs_next(state: ConsensusState) -> tuple[PhysicalMachine, VirtualMachine]:
    """Next VM in (pm_id, vm_id) rotation, skipping inactive validators."""
    n = len(state.rotation)
    for step in range(n):
        pos = (state.rr_cursor + step) % n
        pm_id, vm_id = state.rotation[pos]
        val = state.validator_for_pm(pm_id)
        if val.active:
            state.rr_cursor = (pos + 1) % n
            return val.pm, val.vm_by_id(vm_id)
    raise NoValidators("no active validator in rotation")


def wbs_weights(state: ConsensusState,
                task: ValidationTask) -> list[tuple[float, int, int]]:
    """Weights of every admissible candidate; PMs with no spare CPU are skipped."""
    out = []
    for val in state.validators:
        if not val.active:
            continue
        pm = val.pm
        if pm.s_pm <= 1e-12:
            continue
        for vm in pm.vms:
            if admits(vm, pm, task):
                out.append((attractiveness(pm, vm), pm.pm_id, vm.vm_id))
    return out


def wbs_select(state: ConsensusState,
               task: ValidationTask) -> tuple[PhysicalMachine, VirtualMachine]:
    if not state.active():
        raise NoValidators("no active validator")
    weights = wbs_weights(state, task)
    if not weights:
        raise NoCapacity("every PM skipped or no VM admits the task")
    _, pm_id, vm_id = min(weights)
    val = state.validator_for_pm(pm_id)
    return val.pm, val.vm_by_id(vm_id)


def _place(state: ConsensusState, task: ValidationTask) -> Selection:
    """Run the two-step procedure without queueing; commits resources on success."""
    pm, vm = tbs_next(state)
    if admit_task(vm, pm, task):
        return Selection(MODE_TBS, pm, vm, pm.pm_id, vm.vm_id, True)
    sel = Selection(MODE_QUEUED, None, None, pm.pm_id, vm.vm_id, False)
    if state.policy == TBS:
        sel.pm, sel.vm = pm, vm
        return sel
    weights = wbs_weights(state, task)
    sel.weights = weights
    if weights:
        _, pm_id, vm_id = min(weights)
        val = state.validator_for_pm(pm_id)
        best_pm, best_vm = val.pm, val.vm_by_id(vm_id)
        admit_task(best_vm, best_pm, task)
        sel.mode, sel.pm, sel.vm = MODE_FALLBACK, best_pm, best_vm
    return sel


def select_validator(state: ConsensusState, task: ValidationTask) -> Selection:
    """Place a validation task.

    Takes the next VM in turn; if it cannot hold the task, the WBS policy picks
    the minimum-weight admissible VM instead. A task nobody can take waits on
    the shared pending queue (WBS) or on the turn-chosen VM's own queue (TBS).
    """
    sel = _place(state, task)
    if sel.mode == MODE_QUEUED:
        if state.policy == TBS:
            sel.vm.task_queue.append(task)
        else:
            state.pending_queue.append(task)
    return sel


def retry_pending(state: ConsensusState) -> list[tuple[ValidationTask, Selection]]:
    """Start pending tasks in FIFO order until the head one still does not fit."""
    started = []
    while state.pending_queue and state.active():
        task = state.pending_queue[0]
        sel = _place(state, task)
        if sel.mode == MODE_QUEUED:
            break
        state.pending_queue.popleft()
        started.append((task, sel))
    return started


def least_loaded_vm(validator: Validator) -> VirtualMachine:
    return min(validator.pm.vms, key=lambda vm: (-vm.cpu_free, len(vm.task_queue), vm.vm_id))


def place_local(validator: Validator, task: ValidationTask) -> VirtualMachine | None:
    """Consensus work for a validator's own role; jumps its VM queue if it must wait.

    Returns the VM when the task started, None when it was queued.
    """
    vm = least_loaded_vm(validator)
    if admit_task(vm, validator.pm, task):
        return vm
    vm.task_queue.appendleft(task)
    return None


def drain_vm_queue(vm: VirtualMachine, pm: PhysicalMachine) -> list[ValidationTask]:
    started = []
    while vm.task_queue and admit_task(vm, pm, vm.task_queue[0]):
        started.append(vm.task_queue.popleft())
    return started


def proposer_next(state: ConsensusState) -> Validator:
    n = len(state.validators)
    for step in range(n):
        pos = (state.proposer_cursor + step) % n
        val = state.validators[pos]
        if val.active:
            state.proposer_cursor = (pos + 1) % n
            return val
    raise NoValidators("no active validator to propose")


def propose_block(validator: Validator, now: float, max_txs: int) -> Block | None:
    if not validator.mempool:
        return None
    ids = list(validator.mempool)[:max_txs]
    txs = [validator.mempool.pop(i) for i in ids]
    tip = validator.local_chain.tip
    return Block.build(tip.index + 1, now, txs, tip.block_hash, validator.validator_id)


def verify_block(validator: Validator, block: Block) -> bool:
    try:
        ledger.check_next(validator.local_chain.tip, block)
    except ledger.LedgerError:
        return False
    return True


def add_to_mempools(validators: Iterable[Validator], tx: Transaction) -> None:
    for v in validators:
        if v.active:
            v.mempool[tx.tx_id] = tx


def commit_block(state: ConsensusState, block: Block, votes: dict[str, bool],
                 electorate: Iterable[str] | None = None) -> bool:
    """Apply the block everywhere if strictly more than 51% of voters approve.

    Voters are the active validators, or those of `electorate` still active
    when the round opened before a validator rejoined. The proposer approves
    implicitly. On rejection the block's transactions go back to the front of
    the proposer's mempool.
    """
    active = state.active()
    if not active:
        return False
    voters = active
    if electorate is not None:
        allowed = set(electorate)
        voters = [v for v in active if v.validator_id in allowed]
    approvals = sum(1 for v in voters
                    if v.validator_id == block.proposer or votes.get(v.validator_id, False))
    committed = bool(voters) and approvals / len(voters) > COMMIT_THRESHOLD
    if committed:
        ids = {tx.tx_id for tx in block.transactions}
        for v in active:
            ledger.append_block(v.local_chain, block)
            for i in ids:
                v.mempool.pop(i, None)
    else:
        proposer = next((v for v in state.validators if v.validator_id == block.proposer), None)
        if proposer is not None:
            returned = {tx.tx_id: tx for tx in block.transactions}
            returned.update(proposer.mempool)
            proposer.mempool = returned
    return committed


def resync(validator: Validator, source: Validator) -> None:
    """Bring a returning validator's chain and mempool in line with an active peer."""
    mine = validator.local_chain
    for blk in source.local_chain.blocks[len(mine):]:
        ledger.append_block(mine, blk)
    done = mine.tx_ids()
    for tx_id in [t for t in validator.mempool if t in done]:
        del validator.mempool[tx_id]
    for tx_id, tx in source.mempool.items():
        validator.mempool.setdefault(tx_id, tx)
