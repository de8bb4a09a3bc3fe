"""Discrete-event engine tying the sensor network to the validator network.

One ``Simulation`` owns every piece of mutable state for a single run. Events
are dispatched in (time, seq) order, and seq is assigned at schedule time, so
two runs of the same scenario produce byte-identical traces.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from iotpoa import cluster, consensus, virt
from iotpoa.cluster import ClusterHead, NodeEnergy, SensorNode, SensingPacket
from iotpoa.config import ScenarioConfig
from iotpoa.consensus import ConsensusState, Validator
from iotpoa.ledger import Block, Transaction
from iotpoa.virt import PhysicalMachine, ValidationTask, VirtualMachine

log = logging.getLogger(__name__)

EVENT_KINDS = (
    "Sense", "PacketArrive", "Disseminate", "TxArriveAtConsensus", "RoundStart",
    "TaskComplete", "BlockArrive", "VoteArrive", "CommitApplied", "DowntimeToggle",
)

BLOCK_HEADER_BYTES = 8 + 8 + 32 + 32 + 32


def link_delay(nbytes: float, bandwidth_bps: float, propagation_s: float) -> float:
    if bandwidth_bps <= 0:
        raise ValueError("bandwidth must be positive")
    return propagation_s + 8.0 * nbytes / bandwidth_bps


@dataclass(order=True)
class Event:
    time: float
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


class Trace:
    """Append-only list of records; serialized as one JSON object per line."""

    def __init__(self, records: list[dict] | None = None):
        self.records: list[dict] = records if records is not None else []

    def emit(self, t: float, kind: str, **fields) -> None:
        rec = {"t": t, "kind": kind}
        rec.update(fields)
        self.records.append(rec)

    def __iter__(self) -> Iterator[dict]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of(self, *kinds: str) -> list[dict]:
        return [r for r in self.records if r["kind"] in kinds]

    def dumps(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        records = []
        with open(path) as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{n}: not a JSON record ({exc})") from exc
        return cls(records)

    @property
    def header(self) -> dict:
        for r in self.records:
            if r["kind"] == "config":
                return r
        raise ValueError("trace has no config record")


@dataclass
class _Round:
    rid: int
    block: Block
    proposer: Validator
    work: float
    electorate: set[str] = field(default_factory=set)
    waiting: set[str] = field(default_factory=set)
    votes: dict[str, bool] = field(default_factory=dict)
    proposed: bool = False
    finalizing: bool = False


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = random.Random(cfg.run.seed)
        self.trace = Trace()
        self.queue: list[Event] = []
        self._seq = 0
        self.now = 0.0

        self.sensors: list[SensorNode] = []
        self.heads: list[ClusterHead] = []
        self.state: ConsensusState | None = None

        self.txs: dict[str, Transaction] = {}
        self.tx_status: dict[str, str] = {}
        self._tx_counter = 0
        self._task_counter = 0
        self._tokens: dict[str, int] = {}
        self._task_home: dict[str, tuple[int, int]] = {}
        self._pm_clock: dict[int, float] = {}
        self._round: _Round | None = None
        self._round_counter = 0

    # -- scheduling -----------------------------------------------------

    def schedule(self, time: float, kind: str, payload: Any = None) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        self._seq += 1
        heapq.heappush(self.queue, Event(time, self._seq, kind, payload))

    def emit(self, kind: str, **fields) -> None:
        self.trace.emit(self.now, kind, **fields)

    def delay(self, nbytes: float) -> float:
        r = self.cfg.run
        return link_delay(nbytes, r.bandwidth_bps, r.propagation_s)

    # -- setup ----------------------------------------------------------

    def _positions(self, explicit, count: int) -> list[tuple[float, float]]:
        side = self.cfg.network.area_side_m
        if explicit is not None:
            return [(float(p[0]), float(p[1])) for p in explicit]
        return [(self.rng.uniform(0, side), self.rng.uniform(0, side)) for _ in range(count)]

    def setup(self) -> None:
        cfg, net, vc = self.cfg, self.cfg.network, self.cfg.validators
        self.emit("config", seed=cfg.run.seed, policy=cfg.consensus.selection_policy,
                  fingerprint=cfg.fingerprint(), scenario=cfg.name,
                  duration_s=cfg.run.duration_s)

        head_pos = self._positions(net.head_positions, net.head_count)
        sensor_pos = self._positions(net.sensor_positions, net.sensor_count)
        self.heads = [ClusterHead(f"h{i}", p, NodeEnergy(net.head_energy_j),
                                  net.dissemination_interval_s)
                      for i, p in enumerate(head_pos)]
        self.sensors = [SensorNode(f"s{i}", p, NodeEnergy(net.sensor_energy_j),
                                   net.sensing_interval_s)
                        for i, p in enumerate(sensor_pos)]
        side = net.area_side_m
        self.sink = tuple(net.sink_position) if net.sink_position else (side / 2, side / 2)

        pms = [PhysicalMachine.with_vms(
            i, vc.vms_per_pm, vc.vm_cores, vc.vm_mem_gb,
            total_cores=vc.pm_cores, total_mem_gb=vc.pm_mem_gb, t_upper=vc.t_upper,
            busy_power_w=vc.busy_power_w, idle_power_w=vc.idle_power_w,
            cpu_weight=vc.cpu_weight, energy=NodeEnergy(vc.energy_j))
            for i in range(cfg.n_validators)]
        self.state = ConsensusState([Validator(f"v{pm.pm_id}", pm) for pm in pms],
                                    policy=cfg.consensus.selection_policy,
                                    round_length_s=cfg.consensus.round_length_s)
        self._pm_clock = {pm.pm_id: 0.0 for pm in pms}
        self._by_head = {h.head_id: h for h in self.heads}
        self._by_sensor = {s.node_id: s for s in self.sensors}
        self._by_vid = {v.validator_id: v for v in self.state.validators}

        for h in self.heads:
            self.emit("place", node=h.head_id, cls="head", x=h.position[0], y=h.position[1],
                      initial_j=h.energy.initial_j)
        for s in self.sensors:
            self.emit("place", node=s.node_id, cls="sensor", x=s.position[0], y=s.position[1],
                      initial_j=s.energy.initial_j)
        for v in self.state.validators:
            self.emit("place", node=v.validator_id, cls="validator",
                      vms=len(v.pm.vms), initial_j=v.pm.energy.initial_j)
        self._form_clusters()

        jitter = cfg.run.jitter
        for s in self.sensors:
            first = self.rng.uniform(0, s.sensing_interval) if jitter else 0.0
            self.schedule(first, "Sense", s.node_id)
        for h in self.heads:
            iv = h.dissemination_interval
            first = iv * (1.0 - self.rng.random()) if jitter else iv
            self.schedule(first, "Disseminate", h.head_id)
        self.schedule(cfg.consensus.round_length_s, "RoundStart")
        for d in cfg.consensus.downtime:
            if d.validator < len(pms):
                self.schedule(d.start_s, "DowntimeToggle", (d.validator, False))
                self.schedule(d.end_s, "DowntimeToggle", (d.validator, True))

    def _form_clusters(self) -> None:
        alive_heads = [h for h in self.heads if h.alive]
        alive_sensors = [s for s in self.sensors if s.alive]
        if not alive_heads:
            for s in self.sensors:
                s.assigned_head = None
            return
        assignment = cluster.assign_clusters(alive_sensors, alive_heads)
        cluster.apply_assignment(alive_sensors, alive_heads, assignment)
        for s in sorted(alive_sensors, key=lambda s: int(s.node_id[1:])):
            self.emit("cluster", sensor=s.node_id, head=s.assigned_head)

    # -- main loop --------------------------------------------------------

    def run(self) -> Trace:
        self.setup()
        horizon = self.cfg.run.duration_s
        handlers = {
            "Sense": self._on_sense,
            "PacketArrive": self._on_packet,
            "Disseminate": self._on_disseminate,
            "TxArriveAtConsensus": self._on_tx_arrive,
            "RoundStart": self._on_round,
            "TaskComplete": self._on_task_complete,
            "BlockArrive": self._on_block_arrive,
            "VoteArrive": self._on_vote,
            "CommitApplied": self._on_commit,
            "DowntimeToggle": self._on_downtime,
        }
        while self.queue and self.queue[0].time < horizon:
            ev = heapq.heappop(self.queue)
            self.now = ev.time
            handlers[ev.kind](ev.payload)
        self.now = horizon
        self._finish()
        return self.trace

    # -- energy -----------------------------------------------------------

    def _debit(self, node_id: str, energy: NodeEnergy, amount: float, cause: str) -> float:
        taken = energy.debit(self.now, amount, cause)
        if taken > 0:
            self.emit("energy", node=node_id, amount_j=taken, cause=cause)
        return taken

    def _record_last_debit(self, node_id: str, energy: NodeEnergy) -> None:
        _, amount, cause = energy.debits[-1]
        if amount > 0:
            self.emit("energy", node=node_id, amount_j=amount, cause=cause)

    def _account(self, val: Validator) -> bool:
        """Debit the PM's draw since its last update; True if it just ran dry."""
        pm = val.pm
        last = self._pm_clock[pm.pm_id]
        self._pm_clock[pm.pm_id] = self.now
        dt = self.now - last
        if dt <= 0 or not val.active:
            return False
        busy = dt * min(1.0, pm.cpu_alloc / pm.total_cores)
        joules = virt.compute_energy(pm, busy, dt - busy)
        self._debit(val.validator_id, pm.energy, joules, "compute")
        return pm.energy.depleted

    def _account_all(self) -> None:
        # settle every PM before any dead one pushes work onto the others
        dead = [v for v in self.state.validators if self._account(v)]
        for v in dead:
            self.emit("node_dead", node=v.validator_id, cls="validator")
            self._deactivate(v)

    # -- sensor network ----------------------------------------------------

    def _on_sense(self, sensor_id: str) -> None:
        net = self.cfg.network
        s = self._by_sensor[sensor_id]
        if not s.alive:
            return
        head = self._by_head.get(s.assigned_head) if s.assigned_head else None
        if head is not None and head.alive:
            pkt = cluster.sense_and_send(s, head, self.now, net.packet_bits,
                                         net.e_elec, net.e_amp)
            if pkt is None:
                self.emit("node_dead", node=s.node_id, cls="sensor")
                return
            self._record_last_debit(s.node_id, s.energy)
            self.schedule(self.now + self.delay(net.packet_bits / 8), "PacketArrive", pkt)
        self.schedule(self.now + s.sensing_interval, "Sense", sensor_id)

    def _on_packet(self, pkt: SensingPacket) -> None:
        head = self._by_head[pkt.head_id]
        if head.alive:
            head.buffer.append(pkt)

    def _on_disseminate(self, head_id: str) -> None:
        net = self.cfg.network
        head = self._by_head[head_id]
        if not head.alive:
            return
        packets = list(head.buffer)
        em = cluster.aggregate_and_emit(head, self.now,
                                        cluster.distance(head.position, self.sink),
                                        net.header_bytes, net.digest_bytes,
                                        net.e_elec, net.e_amp)
        if em is None and packets:
            self.emit("node_dead", node=head.head_id, cls="head")
            self._form_clusters()
            return
        if em is not None:
            self._record_tx_debits(head, em)
            self._tx_counter += 1
            digest = hashlib.sha256("|".join(f"{p.sensor_id}@{p.sent_at!r}"
                                             for p in packets).encode()).digest()
            tx = Transaction(f"tx{self._tx_counter}", head.head_id, em.size_bytes,
                             self.now, digest)
            self.txs[tx.tx_id] = tx
            self.tx_status[tx.tx_id] = "created"
            self.emit("tx_created", tx=tx.tx_id, head=head.head_id, size=tx.size_bytes,
                      packets=em.n_packets)
            self.schedule(self.now + self.delay(tx.size_bytes), "TxArriveAtConsensus", tx.tx_id)
        if net.head_rotation:
            self._form_clusters()
        self.schedule(self.now + head.dissemination_interval, "Disseminate", head_id)

    def _record_tx_debits(self, head: ClusterHead, em) -> None:
        for _, amount, cause in head.energy.debits[-2:]:
            if amount > 0:
                self.emit("energy", node=head.head_id, amount_j=amount, cause=cause)

    # -- validation work ----------------------------------------------------

    def _new_task(self, kind: str, work: float, tx_ref: str | None = None,
                  payload: Any = None) -> ValidationTask:
        vc = self.cfg.validators
        self._task_counter += 1
        return ValidationTask(f"k{self._task_counter}", tx_ref, vc.task_cpu_cores,
                              vc.task_mem_gb, work, kind, payload)

    def _queued_total(self) -> int:
        n = len(self.state.pending_queue)
        for v in self.state.validators:
            n += sum(len(vm.task_queue) for vm in v.pm.vms)
        return n

    def _dispatch(self, task: ValidationTask) -> None:
        try:
            sel = consensus.select_validator(self.state, task)
        except consensus.NoValidators:
            self._drop(task.tx_ref, "no active validator")
            return
        if sel.weights is not None:
            best = min(sel.weights) if sel.weights else None
            self.emit("wbs_eval", task=task.task_id, candidates=len(sel.weights),
                      best=best[0] if best else None,
                      pm=best[1] if best else None, vm=best[2] if best else None)
        self._emit_select(task, sel)
        if sel.mode != consensus.MODE_QUEUED:
            self._start(task, sel.pm, sel.vm)

    def _emit_select(self, task: ValidationTask, sel: consensus.Selection) -> None:
        self.emit("select", task=task.task_id, tx=task.tx_ref,
                  tbs_pm=sel.tbs_pm, tbs_vm=sel.tbs_vm, tbs_admit=sel.tbs_admitted,
                  mode=sel.mode,
                  pm=sel.pm.pm_id if sel.pm is not None else None,
                  vm=sel.vm.vm_id if sel.vm is not None else None,
                  queued=self._queued_total())

    def _start(self, task: ValidationTask, pm: PhysicalMachine, vm: VirtualMachine) -> None:
        vc = self.cfg.validators
        u = virt.utilization(pm)
        slow = virt.overload_factor(u, pm.t_upper, vc.overload_penalty)
        dur = virt.service_time(task, vm, vc.per_core_rate) * slow
        token = self._tokens.get(task.task_id, 0) + 1
        self._tokens[task.task_id] = token
        self._task_home[task.task_id] = (pm.pm_id, vm.vm_id)
        vm.busy_until = max(vm.busy_until, self.now + dur)
        self.emit("task_start", task=task.task_id, task_kind=task.kind, tx=task.tx_ref,
                  pm=pm.pm_id, vm=vm.vm_id, cpu=task.cpu_demand_cores,
                  mem=task.mem_demand_gb, u=u, slowdown=slow, service_s=dur)
        self.schedule(self.now + dur, "TaskComplete", (task, token))

    def _drop(self, tx_id: str | None, reason: str) -> None:
        if tx_id is None:
            return
        self.tx_status[tx_id] = "dropped"
        self.emit("tx_dropped", tx=tx_id, reason=reason)

    def _on_tx_arrive(self, tx_id: str) -> None:
        vc = self.cfg.validators
        tx = self.txs[tx_id]
        self.tx_status[tx_id] = "arrived"
        self.emit("tx_arrived", tx=tx_id)
        self._account_all()
        work = virt.work_units(tx.size_bytes, vc.work_alpha, vc.work_beta)
        self._dispatch(self._new_task("validate", work, tx_id))

    def _release_pm_queues(self, pm: PhysicalMachine) -> None:
        for vm in pm.vms:
            for task in consensus.drain_vm_queue(vm, pm):
                self.emit("dequeue", task=task.task_id, pm=pm.pm_id, vm=vm.vm_id)
                self._start(task, pm, vm)

    def _retry_pending(self) -> None:
        for task, sel in consensus.retry_pending(self.state):
            if sel.weights is not None:
                best = min(sel.weights)
                self.emit("wbs_eval", task=task.task_id, candidates=len(sel.weights),
                          best=best[0], pm=best[1], vm=best[2])
            self._emit_select(task, sel)
            self._start(task, sel.pm, sel.vm)

    def _on_task_complete(self, payload) -> None:
        task, token = payload
        if self._tokens.get(task.task_id) != token:
            return  # superseded by a restart
        self._account_all()
        if self._tokens.get(task.task_id) != token:
            return  # host ran out of energy just now
        pm_id, vm_id = self._task_home[task.task_id]
        val = self.state.validator_for_pm(pm_id)
        pm, vm = val.pm, val.vm_by_id(vm_id)
        virt.release_task(vm, pm, task)
        del self._tokens[task.task_id]
        self.emit("task_done", task=task.task_id, task_kind=task.kind, pm=pm_id, vm=vm_id)

        if task.kind == "validate":
            tx = self.txs[task.tx_ref]
            consensus.add_to_mempools(self.state.validators, tx)
            self.tx_status[tx.tx_id] = "validated"
            self.emit("tx_validated", tx=tx.tx_id, pm=pm_id, vm=vm_id)
        elif task.kind == "propose":
            self._proposal_done()
        elif task.kind == "verify":
            voter_id, approve, rid = task.payload
            self.schedule(self.now + self.delay(self.cfg.consensus.vote_bytes),
                          "VoteArrive", (voter_id, approve, rid))

        if val.active:
            self._release_pm_queues(pm)
        if self.state.policy == consensus.WBS:
            self._retry_pending()

    # -- consensus rounds -----------------------------------------------------

    def _on_round(self, _payload=None) -> None:
        c = self.cfg.consensus
        nxt = self.now + c.round_length_s
        if nxt < self.cfg.run.duration_s:
            self.schedule(nxt, "RoundStart")
        self._account_all()
        if self._round is not None:
            self.emit("round", proposer=None, status="busy")
            return
        try:
            proposer = consensus.proposer_next(self.state)
        except consensus.NoValidators:
            self.emit("round", proposer=None, status="no-validators")
            return
        block = consensus.propose_block(proposer, self.now, c.max_txs_per_block)
        if block is None:
            self.emit("round", proposer=proposer.validator_id, status="empty")
            return
        vc = self.cfg.validators
        work = c.propose_cost_factor * sum(
            virt.work_units(tx.size_bytes, vc.work_alpha, vc.work_beta)
            for tx in block.transactions)
        self._round_counter += 1
        self._round = _Round(self._round_counter, block, proposer, work)
        self.emit("round", proposer=proposer.validator_id, status="propose")
        self.emit("block_proposed", index=block.index, proposer=proposer.validator_id,
                  n_tx=len(block.transactions), work=work)
        task = self._new_task("propose", work, payload=self._round.rid)
        self._run_local(proposer, task)

    def _run_local(self, val: Validator, task: ValidationTask) -> None:
        vm = consensus.place_local(val, task)
        if vm is not None:
            self._start(task, val.pm, vm)
        else:
            self.emit("local_queued", task=task.task_id, task_kind=task.kind,
                      pm=val.pm.pm_id)

    def _block_bytes(self, block: Block) -> int:
        return BLOCK_HEADER_BYTES + len(block.proposer) + block.total_bytes

    def _proposal_done(self) -> None:
        rnd = self._round
        if rnd is None:
            return
        rnd.proposed = True
        voters = [v for v in self.state.active() if v is not rnd.proposer]
        rnd.electorate = {v.validator_id for v in voters}
        rnd.waiting = set(rnd.electorate)
        arrive = self.now + self.delay(self._block_bytes(rnd.block))
        for v in voters:
            self.schedule(arrive, "BlockArrive", (v.validator_id, rnd.rid))
        if not voters:
            self._schedule_commit()

    def _on_block_arrive(self, payload) -> None:
        voter_id, rid = payload
        rnd = self._round
        if rnd is None or rnd.rid != rid or voter_id not in rnd.waiting:
            return
        voter = self._by_vid[voter_id]
        self._account_all()
        if not voter.active or self._round is not rnd:
            return
        approve = consensus.verify_block(voter, rnd.block)
        work = rnd.work * self.cfg.consensus.verify_cost_factor
        task = self._new_task("verify", work, payload=(voter_id, approve, rnd.rid))
        self._run_local(voter, task)

    def _on_vote(self, payload) -> None:
        voter_id, approve, rid = payload
        rnd = self._round
        if rnd is None or rnd.rid != rid or voter_id not in rnd.waiting:
            return
        rnd.waiting.discard(voter_id)
        rnd.votes[voter_id] = approve
        self.emit("vote", voter=voter_id, index=rnd.block.index, approve=approve)
        if not rnd.waiting:
            self._schedule_commit()

    def _schedule_commit(self) -> None:
        if self._round is not None and not self._round.finalizing:
            self._round.finalizing = True
            self.schedule(self.now, "CommitApplied", self._round.rid)

    def _on_commit(self, rid: int) -> None:
        rnd = self._round
        if rnd is None or rnd.rid != rid:
            return
        self._round = None
        block = rnd.block
        electorate = rnd.electorate | {rnd.proposer.validator_id}
        ok = consensus.commit_block(self.state, block, rnd.votes, electorate)
        if ok:
            self.emit("block_commit", index=block.index, proposer=block.proposer,
                      block_hash=block.block_hash.hex(), n_tx=len(block.transactions),
                      bytes=block.total_bytes)
            for tx in block.transactions:
                self.tx_status[tx.tx_id] = "committed"
                self.emit("tx_committed", tx=tx.tx_id, index=block.index,
                          created_at=tx.created_at, size=tx.size_bytes)
        else:
            self.emit("block_reject", index=block.index, proposer=block.proposer,
                      approvals=sum(rnd.votes.values()) + 1, voters=len(electorate))

    def _abort_round(self, reason: str) -> None:
        rnd = self._round
        self._round = None
        returned = {tx.tx_id: tx for tx in rnd.block.transactions}
        returned.update(rnd.proposer.mempool)
        rnd.proposer.mempool = returned
        self.emit("round_abort", index=rnd.block.index, reason=reason)

    # -- availability -----------------------------------------------------------

    def _on_downtime(self, payload) -> None:
        pm_id, up = payload
        val = self.state.validator_for_pm(pm_id)
        self._account_all()
        if up:
            if val.active or val.pm.energy.depleted:
                return
            val.active = True
            self._pm_clock[pm_id] = self.now
            peers = [v for v in self.state.active() if v is not val]
            if peers:
                consensus.resync(val, peers[0])
            self.emit("downtime", node=val.validator_id, active=True)
            if self.state.policy == consensus.WBS:
                self._retry_pending()
        elif val.active:
            self.emit("downtime", node=val.validator_id, active=False)
            self._deactivate(val)

    def _deactivate(self, val: Validator) -> None:
        val.active = False
        displaced: list[ValidationTask] = []
        for vm in val.pm.vms:
            for task in list(vm.running.values()):
                virt.release_task(vm, val.pm, task)
                self._tokens.pop(task.task_id, None)
                displaced.append(task)
            displaced.extend(vm.task_queue)
            vm.task_queue.clear()
        rnd = self._round
        if rnd is not None:
            if rnd.proposer is val:
                self._abort_round("proposer unavailable")
            elif val.validator_id in rnd.waiting:
                rnd.waiting.discard(val.validator_id)
                rnd.electorate.discard(val.validator_id)
                if rnd.proposed and not rnd.waiting:
                    self._schedule_commit()
        for task in displaced:
            if task.kind == "validate":
                self.emit("redispatch", task=task.task_id, tx=task.tx_ref)
                self._dispatch(task)

    # -- wrap-up ----------------------------------------------------------------

    def _finish(self) -> None:
        for v in self.state.validators:
            self._account(v)
        for h in self.heads:
            self.emit("node_final", node=h.head_id, cls="head",
                      initial_j=h.energy.initial_j, remaining_j=h.energy.remaining_j)
        for s in self.sensors:
            self.emit("node_final", node=s.node_id, cls="sensor",
                      initial_j=s.energy.initial_j, remaining_j=s.energy.remaining_j)
        for v in self.state.validators:
            self.emit("node_final", node=v.validator_id, cls="validator",
                      initial_j=v.pm.energy.initial_j, remaining_j=v.pm.energy.remaining_j)
        statuses = list(self.tx_status.values())
        committed = statuses.count("committed")
        dropped = statuses.count("dropped")
        self.emit("tx_final", created=len(statuses), committed=committed,
                  pending=len(statuses) - committed - dropped, dropped=dropped,
                  chain_length=len(self.state.validators[0].local_chain))


def run(cfg: ScenarioConfig) -> Trace:
    sim = Simulation(cfg)
    return sim.run()


def run_with_state(cfg: ScenarioConfig) -> tuple[Trace, Simulation]:
    sim = Simulation(cfg)
    return sim.run(), sim
