"""Wireless sensor network: nodes, nearest-head clustering, radio energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

E_ELEC = 50e-9     # J/bit
E_AMP = 100e-12    # J/bit/m^2

DEFAULT_HEADER_BYTES = 64
DEFAULT_DIGEST_BYTES = 32


class NoHeads(Exception):
    pass


class Depleted(Exception):
    """Raised when a node cannot afford an operation."""


@dataclass
class NodeEnergy:
    initial_j: float
    remaining_j: float = None  # type: ignore[assignment]
    debits: list[tuple[float, float, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.remaining_j is None:
            self.remaining_j = self.initial_j

    def can_afford(self, amount_j: float) -> bool:
        return self.remaining_j >= amount_j

    def debit(self, t: float, amount_j: float, cause: str) -> float:
        """Debit up to the remaining budget; returns the amount actually taken."""
        if amount_j < 0:
            raise ValueError("debit amount must be >= 0")
        amount_j = min(amount_j, self.remaining_j)
        self.remaining_j -= amount_j
        self.debits.append((t, amount_j, cause))
        return amount_j

    @property
    def consumed_j(self) -> float:
        return self.initial_j - self.remaining_j

    @property
    def depleted(self) -> bool:
        return self.remaining_j <= 0.0


@dataclass
class SensorNode:
    node_id: str
    position: tuple[float, float]
    energy: NodeEnergy
    sensing_interval: float
    assigned_head: str | None = None
    alive: bool = True


@dataclass
class ClusterHead:
    head_id: str
    position: tuple[float, float]
    energy: NodeEnergy
    dissemination_interval: float
    aggregation_window: float = 0.0
    members: set[str] = field(default_factory=set)
    buffer: list = field(default_factory=list)
    alive: bool = True


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def assign_clusters(sensors: Sequence[SensorNode],
                    heads: Sequence[ClusterHead]) -> dict[str, str]:
    """Map every sensor id to its nearest head; ties go to the lowest head_id."""
    if not heads:
        raise NoHeads("cannot form clusters without cluster heads")
    ordered = sorted(heads, key=lambda h: h.head_id)
    out = {}
    for s in sensors:
        best = min(ordered, key=lambda h: distance(s.position, h.position))
        out[s.node_id] = best.head_id
    return out


def apply_assignment(sensors: Sequence[SensorNode], heads: Sequence[ClusterHead],
                     assignment: dict[str, str]) -> None:
    by_id = {h.head_id: h for h in heads}
    for h in heads:
        h.members = set()
    for s in sensors:
        head_id = assignment.get(s.node_id)
        s.assigned_head = head_id
        if head_id is not None:
            by_id[head_id].members.add(s.node_id)


def radio_energy(direction: str, bits: int, distance_m: float = 0.0,
                 e_elec: float = E_ELEC, e_amp: float = E_AMP) -> float:
    """First-order radio model. `direction` is "tx" or "rx"."""
    if bits < 0 or distance_m < 0:
        raise ValueError("bits and distance must be non-negative")
    if direction == "tx":
        return e_elec * bits + e_amp * bits * distance_m ** 2
    if direction == "rx":
        return e_elec * bits
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class SensingPacket:
    sensor_id: str
    head_id: str
    sent_at: float
    bits: int


def sense_and_send(sensor: SensorNode, head: ClusterHead, now: float, packet_bits: int,
                   e_elec: float = E_ELEC, e_amp: float = E_AMP) -> SensingPacket | None:
    """Debit the radio cost of one packet and return it, or mark the sensor dead."""
    if not sensor.alive:
        return None
    cost = radio_energy("tx", packet_bits, distance(sensor.position, head.position),
                        e_elec, e_amp)
    if not sensor.energy.can_afford(cost):
        sensor.alive = False
        return None
    sensor.energy.debit(now, cost, "sense_tx")
    return SensingPacket(sensor.node_id, head.head_id, now, packet_bits)


def aggregated_size(n_packets: int, header_bytes: int = DEFAULT_HEADER_BYTES,
                    digest_bytes: int = DEFAULT_DIGEST_BYTES) -> int:
    return header_bytes + digest_bytes * n_packets


@dataclass(frozen=True)
class Emission:
    size_bytes: int
    n_packets: int
    rx_j: float
    tx_j: float


def aggregate_and_emit(head: ClusterHead, now: float, sink_distance_m: float,
                       header_bytes: int = DEFAULT_HEADER_BYTES,
                       digest_bytes: int = DEFAULT_DIGEST_BYTES,
                       e_elec: float = E_ELEC, e_amp: float = E_AMP) -> Emission | None:
    """Flush the head's buffer into one aggregated emission.

    The caller turns the returned Emission into a Transaction. Returns None for
    an empty buffer or when the head cannot pay for reception plus the uplink,
    in which case the head is marked dead and its buffer discarded.
    """
    if not head.alive or not head.buffer:
        return None
    packets = head.buffer
    head.buffer = []
    rx = sum(radio_energy("rx", p.bits, 0.0, e_elec, e_amp) for p in packets)
    size = aggregated_size(len(packets), header_bytes, digest_bytes)
    tx = radio_energy("tx", 8 * size, sink_distance_m, e_elec, e_amp)
    if not head.energy.can_afford(rx + tx):
        head.alive = False
        return None
    head.energy.debit(now, rx, "aggregate_rx")
    head.energy.debit(now, tx, "uplink_tx")
    return Emission(size, len(packets), rx, tx)
