"""CBR traffic, per-hop FIFO buffers with slot-boundary fragmentation,
store-and-forward relaying, and the donor load metric.

A packet lives in exactly one hop queue at a time; bits already drained
from the queue head sit at the receiver as reassembly progress
(size_bits - remaining_bits). Only fully reassembled packets move to the
next hop or count as delivered, so bit conservation is exact in integers.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

PACKET_SIZE_BITS = 4096
INTER_ARRIVAL_SLOTS = 4

# hop identifiers
DONOR_ACCESS_DL = "DonorAccessDL"
DONOR_BACKHAUL_DL = "DonorBackhaulDL"
DU_ACCESS_DL = "DuAccessDL"
MT_BACKHAUL_UL = "MtBackhaulUL"
UE_ACCESS_UL = "UeAccessUL"
PASSENGER_ACCESS_UL = "PassengerAccessUL"


@dataclass
class Packet:
    id: int
    flow_id: int
    size_bits: int
    created_slot: int
    remaining_bits: int
    delivered_slot: int | None = None


@dataclass
class Flow:
    flow_id: int
    ue_id: int
    ue_class: str  # "Passenger" | "Pedestrian"
    direction: str  # "DL" | "UL"


class FlowBuffer:
    """FIFO bit queue for one hop. Drains in fragments; the head packet may be
    partially sent across slots, everything behind it is intact."""

    __slots__ = ("hop", "owner_id", "queue", "total_bits")

    def __init__(self, hop: str, owner_id: int):
        self.hop = hop
        self.owner_id = owner_id
        self.queue: deque[Packet] = deque()
        self.total_bits = 0

    def __len__(self) -> int:
        return len(self.queue)

    def push(self, packet: Packet) -> None:
        self.queue.append(packet)
        self.total_bits += packet.remaining_bits

    def extend_from(self, other: "FlowBuffer") -> None:
        """Move the full FIFO content of `other` to the tail of this buffer."""
        self.queue.extend(other.queue)
        self.total_bits += other.total_bits
        other.queue.clear()
        other.total_bits = 0

    def drain(self, capacity_bits: int) -> list[tuple[Packet, int, bool]]:
        """Remove up to capacity_bits in FIFO order.

        Returns (packet, bits_sent, completed) fragments; a completed packet
        has fully crossed this hop and is popped from the queue.
        """
        sent: list[tuple[Packet, int, bool]] = []
        cap = int(capacity_bits)
        while cap > 0 and self.queue:
            pkt = self.queue[0]
            take = min(cap, pkt.remaining_bits)
            pkt.remaining_bits -= take
            self.total_bits -= take
            cap -= take
            completed = pkt.remaining_bits == 0
            if completed:
                self.queue.popleft()
            sent.append((pkt, take, completed))
        return sent


def drain(buffer: FlowBuffer, capacity_bits: int) -> tuple[list[tuple[Packet, int, bool]], FlowBuffer]:
    """Functional wrapper over FlowBuffer.drain returning (fragments, buffer)."""
    return buffer.drain(capacity_bits), buffer


def generate_cbr(
    slot_index: int,
    flows,
    head_buffer,
    *,
    inter_arrival_slots: int = INTER_ARRIVAL_SLOTS,
    packet_size_bits: int = PACKET_SIZE_BITS,
    next_packet_id: int = 0,
) -> list[Packet]:
    """Enqueue one fixed-size packet per flow at its route head every
    inter_arrival_slots-th slot. head_buffer maps a Flow to its first-hop
    FlowBuffer. Returns the created packets."""
    created: list[Packet] = []
    if slot_index % inter_arrival_slots != 0:
        return created
    pid = next_packet_id
    for flow in flows:
        pkt = Packet(pid, flow.flow_id, packet_size_bits, slot_index, packet_size_bits)
        head_buffer(flow).push(pkt)
        created.append(pkt)
        pid += 1
    return created


def forward_completed(fragments, next_buffer: FlowBuffer | None, slot_index: int, on_delivered=None) -> int:
    """Route fully reassembled packets onward; partial fragments stay implicit.

    next_buffer None means this hop is the flow's last: the packet is
    delivered and stamped. Returns the count of packets that moved on.
    """
    moved = 0
    for pkt, _bits, completed in fragments:
        if not completed:
            continue
        moved += 1
        if next_buffer is None:
            pkt.delivered_slot = slot_index
            if on_delivered is not None:
                on_delivered(pkt)
        else:
            pkt.remaining_bits = pkt.size_bits
            next_buffer.push(pkt)
    return moved


def donor_load_bits(dl_buffers) -> int:
    """Donor load: buffered bits over all DL queues the donor owns
    (pedestrian access DL plus backhaul DL toward an attached mIAB)."""
    return sum(buf.total_bits for buf in dl_buffers)


@dataclass
class TrafficConfig:
    packet_size_bits: int = PACKET_SIZE_BITS
    inter_arrival_slots: int = INTER_ARRIVAL_SLOTS
    pedestrian_traffic: bool = True
    passenger_traffic: bool = True
