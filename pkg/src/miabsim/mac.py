"""Slot-level MAC: TDD direction pattern, round-robin RB scheduling,
half-duplex arbitration at the mIAB node, and link-rate computation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DL = "DL"
UL = "UL"
N_RBS = 22
SYMBOLS_PER_SLOT = 14
SUBCARRIERS_PER_RB = 12
RES_PER_RB_SLOT = SYMBOLS_PER_SLOT * SUBCARRIERS_PER_RB  # 168
SLOT_DURATION_S = 0.25e-3
DEFAULT_SE_CAP = 7.4
DEFAULT_OVERHEAD = 0.75


@dataclass(frozen=True)
class SlotContext:
    slot_index: int
    direction: str
    duration_s: float = SLOT_DURATION_S
    n_rbs: int = N_RBS
    symbols_per_slot: int = SYMBOLS_PER_SLOT


@dataclass
class RbAllocation:
    """Per-cell RB assignment for one slot. Chunks are contiguous [start, start+n)."""

    cell_id: int
    direction: str
    chunks: dict[int, tuple[int, int]] = field(default_factory=dict)  # link_id -> (start, n)

    def rb_set(self, link_id: int) -> frozenset[int]:
        start, n = self.chunks.get(link_id, (0, 0))
        return frozenset(range(start, start + n))

    def validate(self, n_rbs: int = N_RBS) -> None:
        seen: set[int] = set()
        for link_id, (start, n) in self.chunks.items():
            rbs = set(range(start, start + n))
            if not rbs <= set(range(n_rbs)):
                raise ValueError(f"link {link_id} RBs outside [0, {n_rbs})")
            if rbs & seen:
                raise ValueError(f"link {link_id} overlaps another allocation in cell {self.cell_id}")
            seen |= rbs


def duplex_direction(slot_index: int, pattern) -> str:
    """Slot direction from a repeating pattern, e.g. [DL, UL]."""
    if not pattern:
        raise ValueError("duplex pattern must not be empty")
    return pattern[slot_index % len(pattern)]


def schedule_rbs(cell_id: int, direction: str, active_links, rotation: int = 0, n_rbs: int = N_RBS) -> RbAllocation:
    """Round-robin with rotating start over links that have buffered bits.

    The n_rbs RBs split into contiguous chunks as evenly as possible:
    floor(n_rbs/n) each, the first (n_rbs mod n) links in rotated order get
    one extra. With more links than RBs, the first n_rbs rotated links get
    one RB each and the rest get none this slot.
    """
    alloc = RbAllocation(cell_id=cell_id, direction=direction)
    links = [link_id for link_id, buffered in active_links if buffered > 0]
    n = len(links)
    if n == 0:
        return alloc
    r = rotation % n
    order = links[r:] + links[:r]
    base, extra = divmod(n_rbs, n)
    start = 0
    for i, link_id in enumerate(order):
        size = base + (1 if i < extra else 0)
        if size == 0:
            continue
        alloc.chunks[link_id] = (start, size)
        start += size
    return alloc


def enforce_half_duplex(
    slot: SlotContext,
    proposed: dict[int, RbAllocation],
    *,
    miab_cell_id: int,
    backhaul_link_id: int,
    backhaul_bits: int,
    access_bits: int,
    backhaul_priority: bool,
) -> tuple[dict[int, RbAllocation], str]:
    """Drop the losing side of the mIAB's backhaul/access conflict for this slot.

    In a DL slot the MT cannot receive from its donor while the DU transmits
    to passengers (and the UL mirror-image likewise), so exactly one of the
    two roles is kept. The priority role alternates slot to slot (per
    direction); a priority role with nothing buffered cedes to the other.
    The losing allocation is removed without reassigning its RBs.
    """
    winner = "backhaul" if backhaul_priority else "access"
    if winner == "backhaul" and backhaul_bits <= 0 < access_bits:
        winner = "access"
    elif winner == "access" and access_bits <= 0 < backhaul_bits:
        winner = "backhaul"
    filtered = dict(proposed)
    if winner == "backhaul":
        if miab_cell_id in filtered and filtered[miab_cell_id].chunks:
            alloc = RbAllocation(miab_cell_id, slot.direction)
            filtered[miab_cell_id] = alloc
    else:
        for cell_id, alloc in list(filtered.items()):
            if backhaul_link_id in alloc.chunks:
                trimmed = RbAllocation(alloc.cell_id, alloc.direction, dict(alloc.chunks))
                del trimmed.chunks[backhaul_link_id]
                filtered[cell_id] = trimmed
    return filtered, winner


def link_capacity_bits(sinr, n_rbs, se_cap: float = DEFAULT_SE_CAP, overhead: float = DEFAULT_OVERHEAD):
    """Shannon-capped bits deliverable over n_rbs RBs in one slot (integer).

    bits = n_rbs * 168 * min(log2(1+sinr), se_cap) * overhead, floored.
    Accepts scalars or arrays.
    """
    sinr_arr = np.asarray(sinr, dtype=float)
    n_arr = np.asarray(n_rbs, dtype=float)
    se = np.minimum(np.log2(1.0 + np.maximum(sinr_arr, 0.0)), se_cap)
    bits = np.floor(n_arr * RES_PER_RB_SLOT * se * overhead)
    if bits.ndim == 0:
        return int(bits)
    return bits.astype(np.int64)
