"""Topology adaptation: RSRP filtering, the RSRP-only and load-aware parent
selection policies, and atomic re-parenting with backhaul buffer migration.

The load-aware policy walks the candidate list in ascending donor id and
re-binds its working parent variable mid-loop: each candidate is compared
against the currently held parent (bits strictly lower, RSRP above the
floor, RSRP within the allowed gap), not against the original one. A
best-candidate variant is available behind `semantics`.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TAConfig:
    policy: str = "standard"  # "standard" | "load_aware"
    min_rsrp_dbm: float = -110.0
    min_rsrp_diff_db: float = 10.0
    evaluation_period_slots: int = 400
    l3_filter_coefficient: float = 0.5
    hysteresis_db: float = 3.0
    # consecutive winning evaluations before the standard policy switches
    # (A3-style time to trigger); the load-aware rule acts immediately
    time_to_trigger_evals: int = 3
    semantics: str = "sequential"  # "sequential" | "best_candidate"


@dataclass(frozen=True)
class DonorCandidate:
    donor_id: int
    bits: int
    rsrp_dbm: float


@dataclass
class AttachmentRecord:
    donor_id: int
    start_slot: int
    end_slot: int | None = None


def filter_rsrp(previous: float | None, instantaneous: float, a: float) -> float:
    """One-pole L3 filter in the dB domain; the first sample passes through."""
    if not 0.0 <= a <= 1.0:
        raise ValueError("filter coefficient must be in [0, 1]")
    if previous is None:
        return instantaneous
    return (1.0 - a) * previous + a * instantaneous


def update_parent_standard(parent: DonorCandidate, candidates, hysteresis_db: float = 3.0) -> int:
    """RSRP-only selection: strongest candidate exceeding parent RSRP plus
    hysteresis wins; ties break toward the lowest donor id."""
    best_id = parent.donor_id
    best_rsrp = None
    threshold = parent.rsrp_dbm + hysteresis_db
    for cand in sorted(candidates, key=lambda c: c.donor_id):
        if cand.donor_id == parent.donor_id:
            continue
        if cand.rsrp_dbm > threshold and (best_rsrp is None or cand.rsrp_dbm > best_rsrp):
            best_id = cand.donor_id
            best_rsrp = cand.rsrp_dbm
    return best_id


def update_parent_load_aware(parent: DonorCandidate, candidates, cfg: TAConfig) -> int:
    """Load-aware parent update over candidates sorted by donor id.

    A candidate replaces the working parent iff its buffered bits are
    strictly below the working parent's, its RSRP clears min_rsrp_dbm, and
    its RSRP is within min_rsrp_diff_db of the working parent's.
    """
    ordered = sorted(candidates, key=lambda c: c.donor_id)
    if cfg.semantics == "best_candidate":
        best = parent
        for cand in ordered:
            if cand.donor_id == parent.donor_id:
                continue
            if (
                cand.bits < parent.bits
                and cand.rsrp_dbm > cfg.min_rsrp_dbm
                and cand.rsrp_dbm > parent.rsrp_dbm - cfg.min_rsrp_diff_db
            ):
                if best is parent or cand.bits < best.bits:
                    best = cand
        return best.donor_id
    current = parent
    for cand in ordered:
        if cand.donor_id == current.donor_id:
            continue
        if (
            cand.bits < current.bits
            and cand.rsrp_dbm > cfg.min_rsrp_dbm
            and cand.rsrp_dbm > current.rsrp_dbm - cfg.min_rsrp_diff_db
        ):
            current = cand
    return current.donor_id


def execute_ta(state, new_donor_id: int, slot_index: int) -> None:
    """Re-parent the mIAB node atomically within one slot.

    Moves the old donor's backhaul DL queue to the new donor (FIFO order
    kept, no bits lost), retargets the MT's UL link, and closes/opens the
    attachment record. A TA to the current parent is a no-op. `state` is
    the engine SimState (duck-typed to avoid an import cycle).
    """
    old = state.parent_donor
    if new_donor_id == old:
        return
    bh_dl = state.backhaul_dl
    bh_ul = state.backhaul_ul
    state.cell_links[bh_dl.cell]["DL"].remove(bh_dl)
    state.cell_links[bh_ul.cell]["UL"].remove(bh_ul)
    bh_dl.tx = new_donor_id
    bh_dl.cell = new_donor_id
    bh_ul.rx = new_donor_id
    bh_ul.cell = new_donor_id
    state.cell_links[new_donor_id]["DL"].append(bh_dl)
    state.cell_links[new_donor_id]["UL"].append(bh_ul)
    state.parent_donor = new_donor_id
    state.record_attachment(new_donor_id, slot_index)
    state.n_ta_events += 1
