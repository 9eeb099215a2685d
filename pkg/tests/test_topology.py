"""Topology adaptation tests: L3 filter, both policies (including the exact
sequential loop semantics checked against an independent brute force), and
re-parenting."""
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miabsim.topology import (
    DonorCandidate,
    TAConfig,
    filter_rsrp,
    update_parent_load_aware,
    update_parent_standard,
)


# ---------- independent oracle: the load-aware loop as printed ----------

def brute_force_load_aware(parent, candidates, min_rsrp, min_rsrp_diff):
    """Straight transcription of the sequential parent-update loop."""
    cur = parent
    for cand in sorted(candidates, key=lambda c: c.donor_id):
        if cand.donor_id == cur.donor_id:
            continue
        if cand.bits < cur.bits:
            if cand.rsrp_dbm > min_rsrp:
                if cand.rsrp_dbm > cur.rsrp_dbm - min_rsrp_diff:
                    cur = cand
    return cur.donor_id


def cfg(min_rsrp=-110.0, diff=10.0, semantics="sequential"):
    return TAConfig(policy="load_aware", min_rsrp_dbm=min_rsrp, min_rsrp_diff_db=diff, semantics=semantics)


# ---------- L3 filter ----------

def test_filter_passthrough_a1():
    assert filter_rsrp(-80.0, -90.0, 1.0) == -90.0


def test_filter_frozen_a0():
    assert filter_rsrp(-80.0, -90.0, 0.0) == -80.0


def test_filter_midpoint():
    assert filter_rsrp(-80.0, -90.0, 0.5) == pytest.approx(-85.0, abs=1e-12)


def test_filter_first_sample_passthrough():
    assert filter_rsrp(None, -97.5, 0.3) == -97.5


def test_filter_rejects_bad_coefficient():
    with pytest.raises(ValueError):
        filter_rsrp(-80.0, -90.0, 1.5)


# ---------- standard policy ----------

def test_standard_switches_above_hysteresis():
    parent = DonorCandidate(0, 0, -80.0)
    cand = DonorCandidate(1, 0, -75.0)
    assert update_parent_standard(parent, [parent, cand], 3.0) == 1


def test_standard_keeps_within_hysteresis():
    parent = DonorCandidate(0, 0, -80.0)
    cand = DonorCandidate(1, 0, -78.0)
    assert update_parent_standard(parent, [parent, cand], 3.0) == 0


def test_standard_equal_candidates_keep_parent():
    parent = DonorCandidate(0, 0, -80.0)
    cands = [parent, DonorCandidate(1, 0, -80.0), DonorCandidate(2, 0, -80.0)]
    assert update_parent_standard(parent, cands, 3.0) == 0


def test_standard_argmax_with_tie_to_lowest_id():
    parent = DonorCandidate(0, 0, -95.0)
    cands = [parent, DonorCandidate(2, 0, -85.0), DonorCandidate(1, 0, -85.0)]
    # both candidates tie above the threshold; the lowest donor id wins,
    # independent of list order
    assert update_parent_standard(parent, cands, 3.0) == 1
    assert update_parent_standard(parent, list(reversed(cands)), 3.0) == 1


@settings(max_examples=120, deadline=None)
@given(
    shift=st.integers(-10_000, 10_000),
    rsrps=st.lists(st.floats(-120, -60), min_size=2, max_size=5),
    loads=st.lists(st.integers(0, 10_000), min_size=5, max_size=5),
)
def test_standard_ignores_loads(shift, rsrps, loads):
    cands = [DonorCandidate(i, loads[i % 5], r) for i, r in enumerate(rsrps)]
    shifted = [DonorCandidate(c.donor_id, c.bits + shift + 10_000, c.rsrp_dbm) for c in cands]
    parent = cands[0]
    parent_shifted = shifted[0]
    assert update_parent_standard(parent, cands, 3.0) == update_parent_standard(parent_shifted, shifted, 3.0)


# ---------- load-aware policy: spec examples ----------

def test_la_switch_when_all_gates_pass():
    parent = DonorCandidate(0, 10_000, -80.0)
    cand = DonorCandidate(1, 5_000, -85.0)
    assert update_parent_load_aware(parent, [parent, cand], cfg(-100.0, 10.0)) == 1


def test_la_load_gate_blocks_stronger_rsrp():
    parent = DonorCandidate(0, 10_000, -80.0)
    cand = DonorCandidate(1, 12_000, -70.0)
    assert update_parent_load_aware(parent, [parent, cand], cfg(-100.0, 10.0)) == 0


def test_la_min_rsrp_gate():
    parent = DonorCandidate(0, 10_000, -80.0)
    cand = DonorCandidate(1, 0, -105.0)
    assert update_parent_load_aware(parent, [parent, cand], cfg(-100.0, 10.0)) == 0


def test_la_sequential_adoption_trace():
    # A is adopted, then B is evaluated against A (not the original parent)
    # and adopted too: final parent is B.
    parent = DonorCandidate(0, 10_000, -80.0)
    a = DonorCandidate(1, 4_000, -88.0)
    b = DonorCandidate(2, 2_000, -89.0)
    got = update_parent_load_aware(parent, [parent, a, b], cfg(-100.0, 10.0))
    assert got == 2
    assert brute_force_load_aware(parent, [parent, a, b], -100.0, 10.0) == 2


def test_la_sequential_differs_from_best_candidate_when_chain_breaks():
    # B alone fails the RSRP-diff gate against the parent but passes against
    # A once A is adopted; sequential lands on B.
    parent = DonorCandidate(0, 10_000, -70.0)
    a = DonorCandidate(1, 6_000, -79.0)
    b = DonorCandidate(2, 3_000, -85.0)
    seq = update_parent_load_aware(parent, [parent, a, b], cfg(-100.0, 10.0))
    best = update_parent_load_aware(parent, [parent, a, b], cfg(-100.0, 10.0, semantics="best_candidate"))
    assert seq == 2
    assert best == 1  # b fails -85 > -70-10 against the original parent


def test_la_all_below_min_rsrp_keeps_parent():
    parent = DonorCandidate(0, 10_000, -80.0)
    cands = [parent] + [DonorCandidate(i, 0, -115.0) for i in (1, 2)]
    assert update_parent_load_aware(parent, cands, cfg(-110.0, 50.0)) == 0


# ---------- exhaustive oracle equivalence ----------

BITS_GRID = (0, 1, 2)
RSRP_GRID = (-110.0, -95.0, -85.0, -80.0)


def enumerate_cases():
    """All parent/candidate value combinations for up to 3 candidates."""
    for n in (1, 2, 3):
        for parent_bits in BITS_GRID:
            for parent_rsrp in RSRP_GRID:
                value_space = list(itertools.product(BITS_GRID, RSRP_GRID))
                for combo in itertools.product(value_space, repeat=n):
                    cands = [DonorCandidate(0, parent_bits, parent_rsrp)] + [
                        DonorCandidate(i + 1, b, r) for i, (b, r) in enumerate(combo)
                    ]
                    yield cands[0], cands


def test_la_exhaustive_against_brute_force():
    thresholds = [(-110.0, 10.0), (-100.0, 10.0), (-90.0, 5.0), (-120.0, 0.0)]
    n_cases = 0
    for min_rsrp, diff in thresholds:
        for parent, cands in enumerate_cases():
            got = update_parent_load_aware(parent, cands, cfg(min_rsrp, diff))
            want = brute_force_load_aware(parent, cands, min_rsrp, diff)
            assert got == want, (parent, cands, min_rsrp, diff)
            n_cases += 1
    assert n_cases >= 10_000


def test_la_never_returns_dominated_donor():
    # when at least one candidate passes all gates, the result cannot have
    # bits >= every other examined donor
    for parent, cands in enumerate_cases():
        got = update_parent_load_aware(parent, cands, cfg(-110.0, 10.0))
        passed_any = any(
            c.donor_id != parent.donor_id
            and c.bits < parent.bits
            and c.rsrp_dbm > -110.0
            and c.rsrp_dbm > parent.rsrp_dbm - 10.0
            for c in cands
        )
        if passed_any:
            chosen = next(c for c in cands if c.donor_id == got)
            assert any(chosen.bits < c.bits for c in cands if c.donor_id != got) or all(
                chosen.bits <= c.bits for c in cands
            )


@settings(max_examples=200, deadline=None)
@given(
    parent_bits=st.integers(0, 1_000_000),
    parent_rsrp=st.floats(-130, -60),
    cand_data=st.lists(
        st.tuples(st.integers(0, 1_000_000), st.floats(-130, -60)), min_size=1, max_size=6
    ),
    min_rsrp=st.floats(-125, -80),
    diff=st.floats(0, 30),
)
def test_la_property_matches_brute_force(parent_bits, parent_rsrp, cand_data, min_rsrp, diff):
    parent = DonorCandidate(0, parent_bits, parent_rsrp)
    cands = [parent] + [DonorCandidate(i + 1, b, r) for i, (b, r) in enumerate(cand_data)]
    assert update_parent_load_aware(parent, cands, cfg(min_rsrp, diff)) == brute_force_load_aware(
        parent, cands, min_rsrp, diff
    )
