
import pytest
from helpers import brute_force_quotas, share_vectors
from hypothesis import given, settings
from hypothesis import strategies as st

from ricsim.errors import (
    ConfigError,
    DuplicateSliceId,
    InvalidWindow,
    ShareSumExceeded,
    UnknownSlice,
)
from ricsim.ransim import CellConfig, RanSim, UeConfig, allocate_epoch
from ricsim.sm_slicing import (
    DEFAULT_SLICE_ID,
    BindUe,
    ConfigureShares,
    CreateSlice,
    SliceShare,
)

SATURATED = 64_000_000


def ss(*pairs):
    return [SliceShare(s, p) for s, p in pairs]


def sliced(shares, ues=3, dl=SATURATED, cell=None):
    ran = RanSim(cell or CellConfig(), [UeConfig(i, offered_dl_bps=dl) for i in range(1, ues + 1)])
    for i in range(1, ues + 1):
        ran.apply_slice_config(CreateSlice(i, f"op-{i}"))
        ran.apply_slice_config(BindUe(i, i))
    ran.apply_slice_config(ConfigureShares(tuple(shares)))
    return ran


# --- allocate_epoch -------------------------------------------------------------------

@pytest.mark.parametrize("shares,expected", [
    (ss((1, 75), (2, 25)), {1: 75, 2: 25}),
    (ss((1, 50), (2, 35), (3, 15)), {1: 50, 2: 35, 3: 15}),
    (ss((1, 33), (2, 33), (3, 33)), {1: 33, 2: 33, 3: 33}),
    (ss((1, 100)), {1: 100}),
    (ss((1, 0), (2, 40)), {1: 0, 2: 40}),
    ([], {}),
])
def test_allocate_examples(shares, expected):
    assert allocate_epoch(shares, 100) == expected


def test_allocate_ties_go_to_lower_slice_id():
    # 3 x 33% of 10 subframes: 3.3 each, floor(9.9) = 9 handed out, no leftover
    assert allocate_epoch(ss((3, 33), (1, 33), (2, 33)), 10) == {1: 3, 2: 3, 3: 3}
    # 50/50 of 3: 1.5 each, one leftover goes to slice 1
    assert allocate_epoch(ss((2, 50), (1, 50)), 3) == {1: 2, 2: 1}


def test_allocate_rejects_invalid():
    with pytest.raises(ShareSumExceeded):
        allocate_epoch(ss((1, 60), (2, 60)))


def test_brute_force_oracle_known_case():
    assert brute_force_quotas(ss((1, 50), (2, 50)), 3) == {1: 2, 2: 1}


@settings(max_examples=500, deadline=None)
@given(share_vectors, st.integers(1, 250))
def test_allocate_matches_oracle_any_epoch(shares, epoch):
    q = allocate_epoch(shares, epoch)
    assert q == brute_force_quotas(shares, epoch)
    assert sum(q.values()) <= epoch


# --- stepping -------------------------------------------------------------------------

def test_saturated_single_slice_serves_budget_every_subframe():
    ran = sliced(ss((1, 100)), ues=1)
    ran.advance_to(300)
    assert {r.dl_bytes for r in list(ran.history)} == {4000}


def test_epoch_quotas_exact_with_saturation():
    ran = sliced(ss((1, 75), (2, 25)))
    ran.advance_to(500)
    for epoch in range(5):
        window = list(ran.history)[epoch * 100:(epoch + 1) * 100]
        counts = {sid: sum(1 for r in window if r.slice_id == sid) for sid in (1, 2, 3)}
        assert counts == {1: 75, 2: 25, 3: 0}


def test_backlog_limited_rate():
    ran = RanSim(CellConfig(), [UeConfig(1, offered_ul_bps=4_000_000)])
    ran.advance_to(1000)
    assert ran.ues[1].cum_ul_bytes == 500_000
    ran.advance_to(3000)
    assert ran.ues[1].cum_ul_bytes == 1_500_000


def test_fractional_arrivals_accumulate():
    ran = RanSim(CellConfig(), [UeConfig(1, offered_ul_bps=12_345)])
    ran.advance_to(8000)
    assert ran.ues[1].cum_ul_bytes == 12_345 * 8 // 8


def test_default_slice_when_no_slices():
    ran = RanSim(CellConfig(), [UeConfig(1, offered_dl_bps=1_000_000)])
    ran.advance_to(200)
    assert ran.quota_log[0] == (0, {DEFAULT_SLICE_ID: 100})
    assert all(r.slice_id == DEFAULT_SLICE_ID for r in ran.history)


def test_configure_mid_epoch_is_deferred():
    ran = sliced(ss((1, 100)))
    ran.advance_to(37)
    assert ran.apply_slice_config(ConfigureShares(tuple(ss((1, 75), (2, 25)))), now_ms=37) == "deferred"
    ran.advance_to(100)
    assert all(r.slice_id == 1 for r in ran.history)
    ran.advance_to(200)
    assert [q for t, q in ran.quota_log] == [{1: 100, 2: 0, 3: 0}, {1: 75, 2: 25, 3: 0}]
    assert ran.quota_log[1][0] == 100
    tail = list(ran.history)[100:]
    assert sum(r.slice_id == 2 for r in tail) == 25


def test_bind_moves_ue_between_slices():
    ran = sliced(ss((1, 50), (2, 50)), ues=2)
    ran.advance_to(100)
    before = ran.slices[2].cum_dl_bytes
    ran.apply_slice_config(BindUe(1, 2), now_ms=100)
    ran.advance_to(200)
    moved = [r for r in list(ran.history)[100:] if r.slice_id == 2]
    assert any(1 in r.served for r in moved)
    assert all(1 not in r.served for r in list(ran.history)[100:] if r.slice_id == 1)
    assert ran.slices[2].cum_dl_bytes > before


def test_zero_share_slice_accumulates_backlog():
    ran = sliced(ss((1, 100)), ues=2)
    ran.advance_to(1000)
    assert ran.ues[2].cum_dl_bytes == 0
    assert ran.ues[2].backlog_dl_bytes == SATURATED // 8


def test_strict_slicing_idles_unused_quota():
    ran = sliced(ss((1, 50), (2, 50)), ues=2, dl=0)
    ran.ues[1].offered_dl_bps = SATURATED
    ran.advance_to(1000)
    assert ran.slices[1].cum_dl_bytes == 500 * 4000


def test_slice_config_errors():
    ran = sliced(ss((1, 100)))
    with pytest.raises(DuplicateSliceId):
        ran.apply_slice_config(CreateSlice(1, "again"))
    with pytest.raises(DuplicateSliceId):
        ran.apply_slice_config(CreateSlice(DEFAULT_SLICE_ID, "reserved"))
    with pytest.raises(UnknownSlice):
        ran.apply_slice_config(BindUe(1, 9))
    with pytest.raises(UnknownSlice):
        ran.apply_slice_config(ConfigureShares(tuple(ss((9, 10)))))
    with pytest.raises(ShareSumExceeded):
        ran.apply_slice_config(ConfigureShares(tuple(ss((1, 60), (2, 60)))))


def test_cell_config_checks():
    assert CellConfig(10).n_prb == 50
    assert CellConfig(1.4).n_prb == 6
    with pytest.raises(ConfigError):
        CellConfig(7)
    with pytest.raises(ConfigError):
        CellConfig(10, n_prb=25)


# --- snapshot -------------------------------------------------------------------------

def test_idle_snapshot():
    ran = RanSim(CellConfig())
    ran.advance_to(1000)
    snap = ran.snapshot(0, 1000)
    assert (snap.prb_used_dl, snap.prb_used_ul, snap.prb_available, snap.active_ues) == (0, 0, 50, 0)
    assert snap.sessions == () and snap.slices == ()


def test_snapshot_at_ten_seconds():
    ran = RanSim(CellConfig(), [UeConfig(1, offered_ul_bps=4_000_000), UeConfig(2, offered_ul_bps=7_000_000)])
    ran.advance_to(12_000)
    snap = ran.snapshot(9000, 10_000)
    cum = {s.ue_id: s.cum_ul_bytes for s in snap.sessions}
    assert cum == {1: 4_000_000 * 10 // 8, 2: 7_000_000 * 10 // 8}
    assert snap.qci_totals() == {9: (13_750_000, 0)}


def test_prb_average_rounds_half_up():
    # 1375 B of 4000 per subframe -> ceil(50 * 1375 / 4000) = 18 PRBs each subframe
    ran = RanSim(CellConfig(), [UeConfig(1, offered_ul_bps=11_000_000)])
    ran.advance_to(1000)
    assert ran.snapshot(0, 1000).prb_used_ul == 18
    # alternating 1 and 0 PRB averages to 0.5 -> 1
    ran = RanSim(CellConfig(), [UeConfig(1, offered_ul_bps=4000)])
    ran.advance_to(2)
    assert [r.prb_ul for r in ran.history] == [0, 1]
    assert ran.snapshot(0, 2).prb_used_ul == 1


def test_phase3_window_counts():
    ran = sliced(ss((1, 50), (2, 35), (3, 15)))
    ran.advance_to(1000)
    snap = ran.snapshot(0, 100)
    assert {s.slice_id: s.subframes_allocated for s in snap.slices} == {1: 50, 2: 35, 3: 15}


def test_invalid_windows():
    ran = RanSim(CellConfig())
    ran.advance_to(100)
    with pytest.raises(InvalidWindow):
        ran.snapshot(50, 40)
    with pytest.raises(InvalidWindow):
        ran.snapshot(0, 200)


# --- properties -----------------------------------------------------------------------

offered = st.integers(0, 40_000_000)


@settings(max_examples=60, deadline=None)
@given(share_vectors.filter(lambda v: all(1 <= s.slice_id <= 3 for s in v)),
       st.lists(offered, min_size=3, max_size=3), st.integers(1, 400))
def test_conservation_and_monotonicity(shares, loads, horizon):
    ran = RanSim(CellConfig(), [UeConfig(i + 1, offered_dl_bps=load, offered_ul_bps=load // 2)
                                for i, load in enumerate(loads)])
    for i in range(1, 4):
        ran.apply_slice_config(CreateSlice(i, f"s{i}"))
        ran.apply_slice_config(BindUe(i, i))
    ran.apply_slice_config(ConfigureShares(shares))
    prev = {u: (0, 0) for u in ran.ues}
    budget = ran.cell.subframe_budget
    for t in range(horizon):
        r = ran.step_subframe()
        assert r.dl_bytes <= budget and r.ul_bytes <= budget
        for u, ue in ran.ues.items():
            assert ue.cum_ul_bytes >= prev[u][0] and ue.cum_dl_bytes >= prev[u][1]
            prev[u] = (ue.cum_ul_bytes, ue.cum_dl_bytes)
        for sl in ran.slices.values():
            assert sl.served_this_epoch <= sl.allocated_this_epoch <= sl.quota_this_epoch
        assert sum(s.quota_this_epoch for s in ran.slices.values()) <= ran.cell.epoch_subframes


@settings(max_examples=40, deadline=None)
@given(share_vectors.filter(lambda v: all(1 <= s.slice_id <= 3 for s in v)))
def test_saturated_equality(shares):
    ran = sliced(shares)
    ran.advance_to(200)
    served = sum(r.dl_bytes for r in list(ran.history)[100:])
    total = sum(s.share_percent for s in shares)
    assert served == total * ran.cell.subframe_budget
    quotas = allocate_epoch(shares)
    for sid in (1, 2, 3):
        assert sum(r.slice_id == sid for r in list(ran.history)[100:]) == quotas.get(sid, 0)


def test_determinism():
    def run():
        ran = sliced(ss((1, 50), (2, 35), (3, 15)), dl=9_000_000)
        ran.advance_to(777)
        return list(ran.history), ran.quota_log
    assert run() == run()
