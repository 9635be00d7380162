"""Subframe-level RAN simulator with strict round-robin time slicing.

One call to :meth:`RanSim.step_subframe` simulates the 1 ms subframe
``[now, now + 1)``. Quotas are recomputed at every epoch boundary (every
``epoch_subframes`` subframes) from the share vector in force at that
moment; share changes arriving mid-epoch wait for the next boundary.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from ricsim.errors import (
    ConfigError,
    DuplicateSliceId,
    InvalidWindow,
    UnknownSlice,
)
from ricsim.sm_kpm import DEFAULT_QCI
from ricsim.sm_slicing import (
    DEFAULT_SLICE_ID,
    BindUe,
    ConfigureShares,
    CreateSlice,
    SliceShare,
    check_shares,
)

# LTE channel bandwidth (MHz) -> PRB count
PRB_TABLE = {1.4: 6, 3: 15, 5: 25, 10: 50, 15: 75, 20: 100}

SUBFRAME_MS = 1
EPOCH_SUBFRAMES = 100
HISTORY_SUBFRAMES = 600_000


@dataclass
class CellConfig:
    bandwidth_mhz: float = 10
    n_prb: int | None = None
    capacity_bps: int = 32_000_000
    epoch_subframes: int = EPOCH_SUBFRAMES

    def __post_init__(self):
        if self.bandwidth_mhz not in PRB_TABLE:
            raise ConfigError("cell.bandwidth_mhz", f"{self.bandwidth_mhz} not in {sorted(PRB_TABLE)}")
        expected = PRB_TABLE[self.bandwidth_mhz]
        if self.n_prb is None:
            self.n_prb = expected
        elif self.n_prb != expected:
            raise ConfigError("cell.n_prb", f"{self.n_prb} does not match {self.bandwidth_mhz} MHz ({expected})")
        if self.capacity_bps < 8000:
            raise ConfigError("cell.capacity_bps", "must be at least 8000 (one byte per subframe)")

    @property
    def subframe_budget(self) -> int:
        """Bytes one direction can carry in one subframe."""
        return self.capacity_bps // 8000


@dataclass
class UeConfig:
    ue_id: int
    offered_ul_bps: int = 0
    offered_dl_bps: int = 0
    qci: int = DEFAULT_QCI


@dataclass
class UeState:
    ue_id: int
    qci: int
    offered_ul_bps: int
    offered_dl_bps: int
    slice_id: int | None = None
    cum_ul_bytes: int = 0
    cum_dl_bytes: int = 0
    backlog_ul_bytes: int = 0
    backlog_dl_bytes: int = 0
    # leftover bits*1000 not yet turned into whole arrival bytes
    _ul_acc: int = 0
    _dl_acc: int = 0


@dataclass
class SliceState:
    slice_id: int
    name: str
    share_percent: int = 0
    quota_this_epoch: int = 0
    allocated_this_epoch: int = 0
    served_this_epoch: int = 0
    cum_dl_bytes: int = 0
    cum_ul_bytes: int = 0
    rr_cursor: int = 0


@dataclass(frozen=True)
class SubframeResult:
    t_start: int
    slice_id: int | None
    served: dict  # ue_id -> (ul_bytes, dl_bytes)
    prb_ul: int
    prb_dl: int

    @property
    def dl_bytes(self):
        return sum(dl for _, dl in self.served.values())

    @property
    def ul_bytes(self):
        return sum(ul for ul, _ in self.served.values())


@dataclass(frozen=True)
class SessionStat:
    ue_id: int
    qci: int
    cum_ul_bytes: int
    cum_dl_bytes: int


@dataclass(frozen=True)
class SliceMeasurement:
    slice_id: int
    subframes_allocated: int
    cum_dl_bytes: int
    throughput_bps: int


@dataclass(frozen=True)
class RanSnapshot:
    period_start_ms: int
    period_end_ms: int
    prb_used_dl: int
    prb_used_ul: int
    prb_available: int
    active_ues: int
    sessions: tuple[SessionStat, ...]
    slices: tuple[SliceMeasurement, ...]

    def qci_totals(self) -> dict[int, tuple[int, int]]:
        """Per-QCI ``(cum_ul, cum_dl)`` summed over sessions."""
        out: dict[int, tuple[int, int]] = {}
        for s in self.sessions:
            ul, dl = out.get(s.qci, (0, 0))
            out[s.qci] = (ul + s.cum_ul_bytes, dl + s.cum_dl_bytes)
        return out


def allocate_epoch(shares, epoch_subframes: int = EPOCH_SUBFRAMES) -> dict[int, int]:
    """Turn percent shares into whole-subframe quotas by largest remainder.

    The number of subframes handed out is ``floor(sum(share) * E / 100)``;
    each slice first gets ``floor(share * E / 100)`` and the leftovers go to
    the largest remainders, lower slice id first on ties.
    """
    check_shares(shares)
    total = sum(s.share_percent for s in shares) * epoch_subframes // 100
    quotas = {}
    remainders = []
    for s in shares:
        q, rem = divmod(s.share_percent * epoch_subframes, 100)
        quotas[s.slice_id] = q
        if rem:
            remainders.append((-rem, s.slice_id))
    for _, sid in sorted(remainders)[:total - sum(quotas.values())]:
        quotas[sid] += 1
    return quotas


def _half_up_mean(total: int, n: int) -> int:
    return (2 * total + n) // (2 * n) if n else 0


class RanSim:
    def __init__(self, cell: CellConfig | None = None, ues=(), history_subframes=HISTORY_SUBFRAMES):
        self.cell = cell or CellConfig()
        self.now_ms = 0
        self.ues: dict[int, UeState] = {}
        self.slices: dict[int, SliceState] = {}
        self._default = SliceState(DEFAULT_SLICE_ID, "default", share_percent=100)
        self._pending_shares: dict[int, int] | None = None
        self._slice_cursor = -1
        self.history: deque[SubframeResult] = deque(maxlen=history_subframes)
        self.quota_log: list[tuple[int, dict[int, int]]] = []
        for ue in ues:
            self.add_ue(ue)

    # --- configuration -----------------------------------------------------------

    def add_ue(self, cfg: UeConfig):
        if cfg.ue_id in self.ues:
            raise ConfigError(f"ue.{cfg.ue_id}", "duplicate UE id")
        self.ues[cfg.ue_id] = UeState(cfg.ue_id, cfg.qci, cfg.offered_ul_bps, cfg.offered_dl_bps)

    def apply_slice_config(self, cmd, now_ms: int | None = None) -> str:
        """Apply one slicing command; returns ``"applied"`` or ``"deferred"``."""
        if now_ms is not None:
            self.advance_to(now_ms)
        if isinstance(cmd, CreateSlice):
            if cmd.slice_id in self.slices or cmd.slice_id == DEFAULT_SLICE_ID:
                raise DuplicateSliceId(f"slice {cmd.slice_id} already exists or is reserved")
            self.slices[cmd.slice_id] = SliceState(cmd.slice_id, cmd.name)
            return "applied"
        if isinstance(cmd, BindUe):
            if cmd.slice_id not in self.slices:
                raise UnknownSlice(f"slice {cmd.slice_id} does not exist")
            if cmd.ue_id not in self.ues:
                raise UnknownSlice(f"UE {cmd.ue_id} is not attached")
            self.ues[cmd.ue_id].slice_id = cmd.slice_id
            return "applied"
        if isinstance(cmd, ConfigureShares):
            check_shares(cmd.shares)
            for s in cmd.shares:
                if s.slice_id not in self.slices:
                    raise UnknownSlice(f"slice {s.slice_id} does not exist")
            self._pending_shares = {s.slice_id: s.share_percent for s in cmd.shares}
            return "deferred"
        raise TypeError(f"not a slice command: {cmd!r}")

    # --- stepping ----------------------------------------------------------------

    def _active_slices(self) -> list[SliceState]:
        return [self.slices[k] for k in sorted(self.slices)] if self.slices else [self._default]

    def _start_epoch(self):
        if self._pending_shares is not None:
            for sl in self.slices.values():
                sl.share_percent = self._pending_shares.get(sl.slice_id, 0)
            self._pending_shares = None
        active = self._active_slices()
        quotas = allocate_epoch([SliceShare(s.slice_id, s.share_percent) for s in active],
                                self.cell.epoch_subframes)
        for s in active:
            s.quota_this_epoch = quotas.get(s.slice_id, 0)
            s.allocated_this_epoch = 0
            s.served_this_epoch = 0
        self.quota_log.append((self.now_ms, quotas))

    def _pick_slice(self) -> SliceState | None:
        candidates = [s for s in self._active_slices() if s.allocated_this_epoch < s.quota_this_epoch]
        if not candidates:
            return None
        after = [s for s in candidates if s.slice_id > self._slice_cursor]
        chosen = (after or candidates)[0]
        self._slice_cursor = chosen.slice_id
        return chosen

    def _members(self, sl: SliceState) -> list[UeState]:
        if sl is self._default:
            return [self.ues[k] for k in sorted(self.ues)]
        return [self.ues[k] for k in sorted(self.ues) if self.ues[k].slice_id == sl.slice_id]

    def step_subframe(self) -> SubframeResult:
        if self.now_ms % self.cell.epoch_subframes == 0:
            self._start_epoch()
        for ue in self.ues.values():
            ue._ul_acc += ue.offered_ul_bps
            ue._dl_acc += ue.offered_dl_bps
            ue.backlog_ul_bytes += ue._ul_acc // 8000
            ue.backlog_dl_bytes += ue._dl_acc // 8000
            ue._ul_acc %= 8000
            ue._dl_acc %= 8000

        budget = self.cell.subframe_budget
        served: dict[int, tuple[int, int]] = {}
        sl = self._pick_slice()
        if sl is not None:
            sl.allocated_this_epoch += 1
            members = self._members(sl)
            if any(u.backlog_ul_bytes or u.backlog_dl_bytes for u in members):
                sl.served_this_epoch += 1
            if members:
                start = sl.rr_cursor % len(members)
                order = members[start:] + members[:start]
                sl.rr_cursor = (start + 1) % len(members)
                ul_left = dl_left = budget
                for ue in order:
                    ul = min(ue.backlog_ul_bytes, ul_left)
                    dl = min(ue.backlog_dl_bytes, dl_left)
                    ul_left -= ul
                    dl_left -= dl
                    if ul or dl:
                        ue.backlog_ul_bytes -= ul
                        ue.backlog_dl_bytes -= dl
                        ue.cum_ul_bytes += ul
                        ue.cum_dl_bytes += dl
                        served[ue.ue_id] = (ul, dl)
                sl.cum_ul_bytes += budget - ul_left
                sl.cum_dl_bytes += budget - dl_left

        n_prb = self.cell.n_prb
        ul_total = sum(ul for ul, _ in served.values())
        dl_total = sum(dl for _, dl in served.values())
        result = SubframeResult(self.now_ms, sl.slice_id if sl is not None else None, served,
                                prb_ul=math.ceil(n_prb * ul_total / budget),
                                prb_dl=math.ceil(n_prb * dl_total / budget))
        self.history.append(result)
        self.now_ms += SUBFRAME_MS
        return result

    def advance_to(self, t_ms: int):
        while self.now_ms < t_ms:
            self.step_subframe()

    # --- measurement ---------------------------------------------------------------

    def _window(self, start: int, end: int) -> list[SubframeResult]:
        if end < start:
            raise InvalidWindow(f"period end {end} before start {start}")
        if end > self.now_ms:
            raise InvalidWindow(f"period end {end} is in the future (now {self.now_ms})")
        oldest = self.history[0].t_start if self.history else self.now_ms
        if end > start and start < oldest:
            raise InvalidWindow(f"period start {start} older than retained history ({oldest})")
        # history is contiguous and ends at now_ms - 1
        first = len(self.history) - (self.now_ms - start)
        last = len(self.history) - (self.now_ms - end)
        return [self.history[i] for i in range(max(first, 0), last)]

    def _after(self, end: int) -> list[SubframeResult]:
        n = self.now_ms - end
        return [self.history[i] for i in range(len(self.history) - n, len(self.history))]

    def snapshot(self, period_start_ms: int, period_end_ms: int) -> RanSnapshot:
        """Metrics for the subframes in ``[period_start_ms, period_end_ms)``. Read-only."""
        window = self._window(period_start_ms, period_end_ms)
        later = self._after(period_end_ms)
        n = len(window)

        sessions = []
        active = 0
        for ue_id in sorted(self.ues):
            ue = self.ues[ue_id]
            ul_after = sum(r.served.get(ue_id, (0, 0))[0] for r in later)
            dl_after = sum(r.served.get(ue_id, (0, 0))[1] for r in later)
            sessions.append(SessionStat(ue_id, ue.qci, ue.cum_ul_bytes - ul_after, ue.cum_dl_bytes - dl_after))
            moved = any(ue_id in r.served for r in window)
            if ue.offered_ul_bps or ue.offered_dl_bps or moved or ue.backlog_ul_bytes or ue.backlog_dl_bytes:
                active += 1

        slices = []
        for sl in (self._active_slices() if self.slices or self.ues else []):
            allocated = sum(1 for r in window if r.slice_id == sl.slice_id)
            dl_window = sum(r.dl_bytes for r in window if r.slice_id == sl.slice_id)
            dl_after = sum(r.dl_bytes for r in later if r.slice_id == sl.slice_id)
            tput = dl_window * 8000 // n if n else 0
            slices.append(SliceMeasurement(sl.slice_id, allocated, sl.cum_dl_bytes - dl_after, tput))

        return RanSnapshot(
            period_start_ms, period_end_ms,
            prb_used_dl=_half_up_mean(sum(r.prb_dl for r in window), n),
            prb_used_ul=_half_up_mean(sum(r.prb_ul for r in window), n),
            prb_available=self.cell.n_prb,
            active_ues=active,
            sessions=tuple(sessions),
            slices=tuple(slices),
        )
