"""RAN slicing xApp: creates slices, follows a share schedule via CONTROL and
records per-slice REPORT measurements."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ricsim import sm_kpm, sm_slicing
from ricsim.e2ap import ActionType, ControlOutcome, RicAction
from ricsim.errors import CodecError, ConfigError
from ricsim.sm_slicing import (
    BindUe,
    ConfigureShares,
    CreateSlice,
    SliceShare,
    validate_shares,
)
from ricsim.xapps.client import EXIT_SUBSCRIPTION, Xapp, nodes_with
from ricsim.xapps.metrics import MetricRow

log = logging.getLogger(__name__)

CONTAINER = "SLICE"
REPORT_ACTION_ID = 1


@dataclass(frozen=True)
class Phase:
    at_s: float
    shares: tuple[SliceShare, ...]


@dataclass(frozen=True)
class SliceSchedule:
    phases: tuple[Phase, ...] = ()
    slices: tuple[tuple[int, str], ...] = ()
    bindings: tuple[tuple[int, int], ...] = ()  # (ue_id, slice_id)

    def __post_init__(self):
        times = [p.at_s for p in self.phases]
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ConfigError("slicing.phase", f"phase times must strictly increase, got {times}")
        for p in self.phases:
            violation = validate_shares(p.shares)
            if violation is not None:
                raise ConfigError("slicing.phase", f"phase at {p.at_s}s: {violation.value}")

    def phase_at(self, t_s: float) -> Phase | None:
        current = None
        for p in self.phases:
            if p.at_s <= t_s:
                current = p
        return current


def three_operator_schedule(phase_s: float = 60) -> SliceSchedule:
    """Three operators, one UE each: 100 / 75-25 / 50-35-15 percent phases."""
    return SliceSchedule(
        phases=(
            Phase(0, (SliceShare(1, 100),)),
            Phase(phase_s, (SliceShare(1, 75), SliceShare(2, 25))),
            Phase(2 * phase_s, (SliceShare(1, 50), SliceShare(2, 35), SliceShare(3, 15))),
        ),
        slices=((1, "operator-1"), (2, "operator-2"), (3, "operator-3")),
        bindings=((1, 1), (2, 2), (3, 3)),
    )


@dataclass
class ControlRecord:
    sent_ms: int
    command: object
    outcome: str
    done_ms: int | None = None
    attempts: int = 1


class SlicingXapp(Xapp):
    def __init__(self, descriptor, clock, network, ric_addr, sink, schedule: SliceSchedule,
                 report_period_ms: int = 1000, start_ms: int = 0, on_exit=None):
        super().__init__(descriptor, clock, network, ric_addr, sink, on_exit)
        if sm_slicing.SM_NAME not in descriptor.consumes:
            raise ValueError(f"descriptor {descriptor.xapp_name!r} does not consume {sm_slicing.SM_NAME}")
        if schedule.phases and ActionType.CONTROL not in descriptor.produces:
            raise ValueError(f"descriptor {descriptor.xapp_name!r} does not produce CONTROL")
        self.schedule = schedule
        self.report_period_ms = report_period_ms
        self.start_ms = start_ms
        self.node = None
        self.function_id = None
        self.controls: list[ControlRecord] = []
        self.reports = 0

    def _discovered(self, entries):
        targets = nodes_with(entries, sm_slicing.SM_NAME)
        if not targets:
            self.stop(EXIT_SUBSCRIPTION, f"no connected node exposes {sm_slicing.SM_NAME}")
            return
        entry, self.function_id = targets[0]
        self.node = entry.node
        for slice_id, name in self.schedule.slices:
            self._control(CreateSlice(slice_id, name))
        for ue_id, slice_id in self.schedule.bindings:
            self._control(BindUe(ue_id, slice_id))
        trigger = sm_kpm.encode_trigger(sm_kpm.KpmEventTrigger(self.report_period_ms))
        self.client.subscribe(self.node, self.function_id, trigger,
                              [RicAction(REPORT_ACTION_ID, ActionType.REPORT)],
                              self._subscribed, self.on_indication)
        for phase in self.schedule.phases:
            t = max(self.clock.now_ms(), self.start_ms + round(phase.at_s * 1000))
            self.clock.call_at(t, lambda p=phase: self._control(ConfigureShares(p.shares)))

    def _subscribed(self, result):
        if result.cause is not None:
            self.stop(EXIT_SUBSCRIPTION, f"slice report subscription failed: {result.cause}")

    def _control(self, cmd, record: ControlRecord | None = None):
        if self.exit_code is not None:
            return
        if record is None:
            record = ControlRecord(self.clock.now_ms(), cmd, "pending")
            self.controls.append(record)
        else:
            record.attempts += 1

        def done(result):
            if result.outcome == ControlOutcome.FAILURE:
                if record.attempts < 2:
                    log.info("control %r failed (%s), retrying once", cmd, result.cause)
                    self._control(cmd, record)
                    return
                record.outcome = f"failed:{result.cause}"
                log.warning("control %r failed twice: %s", cmd, result.cause)
            else:
                record.outcome = ControlOutcome(result.outcome).name.lower()
            record.done_ms = self.clock.now_ms()

        self.client.control(self.node, self.function_id, b"", sm_slicing.encode_control(cmd), True, done)

    def on_indication(self, ind):
        try:
            header = sm_kpm.decode_header(ind.header)
            report = sm_slicing.decode_slice_report(ind.message)
        except CodecError as exc:
            self.warnings += 1
            log.warning("skipping undecodable slice indication: %s", exc)
            return
        self.reports += 1
        t, node = header.timestamp_ms, header.node_id
        for rec in report.records:
            self.sink.append(MetricRow(t, node, CONTAINER, "subframes", rec.slice_id,
                                       rec.subframes_allocated_in_period))
            self.sink.append(MetricRow(t, node, CONTAINER, "cum_dl_bytes", rec.slice_id, rec.cum_dl_bytes))
            self.sink.append(MetricRow(t, node, CONTAINER, "throughput_bps", rec.slice_id,
                                       rec.throughput_bps_in_period))
