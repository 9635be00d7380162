"""KPIMON: subscribes to periodic KPM reports and turns them into metric rows."""

from __future__ import annotations

import logging

from ricsim import sm_kpm
from ricsim.e2ap import ActionType, RicAction
from ricsim.errors import CodecError
from ricsim.sm_kpm import CONTAINER_LABELS, ContainerType
from ricsim.xapps.client import EXIT_SUBSCRIPTION, Xapp, nodes_with
from ricsim.xapps.metrics import MetricRow

log = logging.getLogger(__name__)

REPORT_ACTION_ID = 1


class Kpimon(Xapp):
    def __init__(self, descriptor, clock, network, ric_addr, sink, period_ms: int = 1000, on_exit=None):
        super().__init__(descriptor, clock, network, ric_addr, sink, on_exit)
        if sm_kpm.SM_NAME not in descriptor.consumes:
            raise ValueError(f"descriptor {descriptor.xapp_name!r} does not consume {sm_kpm.SM_NAME}")
        self.period_ms = period_ms
        self.subscriptions = {}
        self.reports = 0
        self._last: dict[tuple, int] = {}

    def _discovered(self, entries):
        targets = nodes_with(entries, sm_kpm.SM_NAME)
        if not targets:
            self.stop(EXIT_SUBSCRIPTION, f"no connected node exposes {sm_kpm.SM_NAME}")
            return
        trigger = sm_kpm.encode_trigger(sm_kpm.KpmEventTrigger(self.period_ms))
        for entry, function_id in targets:
            self.client.subscribe(entry.node, function_id, trigger,
                                  [RicAction(REPORT_ACTION_ID, ActionType.REPORT)],
                                  lambda res, node=entry.node: self._subscribed(node, res),
                                  self.on_indication)

    def _subscribed(self, node, result):
        if result.cause is not None:
            self.stop(EXIT_SUBSCRIPTION, f"subscription to {node} failed: {result.cause}")
            return
        self.subscriptions[result.request_id] = node

    def on_indication(self, ind):
        try:
            header = sm_kpm.decode_header(ind.header)
            report = sm_kpm.decode_report(ind.message)
        except CodecError as exc:
            self.warnings += 1
            log.warning("skipping undecodable KPM indication %d: %s", ind.sequence_number, exc)
            return
        self.reports += 1
        for row in self.rows_for(header, report):
            self.sink.append(row)

    def rows_for(self, header, report) -> list[MetricRow]:
        t, node = header.timestamp_ms, header.node_id
        rows = []

        def emit(container, metric, key, value, delta=False):
            rows.append(MetricRow(t, node, container, metric, key, value))
            if delta:
                prev = self._last.get((node, metric, key), 0)
                self._last[(node, metric, key)] = value
                rows.append(MetricRow(t, node, container, metric + "_delta", key, value - prev))

        du = report.container(ContainerType.O_DU).metrics
        label = CONTAINER_LABELS[ContainerType.O_DU]
        emit(label, "prb_used_dl", None, du.prb_used_dl)
        emit(label, "prb_used_ul", None, du.prb_used_ul)
        emit(label, "prb_available", None, du.prb_available)
        cp = report.container(ContainerType.O_CU_CP).metrics
        emit(CONTAINER_LABELS[ContainerType.O_CU_CP], "active_ues", None, cp.active_ues)

        label = CONTAINER_LABELS[ContainerType.O_CU_UP]
        per_qci: dict[int, list[int]] = {}
        for s in report.container(ContainerType.O_CU_UP).metrics.stats:
            emit(label, f"ue{s.ue_id}_ul_bytes", s.qci, s.cum_ul_bytes, delta=True)
            emit(label, f"ue{s.ue_id}_dl_bytes", s.qci, s.cum_dl_bytes, delta=True)
            totals = per_qci.setdefault(s.qci, [0, 0])
            totals[0] += s.cum_ul_bytes
            totals[1] += s.cum_dl_bytes
        for qci in sorted(per_qci):
            emit(label, "ul_bytes", qci, per_qci[qci][0], delta=True)
            emit(label, "dl_bytes", qci, per_qci[qci][1], delta=True)
        return rows
