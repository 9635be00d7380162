"""Shared hypothesis strategies and an in-memory RIC + node harness."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from hypothesis import strategies as st

from ricsim import e2ap, sm_kpm, sm_slicing
from ricsim.agent import AgentConfig, E2Agent
from ricsim.clock import VirtualLoop
from ricsim.ransim import CellConfig, RanSim, UeConfig
from ricsim.ric import RicConfig, RicCore
from ricsim.transport import MemoryNetwork

E2_ADDR = "ric:e2"
XAPP_ADDR = "ric:xapp"
PLMN = e2ap.plmn_from_str("001/01")
NODE = e2ap.GlobalE2NodeId(PLMN, e2ap.NodeType.EN_GNB, 1)

# --- strategies -----------------------------------------------------------------------

u8 = st.integers(0, 0xFF)
u16 = st.integers(0, 0xFFFF)
u32 = st.integers(0, 0xFFFF_FFFF)
u64 = st.integers(0, (1 << 64) - 1)
fid = st.integers(0, 4095)
small_bytes = st.binary(max_size=40)


def short_text(max_bytes):
    return st.text(max_size=12).filter(lambda s: len(s.encode("utf-8")) <= max_bytes)


node_ids = st.builds(e2ap.GlobalE2NodeId, st.binary(min_size=3, max_size=3),
                     st.sampled_from(list(e2ap.NodeType)), st.integers(0, (1 << 20) - 1))
causes = st.builds(e2ap.Cause, st.sampled_from(list(e2ap.CauseCategory)), u8)
request_ids = st.builds(e2ap.RicRequestId, u16, u16)
functions = st.builds(e2ap.RanFunctionItem, fid, u16, short_text(64), small_bytes)
actions = st.builds(e2ap.RicAction, u8, st.sampled_from(list(e2ap.ActionType)), small_bytes)
sdl_items = st.builds(e2ap.SdlItem, short_text(1024), small_bytes, u64)


def tuples(elem, max_size=4):
    return st.lists(elem, max_size=max_size).map(tuple)


PDU_STRATEGIES = {
    e2ap.E2SetupRequest: st.builds(e2ap.E2SetupRequest, node_ids, tuples(functions)),
    e2ap.E2SetupResponse: st.builds(e2ap.E2SetupResponse, tuples(fid)),
    e2ap.E2SetupFailure: st.builds(e2ap.E2SetupFailure, causes),
    e2ap.ResetRequest: st.builds(e2ap.ResetRequest, causes),
    e2ap.ResetResponse: st.just(e2ap.ResetResponse()),
    e2ap.RicSubscriptionRequest: st.builds(e2ap.RicSubscriptionRequest, request_ids, fid, small_bytes,
                                           tuples(actions)),
    e2ap.RicSubscriptionResponse: st.builds(e2ap.RicSubscriptionResponse, request_ids, tuples(u8)),
    e2ap.RicSubscriptionFailure: st.builds(e2ap.RicSubscriptionFailure, request_ids, causes),
    e2ap.RicIndication: st.builds(e2ap.RicIndication, request_ids, fid, u8, u32, small_bytes, small_bytes),
    e2ap.RicControlRequest: st.builds(e2ap.RicControlRequest, request_ids, fid, small_bytes, small_bytes,
                                      st.booleans()),
    e2ap.RicControlAck: st.builds(e2ap.RicControlAck, request_ids),
    e2ap.RicControlFailure: st.builds(e2ap.RicControlFailure, request_ids, causes),
    e2ap.XappRegister: st.builds(e2ap.XappRegister, short_text(64)),
    e2ap.XappRegisterAck: st.builds(e2ap.XappRegisterAck, short_text(64)),
    e2ap.XappSubscribe: st.builds(e2ap.XappSubscribe, u32, node_ids, fid, small_bytes, tuples(actions)),
    e2ap.XappSubscribeResult: st.builds(e2ap.XappSubscribeResult, u32, st.none() | request_ids,
                                        st.none() | tuples(u8), st.none() | causes),
    e2ap.XappControl: st.builds(e2ap.XappControl, u32, node_ids, fid, small_bytes, small_bytes, st.booleans()),
    e2ap.XappControlResult: st.builds(e2ap.XappControlResult, u32,
                                      st.sampled_from([int(o) for o in e2ap.ControlOutcome]),
                                      st.none() | causes),
    e2ap.XappSdlGet: st.builds(e2ap.XappSdlGet, u32, short_text(256), short_text(1024)),
    e2ap.XappSdlGetResult: st.builds(e2ap.XappSdlGetResult, u32, st.booleans(), small_bytes, u64),
    e2ap.XappSdlList: st.builds(e2ap.XappSdlList, u32, short_text(256)),
    e2ap.XappSdlListResult: st.builds(e2ap.XappSdlListResult, u32, tuples(sdl_items)),
}
any_pdu = st.one_of(*PDU_STRATEGIES.values())

qci_stats = st.builds(sm_kpm.QciStat, u8, u64, u64, u32)


@st.composite
def kpm_reports(draw):
    avail = draw(u16)
    du = sm_kpm.DuMetrics(draw(st.integers(0, avail)), draw(st.integers(0, avail)), avail)
    cids = draw(st.lists(u8, min_size=3, max_size=3, unique=True))
    containers = [
        sm_kpm.KpmContainer(sm_kpm.ContainerType.O_DU, cids[0], du),
        sm_kpm.KpmContainer(sm_kpm.ContainerType.O_CU_CP, cids[1], sm_kpm.CuCpMetrics(draw(u16))),
        sm_kpm.KpmContainer(sm_kpm.ContainerType.O_CU_UP, cids[2],
                            sm_kpm.CuUpMetrics(draw(tuples(qci_stats, 6)))),
    ]
    return sm_kpm.KpmReport(tuple(draw(st.permutations(containers))))


share_vectors = st.lists(st.tuples(st.integers(0, 254), st.integers(0, 100)), max_size=5,
                         unique_by=lambda p: p[0]).filter(lambda v: sum(p for _, p in v) <= 100).map(
    lambda v: tuple(sm_slicing.SliceShare(s, p) for s, p in v))

slice_controls = st.one_of(
    st.builds(sm_slicing.CreateSlice, u8, short_text(32)),
    st.builds(sm_slicing.BindUe, u32, u8),
    st.builds(sm_slicing.ConfigureShares, share_vectors),
)

def brute_force_quotas(shares, epoch):
    """Exhaustive largest remainder: try every k-subset of slices for the leftover subframes."""
    exact = {s.slice_id: Fraction(s.share_percent * epoch, 100) for s in shares}
    base = {sid: math.floor(x) for sid, x in exact.items()}
    leftover = math.floor(sum(exact.values(), Fraction(0))) - sum(base.values())
    best = None
    for subset in itertools.combinations(sorted(exact), leftover):
        key = (-sum((exact[s] - base[s] for s in subset), Fraction(0)), subset)
        if best is None or key < best:
            best = key
    chosen = set(best[1]) if best else set()
    return {sid: base[sid] + (sid in chosen) for sid in exact}


# --- harness --------------------------------------------------------------------------


class Harness:
    """RIC and one E2 node on a virtual clock, linked by in-memory transport."""

    def __init__(self, ues=(), node=NODE, allowlist=(PLMN,), latency_ms=0, ric_up=True,
                 cell: CellConfig | None = None, retry_ms=5000, timeout_ms=2000):
        self.loop = VirtualLoop()
        self.net = MemoryNetwork(self.loop, latency_ms=latency_ms)
        self.ric = RicCore(self.loop, RicConfig(E2_ADDR, XAPP_ADDR, tuple(allowlist), timeout_ms))
        self.ran = RanSim(cell or CellConfig(), [u if isinstance(u, UeConfig) else UeConfig(*u) for u in ues])
        cfg = AgentConfig(E2_ADDR, node, (sm_kpm.function_item(), sm_slicing.function_item()), retry_ms)
        self.agent = E2Agent(cfg, self.loop, self.net, self.ran)
        self.delivered: dict[str, list] = {}
        if ric_up:
            self.ric_up()

    def ric_up(self):
        self.net.listen(E2_ADDR, self.ric.accept_e2)
        self.net.listen(XAPP_ADDR, self.ric.accept_xapp)

    def start(self, until_ms=10):
        self.agent.start()
        self.loop.run_until(until_ms)

    def xapp(self, name):
        box = self.delivered.setdefault(name, [])
        self.ric.register_xapp(name, lambda ind, node: box.append((self.loop.now_ms(), ind)))
        return box

    def subscribe(self, name, function_id=0, trigger=None, acts=None, node=NODE):
        results = []
        trigger = sm_kpm.encode_trigger(sm_kpm.KpmEventTrigger(1000)) if trigger is None else trigger
        acts = (e2ap.RicAction(1, e2ap.ActionType.REPORT),) if acts is None else acts
        sub = self.ric.subscribe(name, node, function_id, trigger, acts, results.append)
        return sub, results

    def control(self, name, cmd, ack=True, function_id=1):
        results = []
        self.ric.send_control(name, NODE, function_id, b"", sm_slicing.encode_control(cmd), ack,
                              results.append)
        return results
