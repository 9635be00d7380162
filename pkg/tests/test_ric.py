import zlib

import pytest
from helpers import NODE, PLMN, Harness, node_ids
from hypothesis import given, settings
from hypothesis import strategies as st

from ricsim import e2ap, sm_kpm
from ricsim.e2ap import RicRequestId
from ricsim.errors import UnknownNode, UnknownXapp, UnsupportedFunction
from ricsim.ric import STATS_NS, NodeStatus, RicCore, RnibEntry, SubState
from ricsim.sdl import SharedDataLayer
from ricsim.sm_slicing import ConfigureShares, CreateSlice, SliceShare


def connected(**kw):
    h = Harness(**kw)
    h.start()
    return h


# --- E2 setup -------------------------------------------------------------------------

def test_setup_registers_node():
    h = connected()
    assert h.ric.transcript.names("rx") == ["E2SetupRequest"]
    assert h.ric.transcript.names("tx") == ["E2SetupResponse"]
    entries = h.ric.rnib_list()
    assert len(entries) == 1
    assert entries[0].status is NodeStatus.CONNECTED
    assert entries[0].node == NODE
    assert entries[0].function_ids() == [0, 1]
    resp = [e.message for e in h.agent.transcript.entries if e.direction == "rx"][0]
    assert resp == e2ap.E2SetupResponse((0, 1))


def test_setup_not_allowlisted():
    h = connected(allowlist=(e2ap.plmn_from_str("999/99"),))
    assert h.ric.transcript.names("tx") == ["E2SetupFailure"]
    failure = h.ric.transcript.entries[-1].message
    assert failure.cause == e2ap.CAUSE_UNAUTHORIZED
    assert h.ric.rnib_list() == []


def test_setup_twice_same_connection_keeps_one_entry():
    h = connected()
    h.agent._send(0, e2ap.E2SetupRequest(NODE, h.agent.cfg.functions))
    h.loop.run_until(20)
    assert h.ric.transcript.count("E2SetupResponse", "tx") == 2
    assert len(h.ric.rnib_list()) == 1


def test_duplicate_node_on_other_connection_rejected():
    h = connected()
    from ricsim.agent import AgentConfig, E2Agent
    twin = E2Agent(AgentConfig(h.agent.cfg.ric_addr, NODE, h.agent.cfg.functions), h.loop, h.net, h.ran)
    twin.start()
    h.loop.run_until(30)
    failures = [e.message for e in h.ric.transcript.entries if e.pdu == "E2SetupFailure"]
    assert failures and failures[0].cause == e2ap.CAUSE_DUPLICATE_NODE
    entries = h.ric.rnib_list()
    assert len(entries) == 1 and entries[0].status is NodeStatus.CONNECTED
    assert h.agent.state.value == "connected"


def test_node_disconnect_marks_entry_and_fails_subscriptions():
    h = connected()
    h.xapp("x")
    sub, _ = h.subscribe("x")
    h.loop.run_until(100)
    h.agent.conn.close()
    h.loop.run_until(110)
    assert h.ric.rnib_list()[0].status is NodeStatus.DISCONNECTED
    assert sub.state is SubState.FAILED
    assert sub.cause == e2ap.CAUSE_CONNECTION_LOST


@given(node_ids, st.sampled_from(["", "10.0.0.1:36421"]), st.integers(0, 2**40))
def test_rnib_entry_roundtrip(node, addr, t):
    e = RnibEntry(node, addr, NodeStatus.CONNECTED, (sm_kpm.function_item(),), t)
    assert RnibEntry.decode(e.encode()) == e


# --- subscriptions --------------------------------------------------------------------

def test_subscribe_activates_and_admits_action():
    h = connected()
    h.xapp("kpimon")
    sub, done = h.subscribe("kpimon")
    assert sub.state is SubState.PENDING
    h.loop.run_until(20)
    assert sub.state is SubState.ACTIVE
    assert sub.admitted_action_ids == (1,)
    assert done == [sub]
    assert sub.request_id == RicRequestId(zlib.crc32(b"kpimon") & 0xFFFF, 0)


def test_subscribe_errors_are_local():
    h = connected()
    h.xapp("x")
    sent = len(h.ric.transcript.entries)
    with pytest.raises(UnsupportedFunction):
        h.subscribe("x", function_id=42)
    with pytest.raises(UnknownXapp):
        h.subscribe("nobody")
    other = e2ap.GlobalE2NodeId(PLMN, e2ap.NodeType.GNB, 9)
    with pytest.raises(UnknownNode):
        h.subscribe("x", node=other)
    assert len(h.ric.transcript.entries) == sent


def test_subscription_timeout():
    h = connected()
    h.xapp("x")
    h.agent.frame_received = lambda conn, sid, payload: None  # node goes silent
    sub, done = h.subscribe("x")
    h.loop.run_until(h.loop.now_ms() + 1999)
    assert sub.state is SubState.PENDING
    h.loop.run_until(h.loop.now_ms() + 2)
    assert sub.state is SubState.FAILED and sub.cause == e2ap.CAUSE_TIMEOUT
    assert sub.history == [SubState.PENDING, SubState.FAILED]


def test_two_xapps_get_independent_routes():
    h = connected(ues=[(1, 4_000_000)])
    a, b = h.xapp("a"), h.xapp("b")
    sa, _ = h.subscribe("a")
    sb, _ = h.subscribe("b")
    h.loop.run_until(5010)
    assert sa.request_id != sb.request_id
    assert sa.state is sb.state is SubState.ACTIVE
    assert len(a) == len(b) == 5
    assert {ind.request_id for _, ind in a} == {sa.request_id}
    assert {ind.request_id for _, ind in b} == {sb.request_id}


def test_request_ids_skip_live_ones():
    h = connected()
    h.xapp("x")
    first, _ = h.subscribe("x")
    h.ric._instance_counters[first.request_id.requestor_id] = 0
    second, _ = h.subscribe("x")
    assert second.request_id != first.request_id


def test_indication_order_and_drop_counter():
    h = connected()
    box = h.xapp("x")
    sub, _ = h.subscribe("x")
    h.loop.run_until(20)
    for sn in range(1, 101):
        h.ric.route_indication(e2ap.RicIndication(sub.request_id, 0, 1, sn, b"", b""), NODE)
    assert [ind.sequence_number for _, ind in box[-100:]] == list(range(1, 101))
    h.ric._finish(sub, SubState.FAILED, e2ap.CAUSE_OM_RESET)
    assert not h.ric.route_indication(e2ap.RicIndication(sub.request_id, 0, 1, 101, b"", b""), NODE)
    assert h.ric.indications_dropped == 1
    assert h.ric.sdl_get(STATS_NS, "indications_dropped")[0] == b"1"


def test_failed_is_terminal():
    h = connected()
    h.xapp("x")
    sub, _ = h.subscribe("x")
    h.ric._finish(sub, SubState.FAILED, e2ap.CAUSE_TIMEOUT)
    h.loop.run_until(50)  # the late response must not revive it
    assert sub.state is SubState.FAILED
    assert sub.history == [SubState.PENDING, SubState.FAILED]
    assert h.ric.transcript.count("RicSubscriptionResponse", "rx") == 1


# --- reset ----------------------------------------------------------------------------

def test_ric_reset_stops_indications():
    h = connected(ues=[(1, 4_000_000)])
    box = h.xapp("x")
    sub, _ = h.subscribe("x")
    h.loop.run_until(3500)
    assert len(box) == 3
    h.ric.reset_node(NODE)
    h.loop.run_until(10_000)
    assert len(box) == 3
    assert sub.state is SubState.FAILED
    assert h.ric.rnib_list()[0].status is NodeStatus.CONNECTED
    assert h.agent.transcript.count("ResetResponse", "tx") == 1
    assert h.agent.installed == {}


def test_node_reset_without_subscriptions():
    h = connected()
    h.agent.request_reset()
    h.loop.run_until(20)
    assert h.ric.transcript.count("ResetResponse", "tx") == 1
    assert h.ric.subscriptions == []


@pytest.mark.parametrize("latency", [0, 3])
def test_reset_with_indication_in_flight_never_duplicates(latency):
    h = connected(ues=[(1, 4_000_000)], latency_ms=latency)
    box = h.xapp("x")
    sub, _ = h.subscribe("x")
    h.loop.run_until(1000 + 2 * latency + 1)
    # reset leaves the RIC at the same instant the next indication leaves the node
    h.loop.call_at(2000 + 2 * latency, lambda: h.ric.reset_node(NODE))
    h.loop.run_until(6000)
    seqs = [ind.sequence_number for _, ind in box]
    assert seqs == sorted(set(seqs))
    assert len(seqs) in (1, 2)


# --- control --------------------------------------------------------------------------

def test_control_ack_and_failure():
    h = connected(ues=[(1, 0, 64_000_000)])
    h.xapp("s")
    ack = h.control("s", CreateSlice(1, "op"))
    ok = h.control("s", ConfigureShares((SliceShare(1, 75),)))
    h.loop.run_until(50)
    assert isinstance(ack[0], e2ap.RicControlAck) and isinstance(ok[0], e2ap.RicControlAck)
    bad = []
    h.ric.send_control("s", NODE, 1, b"", bytes([3, 2, 1, 60, 2, 60]), True, bad.append)
    h.loop.run_until(60)
    assert isinstance(bad[0], e2ap.RicControlFailure)
    assert bad[0].cause == e2ap.CAUSE_SHARE_SUM_EXCEEDED


def test_control_without_ack_returns_immediately():
    h = connected()
    h.xapp("s")
    res = h.control("s", CreateSlice(1, "op"), ack=False)
    assert res == [None]
    h.loop.run_until(50)
    assert h.ran.slices[1].name == "op"
    assert h.agent.transcript.count("RicControlAck", "tx") == 0


def test_control_to_disconnected_node():
    h = connected()
    h.xapp("s")
    h.agent.conn.close()
    h.loop.run_until(50)
    with pytest.raises(UnknownNode):
        h.control("s", CreateSlice(1, "op"))


def test_control_timeout():
    h = connected()
    h.xapp("s")
    h.agent.frame_received = lambda conn, sid, payload: None
    res = h.control("s", CreateSlice(1, "op"))
    h.loop.run_until(h.loop.now_ms() + 2001)
    assert isinstance(res[0], e2ap.RicControlFailure) and res[0].cause == e2ap.CAUSE_TIMEOUT


# --- SDL ------------------------------------------------------------------------------

def test_sdl_versions(tmp_path):
    sdl = SharedDataLayer(tmp_path / "journal.jsonl")
    assert sdl.get("ns", "k") is None
    assert sdl.put("ns", "k", b"one") == 1
    assert sdl.get("ns", "k") == (b"one", 1)
    assert sdl.put("ns", "k", b"two") == 2
    assert sdl.get("ns", "k") == (b"two", 2)
    sdl.close()
    assert len((tmp_path / "journal.jsonl").read_text().splitlines()) == 2


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from("xy"), st.binary(max_size=4)), max_size=20))
def test_sdl_last_write_wins_and_versions_increase(writes):
    sdl = SharedDataLayer()
    last = {}
    for ns, key, value in writes:
        prev = sdl.get(ns, key)
        v = sdl.put(ns, key, value)
        assert v == (prev[1] + 1 if prev else 1)
        last[(ns, key)] = value
    for (ns, key), value in last.items():
        assert sdl.get(ns, key)[0] == value


def test_rnib_list_reads_sdl():
    ric = RicCore(Harness(ric_up=False).loop)
    assert ric.rnib_list() == []


ops = st.lists(st.sampled_from(["sub", "sub", "tick", "reset", "drop", "node_reset", "setup_again"]),
               max_size=25)


@settings(max_examples=60, deadline=None)
@given(ops)
def test_invariants_under_random_operations(seq):
    h = connected(ues=[(1, 1_000_000)], retry_ms=700)
    violations = []

    def deliver(ind, node):
        sub = h.ric.subscription(ind.request_id)
        if sub is None or sub.state is not SubState.ACTIVE or sub.xapp_id != "x":
            violations.append(ind)

    h.ric.register_xapp("x", deliver)
    for op in seq:
        if op == "sub":
            try:
                h.subscribe("x", trigger=sm_kpm.encode_trigger(sm_kpm.KpmEventTrigger(300)))
            except UnknownNode:
                pass
        elif op == "tick":
            h.loop.run_until(h.loop.now_ms() + 700)
        elif op == "reset" and h.ric.rnib.get(NODE) and h.ric.rnib[NODE].status is NodeStatus.CONNECTED:
            h.ric.reset_node(NODE)
        elif op == "drop" and h.agent.conn is not None:
            h.agent.conn.close()
        elif op == "node_reset" and h.agent.conn is not None:
            h.agent.request_reset()
        elif op == "setup_again" and h.agent.conn is not None:
            h.agent._send(0, e2ap.E2SetupRequest(NODE, h.agent.cfg.functions))
        h.loop.run_until(h.loop.now_ms() + 5)

        assert sum(e.status is NodeStatus.CONNECTED for e in h.ric.rnib_list()) <= 1
        live = [s.request_id for s in h.ric.subscriptions if s.state is not SubState.FAILED]
        assert len(live) == len(set(live))
        responses = {e.message.request_id for e in h.ric.transcript.entries
                     if e.direction == "rx" and e.pdu == "RicSubscriptionResponse"}
        for s in h.ric.subscriptions:
            assert s.history[0] is SubState.PENDING and len(s.history) <= 3
            assert s.history[1:] in ([], [SubState.ACTIVE], [SubState.FAILED],
                                     [SubState.ACTIVE, SubState.FAILED])
            if SubState.ACTIVE in s.history:
                assert s.request_id in responses
    assert violations == []
