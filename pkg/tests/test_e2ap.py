import struct
from pathlib import Path

import pytest
from helpers import PDU_STRATEGIES, any_pdu
from hypothesis import given, settings
from hypothesis import strategies as st

from ricsim import e2ap
from ricsim.e2ap import (
    ActionType,
    Cause,
    CauseCategory,
    GlobalE2NodeId,
    NodeType,
    RanFunctionItem,
    RicAction,
    RicRequestId,
    decode_pdu,
    encode_pdu,
)
from ricsim.errors import (
    CodecError,
    InvalidField,
    MalformedIe,
    MissingMandatoryIe,
    OversizeField,
    TrailingGarbage,
    TruncatedBuffer,
    UnknownPduTag,
)

VECTORS = Path(__file__).parent / "vectors"
NODE = GlobalE2NodeId(bytes.fromhex("00F110"), NodeType.EN_GNB, 1)
RID = RicRequestId(0x1234, 1)
RID2 = RicRequestId(0x1234, 2)

GOLDEN = {
    "e2setup_request": e2ap.E2SetupRequest(NODE, (RanFunctionItem(0, 1, "KPM", b""),)),
    "e2setup_response": e2ap.E2SetupResponse((0, 1)),
    "e2setup_failure": e2ap.E2SetupFailure(Cause(CauseCategory.MISC, 1)),
    "reset_request": e2ap.ResetRequest(Cause(CauseCategory.MISC, 2)),
    "reset_response": e2ap.ResetResponse(),
    "subscription_request": e2ap.RicSubscriptionRequest(RID, 0, bytes.fromhex("000003E8"),
                                                         (RicAction(1, ActionType.REPORT),)),
    "subscription_response": e2ap.RicSubscriptionResponse(RID, (1,)),
    "subscription_failure": e2ap.RicSubscriptionFailure(RID, Cause(CauseCategory.RIC_SERVICE, 1)),
    "indication": e2ap.RicIndication(RID, 0, 1, 1, b"\xaa", b"\xbb\xcc"),
    "control_request": e2ap.RicControlRequest(RID2, 1, b"", b"\x02\x03", True),
    "control_ack": e2ap.RicControlAck(RID2),
    "control_failure": e2ap.RicControlFailure(RID2, Cause(CauseCategory.RIC_SERVICE, 2)),
}


def test_every_vector_has_a_sidecar():
    bins = sorted(p.stem for p in VECTORS.glob("*.bin"))
    assert bins == sorted(GOLDEN)
    for name in bins:
        assert (VECTORS / f"{name}.txt").read_text().strip()


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_vector(name):
    raw = (VECTORS / f"{name}.bin").read_bytes()
    assert encode_pdu(GOLDEN[name]) == raw
    assert decode_pdu(raw) == GOLDEN[name]


def test_setup_request_hand_encoding():
    raw = encode_pdu(GOLDEN["e2setup_request"])
    assert raw.hex() == "01" "00010008" "00f110" "02" "00000001" "0002000b" "0000" "0001" "0003" "4b504d" "0000"


def test_reset_response_is_tag_only():
    assert encode_pdu(e2ap.ResetResponse()) == b"\x05"
    assert decode_pdu(b"\x05") == e2ap.ResetResponse()


def test_every_support_and_service_tag_is_registered():
    tags = {0x01, 0x02, 0x03, 0x04, 0x05, 0x10, 0x11, 0x12, 0x20, 0x30, 0x31, 0x32}
    assert tags <= set(e2ap.PDU_TYPES)


def test_unknown_ie_is_skipped():
    raw = (VECTORS / "e2setup_request.bin").read_bytes()
    extended = raw + struct.pack(">HH", 0xFFFE, 3) + b"xyz"
    assert decode_pdu(extended) == GOLDEN["e2setup_request"]


def test_unknown_tag():
    with pytest.raises(UnknownPduTag):
        decode_pdu(b"\x99")


def test_missing_mandatory_ie_names_the_ie():
    with pytest.raises(MissingMandatoryIe) as info:
        decode_pdu(b"\x03")
    assert "Cause" in str(info.value)


def test_truncated_and_trailing():
    raw = (VECTORS / "indication.bin").read_bytes()
    with pytest.raises(TruncatedBuffer):
        decode_pdu(raw[:-1])
    with pytest.raises(TruncatedBuffer):
        decode_pdu(b"")
    # a 3-byte value inside a 4-byte request-id IE body
    bad = b"\x31" + struct.pack(">HH", 0x0005, 5) + b"\x12\x34\x00\x02\x00"
    with pytest.raises(TrailingGarbage):
        decode_pdu(bad)


def test_decoder_accepts_any_ie_order():
    raw = (VECTORS / "subscription_failure.bin").read_bytes()
    ies = e2ap.split_ies(raw[1:])
    shuffled = raw[:1] + b"".join(struct.pack(">HH", i, len(v)) + v for i, v in reversed(ies))
    assert shuffled != raw
    assert decode_pdu(shuffled) == GOLDEN["subscription_failure"]
    assert encode_pdu(decode_pdu(shuffled)) == raw


def test_duplicate_singular_ie_rejected():
    raw = (VECTORS / "control_ack.bin").read_bytes()
    with pytest.raises(MalformedIe):
        decode_pdu(raw + raw[1:])


def test_oversize_fields():
    with pytest.raises(OversizeField):
        encode_pdu(e2ap.E2SetupRequest(NODE, (RanFunctionItem(0, 1, "x" * 65),)))
    with pytest.raises(OversizeField):
        encode_pdu(e2ap.E2SetupRequest(NODE, (RanFunctionItem(0, 1, "KPM", bytes(4097)),)))
    with pytest.raises(OversizeField):
        encode_pdu(e2ap.RicIndication(RID, 0, 1, 1, b"", bytes(70000)))


def test_invalid_fields():
    with pytest.raises(InvalidField):
        encode_pdu(e2ap.E2SetupRequest(GlobalE2NodeId(b"\x00\xf1\x10", NodeType.GNB, 1 << 20)))
    with pytest.raises(InvalidField):
        encode_pdu(e2ap.E2SetupResponse((4096,)))
    with pytest.raises(InvalidField):
        encode_pdu(e2ap.RicIndication(RID, 0, 256, 1, b"", b""))


def test_plmn_bcd():
    assert e2ap.plmn_from_str("001/01") == bytes.fromhex("00F110")
    assert e2ap.plmn_from_str("310/410") == bytes.fromhex("130014")
    for text in ("001/01", "310/410", "999/99"):
        assert e2ap.plmn_to_str(e2ap.plmn_from_str(text)) == text
    with pytest.raises(InvalidField):
        e2ap.plmn_from_str("1/1")


def test_node_id_str():
    assert str(NODE) == "001/01/EN_GNB/1"


@settings(max_examples=1200, deadline=None)
@given(any_pdu)
def test_roundtrip(pdu):
    raw = encode_pdu(pdu)
    back = decode_pdu(raw)
    assert back == pdu
    assert encode_pdu(back) == raw


@pytest.mark.parametrize("cls", list(PDU_STRATEGIES), ids=lambda c: c.__name__)
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_roundtrip_per_variant(cls, data):
    pdu = data.draw(PDU_STRATEGIES[cls])
    assert decode_pdu(encode_pdu(pdu)) == pdu


@settings(max_examples=2000, deadline=None)
@given(st.binary(max_size=64))
def test_fuzz_never_crashes(raw):
    try:
        decode_pdu(raw)
    except CodecError:
        pass


@settings(max_examples=1000, deadline=None)
@given(any_pdu, st.data())
def test_fuzz_mutated_encodings(pdu, data):
    raw = bytearray(encode_pdu(pdu))
    pos = data.draw(st.integers(0, len(raw) - 1))
    raw[pos] = data.draw(st.integers(0, 255))
    cut = data.draw(st.integers(0, len(raw)))
    try:
        decode_pdu(bytes(raw[:cut]))
    except CodecError:
        pass
