from __future__ import annotations

import random
import string
import struct
import zlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apkfeat.container import RawPayload
from apkfeat.dex import (
    ApiCall,
    extract_api_calls,
    extract_api_calls_multi,
    parse_dex,
    parse_header,
    verify_checksum,
)
from apkfeat.errors import (
    BadEndianTag,
    BadMagic,
    IndexOutOfRange,
    MutfDecodeError,
    OffsetOutOfBounds,
    UnsupportedVersion,
)
from apkfeat.mutf8 import decode_mutf8, encode_mutf8, utf16_length

from tests.dexbuild import build_dex_fixture, mutf8_ref, patch_u32
from tests.oracles import adler32_ref


def simple_fixture(**kwargs) -> bytes:
    # strings: ["La;", "b"], one type La;, one method La;->b
    return build_dex_fixture(["La;", "b"], [0], [(0, 0, 1)], **kwargs)


# -- header --------------------------------------------------------------------

def test_parse_header_fields():
    blob = simple_fixture()
    header = parse_header(blob)
    assert header.magic == b"dex\n035\x00"
    assert header.endian_tag == 0x12345678
    assert header.file_size == len(blob)
    assert header.string_ids_size == 2
    assert header.type_ids_size == 1
    assert header.method_ids_size == 1


def test_zip_bytes_are_bad_magic():
    with pytest.raises(BadMagic):
        parse_header(b"PK\x03\x04" + bytes(120))


def test_unsupported_version():
    with pytest.raises(UnsupportedVersion):
        parse_header(simple_fixture(version=b"041"))


def test_reverse_endian_rejected():
    blob = bytearray(simple_fixture())
    struct.pack_into("<I", blob, 0x28, 0x78563412)
    with pytest.raises(BadEndianTag):
        parse_header(bytes(blob))


def test_string_ids_off_out_of_bounds():
    blob = simple_fixture()
    with pytest.raises(OffsetOutOfBounds):
        parse_header(patch_u32(blob, 0x3C, len(blob) + 64))


def test_short_file_rejected():
    with pytest.raises(OffsetOutOfBounds):
        parse_header(b"dex\n035\x00" + bytes(40))


# -- checksum ------------------------------------------------------------------

def test_adler32_of_empty_is_one():
    assert adler32_ref(b"") == 1
    assert zlib.adler32(b"") == 1


def test_checksum_valid_on_fixture():
    blob = simple_fixture()
    assert verify_checksum(blob, parse_header(blob))


def test_checksum_fails_after_bit_flip():
    blob = bytearray(simple_fixture())
    blob[-1] ^= 0x01  # map payload byte, outside the header
    assert not verify_checksum(bytes(blob), parse_header(bytes(blob)))


@given(st.binary(max_size=600))
@settings(max_examples=200)
def test_adler32_matches_independent_implementation(data):
    assert (zlib.adler32(data) & 0xFFFFFFFF) == adler32_ref(data)


# -- string decoding -----------------------------------------------------------

@given(st.text(max_size=40))
@settings(max_examples=300)
def test_mutf8_round_trip(text):
    assert decode_mutf8(encode_mutf8(text)) == text


@given(st.text(max_size=40))
@settings(max_examples=300)
def test_mutf8_encoder_matches_reference(text):
    assert encode_mutf8(text) == mutf8_ref(text)
    assert utf16_length(text) == len(text.encode("utf-16-le")) // 2


def test_mutf8_nul_is_two_bytes():
    assert encode_mutf8("\x00") == b"\xc0\x80"
    assert decode_mutf8(b"\xc0\x80") == "\x00"


def test_mutf8_supplementary_is_surrogate_pair():
    encoded = encode_mutf8("\U0001f600")
    assert len(encoded) == 6
    assert decode_mutf8(encoded) == "\U0001f600"


@pytest.mark.parametrize(
    "bad",
    [b"\x80", b"\xc2", b"\xe0\x80", b"\xf0\x90\x80\x80", b"a\x00b", b"\xc1\x81"],
)
def test_mutf8_malformed_sequences(bad):
    with pytest.raises(MutfDecodeError):
        decode_mutf8(bad)


# -- full parse ----------------------------------------------------------------

def test_parse_dex_minimal():
    dex = parse_dex(simple_fixture())
    assert dex.strings == ("La;", "b")
    assert dex.type_descriptors == ("La;",)
    assert len(dex.method_refs) == 1
    ref = dex.method_refs[0]
    assert (ref.class_type_index, ref.proto_index, ref.name_string_index) == (0, 0, 1)


def test_parse_dex_empty_tables():
    dex = parse_dex(build_dex_fixture([], [], [], n_protos=0))
    assert dex.strings == ()
    assert dex.type_descriptors == ()
    assert dex.method_refs == ()
    assert extract_api_calls(dex) == set()


def test_method_type_index_out_of_range():
    blob = build_dex_fixture(["La;", "b"], [0], [(99, 0, 1)])
    with pytest.raises(IndexOutOfRange):
        parse_dex(blob)


def test_method_name_index_out_of_range():
    blob = build_dex_fixture(["La;", "b"], [0], [(0, 0, 7)])
    with pytest.raises(IndexOutOfRange):
        parse_dex(blob)


def test_type_descriptor_index_out_of_range():
    blob = build_dex_fixture(["La;"], [3], [])
    with pytest.raises(IndexOutOfRange):
        parse_dex(blob)


def test_malformed_string_fails_string_not_file():
    # Second string's data is an invalid lead byte; lenient parse keeps going.
    blob = build_dex_fixture(
        ["La;", "bad", "ok"],
        [0],
        [(0, 0, 1), (0, 0, 2)],
        raw_string_data=[None, b"\x01\xff\x00", None],
    )
    dex = parse_dex(blob)
    assert dex.strings[1] is None
    assert dex.strings[2] == "ok"
    # The method whose name failed to decode is simply absent.
    assert extract_api_calls(dex) == {ApiCall("La;", "ok")}
    with pytest.raises(MutfDecodeError):
        parse_dex(blob, strict_strings=True)


def test_round_trip_100_fixtures():
    rng = random.Random(405)
    alphabet = string.ascii_letters + string.digits + "/$_-"
    for trial in range(100):
        n_strings = rng.randrange(1, 30)
        strings = sorted(
            {"".join(rng.choices(alphabet, k=rng.randrange(1, 25))) for _ in range(n_strings)}
        )
        types = sorted(rng.sample(range(len(strings)), rng.randrange(0, len(strings) + 1)))
        methods = [
            (rng.randrange(len(types)), 0, rng.randrange(len(strings)))
            for _ in range(rng.randrange(0, 40))
            if types
        ]
        blob = build_dex_fixture(strings, types, methods)
        dex = parse_dex(blob)
        assert list(dex.strings) == strings, f"trial {trial}"
        assert list(dex.type_descriptors) == [strings[i] for i in types]
        assert [
            (m.class_type_index, m.proto_index, m.name_string_index) for m in dex.method_refs
        ] == methods
        assert verify_checksum(blob, dex.header)


# -- api extraction ------------------------------------------------------------

def test_duplicate_method_refs_collapse():
    strings = ["Landroid/net/Uri;", "parse"]
    blob = build_dex_fixture(strings, [0], [(0, 0, 1), (0, 0, 1)])
    calls = extract_api_calls(parse_dex(blob))
    assert calls == {ApiCall("Landroid/net/Uri;", "parse")}


def test_extraction_ignores_method_order():
    strings = sorted(["La/B;", "La/C;", "x", "y", "z"])
    types = [0, 1]
    meths = [(0, 0, 2), (1, 0, 3), (0, 0, 4)]
    blob_a = build_dex_fixture(strings, types, meths)
    blob_b = build_dex_fixture(strings, types, list(reversed(meths)))
    assert extract_api_calls(parse_dex(blob_a)) == extract_api_calls(parse_dex(blob_b))


def test_non_class_descriptors_skipped():
    strings = sorted(["[Ljava/lang/String;", "clone", "La;", "m"])
    s = {v: i for i, v in enumerate(strings)}
    types = sorted([s["[Ljava/lang/String;"], s["La;"]])
    type_pos = {idx: p for p, idx in enumerate(types)}
    meths = [
        (type_pos[s["[Ljava/lang/String;"]], 0, s["clone"]),
        (type_pos[s["La;"]], 0, s["m"]),
    ]
    calls = extract_api_calls(parse_dex(build_dex_fixture(strings, types, meths)))
    assert calls == {ApiCall("La;", "m")}


def test_multi_dex_union_and_error_annotation():
    blob_a = build_dex_fixture(["La;", "x"], [0], [(0, 0, 1)])
    blob_b = build_dex_fixture(["Lb;", "y"], [0], [(0, 0, 1)])
    payload = RawPayload(b"", (("classes.dex", blob_a), ("classes2.dex", blob_b)))
    assert extract_api_calls_multi(payload) == {ApiCall("La;", "x"), ApiCall("Lb;", "y")}

    shared = RawPayload(b"", (("classes.dex", blob_a), ("classes2.dex", blob_a)))
    assert extract_api_calls_multi(shared) == {ApiCall("La;", "x")}

    corrupt = RawPayload(b"", (("classes.dex", blob_a), ("classes2.dex", b"nope")))
    with pytest.raises(BadMagic, match="classes2.dex"):
        extract_api_calls_multi(corrupt)


def test_api_call_canonical_shape():
    call = ApiCall("Landroid/net/Uri;", "parse")
    assert call.canonical == "Landroid/net/Uri;->parse"
    assert ApiCall.from_canonical(call.canonical) == call
    with pytest.raises(ValueError):
        ApiCall.from_canonical("not-a-call")
