"""Test-side dex byte builder, independent of the package's writer.

Builds a file from an explicit (strings, type indices, method triples)
definition so round-trip tests can compare the parsed tables against exactly
what went in. Layout differs from the production writer on purpose (string
data sits before the id tables) so the two cannot share bugs.
"""

from __future__ import annotations

import hashlib
import struct
import zlib


def mutf8_ref(s: str) -> bytes:
    """Independent MUTF-8 encoder built on the stdlib codec."""
    out = bytearray()
    for ch in s:
        cp = ord(ch)
        if cp == 0:
            out += b"\xc0\x80"
        elif cp >= 0x10000:
            cp -= 0x10000
            out += chr(0xD800 | (cp >> 10)).encode("utf-8", "surrogatepass")
            out += chr(0xDC00 | (cp & 0x3FF)).encode("utf-8", "surrogatepass")
        else:
            out += ch.encode("utf-8", "surrogatepass")
    return bytes(out)


def uleb(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        out.append(b | 0x80 if value else b)
        if not value:
            return bytes(out)


def build_dex_fixture(
    strings: list[str],
    type_indices: list[int],
    methods: list[tuple[int, int, int]],
    *,
    version: bytes = b"035",
    n_protos: int = 1,
    raw_string_data: list[bytes] | None = None,
    fix_checksum: bool = True,
) -> bytes:
    """Assemble a dex from explicit tables.

    methods are (class_type_index, proto_index, name_string_index) triples.
    raw_string_data, when given, replaces the encoded bytes of individual
    strings (same list length, None = encode normally) to plant malformed
    MUTF-8 payloads.
    """
    header_size = 112

    string_blobs = []
    for i, s in enumerate(strings):
        if raw_string_data and raw_string_data[i] is not None:
            string_blobs.append(raw_string_data[i])
        else:
            encoded = mutf8_ref(s)
            utf16_units = len(s.encode("utf-16-le")) // 2
            string_blobs.append(uleb(utf16_units) + encoded + b"\x00")

    data_off = header_size
    string_offsets = []
    data = bytearray()
    for blob in string_blobs:
        string_offsets.append(data_off + len(data))
        data += blob
    while (data_off + len(data)) % 4:
        data += b"\x00"

    string_ids_off = data_off + len(data)
    type_ids_off = string_ids_off + 4 * len(strings)
    proto_ids_off = type_ids_off + 4 * len(type_indices)
    method_ids_off = proto_ids_off + 12 * n_protos
    map_off = method_ids_off + 8 * len(methods)
    file_size = map_off + 4 + 12  # single map entry: the map itself

    buf = bytearray(file_size)
    struct.pack_into(
        "<8sI20s20I",
        buf,
        0,
        b"dex\n" + version + b"\x00",
        0,
        b"\x00" * 20,
        file_size,
        header_size,
        0x12345678,
        0,
        0,
        map_off,
        len(strings),
        string_ids_off if strings else 0,
        len(type_indices),
        type_ids_off if type_indices else 0,
        n_protos,
        proto_ids_off if n_protos else 0,
        0,
        0,
        len(methods),
        method_ids_off if methods else 0,
        0,
        0,
        file_size - data_off,
        data_off,
    )
    buf[data_off : data_off + len(data)] = data
    for i, off in enumerate(string_offsets):
        struct.pack_into("<I", buf, string_ids_off + 4 * i, off)
    for i, idx in enumerate(type_indices):
        struct.pack_into("<I", buf, type_ids_off + 4 * i, idx)
    for p in range(n_protos):
        struct.pack_into("<III", buf, proto_ids_off + 12 * p, 0, 0, 0)
    for i, (cls, proto, name) in enumerate(methods):
        struct.pack_into("<HHI", buf, method_ids_off + 8 * i, cls, proto, name)
    struct.pack_into("<I", buf, map_off, 1)
    struct.pack_into("<HHII", buf, map_off + 4, 0x1000, 0, 1, map_off)

    buf[12:32] = hashlib.sha1(buf[32:]).digest()
    if fix_checksum:
        struct.pack_into("<I", buf, 8, zlib.adler32(bytes(buf[12:])) & 0xFFFFFFFF)
    return bytes(buf)


def patch_u32(blob: bytes, offset: int, value: int) -> bytes:
    out = bytearray(blob)
    struct.pack_into("<I", out, offset, value)
    return bytes(out)
