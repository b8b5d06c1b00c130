"""Dalvik executable parsing straight from the binary, no decompilation.

Only the metadata needed for API-call extraction is decoded: the 112-byte
header, the string table (uleb128 length + MUTF-8 data), the type table and
the method table. Layout per the published format, little-endian throughout:

    header          0x00 magic[8]  0x08 checksum  0x0c signature[20]
                    0x20 file_size 0x24 header_size 0x28 endian_tag
                    0x2c link_size/off 0x34 map_off
                    0x38 string_ids  0x40 type_ids  0x48 proto_ids
                    0x50 field_ids   0x58 method_ids 0x60 class_defs
                    0x68 data_size/off
    string_id_item  u32 offset -> uleb128 utf16_size, MUTF-8 bytes, NUL
    type_id_item    u32 descriptor string index
    method_id_item  u16 class type index, u16 proto index, u32 name index
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from .errors import (
    BadEndianTag,
    BadMagic,
    BadUleb128,
    DexError,
    IndexOutOfRange,
    MutfDecodeError,
    OffsetOutOfBounds,
    UnsupportedVersion,
)
from .mutf8 import decode_mutf8

HEADER_SIZE = 112
ENDIAN_CONSTANT = 0x12345678
REVERSE_ENDIAN_CONSTANT = 0x78563412
SUPPORTED_VERSIONS = (b"035", b"036", b"037", b"038", b"039")

_HEADER_FMT = struct.Struct("<8sI20s20I")


@dataclass(frozen=True)
class DexHeader:
    magic: bytes
    checksum: int
    signature: bytes
    file_size: int
    header_size: int
    endian_tag: int
    link_size: int
    link_off: int
    map_off: int
    string_ids_size: int
    string_ids_off: int
    type_ids_size: int
    type_ids_off: int
    proto_ids_size: int
    proto_ids_off: int
    field_ids_size: int
    field_ids_off: int
    method_ids_size: int
    method_ids_off: int
    class_defs_size: int
    class_defs_off: int
    data_size: int
    data_off: int

    @property
    def version(self) -> str:
        return self.magic[4:7].decode("ascii", "replace")


@dataclass(frozen=True)
class MethodRef:
    class_type_index: int
    proto_index: int
    name_string_index: int


@dataclass(frozen=True)
class DexFile:
    header: DexHeader
    strings: tuple  # str per entry, or None where MUTF-8 data was malformed
    type_descriptors: tuple
    method_refs: tuple


@dataclass(frozen=True, order=True)
class ApiCall:
    """One `L<class>;-><method>` reference, the dictionary-matching key."""

    class_descriptor: str
    method_name: str

    @property
    def canonical(self) -> str:
        return f"{self.class_descriptor}->{self.method_name}"

    @classmethod
    def from_canonical(cls, canonical: str) -> "ApiCall":
        descriptor, sep, name = canonical.partition("->")
        if not sep or not descriptor.startswith("L") or not descriptor.endswith(";") or not name:
            raise ValueError(f"not a canonical API call: {canonical!r}")
        return cls(descriptor, name)


# Widths used for the header bounds checks: (size_field, off_field, entry_width).
_TABLE_WIDTHS = (
    ("string_ids_size", "string_ids_off", 4),
    ("type_ids_size", "type_ids_off", 4),
    ("proto_ids_size", "proto_ids_off", 12),
    ("field_ids_size", "field_ids_off", 8),
    ("method_ids_size", "method_ids_off", 8),
    ("class_defs_size", "class_defs_off", 32),
)


def parse_header(data: bytes) -> DexHeader:
    """Parse and validate the fixed 112-byte header."""
    if len(data) < 8:
        raise BadMagic("file shorter than the magic")
    if data[:4] != b"dex\n":
        raise BadMagic(f"bad magic {data[:4]!r}")
    if data[7:8] != b"\x00":
        raise BadMagic("magic missing NUL terminator")
    version = data[4:7]
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"dex version {version!r} not supported")
    if len(data) < HEADER_SIZE:
        raise OffsetOutOfBounds(f"file shorter than the {HEADER_SIZE}-byte header")

    fields = _HEADER_FMT.unpack_from(data, 0)
    header = DexHeader(*fields)

    if header.endian_tag == REVERSE_ENDIAN_CONSTANT:
        raise BadEndianTag("reverse-endian dex files are rejected")
    if header.endian_tag != ENDIAN_CONSTANT:
        raise BadEndianTag(f"bad endian tag 0x{header.endian_tag:08x}")
    if header.header_size != HEADER_SIZE:
        raise OffsetOutOfBounds(f"header_size {header.header_size} != {HEADER_SIZE}")
    if header.file_size < HEADER_SIZE or header.file_size > len(data):
        raise OffsetOutOfBounds(
            f"file_size {header.file_size} outside [{HEADER_SIZE}, {len(data)}]"
        )

    for size_field, off_field, width in _TABLE_WIDTHS:
        size = getattr(header, size_field)
        off = getattr(header, off_field)
        if size and off + size * width > header.file_size:
            raise OffsetOutOfBounds(
                f"{off_field}={off} + {size}*{width} exceeds file_size {header.file_size}"
            )
    if header.map_off:
        if header.map_off + 4 > header.file_size:
            raise OffsetOutOfBounds("map_off points past end of file")
        (map_size,) = struct.unpack_from("<I", data, header.map_off)
        if header.map_off + 4 + map_size * 12 > header.file_size:
            raise OffsetOutOfBounds("map list exceeds file_size")
    return header


def verify_checksum(data: bytes, header: DexHeader) -> bool:
    """True iff the stored Adler-32 matches bytes [12, file_size)."""
    return (zlib.adler32(data[12 : header.file_size]) & 0xFFFFFFFF) == header.checksum


def read_uleb128(data: bytes, offset: int, limit: int) -> tuple[int, int]:
    """Decode one uleb128 at offset; returns (value, next_offset)."""
    result = 0
    shift = 0
    pos = offset
    while True:
        if pos >= limit:
            raise BadUleb128("uleb128 runs past end of data")
        if pos - offset >= 5:
            raise BadUleb128("uleb128 longer than 5 bytes")
        byte = data[pos]
        result |= (byte & 0x7F) << shift
        pos += 1
        if not byte & 0x80:
            return result, pos
        shift += 7


def parse_dex(data: bytes, *, strict_strings: bool = False) -> DexFile:
    """Decode the string, type, and method tables.

    Malformed MUTF-8 payloads fail only the owning string (stored as None)
    unless strict_strings is set; obfuscated apps routinely carry garbage
    names and must not sink the whole file.
    """
    header = parse_header(data)
    limit = header.file_size

    strings: list = []
    for i in range(header.string_ids_size):
        (str_off,) = struct.unpack_from("<I", data, header.string_ids_off + 4 * i)
        if str_off >= limit:
            raise OffsetOutOfBounds(f"string_data_off for string {i} past end of file")
        utf16_size, pos = read_uleb128(data, str_off, limit)
        try:
            end = data.index(b"\x00", pos, limit)
        except ValueError:
            if strict_strings:
                raise MutfDecodeError(f"string {i} is not NUL-terminated") from None
            strings.append(None)
            continue
        try:
            text = decode_mutf8(data[pos:end])
        except MutfDecodeError:
            if strict_strings:
                raise
            strings.append(None)
            continue
        strings.append(text)

    type_descriptors: list = []
    for i in range(header.type_ids_size):
        (desc_idx,) = struct.unpack_from("<I", data, header.type_ids_off + 4 * i)
        if desc_idx >= len(strings):
            raise IndexOutOfRange(f"type {i}: descriptor string index {desc_idx} out of range")
        type_descriptors.append(strings[desc_idx])

    method_refs: list[MethodRef] = []
    for i in range(header.method_ids_size):
        class_idx, proto_idx, name_idx = struct.unpack_from(
            "<HHI", data, header.method_ids_off + 8 * i
        )
        if class_idx >= len(type_descriptors):
            raise IndexOutOfRange(f"method {i}: class type index {class_idx} out of range")
        if proto_idx >= header.proto_ids_size:
            raise IndexOutOfRange(f"method {i}: proto index {proto_idx} out of range")
        if name_idx >= len(strings):
            raise IndexOutOfRange(f"method {i}: name string index {name_idx} out of range")
        method_refs.append(MethodRef(class_idx, proto_idx, name_idx))

    return DexFile(
        header=header,
        strings=tuple(strings),
        type_descriptors=tuple(type_descriptors),
        method_refs=tuple(method_refs),
    )


def extract_api_calls(dex: DexFile) -> set[ApiCall]:
    """One ApiCall per method reference, duplicates collapsed.

    References whose class descriptor is not an `L...;` class type (array
    types, primitives) or whose strings failed to decode are skipped.
    """
    calls: set[ApiCall] = set()
    for ref in dex.method_refs:
        descriptor = dex.type_descriptors[ref.class_type_index]
        name = dex.strings[ref.name_string_index]
        if descriptor is None or name is None:
            continue
        if not descriptor.startswith("L") or not descriptor.endswith(";"):
            continue
        calls.add(ApiCall(descriptor, name))
    return calls


def extract_api_calls_multi(payload) -> set[ApiCall]:
    """Union of extract_api_calls over every dex entry of a RawPayload.

    Parse errors are re-raised with the offending entry name prefixed.
    """
    calls: set[ApiCall] = set()
    for entry_name, body in payload.dex_payloads:
        try:
            calls |= extract_api_calls(parse_dex(body))
        except DexError as exc:
            raise type(exc)(f"{entry_name}: {exc}") from exc
    return calls
