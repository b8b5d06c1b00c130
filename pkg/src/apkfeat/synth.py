"""Deterministic synthetic APKs with planted, known features.

Used by the benchmark harness to reproduce the size-bucketed corpora the
detection pipeline is measured on. Each generated archive holds a valid
binary manifest carrying exactly the requested properties, a valid dex whose
method table contains exactly the planted API calls (plus an incompressible
data blob so unzip and parse work scale with file size), and a stored filler
entry that pads the archive to the requested size, byte-exact.
"""

from __future__ import annotations

import hashlib
import random
import struct
import zipfile
import zlib
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

from .axml import (
    CHUNK_END_ELEMENT,
    CHUNK_END_NAMESPACE,
    CHUNK_START_ELEMENT,
    CHUNK_START_NAMESPACE,
    CHUNK_STRING_POOL,
    CHUNK_XML,
    NO_INDEX,
    TYPE_STRING,
)
from .dex import ApiCall
from .errors import SizeTooSmall
from .mutf8 import encode_mutf8, utf16_length

MB = 1024 * 1024
ANDROID_NS = "http://schemas.android.com/apk/res/android"

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


# -- dex writing ---------------------------------------------------------------

def build_dex(api_calls, *, version: bytes = b"035", data_blob: bytes = b"") -> bytes:
    """Assemble a minimal valid dex whose method table is exactly api_calls."""
    calls = sorted(set(api_calls))
    descriptors = sorted({c.class_descriptor for c in calls} | {"V"})
    names = {c.method_name for c in calls}
    strings = sorted({"V"} | set(descriptors) | names)
    str_idx = {s: i for i, s in enumerate(strings)}
    type_idx = {d: i for i, d in enumerate(descriptors)}

    methods = sorted(
        ((type_idx[c.class_descriptor], 0, str_idx[c.method_name]) for c in calls),
        key=lambda m: (m[0], m[2], m[1]),
    )

    header_size = 112
    string_ids_off = header_size
    type_ids_off = string_ids_off + 4 * len(strings)
    proto_ids_off = type_ids_off + 4 * len(descriptors)
    method_ids_off = proto_ids_off + 12
    data_off = method_ids_off + 8 * len(methods)

    # String data items, back to back, offsets recorded as we go.
    data = bytearray()
    string_offsets = []
    for s in strings:
        string_offsets.append(data_off + len(data))
        encoded = encode_mutf8(s)
        data += _uleb128(utf16_length(s)) + encoded + b"\x00"
    while (data_off + len(data)) % 4:
        data += b"\x00"
    map_off = data_off + len(data)

    map_entries = [
        (0x0000, 1, 0),                                  # header_item
        (0x0001, len(strings), string_ids_off),          # string_id_item
        (0x0002, len(descriptors), type_ids_off),        # type_id_item
        (0x0003, 1, proto_ids_off),                      # proto_id_item
        (0x0005, len(methods), method_ids_off),          # method_id_item
        (0x2002, len(strings), string_offsets[0]),       # string_data_item
        (0x1000, 1, map_off),                            # map_list
    ]
    data += struct.pack("<I", len(map_entries))
    for mtype, msize, moff in map_entries:
        data += struct.pack("<HHII", mtype, 0, msize, moff)
    data += data_blob

    file_size = data_off + len(data)
    buf = bytearray(file_size)
    struct.pack_into(
        "<8sI20s20I",
        buf,
        0,
        b"dex\n" + version + b"\x00",
        0,                       # checksum, patched below
        b"\x00" * 20,            # signature, patched below
        file_size,
        header_size,
        0x12345678,
        0, 0,                    # link
        map_off,
        len(strings), string_ids_off,
        len(descriptors), type_ids_off,
        1, proto_ids_off,
        0, 0,                    # fields
        len(methods), method_ids_off,
        0, 0,                    # class defs
        file_size - data_off, data_off,
    )
    for i, off in enumerate(string_offsets):
        struct.pack_into("<I", buf, string_ids_off + 4 * i, off)
    for i, d in enumerate(descriptors):
        struct.pack_into("<I", buf, type_ids_off + 4 * i, str_idx[d])
    struct.pack_into("<III", buf, proto_ids_off, str_idx["V"], type_idx["V"], 0)
    for i, (cls, proto, name) in enumerate(methods):
        struct.pack_into("<HHI", buf, method_ids_off + 8 * i, cls, proto, name)
    buf[data_off:file_size] = data

    buf[12:32] = hashlib.sha1(buf[32:]).digest()
    struct.pack_into("<I", buf, 8, zlib.adler32(bytes(buf[12:])) & 0xFFFFFFFF)
    return bytes(buf)


def _uleb128(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


# -- axml writing --------------------------------------------------------------

class _PoolBuilder:
    def __init__(self):
        self.strings: list[str] = []
        self._idx: dict[str, int] = {}

    def add(self, s: str) -> int:
        if s not in self._idx:
            self._idx[s] = len(self.strings)
            self.strings.append(s)
        return self._idx[s]

    def chunk(self) -> bytes:
        body = bytearray()
        offsets = []
        for s in self.strings:
            offsets.append(len(body))
            encoded = s.encode("utf-16-le")
            body += struct.pack("<H", len(s)) + encoded + b"\x00\x00"
        while len(body) % 4:
            body += b"\x00"
        header_size = 28
        strings_start = header_size + 4 * len(self.strings)
        chunk_size = strings_start + len(body)
        out = struct.pack(
            "<HHIIIIII",
            CHUNK_STRING_POOL,
            header_size,
            chunk_size,
            len(self.strings),
            0,                   # style count
            0,                   # flags: UTF-16
            strings_start,
            0,                   # styles start
        )
        return out + b"".join(struct.pack("<I", o) for o in offsets) + bytes(body)


def _element_chunk(
    pool: _PoolBuilder, name: str, attrs: list[tuple[str | None, str, str]]
) -> bytes:
    name_idx = pool.add(name)
    attr_blobs = b""
    for ns, attr_name, value in attrs:
        ns_idx = pool.add(ns) if ns else NO_INDEX
        an_idx = pool.add(attr_name)
        val_idx = pool.add(value)
        attr_blobs += struct.pack(
            "<IIIHBBI", ns_idx, an_idx, val_idx, 8, 0, TYPE_STRING, val_idx
        )
    body = struct.pack(
        "<IIIIHHHHHH",
        0,            # line number
        NO_INDEX,     # comment
        NO_INDEX,     # element namespace
        name_idx,
        0x14,         # attribute start
        0x14,         # attribute size
        len(attrs),
        0, 0, 0,      # id / class / style attribute indexes
    )
    size = 8 + len(body) + len(attr_blobs)
    return struct.pack("<HHI", CHUNK_START_ELEMENT, 16, size) + body + attr_blobs


def _end_element_chunk(pool: _PoolBuilder, name: str) -> bytes:
    body = struct.pack("<IIII", 0, NO_INDEX, NO_INDEX, pool.add(name))
    return struct.pack("<HHI", CHUNK_END_ELEMENT, 16, 24) + body


def _namespace_chunk(pool: _PoolBuilder, chunk_type: int, prefix: str, uri: str) -> bytes:
    body = struct.pack("<IIII", 0, NO_INDEX, pool.add(prefix), pool.add(uri))
    return struct.pack("<HHI", chunk_type, 16, 24) + body


def build_manifest_axml(
    package: str,
    permissions=(),
    intent_actions=(),
    hardware_features=(),
) -> bytes:
    """Encode a binary AndroidManifest.xml carrying exactly these properties."""
    # Element chunks are built first (registering their strings as they go);
    # the pool chunk is serialized afterwards and prepended.
    pool = _PoolBuilder()
    chunks: list[bytes] = []
    chunks.append(_namespace_chunk(pool, CHUNK_START_NAMESPACE, "android", ANDROID_NS))
    chunks.append(_element_chunk(pool, "manifest", [(None, "package", package)]))
    for perm in sorted(permissions):
        chunks.append(_element_chunk(pool, "uses-permission", [(ANDROID_NS, "name", perm)]))
        chunks.append(_end_element_chunk(pool, "uses-permission"))
    for feature in sorted(hardware_features):
        chunks.append(_element_chunk(pool, "uses-feature", [(ANDROID_NS, "name", feature)]))
        chunks.append(_end_element_chunk(pool, "uses-feature"))
    chunks.append(_element_chunk(pool, "application", []))
    chunks.append(_element_chunk(pool, "activity", [(ANDROID_NS, "name", ".Main")]))
    chunks.append(_element_chunk(pool, "intent-filter", []))
    for action in sorted(intent_actions):
        chunks.append(_element_chunk(pool, "action", [(ANDROID_NS, "name", action)]))
        chunks.append(_end_element_chunk(pool, "action"))
    chunks.append(_end_element_chunk(pool, "intent-filter"))
    chunks.append(_end_element_chunk(pool, "activity"))
    chunks.append(_end_element_chunk(pool, "application"))
    chunks.append(_end_element_chunk(pool, "manifest"))
    chunks.append(_namespace_chunk(pool, CHUNK_END_NAMESPACE, "android", ANDROID_NS))

    payload = pool.chunk() + b"".join(chunks)
    return struct.pack("<HHI", CHUNK_XML, 8, 8 + len(payload)) + payload


# -- whole archives ------------------------------------------------------------

@dataclass(frozen=True)
class PlantedApk:
    """A generated archive plus the features planted into it."""

    path: str
    size_bytes: int
    package: str
    api_calls: frozenset[ApiCall]
    permissions: frozenset[str]
    intent_actions: frozenset[str]
    hardware_features: frozenset[str]


_FILLER_NAME = "assets/filler.bin"


def synth_apk(
    path: str | Path,
    size_mb: float,
    n_api: int,
    manifest_props,
    seed: int,
    *,
    api_pool=None,
    extra_api: int = 0,
    dex_fill_fraction: float = 0.55,
    package: str = "com.synth.app",
) -> PlantedApk:
    """Write a seeded synthetic APK of exactly size_mb mebibytes.

    manifest_props entries are either bare permission names or (kind, name)
    pairs with kind in permission / intent_action / hardware_feature. API
    calls are drawn from api_pool (canonical strings or ApiCall) when given,
    otherwise generated; extra_api appends bulk generated calls on top so a
    corpus can scale its method tables with file size the way real apps do.
    Same seed, same arguments -> byte-identical file.
    """
    target = int(size_mb * MB)
    rng = random.Random(seed)

    permissions, actions, features = set(), set(), set()
    for prop in manifest_props:
        if isinstance(prop, str):
            permissions.add(prop)
            continue
        kind, name = prop
        if kind == "permission":
            permissions.add(name)
        elif kind == "intent_action":
            actions.add(name)
        elif kind == "hardware_feature":
            features.add(name)
        else:
            raise ValueError(f"unknown manifest property kind {kind!r}")

    if api_pool is None:
        calls = [ApiCall(f"Lsynth/gen/Widget{i:05d};", f"call{i:05d}") for i in range(n_api)]
    else:
        pool = [
            c if isinstance(c, ApiCall) else ApiCall.from_canonical(c) for c in api_pool
        ]
        if len(pool) < n_api:
            raise ValueError(f"api_pool holds {len(pool)} calls, need {n_api}")
        calls = rng.sample(sorted(pool), n_api)
    calls += [ApiCall(f"Lsynth/bulk/Gen{i:06d};", f"m{i:06d}") for i in range(extra_api)]

    manifest = build_manifest_axml(package, permissions, actions, features)
    blob_len = max(0, int(target * dex_fill_fraction))
    dex = build_dex(calls, data_blob=rng.randbytes(blob_len))

    buf = BytesIO()
    with zipfile.ZipFile(buf, "w", allowZip64=False) as zf:
        _write(zf, "AndroidManifest.xml", manifest, zipfile.ZIP_DEFLATED)
        _write(zf, "classes.dex", dex, zipfile.ZIP_DEFLATED)
        local_bytes = buf.tell()
        central_so_far = sum(46 + len(info.filename) for info in zf.infolist())
        overhead = (
            local_bytes
            + central_so_far
            + (30 + len(_FILLER_NAME))   # filler local header
            + (46 + len(_FILLER_NAME))   # filler central record
            + 22                         # end of central directory
        )
        filler_len = target - overhead
        if filler_len < 0:
            raise SizeTooSmall(
                f"{size_mb} MB target below the {overhead} bytes of mandatory content"
            )
        _write(zf, _FILLER_NAME, rng.randbytes(filler_len), zipfile.ZIP_STORED)

    blob = buf.getvalue()
    Path(path).write_bytes(blob)
    return PlantedApk(
        path=str(path),
        size_bytes=len(blob),
        package=package,
        api_calls=frozenset(calls),
        permissions=frozenset(permissions),
        intent_actions=frozenset(actions),
        hardware_features=frozenset(features),
    )


def _write(zf: zipfile.ZipFile, name: str, data: bytes, method: int) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = method
    info.create_system = 0
    zf.writestr(info, data)
