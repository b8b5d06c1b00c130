"""APK container access: enumerate ZIP entries and pull out raw bodies.

The reader walks the PKZIP structures itself so that malformed archives fail
with a precise error instead of whatever a general-purpose library happens to
raise. Supported subset: single-disk archives, methods 0 (stored) and
8 (deflate). ZIP64 and encrypted entries are rejected outright.

    end of central directory   PK\\x05\\x06 ... comment
    central directory entry    PK\\x01\\x02 fixed 46 bytes + name/extra/comment
    local file header          PK\\x03\\x04 fixed 30 bytes + name/extra
"""

from __future__ import annotations

import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicateEntryName,
    InflateError,
    MissingDex,
    MissingManifest,
    NotAZip,
    TruncatedArchive,
    UnsupportedZipFeature,
)

EOCD_SIG = b"PK\x05\x06"
CENTRAL_SIG = b"PK\x01\x02"
LOCAL_SIG = b"PK\x03\x04"
ZIP64_LOCATOR_SIG = b"PK\x06\x07"

_EOCD_FMT = struct.Struct("<HHHHIIH")       # after the 4-byte signature
_CENTRAL_FMT = struct.Struct("<HHHHHHIIIHHHHHII")
_LOCAL_FMT = struct.Struct("<HHHHHIIIHH")

MANIFEST_NAME = "AndroidManifest.xml"
_DEX_RE = re.compile(r"^classes(\d*)\.dex$")

_METHOD_NAMES = {0: "stored", 8: "deflated"}


@dataclass(frozen=True)
class ZipEntry:
    name: str
    compressed_size: int
    uncompressed_size: int
    method: str                 # "stored" | "deflated"
    crc32: int
    local_header_offset: int


@dataclass(frozen=True)
class ApkArchive:
    """Immutable view of one APK: raw file bytes plus the parsed entry table."""

    path: str
    data: bytes
    entries: tuple[ZipEntry, ...]

    def entry(self, name: str) -> ZipEntry | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


@dataclass(frozen=True)
class RawPayload:
    """Manifest bytes plus every classes*.dex body, in multidex order."""

    manifest_bytes: bytes
    dex_payloads: tuple[tuple[str, bytes], ...]


def open_apk(path: str | Path) -> ApkArchive:
    """Read the file and parse its central directory; no bodies inflated yet."""
    data = Path(path).read_bytes()
    eocd_pos = _find_eocd(data)
    (
        disk_no,
        cd_start_disk,
        n_this_disk,
        n_total,
        cd_size,
        cd_offset,
        comment_len,
    ) = _EOCD_FMT.unpack_from(data, eocd_pos + 4)

    if disk_no or cd_start_disk or n_this_disk != n_total:
        raise UnsupportedZipFeature("multi-disk archives are not supported")
    if n_total == 0xFFFF or cd_size == 0xFFFFFFFF or cd_offset == 0xFFFFFFFF:
        raise UnsupportedZipFeature("ZIP64 archives are not supported")
    if eocd_pos >= 20 and data[eocd_pos - 20 : eocd_pos - 16] == ZIP64_LOCATOR_SIG:
        raise UnsupportedZipFeature("ZIP64 archives are not supported")
    if cd_offset + cd_size > eocd_pos:
        raise TruncatedArchive("central directory extends past its end record")

    entries: list[ZipEntry] = []
    names: set[str] = set()
    pos = cd_offset
    cd_end = cd_offset + cd_size
    for _ in range(n_total):
        if pos + 46 > cd_end:
            raise TruncatedArchive("central directory entry truncated")
        if data[pos : pos + 4] != CENTRAL_SIG:
            raise TruncatedArchive(f"bad central directory signature at {pos}")
        (
            _ver_made,
            _ver_need,
            flags,
            method,
            _mtime,
            _mdate,
            crc,
            csize,
            usize,
            name_len,
            extra_len,
            comment_len,
            _disk_start,
            _int_attrs,
            _ext_attrs,
            local_off,
        ) = _CENTRAL_FMT.unpack_from(data, pos + 4)
        name_end = pos + 46 + name_len
        if name_end + extra_len + comment_len > cd_end:
            raise TruncatedArchive("central directory entry fields truncated")
        name = data[pos + 46 : name_end].decode("utf-8", "replace")
        if flags & 0x0001 or flags & 0x0040:
            raise UnsupportedZipFeature(f"entry {name!r} is encrypted")
        if csize == 0xFFFFFFFF or usize == 0xFFFFFFFF or local_off == 0xFFFFFFFF:
            raise UnsupportedZipFeature(f"entry {name!r} uses ZIP64 sizes")
        if method not in _METHOD_NAMES:
            raise UnsupportedZipFeature(f"entry {name!r} uses compression method {method}")
        if name in names:
            raise DuplicateEntryName(f"duplicate entry name {name!r}")
        names.add(name)
        entries.append(
            ZipEntry(name, csize, usize, _METHOD_NAMES[method], crc, local_off)
        )
        pos = name_end + extra_len + comment_len

    return ApkArchive(path=str(path), data=data, entries=tuple(entries))


def read_entry(archive: ApkArchive, name: str) -> bytes:
    """Decompress one entry body into memory."""
    entry = archive.entry(name)
    if entry is None:
        raise TruncatedArchive(f"no entry named {name!r}")
    data = archive.data
    pos = entry.local_header_offset
    if pos + 30 > len(data) or data[pos : pos + 4] != LOCAL_SIG:
        raise TruncatedArchive(f"bad local header for {name!r}")
    (
        _ver_need,
        _flags,
        _method,
        _mtime,
        _mdate,
        _crc,
        _csize,
        _usize,
        name_len,
        extra_len,
    ) = _LOCAL_FMT.unpack_from(data, pos + 4)
    start = pos + 30 + name_len + extra_len
    end = start + entry.compressed_size
    if end > len(data):
        raise TruncatedArchive(f"entry {name!r} data extends past end of file")
    raw = data[start:end]

    if entry.method == "stored":
        body = raw
    else:
        try:
            d = zlib.decompressobj(-15)
            body = d.decompress(raw) + d.flush()
        except zlib.error as exc:
            raise InflateError(f"entry {name!r}: {exc}") from exc
    if len(body) != entry.uncompressed_size:
        raise InflateError(
            f"entry {name!r}: got {len(body)} bytes, expected {entry.uncompressed_size}"
        )
    if (zlib.crc32(body) & 0xFFFFFFFF) != entry.crc32:
        raise InflateError(f"entry {name!r}: CRC mismatch")
    return body


def dex_entry_names(archive: ApkArchive) -> list[str]:
    """classes.dex, classes2.dex, ... in numeric ascending order."""

    def key(name: str) -> int:
        m = _DEX_RE.match(name)
        assert m is not None
        return int(m.group(1) or "1")

    found = [e.name for e in archive.entries if _DEX_RE.match(e.name)]
    return sorted(found, key=key)


def extract_raw_payload(archive: ApkArchive) -> RawPayload:
    """Inflate the manifest and every classes*.dex body."""
    if archive.entry(MANIFEST_NAME) is None:
        raise MissingManifest(f"{archive.path}: no {MANIFEST_NAME} entry")
    dex_names = dex_entry_names(archive)
    if "classes.dex" not in dex_names:
        raise MissingDex(f"{archive.path}: no classes.dex entry")
    manifest = read_entry(archive, MANIFEST_NAME)
    payloads = tuple((name, read_entry(archive, name)) for name in dex_names)
    return RawPayload(manifest_bytes=manifest, dex_payloads=payloads)


def _find_eocd(data: bytes) -> int:
    """Locate the end-of-central-directory record, scanning back over a comment."""
    if len(data) < 22:
        raise NotAZip("file too small for an end-of-central-directory record")
    # Fast path: no comment.
    if data[-22:-18] == EOCD_SIG:
        return len(data) - 22
    window_start = max(0, len(data) - 22 - 0xFFFF)
    pos = data.rfind(EOCD_SIG, window_start)
    while pos != -1:
        if pos + 22 <= len(data):
            (comment_len,) = struct.unpack_from("<H", data, pos + 20)
            if pos + 22 + comment_len == len(data):
                return pos
        pos = data.rfind(EOCD_SIG, window_start, pos)
    raise NotAZip("no end-of-central-directory signature found")
