"""Binary Android XML (AXML) decoding for the packaged manifest.

The format is a sequence of little-endian chunks, each headed by
(type: u16, header_size: u16, chunk_size: u32):

    0x0003 XML document      wraps the whole file
    0x0001 string pool       28-byte header, u32 offsets, UTF-8 or UTF-16 data
    0x0180 resource map      skipped
    0x0100 / 0x0101          start / end namespace
    0x0102 start element     line, comment, ns, name, attrExt, attributes
    0x0103 end element       line, comment, ns, name
    0x0104 cdata             skipped

Every read is bounds-checked against the declared chunk sizes; malformed or
truncated input raises an AxmlError subclass, never an internal exception.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import (
    BadChunkSignature,
    NotAManifest,
    StringPoolIndexError,
    TruncatedChunk,
    UnbalancedElements,
)

CHUNK_STRING_POOL = 0x0001
CHUNK_XML = 0x0003
CHUNK_START_NAMESPACE = 0x0100
CHUNK_END_NAMESPACE = 0x0101
CHUNK_START_ELEMENT = 0x0102
CHUNK_END_ELEMENT = 0x0103
CHUNK_CDATA = 0x0104
CHUNK_RESOURCE_MAP = 0x0180

UTF8_FLAG = 1 << 8
NO_INDEX = 0xFFFFFFFF

TYPE_REFERENCE = 0x01
TYPE_STRING = 0x03
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12


@dataclass(frozen=True)
class XmlAttribute:
    name: str
    value: str
    namespace: str | None = None


@dataclass
class XmlElement:
    name: str
    namespace: str | None = None
    attributes: tuple[XmlAttribute, ...] = ()
    children: list["XmlElement"] = field(default_factory=list)

    def attr(self, local_name: str) -> str | None:
        """First attribute value matching by local name, any namespace."""
        for a in self.attributes:
            if a.name == local_name:
                return a.value
        return None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class XmlTree:
    root: XmlElement


@dataclass(frozen=True)
class ManifestInfo:
    """The three manifest feature families plus the package id."""

    permissions: frozenset[str]
    intent_actions: frozenset[str]
    hardware_features: frozenset[str]
    package_name: str


class _Reader:
    """Bounds-checked little-endian cursor over one chunk region."""

    __slots__ = ("data", "pos", "limit")

    def __init__(self, data: bytes, pos: int, limit: int):
        self.data = data
        self.pos = pos
        self.limit = limit

    def need(self, n: int) -> None:
        if self.pos + n > self.limit:
            raise TruncatedChunk(f"need {n} bytes at {self.pos}, limit {self.limit}")

    def u8(self) -> int:
        self.need(1)
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u16(self) -> int:
        self.need(2)
        (v,) = struct.unpack_from("<H", self.data, self.pos)
        self.pos += 2
        return v

    def u32(self) -> int:
        self.need(4)
        (v,) = struct.unpack_from("<I", self.data, self.pos)
        self.pos += 4
        return v


class _StringPool:
    def __init__(self, data: bytes, start: int, header_size: int, chunk_size: int):
        r = _Reader(data, start + 8, start + chunk_size)
        count = r.u32()
        style_count = r.u32()
        flags = r.u32()
        strings_start = r.u32()
        styles_start = r.u32()
        self.utf8 = bool(flags & UTF8_FLAG)

        if header_size < 28 or header_size > chunk_size:
            raise TruncatedChunk("string pool header size out of range")
        offsets_at = start + header_size
        if offsets_at + 4 * (count + style_count) > start + chunk_size:
            raise TruncatedChunk("string pool offset table exceeds chunk")
        if strings_start > chunk_size:
            raise TruncatedChunk("string data start exceeds chunk")

        self.offsets = list(
            struct.unpack_from(f"<{count}I", data, offsets_at) if count else ()
        )
        data_end = styles_start if style_count and styles_start else chunk_size
        if data_end > chunk_size or data_end < strings_start:
            raise TruncatedChunk("string pool style region out of range")
        self.data = data[start + strings_start : start + data_end]
        self._cache: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self.offsets)

    def get(self, index: int) -> str:
        if index in self._cache:
            return self._cache[index]
        if index >= len(self.offsets):
            raise StringPoolIndexError(f"string index {index} out of pool of {len(self.offsets)}")
        offset = self.offsets[index]
        if offset >= len(self.data):
            raise StringPoolIndexError(f"string offset {offset} outside pool data")
        text = self._decode_utf8(offset) if self.utf8 else self._decode_utf16(offset)
        self._cache[index] = text
        return text

    def _decode_utf8(self, offset: int) -> str:
        buf = self.data
        _, offset = self._len8(buf, offset)          # UTF-16 length, unused
        byte_len, offset = self._len8(buf, offset)
        if offset + byte_len > len(buf):
            raise StringPoolIndexError("UTF-8 string data exceeds pool")
        try:
            return buf[offset : offset + byte_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StringPoolIndexError(f"undecodable UTF-8 string: {exc}") from exc

    def _decode_utf16(self, offset: int) -> str:
        buf = self.data
        if offset + 2 > len(buf):
            raise StringPoolIndexError("UTF-16 length prefix exceeds pool")
        (length,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if length & 0x8000:
            if offset + 2 > len(buf):
                raise StringPoolIndexError("UTF-16 extended length exceeds pool")
            (low,) = struct.unpack_from("<H", buf, offset)
            offset += 2
            length = ((length & 0x7FFF) << 16) | low
        if offset + 2 * length > len(buf):
            raise StringPoolIndexError("UTF-16 string data exceeds pool")
        return buf[offset : offset + 2 * length].decode("utf-16-le", "surrogatepass")

    @staticmethod
    def _len8(buf: bytes, offset: int) -> tuple[int, int]:
        if offset + 1 > len(buf):
            raise StringPoolIndexError("UTF-8 length prefix exceeds pool")
        length = buf[offset]
        offset += 1
        if length & 0x80:
            if offset + 1 > len(buf):
                raise StringPoolIndexError("UTF-8 extended length exceeds pool")
            length = ((length & 0x7F) << 8) | buf[offset]
            offset += 1
        return length, offset


def decode_axml(data: bytes) -> XmlTree:
    """Decode binary XML bytes into an element tree."""
    if len(data) < 8:
        raise TruncatedChunk("file shorter than a chunk header")
    doc_type, doc_header, doc_size = struct.unpack_from("<HHI", data, 0)
    if doc_type != CHUNK_XML:
        raise BadChunkSignature(f"expected XML chunk 0x0003, got 0x{doc_type:04x}")
    if doc_size < 8 or doc_size > len(data):
        raise TruncatedChunk(f"declared size {doc_size} vs {len(data)} bytes available")
    if doc_header < 8 or doc_header > doc_size:
        raise TruncatedChunk("document header size out of range")

    pool: _StringPool | None = None
    root: XmlElement | None = None
    stack: list[XmlElement] = []
    pos = doc_header

    while pos < doc_size:
        if pos + 8 > doc_size:
            raise TruncatedChunk("trailing bytes shorter than a chunk header")
        ctype, header_size, size = struct.unpack_from("<HHI", data, pos)
        if size < 8 or pos + size > doc_size:
            raise TruncatedChunk(f"chunk 0x{ctype:04x} size {size} exceeds document")
        if header_size < 8 or header_size > size:
            raise TruncatedChunk(f"chunk 0x{ctype:04x} header size out of range")

        if ctype == CHUNK_STRING_POOL:
            pool = _StringPool(data, pos, header_size, size)
        elif ctype == CHUNK_START_ELEMENT:
            if pool is None:
                raise TruncatedChunk("element chunk before string pool")
            element = _read_start_element(data, pos, size, pool)
            if stack:
                stack[-1].children.append(element)
            elif root is None:
                root = element
            else:
                raise UnbalancedElements("more than one root element")
            stack.append(element)
        elif ctype == CHUNK_END_ELEMENT:
            if pool is None:
                raise TruncatedChunk("element chunk before string pool")
            name = _read_end_element(data, pos, size, pool)
            if not stack:
                raise UnbalancedElements(f"end of {name!r} with no open element")
            if stack[-1].name != name:
                raise UnbalancedElements(
                    f"end of {name!r} does not match open {stack[-1].name!r}"
                )
            stack.pop()
        elif ctype in (
            CHUNK_START_NAMESPACE,
            CHUNK_END_NAMESPACE,
            CHUNK_CDATA,
            CHUNK_RESOURCE_MAP,
        ):
            pass
        # Unknown chunk types are skipped by their declared size.
        pos += size

    if stack:
        raise UnbalancedElements(f"{len(stack)} element(s) left open at end of document")
    if root is None:
        raise UnbalancedElements("document contains no elements")
    return XmlTree(root=root)


def _read_start_element(data: bytes, pos: int, size: int, pool: _StringPool) -> XmlElement:
    r = _Reader(data, pos + 8, pos + size)
    r.u32()  # line number
    r.u32()  # comment
    ns_idx = r.u32()
    name_idx = r.u32()
    attr_start = r.u16()
    attr_size = r.u16()
    attr_count = r.u16()
    r.u16()  # id attribute index
    r.u16()  # class attribute index
    r.u16()  # style attribute index

    if attr_size < 20:
        raise TruncatedChunk(f"attribute record size {attr_size} below minimum 20")
    attrs_at = pos + 16 + attr_start
    if attrs_at + attr_count * attr_size > pos + size:
        raise TruncatedChunk("attribute table exceeds element chunk")

    name = pool.get(name_idx)
    namespace = pool.get(ns_idx) if ns_idx != NO_INDEX else None

    attributes = []
    for i in range(attr_count):
        a = _Reader(data, attrs_at + i * attr_size, pos + size)
        a_ns = a.u32()
        a_name = a.u32()
        a_raw = a.u32()
        a.u16()  # typed value size
        a.u8()   # res0
        vtype = a.u8()
        vdata = a.u32()
        value = _decode_value(vtype, vdata, a_raw, pool)
        attributes.append(
            XmlAttribute(
                name=pool.get(a_name),
                value=value,
                namespace=pool.get(a_ns) if a_ns != NO_INDEX else None,
            )
        )
    return XmlElement(name=name, namespace=namespace, attributes=tuple(attributes))


def _read_end_element(data: bytes, pos: int, size: int, pool: _StringPool) -> str:
    r = _Reader(data, pos + 8, pos + size)
    r.u32()  # line number
    r.u32()  # comment
    r.u32()  # namespace
    name_idx = r.u32()
    return pool.get(name_idx)


def _decode_value(vtype: int, vdata: int, raw_index: int, pool: _StringPool) -> str:
    if vtype == TYPE_STRING:
        if vdata != NO_INDEX and vdata < len(pool):
            return pool.get(vdata)
        if raw_index != NO_INDEX:
            return pool.get(raw_index)
        raise StringPoolIndexError(f"string attribute index {vdata} out of pool")
    if vtype == TYPE_INT_BOOLEAN:
        return "true" if vdata else "false"
    if vtype == TYPE_INT_DEC:
        return str(struct.unpack("<i", struct.pack("<I", vdata))[0])
    if vtype == TYPE_INT_HEX:
        return f"0x{vdata:08x}"
    if vtype == TYPE_REFERENCE:
        return f"@0x{vdata:08x}"
    # Anything else: lossless decimal of the raw 32-bit payload.
    return str(vdata)


def extract_manifest_properties(tree: XmlTree) -> ManifestInfo:
    """Reduce a decoded manifest to its three feature families.

    Permissions come from uses-permission / uses-permission-sdk-23, intent
    actions from <action> elements at any depth under an <intent-filter>,
    hardware features from uses-feature. Attribute lookup is by local name
    only; obfuscators strip namespaces and the features must survive that.
    """
    root = tree.root
    if root.name != "manifest":
        raise NotAManifest(f"root element is {root.name!r}, not 'manifest'")

    permissions: set[str] = set()
    actions: set[str] = set()
    features: set[str] = set()

    for element in root.walk():
        if element.name in ("uses-permission", "uses-permission-sdk-23"):
            name = element.attr("name")
            if name:
                permissions.add(name)
        elif element.name == "uses-feature":
            name = element.attr("name")
            if name:
                features.add(name)
        elif element.name == "intent-filter":
            for inner in element.walk():
                if inner.name == "action":
                    name = inner.attr("name")
                    if name:
                        actions.add(name)

    return ManifestInfo(
        permissions=frozenset(permissions),
        intent_actions=frozenset(actions),
        hardware_features=frozenset(features),
        package_name=root.attr("package") or "",
    )
