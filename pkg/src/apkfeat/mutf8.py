"""Modified UTF-8 codec used by Dalvik string data.

MUTF-8 differs from standard UTF-8 in two ways: U+0000 is encoded as the
two-byte sequence C0 80 (so encoded strings never contain a raw NUL), and
supplementary characters are encoded as a CESU-8 style surrogate pair, each
half a three-byte sequence. Four-byte UTF-8 forms are invalid.
"""

from __future__ import annotations

from .errors import MutfDecodeError


def decode_mutf8(data: bytes) -> str:
    """Decode MUTF-8 bytes (without the trailing NUL) to a Python string.

    Lone surrogates are preserved as-is; well-formed surrogate pairs are
    combined into supplementary characters.
    """
    units: list[int] = []
    i = 0
    n = len(data)
    while i < n:
        b0 = data[i]
        if b0 == 0x00:
            raise MutfDecodeError("raw NUL byte inside string data")
        if b0 < 0x80:
            units.append(b0)
            i += 1
        elif b0 & 0xE0 == 0xC0:
            if i + 1 >= n:
                raise MutfDecodeError("truncated 2-byte sequence")
            b1 = data[i + 1]
            if b1 & 0xC0 != 0x80:
                raise MutfDecodeError("bad continuation byte")
            cp = ((b0 & 0x1F) << 6) | (b1 & 0x3F)
            if cp < 0x80 and cp != 0x00:
                raise MutfDecodeError("overlong 2-byte sequence")
            units.append(cp)
            i += 2
        elif b0 & 0xF0 == 0xE0:
            if i + 2 >= n:
                raise MutfDecodeError("truncated 3-byte sequence")
            b1, b2 = data[i + 1], data[i + 2]
            if b1 & 0xC0 != 0x80 or b2 & 0xC0 != 0x80:
                raise MutfDecodeError("bad continuation byte")
            cp = ((b0 & 0x0F) << 12) | ((b1 & 0x3F) << 6) | (b2 & 0x3F)
            if cp < 0x800:
                raise MutfDecodeError("overlong 3-byte sequence")
            units.append(cp)
            i += 3
        else:
            raise MutfDecodeError(f"invalid lead byte 0x{b0:02x}")

    # Combine UTF-16 surrogate pairs left by the CESU-8 style encoding.
    out: list[str] = []
    j = 0
    m = len(units)
    while j < m:
        u = units[j]
        if 0xD800 <= u <= 0xDBFF and j + 1 < m and 0xDC00 <= units[j + 1] <= 0xDFFF:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
        else:
            out.append(chr(u))
            j += 1
    return "".join(out)


def encode_mutf8(text: str) -> bytes:
    """Encode a string to MUTF-8 (no trailing NUL appended)."""
    out = bytearray()
    for ch in text:
        cp = ord(ch)
        if cp == 0x00:
            out += b"\xc0\x80"
        elif cp < 0x80:
            out.append(cp)
        elif cp < 0x800:
            out.append(0xC0 | (cp >> 6))
            out.append(0x80 | (cp & 0x3F))
        elif cp < 0x10000:
            _append3(out, cp)
        else:
            cp -= 0x10000
            _append3(out, 0xD800 | (cp >> 10))
            _append3(out, 0xDC00 | (cp & 0x3FF))
    return bytes(out)


def utf16_length(text: str) -> int:
    """Number of UTF-16 code units, the length prefix DEX stores."""
    return sum(2 if ord(ch) > 0xFFFF else 1 for ch in text)


def _append3(out: bytearray, cp: int) -> None:
    out.append(0xE0 | (cp >> 12))
    out.append(0x80 | ((cp >> 6) & 0x3F))
    out.append(0x80 | (cp & 0x3F))
