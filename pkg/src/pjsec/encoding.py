"""Injective byte framing for protocol fields, and the identity hash.

Each part is a one-byte type tag followed by its body:

====  ==============  =====================================================
tag   part            body
====  ==============  =====================================================
0x01  bytes           4-byte big-endian length, then the bytes
0x02  GroupElement    the element's fixed-length encoding (no length)
0x03  OverlayId       4-byte length, then b, p, h (1 byte each) and the raw
                      id big-endian in ceil(m/8) bytes
0x04  int             4-byte length (always 8), then unsigned 64-bit value
====  ==============  =====================================================

Given the element size of the group in use, the framing decodes back to the
exact part list, which is what makes it injective.
"""
from __future__ import annotations

import hashlib
import struct
from typing import Sequence, Union

from . import instrument
from .errors import EncodingError
from .group import GroupElement
from .overlay import IdLayout, OverlayId

Part = Union[bytes, GroupElement, OverlayId, int]

TAG_BYTES = 0x01
TAG_ELEMENT = 0x02
TAG_ID = 0x03
TAG_INT = 0x04

_MAX_LEN = 0xFFFFFFFF


def _framed(tag: int, body: bytes) -> bytes:
    if len(body) > _MAX_LEN:
        raise EncodingError("part longer than its 32-bit length field")
    return bytes([tag]) + struct.pack(">I", len(body)) + body


def encode_part(part: Part) -> bytes:
    if isinstance(part, (bytes, bytearray, memoryview)):
        return _framed(TAG_BYTES, bytes(part))
    if isinstance(part, GroupElement):
        return bytes([TAG_ELEMENT]) + part.data
    if isinstance(part, OverlayId):
        lay = part.layout
        body = bytes([lay.b, lay.p, lay.h]) + part.raw.to_bytes(lay.byte_length, "big")
        return _framed(TAG_ID, body)
    if isinstance(part, int) and not isinstance(part, bool):
        if not 0 <= part < 1 << 64:
            raise EncodingError(f"integer {part} outside unsigned 64-bit range")
        return _framed(TAG_INT, part.to_bytes(8, "big"))
    raise EncodingError(f"cannot encode {type(part).__name__}")


def canonical_encode(parts: Sequence[Part]) -> bytes:
    return b"".join(encode_part(p) for p in parts)


def canonical_decode(data: bytes, element_size: int) -> list[Part]:
    """Inverse of :func:`canonical_encode` for a group with ``element_size``-byte elements."""
    out: list[Part] = []
    i = 0
    while i < len(data):
        tag = data[i]
        i += 1
        if tag == TAG_ELEMENT:
            if i + element_size > len(data):
                raise EncodingError("truncated group element")
            out.append(GroupElement(bytes(data[i:i + element_size])))
            i += element_size
            continue
        if i + 4 > len(data):
            raise EncodingError("truncated length field")
        (n,) = struct.unpack(">I", data[i:i + 4])
        i += 4
        body = bytes(data[i:i + n])
        if len(body) != n:
            raise EncodingError("truncated part body")
        i += n
        if tag == TAG_BYTES:
            out.append(body)
        elif tag == TAG_ID:
            if n < 3:
                raise EncodingError("overlay id body too short")
            try:
                layout = IdLayout(body[0], body[1], body[2])
                if n != 3 + layout.byte_length:
                    raise EncodingError("overlay id length does not match its layout")
                out.append(OverlayId(int.from_bytes(body[3:], "big"), layout))
            except ValueError as exc:
                raise EncodingError(str(exc)) from exc
        elif tag == TAG_INT:
            if n != 8:
                raise EncodingError("integer parts are exactly 8 bytes")
            out.append(int.from_bytes(body, "big"))
        else:
            raise EncodingError(f"unknown part tag 0x{tag:02x}")
    return out


def hash_id(preimage: bytes) -> bytes:
    """SHA-256 of ``preimage``: the digest an overlay ID is derived from."""
    instrument.record("hash")
    return hashlib.sha256(preimage).digest()
