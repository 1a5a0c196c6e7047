"""Schnorr signatures over any :class:`~pjsec.group.Group`.

A signature is ``R || s`` where ``R = k*G`` and ``s = k + e*sk (mod order)``
with ``e = H(R || pk || msg)``. Nonces are derived deterministically from the
secret key and the message, so equal inputs give byte-identical signatures.

The digests used here are internal to the scheme and are not counted as
identity hashes by :mod:`pjsec.instrument`.
"""
from __future__ import annotations

import hashlib

from .errors import EncodingError
from .group import Group, GroupElement

_NONCE_TAG = b"pjsec/schnorr/nonce"
_CHALLENGE_TAG = b"pjsec/schnorr/challenge"


def signature_size(group: Group) -> int:
    return group.element_size + group.scalar_size


def _to_scalar(group: Group, *chunks: bytes) -> int:
    return int.from_bytes(hashlib.sha256(b"".join(chunks)).digest(), "big") % group.order


def _challenge(group: Group, r: GroupElement, pk: GroupElement, msg: bytes) -> int:
    return _to_scalar(group, _CHALLENGE_TAG, r.data, pk.data, msg)


def sign(group: Group, sk: int, msg: bytes) -> bytes:
    if not 0 < sk < group.order:
        raise ValueError("secret key out of range")
    pk = group.base_mul(sk)
    counter = 0
    while True:
        k = _to_scalar(group, _NONCE_TAG, group.scalar_bytes(sk), msg,
                       counter.to_bytes(4, "big"))
        if k:
            break
        counter += 1
    r = group.base_mul(k)
    s = (k + _challenge(group, r, pk, msg) * sk) % group.order
    return r.data + group.scalar_bytes(s)


def verify(group: Group, pk: GroupElement, msg: bytes, sig: bytes) -> bool:
    """Check ``sig`` on ``msg`` under ``pk``. Malformed input yields False."""
    if not isinstance(sig, (bytes, bytearray)) or len(sig) != signature_size(group):
        return False
    try:
        r = group.decode(sig[:group.element_size])
        pk = group.decode(pk.data)
    except EncodingError:
        return False
    s = int.from_bytes(sig[group.element_size:], "big")
    if s >= group.order or pk == group.identity:
        return False
    e = _challenge(group, r, pk, bytes(msg))
    return group.base_mul(s) == group.add(r, group.mul(e, pk))
