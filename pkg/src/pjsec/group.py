"""Prime-order group arithmetic behind a small pluggable interface.

Elements are carried around as their canonical fixed-length encoding
(:class:`GroupElement`), which keeps them hashable, immutable and trivially
comparable. Concrete groups:

* ``secp256k1``: the default. Arithmetic is done by libsecp256k1 (via
  coincurve) when available, otherwise by the pure-Python backend.
* ``secp256k1-py``: the same curve in pure Python. Slow; used to cross-check
  the C backend.
* ``modp-101`` / ``modp-65267``: tiny multiplicative groups for oracle tests
  only. They offer no security whatsoever.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from functools import lru_cache

from . import instrument
from .errors import EncodingError

try:
    import coincurve
except ImportError:  # pragma: no cover - exercised only without the wheel
    coincurve = None


@dataclass(frozen=True)
class GroupElement:
    data: bytes

    def __bytes__(self) -> bytes:
        return self.data

    def hex(self) -> str:
        return self.data.hex()

    def __repr__(self) -> str:
        h = self.data.hex()
        return f"GroupElement({h[:16]}...)" if len(h) > 20 else f"GroupElement({h})"


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: GroupElement


class Group:
    """Cyclic group <G> of known order with instrumented operations.

    Subclasses provide ``_mul``, ``_add`` and ``_check`` over raw encodings.
    """

    group_id: str
    order: int
    element_size: int
    generator: GroupElement
    identity: GroupElement

    @property
    def scalar_size(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def mul(self, k: int, point: GroupElement) -> GroupElement:
        instrument.record("mul")
        k %= self.order
        if k == 0 or point == self.identity:
            return self.identity
        return GroupElement(self._mul(k, point.data))

    def base_mul(self, k: int) -> GroupElement:
        return self.mul(k, self.generator)

    def add(self, a: GroupElement, b: GroupElement) -> GroupElement:
        instrument.record("add")
        if a == self.identity:
            return b
        if b == self.identity:
            return a
        return GroupElement(self._add(a.data, b.data))

    def decode(self, data: bytes) -> GroupElement:
        data = bytes(data)
        if len(data) != self.element_size:
            raise EncodingError(
                f"{self.group_id} element must be {self.element_size} bytes, got {len(data)}"
            )
        if data != self.identity.data:
            self._check(data)
        return GroupElement(data)

    def is_element(self, value: object) -> bool:
        if not isinstance(value, GroupElement):
            return False
        try:
            self.decode(value.data)
        except EncodingError:
            return False
        return True

    def random_scalar(self, rng=None) -> int:
        rng = rng or secrets.SystemRandom()
        return rng.randrange(1, self.order)

    def random_element(self, rng=None) -> GroupElement:
        return self.base_mul(self.random_scalar(rng))

    def scalar_bytes(self, k: int) -> bytes:
        return (k % self.order).to_bytes(self.scalar_size, "big")

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.group_id}>"

    def _mul(self, k: int, data: bytes) -> bytes:
        raise NotImplementedError

    def _add(self, a: bytes, b: bytes) -> bytes:
        raise NotImplementedError

    def _check(self, data: bytes) -> None:
        raise NotImplementedError


class ModPGroup(Group):
    """Subgroup of Z_p* generated by ``g``; ``order`` is the order of ``g``."""

    def __init__(self, p: int, g: int, order: int, group_id: str):
        if pow(g, order, p) != 1:
            raise ValueError("order is not a multiple of the order of g")
        self.p = p
        self.group_id = group_id
        self.order = order
        self.element_size = (p.bit_length() + 7) // 8
        self.generator = self._enc(g)
        self.identity = self._enc(1)

    def _enc(self, x: int) -> GroupElement:
        return GroupElement(x.to_bytes(self.element_size, "big"))

    def _mul(self, k: int, data: bytes) -> bytes:
        return pow(int.from_bytes(data, "big"), k, self.p).to_bytes(self.element_size, "big")

    def _add(self, a: bytes, b: bytes) -> bytes:
        x = int.from_bytes(a, "big") * int.from_bytes(b, "big") % self.p
        return x.to_bytes(self.element_size, "big")

    def _check(self, data: bytes) -> None:
        x = int.from_bytes(data, "big")
        if not 0 < x < self.p or pow(x, self.order, self.p) != 1:
            raise EncodingError(f"{x} is not in the subgroup of order {self.order}")

    def to_int(self, point: GroupElement) -> int:
        return int.from_bytes(point.data, "big")


# secp256k1 domain parameters (SEC 2)
_P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
_GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_INF = (0, 1, 0)


def _jdouble(pt):
    x, y, z = pt
    if not y or not z:
        return _INF
    yy = y * y % _P
    s = 4 * x * yy % _P
    m = 3 * x * x % _P
    x3 = (m * m - 2 * s) % _P
    return x3, (m * (s - x3) - 8 * yy * yy) % _P, 2 * y * z % _P


def _jadd(p1, p2):
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    if not z1:
        return p2
    if not z2:
        return p1
    z1z1 = z1 * z1 % _P
    z2z2 = z2 * z2 % _P
    u1 = x1 * z2z2 % _P
    u2 = x2 * z1z1 % _P
    s1 = y1 * z2 * z2z2 % _P
    s2 = y2 * z1 * z1z1 % _P
    if u1 == u2:
        return _jdouble(p1) if s1 == s2 else _INF
    h = u2 - u1
    r = s2 - s1
    hh = h * h % _P
    hhh = h * hh % _P
    v = u1 * hh % _P
    x3 = (r * r - hhh - 2 * v) % _P
    return x3, (r * (v - x3) - s1 * hhh) % _P, z1 * z2 * h % _P


def _jmul(k: int, pt):
    result = _INF
    addend = pt
    while k:
        if k & 1:
            result = _jadd(result, addend)
        addend = _jdouble(addend)
        k >>= 1
    return result


def _affine_bytes(pt) -> bytes:
    x, y, z = pt
    if not z:
        return bytes(33)
    zinv = pow(z, -1, _P)
    zinv2 = zinv * zinv % _P
    ax, ay = x * zinv2 % _P, y * zinv2 * zinv % _P
    return bytes([2 + (ay & 1)]) + ax.to_bytes(32, "big")


def _lift(data: bytes):
    if data[0] not in (2, 3):
        raise EncodingError("bad point prefix")
    x = int.from_bytes(data[1:], "big")
    if x >= _P:
        raise EncodingError("x coordinate out of range")
    rhs = (pow(x, 3, _P) + 7) % _P
    y = pow(rhs, (_P + 1) // 4, _P)
    if y * y % _P != rhs:
        raise EncodingError("x is not on the curve")
    if y & 1 != data[0] & 1:
        y = _P - y
    return x, y, 1


class Secp256k1Group(Group):
    """secp256k1 with 33-byte SEC1 compressed encoding; 33 zero bytes is infinity."""

    order = _N
    element_size = 33

    def __init__(self, backend: str = "auto"):
        if backend == "auto":
            backend = "coincurve" if coincurve is not None else "python"
        if backend not in ("coincurve", "python"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "coincurve" and coincurve is None:
            raise RuntimeError("coincurve is not installed")
        self.backend = backend
        self.group_id = "secp256k1" if backend == "coincurve" else "secp256k1-py"
        self.identity = GroupElement(bytes(33))
        self.generator = GroupElement(_affine_bytes((_GX, _GY, 1)))

    def _mul(self, k: int, data: bytes) -> bytes:
        if self.backend == "coincurve":
            if data == self.generator.data:
                return coincurve.PublicKey.from_secret(k.to_bytes(32, "big")).format()
            return coincurve.PublicKey(data).multiply(k.to_bytes(32, "big")).format()
        return _affine_bytes(_jmul(k, _lift(data)))

    def _add(self, a: bytes, b: bytes) -> bytes:
        if self.backend == "coincurve":
            try:
                return coincurve.PublicKey.combine_keys(
                    [coincurve.PublicKey(a), coincurve.PublicKey(b)]
                ).format()
            except ValueError:
                # libsecp256k1 refuses to return the point at infinity
                return self.identity.data
        return _affine_bytes(_jadd(_lift(a), _lift(b)))

    def _check(self, data: bytes) -> None:
        _lift(data)


@lru_cache(maxsize=None)
def get_group(group_id: str = "secp256k1") -> Group:
    if group_id == "secp256k1":
        return Secp256k1Group("auto")
    if group_id == "secp256k1-py":
        return Secp256k1Group("python")
    if group_id == "modp-101":
        return ModPGroup(101, 2, 100, "modp-101")
    if group_id == "modp-65267":
        # safe prime 2*32633 + 1; 4 generates the order-32633 subgroup
        return ModPGroup(65267, 4, 32633, "modp-65267")
    raise KeyError(f"unknown group {group_id!r}")


def keygen(group: Group, rng=None) -> KeyPair:
    """Draw ``sk`` uniformly from [1, order-1] and return ``(sk, sk*G)``."""
    sk = group.random_scalar(rng)
    return KeyPair(sk, group.base_mul(sk))


def keypair_from_secret(group: Group, sk: int) -> KeyPair:
    if not 0 < sk < group.order:
        raise ValueError("secret scalar must be in [1, order-1]")
    return KeyPair(sk, group.base_mul(sk))
