"""Structured m-bit overlay ID space and per-vicinity membership state.

An ID is ``b`` eNodeB bits, then ``p`` super-peer bits, then ``h`` node bits,
most significant first. A vicinity head owns one (eNodeB, super-peer) prefix
and hands out node fields below it.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import InsufficientSamples, OverlaySaturated, UntrustedForwarder, VicinityFull

if TYPE_CHECKING:
    from .protocol import ForwardedJoinRequest, Token


@dataclass(frozen=True)
class IdLayout:
    b: int
    p: int
    h: int

    def __post_init__(self):
        if min(self.b, self.p, self.h) < 1:
            raise ValueError("every ID field needs at least one bit")
        if self.m > 256:
            raise ValueError("layout wider than the 256-bit identity digest")

    @property
    def m(self) -> int:
        return self.b + self.p + self.h

    @property
    def slots(self) -> int:
        return 1 << self.h

    @property
    def byte_length(self) -> int:
        return (self.m + 7) // 8

    @classmethod
    def parse(cls, text: str) -> IdLayout:
        b, p, h = (int(part) for part in text.replace("|", ",").split(","))
        return cls(b, p, h)


@dataclass(frozen=True, order=True)
class OverlayId:
    raw: int
    layout: IdLayout = field(compare=False)

    def __post_init__(self):
        if not 0 <= self.raw < (1 << self.layout.m):
            raise ValueError(f"raw id {self.raw} does not fit in {self.layout.m} bits")

    @classmethod
    def from_fields(cls, layout: IdLayout, enodeb: int, superpeer: int, node: int) -> OverlayId:
        if not (0 <= enodeb < 1 << layout.b and 0 <= superpeer < 1 << layout.p
                and 0 <= node < 1 << layout.h):
            raise ValueError("field value out of range for layout")
        raw = (enodeb << (layout.p + layout.h)) | (superpeer << layout.h) | node
        return cls(raw, layout)

    @property
    def enodeb(self) -> int:
        return self.raw >> (self.layout.p + self.layout.h)

    @property
    def superpeer(self) -> int:
        return (self.raw >> self.layout.h) & ((1 << self.layout.p) - 1)

    @property
    def node(self) -> int:
        return self.raw & ((1 << self.layout.h) - 1)

    def fields(self) -> tuple[int, int, int]:
        return (self.enodeb, self.superpeer, self.node)

    def same_prefix(self, other: OverlayId) -> bool:
        return (self.layout == other.layout and self.enodeb == other.enodeb
                and self.superpeer == other.superpeer)

    def __hash__(self):
        return hash((self.raw, self.layout))

    def __eq__(self, other):
        if not isinstance(other, OverlayId):
            return NotImplemented
        return self.raw == other.raw and self.layout == other.layout

    def __str__(self) -> str:
        lay = self.layout
        return (f"{self.enodeb:0{lay.b}b}|{self.superpeer:0{lay.p}b}|"
                f"{self.node:0{lay.h}b}")


def digest_slot(digest: bytes, layout: IdLayout) -> int:
    """Low-order ``h`` bits of a digest: the node field before any probing."""
    if len(digest) * 8 < layout.h:
        raise ValueError("digest shorter than the node field")
    return int.from_bytes(digest, "big") & (layout.slots - 1)


@dataclass
class VicinityState:
    """Everything a vicinity head remembers about its members.

    ``registry`` maps a real identity to the last token issued for it;
    ``slots`` maps occupied node fields back to identities. Mutations must
    hold ``lock``.
    """

    id_v: OverlayId
    trusted_members: set[OverlayId] = field(default_factory=set)
    registry: dict[bytes, Token] = field(default_factory=dict)
    revoked: set[bytes] = field(default_factory=set)
    slots: dict[int, bytes] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    @property
    def layout(self) -> IdLayout:
        return self.id_v.layout

    @property
    def occupancy(self) -> int:
        return len(self.slots)

    @property
    def full(self) -> bool:
        return self.occupancy >= self.layout.slots

    def is_trusted(self, member: OverlayId) -> bool:
        return member in self.trusted_members

    def occupy(self, node_field: int, ip: bytes) -> None:
        if node_field in self.slots:
            raise ValueError(f"slot {node_field} already taken")
        self.slots[node_field] = ip

    def release(self, ip: bytes) -> None:
        for slot, owner in list(self.slots.items()):
            if owner == ip:
                del self.slots[slot]

    def snapshot(self) -> VicinityState:
        with self.lock:
            return VicinityState(self.id_v, set(self.trusted_members), dict(self.registry),
                                 set(self.revoked), dict(self.slots))

    def check_invariants(self) -> None:
        active = [ip for ip in self.registry if ip not in self.revoked]
        assert self.occupancy == len(active), "occupancy out of sync with registry"
        assert self.occupancy <= self.layout.slots


def compose_id(v_state: VicinityState, digest: bytes) -> tuple[OverlayId, int]:
    """Place a new node under ``v_state``'s prefix.

    The node field is the digest's low ``h`` bits, linearly probed upward
    (mod 2^h) past occupied slots. Returns ``(id, probe_count)``.
    """
    layout = v_state.layout
    if v_state.full:
        raise VicinityFull(f"all {layout.slots} slots under {v_state.id_v} are taken", party="V")
    base = digest_slot(digest, layout)
    for probe in range(layout.slots):
        slot = (base + probe) % layout.slots
        if slot not in v_state.slots:
            return (OverlayId.from_fields(layout, v_state.id_v.enodeb,
                                          v_state.id_v.superpeer, slot), probe)
    raise VicinityFull(party="V")  # pragma: no cover - guarded by the occupancy check


def forward_overflow(v_state: VicinityState, fwd: ForwardedJoinRequest,
                     neighbors: Sequence[VicinityState]) -> VicinityState:
    """Pick the vicinity that should serve a request ``v_state`` cannot hold.

    The least-occupied non-full neighbour wins; ties go to the lowest id_v.
    The full head still vets the forwarder before passing the request on.
    """
    if not v_state.full:
        raise ValueError("overflow forwarding is only for full vicinities")
    if not v_state.is_trusted(fwd.id_b):
        raise UntrustedForwarder(f"{fwd.id_b} is not a trusted member", party="V")
    open_ = [n for n in neighbors if not n.full]
    if not open_:
        raise OverlaySaturated("every neighbouring vicinity is full", party="V")
    return min(open_, key=lambda n: (n.occupancy, n.id_v.raw))


def uniformity_stat(ids: Iterable[OverlayId], layout: IdLayout) -> float:
    """Pearson chi-square of the node fields over all 2^h buckets."""
    counts = [0] * layout.slots
    n = 0
    for oid in ids:
        counts[oid.node] += 1
        n += 1
    if n < 10 * layout.slots:
        raise InsufficientSamples(f"need at least {10 * layout.slots} ids, got {n}")
    expected = n / layout.slots
    return sum((c - expected) ** 2 for c in counts) / expected
