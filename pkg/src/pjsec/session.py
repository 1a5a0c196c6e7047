"""Role state machines and a driver that routes one join end to end.

The driver delivers each of the four messages through an optional
``tamper(hop, message) -> message`` hook, which is how the adversary module
plays man-in-the-middle. Every run produces a :class:`SessionTranscript`.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from . import protocol
from .encoding import canonical_encode
from .errors import ProtocolError, UnknownSession
from .group import Group, GroupElement, KeyPair, keygen
from .instrument import OpCounts, count_ops
from .overlay import IdLayout, OverlayId, VicinityState, forward_overflow
from .protocol import (DEFAULT_MAX_AGE, EndorsementResponse, ForwardedJoinRequest, JoinedPeer,
                       JoinRequest, TokenResponse, encode_message)

Tamper = Callable[[int, Any], Any]


@dataclass(frozen=True)
class Member:
    """An overlay member that can act as someone's friend node."""

    ip: bytes
    keys: KeyPair
    id: OverlayId


class NewNode:
    def __init__(self, identity: bytes, keys: KeyPair, group: Group):
        self.identity = identity
        self.keys = keys
        self.group = group
        self.state = "idle"
        self.peer: JoinedPeer | None = None

    def start(self, friend: OverlayId) -> JoinRequest:
        req = protocol.n_start(self.identity, self.keys, friend)
        self.state = "pending"
        return req

    def finish(self, endo: EndorsementResponse, pu_v: GroupElement,
               trace: dict | None = None) -> JoinedPeer:
        if self.state != "pending":
            raise UnknownSession("no join in progress", party="N")
        try:
            self.peer = protocol.n_endorse(endo, self.identity, self.keys, pu_v,
                                           group=self.group, trace=trace)
        except ProtocolError:
            self.state = "rejected"
            raise
        self.state = "joined"
        return self.peer


class Bootstrap:
    """Friend node B. Pending sessions are keyed by the (ip, pu_n) B forwarded.

    A colluding B skips its step-4 checks and endorses whatever V returns.
    """

    def __init__(self, member: Member, group: Group, collude: bool = False):
        self.member = member
        self.group = group
        self.collude = collude
        self.pending: dict[tuple[bytes, GroupElement], ForwardedJoinRequest] = {}

    def forward(self, req: JoinRequest) -> ForwardedJoinRequest:
        fwd = protocol.b_forward(req, self.member.keys, self.member.id, group=self.group)
        self.pending[(fwd.ip, fwd.pu_n)] = fwd
        return fwd

    def endorse(self, session: tuple[bytes, GroupElement], resp: TokenResponse,
                pu_v: GroupElement, trace: dict | None = None) -> EndorsementResponse:
        fwd = self.pending.pop(session, None)
        if fwd is None:
            raise UnknownSession("response for a join B never forwarded", party="B")
        if self.collude:
            return EndorsementResponse(resp.id_n, self.group.mul(self.member.keys.sk, pu_v),
                                       resp.token)
        return protocol.b_verify_and_endorse(resp, fwd, self.member.keys, pu_v,
                                             group=self.group, trace=trace)


@dataclass
class VicinityHead:
    keys: KeyPair
    state: VicinityState
    group: Group
    members: list[Member] = field(default_factory=list)
    max_age: int = DEFAULT_MAX_AGE

    @property
    def pu_v(self) -> GroupElement:
        return self.keys.pk

    @property
    def id_v(self) -> OverlayId:
        return self.state.id_v

    def issue(self, fwd: ForwardedJoinRequest, now: int,
              vouched_by: VicinityState | None = None) -> TokenResponse:
        return protocol.v_issue(fwd, self.keys, self.state, now, group=self.group,
                                max_age=self.max_age, vouched_by=vouched_by)

    def scratch(self) -> VicinityHead:
        """Same keys and membership, independent registry: for throwaway runs."""
        return VicinityHead(self.keys, self.state.snapshot(), self.group, list(self.members),
                            self.max_age)

    def revoke(self, ip: bytes) -> None:
        protocol.revoke(self.state, ip)
        self.members = [m for m in self.members if m.ip != ip]

    @classmethod
    def create(cls, group: Group, id_v: OverlayId, rng, *, founders: int = 1, now: int = 0,
               max_age: int = DEFAULT_MAX_AGE, founder_prefix: bytes = b"founder") -> VicinityHead:
        """Set up a head whose first members join with the head itself as friend."""
        head = cls(keygen(group, rng), VicinityState(id_v, trusted_members={id_v}), group,
                   max_age=max_age)
        self_member = Member(b"head:" + str(id_v).encode(), head.keys, id_v)
        for i in range(founders):
            ip = founder_prefix + b":" + str(id_v).encode() + b":" + str(i).encode()
            outcome = run_join(ip, head, self_member, now, rng=rng)
            if not outcome.accepted:
                raise RuntimeError(f"founder join failed: {outcome.error!r}")
        return head


@dataclass
class TranscriptEvent:
    hop: int
    party: str
    label: str
    value: Any


@dataclass
class SessionTranscript:
    """Append-only record of one join attempt.

    ``timings`` holds wall-clock seconds per step and is deliberately left out
    of :meth:`to_bytes`, which is byte-stable under fixed seeds.
    """

    identity: bytes
    events: list[TranscriptEvent] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    ops: OpCounts = field(default_factory=OpCounts)
    hops: int = 0
    tampered: list[int] = field(default_factory=list)
    verdict_b: str = "pending"
    verdict_n: str = "pending"
    forwarded_to: OverlayId | None = None
    id_at_v: OverlayId | None = None
    id_at_b: OverlayId | None = None
    id_at_n: OverlayId | None = None
    error: str | None = None
    error_party: str | None = None

    def record(self, hop: int, party: str, label: str, value: Any) -> None:
        self.events.append(TranscriptEvent(hop, party, label, value))

    def get(self, label: str) -> Any:
        for ev in reversed(self.events):
            if ev.label == label:
                return ev.value
        raise KeyError(label)

    def _value_bytes(self, value: Any) -> bytes:
        if isinstance(value, (JoinRequest, ForwardedJoinRequest, TokenResponse,
                              EndorsementResponse, protocol.Token)):
            return encode_message(value)
        if isinstance(value, str):
            return value.encode()
        return canonical_encode([value])

    def to_bytes(self) -> bytes:
        chunks = [canonical_encode([self.identity])]
        for ev in self.events:
            chunks.append(canonical_encode([ev.hop, ev.party.encode(), ev.label.encode(),
                                            self._value_bytes(ev.value)]))
        chunks.append(canonical_encode([self.verdict_b.encode(), self.verdict_n.encode(),
                                        *self.ops.as_tuple()]))
        return b"".join(chunks)

    def to_text(self) -> str:
        lines = [f"join {self.identity.decode(errors='replace')}"]
        for ev in self.events:
            value = ev.value
            if isinstance(value, (GroupElement, OverlayId)):
                shown = value.hex() if isinstance(value, GroupElement) else str(value)
            elif isinstance(value, (bytes, str, int)):
                shown = value.hex() if isinstance(value, bytes) else str(value)
            else:
                shown = encode_message(value).hex()
            lines.append(f"  [{ev.hop}] {ev.party} {ev.label}: {shown}")
        lines.append(f"  verdict B={self.verdict_b} N={self.verdict_n}"
                     + (f" error={self.error}@{self.error_party}" if self.error else ""))
        lines.append(f"  ops mul={self.ops.mul} add={self.ops.add} hash={self.ops.hash} "
                     f"inverse={self.ops.inverse}")
        return "\n".join(lines)


@dataclass
class JoinOutcome:
    transcript: SessionTranscript
    peer: JoinedPeer | None = None
    error: ProtocolError | None = None
    keys: KeyPair | None = None

    @property
    def accepted(self) -> bool:
        return self.peer is not None


def run_join(identity: bytes, head: VicinityHead, friend: Member, now: int, *, rng=None,
             keys: KeyPair | None = None, tamper: Tamper | None = None, collude: bool = False,
             neighbors: Sequence[VicinityHead] = ()) -> JoinOutcome:
    """Run the four-message handshake for ``identity`` joining via ``friend``.

    If ``head`` is full the request is handed to the least-occupied neighbour.
    B and N look V's public key up by the token's id_v among ``head`` and
    ``neighbors`` (keys are distributed out of band).
    """
    group = head.group
    tr = SessionTranscript(identity)
    directory = {h.id_v: h.pu_v for h in itertools.chain([head], neighbors)}
    outcome = JoinOutcome(tr)
    clock = time.perf_counter

    def deliver(hop: int, msg):
        tr.hops += 1
        if tamper is not None:
            out = tamper(hop, msg)
            if out != msg:
                tr.tampered.append(hop)
            return out
        return msg

    with count_ops() as ops:
        try:
            t = clock()
            outcome.keys = keys = keys or keygen(group, rng)
            node = NewNode(identity, keys, group)
            req = node.start(friend.id)
            tr.timings["n_start"] = clock() - t
            tr.record(1, "N", "join_request", req)
            req = deliver(1, req)

            t = clock()
            b = Bootstrap(friend, group, collude=collude)
            fwd = b.forward(req)
            session = (fwd.ip, fwd.pu_n)
            tr.timings["b_forward"] = clock() - t
            tr.record(2, "B", "forwarded", fwd)
            fwd_in = deliver(2, fwd)

            t = clock()
            server, vouch = head, None
            if head.state.full and neighbors:
                state = forward_overflow(head.state, fwd_in, [n.state for n in neighbors])
                server = next(n for n in neighbors if n.state is state)
                vouch = head.state
                tr.forwarded_to = server.id_v
                tr.record(3, "V", "overflow_to", server.id_v)
            resp = server.issue(fwd_in, now, vouched_by=vouch)
            tr.timings["v_issue"] = clock() - t
            tr.id_at_v = resp.id_n
            tr.record(3, "V", "gamma1", resp.token.gamma1)
            tr.record(3, "V", "probe", resp.token.probe)
            if resp.token.probe:
                tr.record(3, "V", "probed", str(resp.id_n))
            tr.record(3, "V", "token_response", resp)
            resp = deliver(3, resp)

            t = clock()
            trace: dict = {}
            pu_v = directory.get(resp.token.id_v, head.pu_v)
            try:
                endo = b.endorse(session, resp, pu_v, trace)
            finally:
                if "beta2" in trace:
                    tr.record(4, "B", "beta2", trace["beta2"])
            tr.timings["b_verify_and_endorse"] = clock() - t
            tr.verdict_b = "accepted"
            tr.id_at_b = endo.id_n
            tr.record(4, "B", "endorsement", endo)
            endo = deliver(4, endo)

            t = clock()
            trace = {}
            try:
                peer = node.finish(endo, directory.get(endo.token.id_v, head.pu_v), trace)
            finally:
                if "alpha" in trace:
                    tr.record(5, "N", "alpha", trace["alpha"])
            tr.timings["n_endorse"] = clock() - t
            tr.verdict_n = "accepted"
            tr.id_at_n = peer.id_n
            outcome.peer = peer
            server.members.append(Member(identity, keys, peer.id_n))
        except ProtocolError as exc:
            outcome.error = exc
            tr.error, tr.error_party = exc.kind, exc.party
            if exc.party == "B" or tr.verdict_b == "pending":
                tr.verdict_b = "rejected" if exc.party == "B" else "not-reached"
            tr.verdict_n = "rejected"
    tr.ops = OpCounts(*ops.as_tuple())
    return outcome


def make_layout_head(group: Group, layout: IdLayout, enodeb: int, superpeer: int, rng, *,
                     founders: int = 1, now: int = 0,
                     max_age: int = DEFAULT_MAX_AGE) -> VicinityHead:
    id_v = OverlayId.from_fields(layout, enodeb, superpeer, 0)
    return VicinityHead.create(group, id_v, rng, founders=founders, now=now, max_age=max_age)
