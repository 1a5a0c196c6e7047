"""The three-party joining handshake.

Message flow (N = new node, B = friend/bootstrap node, V = vicinity head)::

    N -> B   JoinRequest           (ip, pu_n)
    B -> V   ForwardedJoinRequest  (ip, pu_n, beta1 = s_b*pu_n, id_b)
    V -> B   TokenResponse         (id_n, gamma2 = s_v*pu_n, token)
    B -> N   EndorsementResponse   (id_n, beta3 = s_b*pu_v, token)

V derives the shared point gamma1 = s_v*beta1, B derives s_b*gamma2 and N
derives s_n*beta3; all three equal s_n*s_b*s_v*G. The overlay ID digest is
SHA-256 over (ip, pu_n, shared point), so B and N can each confirm V's
assignment without learning anyone else's secret.

Each operation below is a pure function over the caller's local state; the
stateful role wrappers and the message-routing driver are in
:mod:`pjsec.session`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

from . import schnorr
from .encoding import canonical_decode, canonical_encode, hash_id
from .errors import (BadSignature, DuplicateIdentity, EncodingError, IdMismatch,
                     InvalidRequest, UnknownIdentity, UntrustedForwarder)
from .group import Group, GroupElement, KeyPair, get_group
from .overlay import OverlayId, VicinityState, compose_id, digest_slot

DEFAULT_MAX_AGE = 24 * 3600


@dataclass(frozen=True)
class JoinRequest:
    ip: bytes
    pu_n: GroupElement


@dataclass(frozen=True)
class ForwardedJoinRequest:
    ip: bytes
    pu_n: GroupElement
    beta1: GroupElement
    id_b: OverlayId


@dataclass(frozen=True)
class Token:
    ip: bytes
    pu_n: GroupElement
    id_n: OverlayId
    id_b: OverlayId
    id_v: OverlayId
    gamma1: GroupElement
    timestamp: int
    probe: int
    sig: bytes = field(default=b"", repr=False)

    @property
    def probe_bytes(self) -> bytes:
        width = max(1, (self.id_n.layout.h + 7) // 8)
        return self.probe.to_bytes(width, "big")

    def tau(self) -> bytes:
        """The signed payload: every field except the signature."""
        return canonical_encode([self.ip, self.pu_n, self.id_n, self.id_b, self.id_v,
                                 self.gamma1, self.timestamp, self.probe_bytes])

    def id_preimage(self) -> bytes:
        return identity_preimage(self.ip, self.pu_n, self.gamma1)


@dataclass(frozen=True)
class TokenResponse:
    id_n: OverlayId
    gamma2: GroupElement
    token: Token


@dataclass(frozen=True)
class EndorsementResponse:
    id_n: OverlayId
    beta3: GroupElement
    token: Token


@dataclass(frozen=True)
class JoinedPeer:
    id_n: OverlayId
    token: Token


Message = Union[JoinRequest, ForwardedJoinRequest, TokenResponse, EndorsementResponse, Token]


def _group(group: Group | None) -> Group:
    return group if group is not None else get_group()


def identity_preimage(ip: bytes, pu_n: GroupElement, shared: GroupElement) -> bytes:
    return canonical_encode([ip, pu_n, shared])


def id_matches_digest(token: Token, digest: bytes) -> bool:
    """Whether ``token.id_n`` is the digest's slot (plus the recorded probe) under id_v."""
    layout = token.id_n.layout
    if not token.id_n.same_prefix(token.id_v) or token.probe >= layout.slots:
        return False
    return token.id_n.node == (digest_slot(digest, layout) + token.probe) % layout.slots


def _check_element(group: Group, value: GroupElement, what: str, party: str) -> None:
    if not group.is_element(value) or value == group.identity:
        raise InvalidRequest(f"{what} is not a usable group element", party=party)


def n_start(identity: bytes, keypair: KeyPair, friend: OverlayId) -> JoinRequest:
    """Step 1 at N: announce (ip, pu_n) to the friend node ``friend``."""
    if not identity:
        raise InvalidRequest("empty identity", party="N")
    return JoinRequest(bytes(identity), keypair.pk)


def b_forward(req: JoinRequest, b_keys: KeyPair, b_id: OverlayId, *,
              group: Group | None = None) -> ForwardedJoinRequest:
    """Step 2 at B: blind N's key with s_b and pass the request to V."""
    group = _group(group)
    if not req.ip:
        raise InvalidRequest("empty identity", party="B")
    _check_element(group, req.pu_n, "pu_n", "B")
    return ForwardedJoinRequest(req.ip, req.pu_n, group.mul(b_keys.sk, req.pu_n), b_id)


def v_issue(fwd: ForwardedJoinRequest, v_keys: KeyPair, v_state: VicinityState, now: int, *,
            group: Group | None = None, max_age: int = DEFAULT_MAX_AGE,
            vouched_by: VicinityState | None = None) -> TokenResponse:
    """Step 3 at V: derive the node's overlay ID, sign its token and register it.

    ``vouched_by`` is the full vicinity that handed this request over (see
    :func:`pjsec.overlay.forward_overflow`); its trust set is used instead of
    ours when checking the forwarder.
    """
    group = _group(group)
    trust = vouched_by if vouched_by is not None else v_state
    if not trust.is_trusted(fwd.id_b):
        raise UntrustedForwarder(f"forwarder {fwd.id_b} is not trusted", party="V")
    if not fwd.ip:
        raise InvalidRequest("empty identity", party="V")
    _check_element(group, fwd.pu_n, "pu_n", "V")
    _check_element(group, fwd.beta1, "beta1", "V")

    with v_state.lock:
        previous = v_state.registry.get(fwd.ip)
        if previous is not None and fwd.ip not in v_state.revoked:
            if now - previous.timestamp <= max_age:
                raise DuplicateIdentity(f"{fwd.ip!r} already holds a live token", party="V")
            # expired: the identity may rejoin and its old slot is recycled
            v_state.release(fwd.ip)
            v_state.trusted_members.discard(previous.id_n)

        gamma1 = group.mul(v_keys.sk, fwd.beta1)
        gamma2 = group.mul(v_keys.sk, fwd.pu_n)
        digest = hash_id(identity_preimage(fwd.ip, fwd.pu_n, gamma1))
        id_n, probe = compose_id(v_state, digest)
        unsigned = Token(fwd.ip, fwd.pu_n, id_n, fwd.id_b, v_state.id_v, gamma1, now, probe)
        token = replace(unsigned, sig=schnorr.sign(group, v_keys.sk, unsigned.tau()))

        v_state.registry[fwd.ip] = token
        v_state.revoked.discard(fwd.ip)
        v_state.occupy(id_n.node, fwd.ip)
        v_state.trusted_members.add(id_n)
    return TokenResponse(id_n, gamma2, token)


def b_verify_and_endorse(resp: TokenResponse, fwd: ForwardedJoinRequest, b_keys: KeyPair,
                         pu_v: GroupElement, *, group: Group | None = None,
                         trace: dict | None = None) -> EndorsementResponse:
    """Step 4 at B: check V's token against B's own view of the request.

    ``fwd`` is the request B itself forwarded, not anything echoed back.
    """
    group = _group(group)
    token = resp.token
    if not schnorr.verify(group, pu_v, token.tau(), token.sig):
        raise BadSignature("token signature does not verify under pu_v", party="B")
    if resp.id_n != token.id_n or token.id_b != fwd.id_b:
        raise IdMismatch("response ids disagree with the signed token", party="B")
    beta2 = group.mul(b_keys.sk, resp.gamma2)
    if trace is not None:
        trace["beta2"] = beta2
    preimage = identity_preimage(fwd.ip, fwd.pu_n, beta2)
    digest = hash_id(preimage)
    if preimage != token.id_preimage() or not id_matches_digest(token, digest):
        raise IdMismatch("ID recomputed from beta2 does not match the token", party="B")
    return EndorsementResponse(token.id_n, group.mul(b_keys.sk, pu_v), token)


def n_endorse(endo: EndorsementResponse, identity: bytes, keypair: KeyPair,
              pu_v: GroupElement, *, group: Group | None = None,
              trace: dict | None = None) -> JoinedPeer:
    """Endorsement at N: confirm the ID from alpha = s_n*beta3 and accept the token."""
    group = _group(group)
    token = endo.token
    if not schnorr.verify(group, pu_v, token.tau(), token.sig):
        raise BadSignature("token signature does not verify under pu_v", party="N")
    if endo.id_n != token.id_n:
        raise IdMismatch("endorsed id differs from the signed token", party="N")
    alpha = group.mul(keypair.sk, endo.beta3)
    if trace is not None:
        trace["alpha"] = alpha
    preimage = identity_preimage(identity, keypair.pk, alpha)
    digest = hash_id(preimage)
    if preimage != token.id_preimage() or not id_matches_digest(token, digest):
        raise IdMismatch("ID recomputed from alpha does not match the token", party="N")
    return JoinedPeer(token.id_n, token)


def v_query(v_state: VicinityState, token: Token) -> bool:
    """True when ``token`` is the live, unrevoked token registered for its identity."""
    with v_state.lock:
        return token.ip not in v_state.revoked and v_state.registry.get(token.ip) == token


def token_verify(token: Token, pu_v: GroupElement, now: int, max_age: int = DEFAULT_MAX_AGE, *,
                 group: Group | None = None, v_state: VicinityState | None = None) -> bool:
    """Check a token offline: signature, freshness and ID binding.

    With ``v_state`` the issuing head's revocation state is consulted too.
    """
    group = _group(group)
    if not isinstance(token, Token) or not schnorr.verify(group, pu_v, token.tau(), token.sig):
        return False
    if not 0 <= now - token.timestamp <= max_age:
        return False
    if not id_matches_digest(token, hash_id(token.id_preimage())):
        return False
    return v_state is None or v_query(v_state, token)


def revoke(v_state: VicinityState, ip: bytes) -> None:
    with v_state.lock:
        token = v_state.registry.get(ip)
        if token is None:
            raise UnknownIdentity(f"{ip!r} was never registered", party="V")
        if ip in v_state.revoked:
            return
        v_state.revoked.add(ip)
        v_state.release(ip)
        v_state.trusted_members.discard(token.id_n)


# Wire format: one tag byte, then the canonical encoding of the fields.
# Tokens nested in responses travel as a bytes part holding their own wire form.
MSG_JOIN_REQUEST = 0x01
MSG_FORWARDED = 0x02
MSG_TOKEN_RESPONSE = 0x03
MSG_ENDORSEMENT = 0x04
MSG_TOKEN = 0x05


def encode_message(msg: Message) -> bytes:
    if isinstance(msg, JoinRequest):
        return bytes([MSG_JOIN_REQUEST]) + canonical_encode([msg.ip, msg.pu_n])
    if isinstance(msg, ForwardedJoinRequest):
        return bytes([MSG_FORWARDED]) + canonical_encode([msg.ip, msg.pu_n, msg.beta1, msg.id_b])
    if isinstance(msg, Token):
        return bytes([MSG_TOKEN]) + canonical_encode(
            [msg.ip, msg.pu_n, msg.id_n, msg.id_b, msg.id_v, msg.gamma1, msg.timestamp,
             msg.probe_bytes, msg.sig])
    if isinstance(msg, TokenResponse):
        return bytes([MSG_TOKEN_RESPONSE]) + canonical_encode(
            [msg.id_n, msg.gamma2, encode_message(msg.token)])
    if isinstance(msg, EndorsementResponse):
        return bytes([MSG_ENDORSEMENT]) + canonical_encode(
            [msg.id_n, msg.beta3, encode_message(msg.token)])
    raise EncodingError(f"not a protocol message: {type(msg).__name__}")


_SHAPES = {
    MSG_JOIN_REQUEST: (bytes, GroupElement),
    MSG_FORWARDED: (bytes, GroupElement, GroupElement, OverlayId),
    MSG_TOKEN: (bytes, GroupElement, OverlayId, OverlayId, OverlayId, GroupElement, int,
                bytes, bytes),
    MSG_TOKEN_RESPONSE: (OverlayId, GroupElement, bytes),
    MSG_ENDORSEMENT: (OverlayId, GroupElement, bytes),
}


def decode_message(data: bytes, group: Group | None = None) -> Message:
    group = _group(group)
    if not data:
        raise EncodingError("empty message")
    tag = data[0]
    shape = _SHAPES.get(tag)
    if shape is None:
        raise EncodingError(f"unknown message type 0x{tag:02x}")
    parts = canonical_decode(data[1:], group.element_size)
    if len(parts) != len(shape) or not all(isinstance(p, t) for p, t in zip(parts, shape)):
        raise EncodingError(f"malformed message of type 0x{tag:02x}")
    for p in parts:
        if isinstance(p, GroupElement):
            group.decode(p.data)
    if tag == MSG_JOIN_REQUEST:
        return JoinRequest(*parts)
    if tag == MSG_FORWARDED:
        return ForwardedJoinRequest(*parts)
    if tag == MSG_TOKEN:
        ip, pu_n, id_n, id_b, id_v, gamma1, ts, probe, sig = parts
        return Token(ip, pu_n, id_n, id_b, id_v, gamma1, ts, int.from_bytes(probe, "big"), sig)
    inner = decode_message(parts[2], group)
    if not isinstance(inner, Token):
        raise EncodingError("response does not carry a token")
    cls = TokenResponse if tag == MSG_TOKEN_RESPONSE else EndorsementResponse
    return cls(parts[0], parts[1], inner)
