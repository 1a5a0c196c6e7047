"""Secure node-ID assignment for mobile structured P2P overlays.

A new node N, a friend node B and a vicinity head V agree on a shared group
element, V derives N's overlay ID from it and signs a token, and B and N
each recompute the ID before accepting it.
"""
from .errors import (BadSignature, DuplicateIdentity, EncodingError, IdMismatch,
                     InsufficientSamples, InvalidRequest, OverlaySaturated, PJSecError,
                     ProtocolError, UnknownIdentity, UnknownSession, UntrustedForwarder,
                     VicinityFull)
from .group import Group, GroupElement, KeyPair, get_group, keygen, keypair_from_secret
from .instrument import OpCounts, count_ops
from .overlay import IdLayout, OverlayId, VicinityState, compose_id, uniformity_stat
from .protocol import (EndorsementResponse, ForwardedJoinRequest, JoinRequest, Token,
                       TokenResponse, decode_message, encode_message, revoke, token_verify)
from .session import JoinOutcome, Member, SessionTranscript, VicinityHead, run_join

__version__ = "0.1.0"

__all__ = [
    "BadSignature", "DuplicateIdentity", "EncodingError", "IdMismatch", "InsufficientSamples",
    "InvalidRequest", "OverlaySaturated", "PJSecError", "ProtocolError", "UnknownIdentity",
    "UnknownSession", "UntrustedForwarder", "VicinityFull",
    "Group", "GroupElement", "KeyPair", "get_group", "keygen", "keypair_from_secret",
    "OpCounts", "count_ops",
    "IdLayout", "OverlayId", "VicinityState", "compose_id", "uniformity_stat",
    "EndorsementResponse", "ForwardedJoinRequest", "JoinRequest", "Token", "TokenResponse",
    "decode_message", "encode_message", "revoke", "token_verify",
    "JoinOutcome", "Member", "SessionTranscript", "VicinityHead", "run_join",
]
