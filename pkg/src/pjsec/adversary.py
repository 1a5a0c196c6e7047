"""Executable Sybil, Eclipse and man-in-the-middle scenarios.

Failures are data here: every scenario returns an :class:`AttackReport` and
never raises for a rejected attempt.
"""
from __future__ import annotations

import csv
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, TextIO

from .cost import CostModelConfig, jitter_factors
from .errors import REJECTION_CLASSES
from .group import Group, GroupElement
from .overlay import OverlayId
from .protocol import Token
from .session import JoinOutcome, SessionTranscript, VicinityHead, run_join

TOKEN_FIELDS = ("ip", "pu_n", "id_n", "id_b", "id_v", "gamma1", "timestamp", "probe", "sig")

# hop -> fields an on-path attacker can rewrite in that message
TAMPER_FIELDS: dict[int, tuple[str, ...]] = {
    1: ("ip", "pu_n"),
    2: ("ip", "pu_n", "beta1", "id_b"),
    3: ("id_n", "gamma2") + tuple(f"token.{f}" for f in TOKEN_FIELDS),
    4: ("id_n", "beta3") + tuple(f"token.{f}" for f in TOKEN_FIELDS),
}

REPORT_COLUMNS = ("scenario", "seed", "attempts", "successes", *REJECTION_CLASSES, "Missed",
                  "bandwidth")

DEFAULT_NOW = 1_600_000_000


@dataclass(frozen=True)
class AttackScenario:
    kind: str  # "sybil" | "eclipse" | "mitm"
    seed: int
    k: int = 1
    target: OverlayId | None = None
    window: int = 1
    tamper: tuple[int, str] | None = None
    collude: bool = False

    def __post_init__(self):
        if self.kind not in ("sybil", "eclipse", "mitm"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == "sybil" and self.k < 1:
            raise ValueError("a Sybil scenario needs k >= 1")
        if self.kind == "eclipse" and (self.target is None or self.k < 0):
            raise ValueError("an Eclipse scenario needs a target and tries >= 0")
        if self.kind == "mitm" and self.tamper not in set(tamper_cells()):
            raise ValueError(f"invalid tamper cell {self.tamper!r}")


@dataclass
class AttackReport:
    kind: str
    seed: Any
    attempts: int = 0
    successes: int = 0
    rejections: Counter = field(default_factory=Counter)
    rejected_by: Counter = field(default_factory=Counter)
    bandwidth: float = 0.0
    transcripts: list[SessionTranscript] = field(default_factory=list)

    def add(self, outcome: JoinOutcome, bandwidth: float = 0.0) -> None:
        self.attempts += 1
        self.bandwidth += bandwidth
        self.transcripts.append(outcome.transcript)
        if outcome.accepted:
            self.successes += 1
        else:
            self.rejections[outcome.error.kind] += 1
            self.rejected_by[outcome.error.party or "?"] += 1

    @property
    def success_rate(self) -> float:
        return self.successes / self.attempts if self.attempts else 0.0

    def consistent(self) -> bool:
        return self.attempts == self.successes + sum(self.rejections.values())

    def csv_row(self, scenario: str) -> tuple:
        return (scenario, self.seed, self.attempts, self.successes,
                *(self.rejections.get(c, 0) for c in REJECTION_CLASSES),
                self.rejections.get("Missed", 0), f"{self.bandwidth:.6f}")


def write_reports_csv(out: TextIO, rows: list[tuple[str, AttackReport]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for scenario, report in rows:
        w.writerow(report.csv_row(scenario))


def _pick_friend(head: VicinityHead, rng: random.Random):
    if not head.members:
        raise ValueError("vicinity has no members to act as friend node")
    return head.members[rng.randrange(len(head.members))]


def run_sybil(k: int, ip: bytes, head: VicinityHead, seed, *, distinct_ips: bool = False,
              collude: bool = False, cfg: CostModelConfig = CostModelConfig(jitter=False),
              now: int = DEFAULT_NOW) -> AttackReport:
    """``k`` full joins from one physical identity, each with a fresh key pair.

    Bandwidth is charged per message actually delivered (``c_p`` each).
    With ``distinct_ips`` every attempt uses its own identity (control case).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = random.Random(f"sybil:{seed}")
    factors = jitter_factors(k, cfg, f"sybil-attempts:{seed}")
    report = AttackReport("sybil", seed)
    for i in range(k):
        identity = ip + b"#" + str(i).encode() if distinct_ips else ip
        outcome = run_join(identity, head, _pick_friend(head, rng), now + i, rng=rng,
                           collude=collude)
        report.add(outcome, outcome.transcript.hops * cfg.c_p * factors[i])
    return report


def adjacency_slots(target: OverlayId, window: int) -> set[int]:
    """The ``window`` node fields that follow ``target`` around the ring."""
    slots = target.layout.slots
    return {(target.node + 1 + i) % slots for i in range(min(window, slots))}


def binomial_upper_bound(n: int, p: float, z: float = 3.0) -> float:
    return n * p + z * math.sqrt(n * p * (1 - p))


def run_eclipse(target: OverlayId, tries: int, head: VicinityHead, seed, *, window: int = 1,
                cfg: CostModelConfig = CostModelConfig(jitter=False),
                now: int = DEFAULT_NOW) -> AttackReport:
    """Join with fresh (ip, key) pairs hoping to land next to ``target``.

    Each try runs against a scratch copy of the vicinity and is revoked
    afterwards, so landing spots are the unprobed digest slots.
    """
    if not target.same_prefix(head.id_v):
        raise ValueError("target is outside this vicinity's ID range")
    rng = random.Random(f"eclipse:{seed}")
    wanted = adjacency_slots(target, window)
    scratch = head.scratch()
    report = AttackReport("eclipse", seed)
    for i in range(tries):
        identity = b"eclipse:" + rng.randbytes(8)
        outcome = run_join(identity, scratch, _pick_friend(head, rng), now, rng=rng)
        report.attempts += 1
        report.bandwidth += outcome.transcript.hops * cfg.c_p
        report.transcripts.append(outcome.transcript)
        if not outcome.accepted:
            report.rejections[outcome.error.kind] += 1
            continue
        if outcome.peer.id_n.node in wanted:
            report.successes += 1
        else:
            report.rejections["Missed"] += 1
        scratch.revoke(identity)
    return report


def tamper_cells() -> Iterator[tuple[int, str]]:
    for hop, names in TAMPER_FIELDS.items():
        for name in names:
            yield hop, name


def _random_id(like: OverlayId, rng: random.Random) -> OverlayId:
    while True:
        candidate = OverlayId(rng.randrange(1 << like.layout.m), like.layout)
        if candidate != like:
            return candidate


def _random_element(group: Group, original: GroupElement, rng: random.Random) -> GroupElement:
    while True:
        candidate = group.random_element(rng)
        if candidate != original:
            return candidate


def tamper_value(name: str, original: Any, group: Group, head: VicinityHead,
                 rng: random.Random) -> Any:
    """A random value of the right type that differs from ``original``.

    Replacement forwarder IDs are drawn from other trusted members, so the
    rejection comes from the handshake's cross-checks rather than V's trust list.
    """
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "ip":
        return b"mallory:" + rng.randbytes(8)
    if isinstance(original, GroupElement):
        return _random_element(group, original, rng)
    if leaf == "id_b":
        others = sorted((m for m in head.state.trusted_members if m != original),
                        key=lambda oid: oid.raw)
        return others[rng.randrange(len(others))] if others else _random_id(original, rng)
    if isinstance(original, OverlayId):
        return _random_id(original, rng)
    if leaf == "timestamp":
        return (original - rng.randint(1, 3600)) % (1 << 63)
    if leaf == "probe":
        slots = head.state.layout.slots
        return (original + rng.randint(1, slots - 1)) % slots
    if leaf == "sig":
        r = group.random_element(rng)
        return r.data + group.scalar_bytes(group.random_scalar(rng))
    raise ValueError(f"no tamper rule for field {name!r}")


def tamper_message(msg: Any, name: str, group: Group, head: VicinityHead,
                   rng: random.Random) -> Any:
    if name.startswith("token."):
        leaf = name.split(".", 1)[1]
        token: Token = msg.token
        new = tamper_value(name, getattr(token, leaf), group, head, rng)
        return replace(msg, token=replace(token, **{leaf: new}))
    return replace(msg, **{name: tamper_value(name, getattr(msg, name), group, head, rng)})


def run_mitm(head: VicinityHead, tamper: tuple[int, str], seed, *, sessions: int = 1,
             collude: bool = False, cfg: CostModelConfig = CostModelConfig(jitter=False),
             now: int = DEFAULT_NOW) -> AttackReport:
    """Honest joins with one field rewritten in transit at the given hop."""
    hop, name = tamper
    if name not in TAMPER_FIELDS.get(hop, ()):
        raise ValueError(f"hop {hop} has no field {name!r}")
    report = AttackReport("mitm", seed)
    for i in range(sessions):
        rng = random.Random(f"mitm:{seed}:{hop}:{name}:{i}")
        scratch = head.scratch()

        def hook(at: int, msg):
            return tamper_message(msg, name, head.group, scratch, rng) if at == hop else msg

        identity = b"mitm:" + str(seed).encode() + b":" + str(i).encode()
        outcome = run_join(identity, scratch, _pick_friend(head, rng), now, rng=rng,
                           tamper=hook, collude=collude)
        report.add(outcome, outcome.transcript.hops * cfg.c_p)
    return report


def run_scenario(scenario: AttackScenario, head: VicinityHead, *, ip: bytes = b"sybil",
                 sessions: int = 1) -> AttackReport:
    if scenario.kind == "sybil":
        return run_sybil(scenario.k, ip, head, scenario.seed, collude=scenario.collude)
    if scenario.kind == "eclipse":
        return run_eclipse(scenario.target, scenario.k, head, scenario.seed,
                           window=scenario.window)
    return run_mitm(head, scenario.tamper, scenario.seed, sessions=sessions,
                    collude=scenario.collude)
