"""Comparative cost model: op counts, per-join traffic, link capacity, Sybil traffic.

Bandwidth figures are in units of the reference bandwidth R0 (kbps). Jitter
models the available bandwidth drawn uniformly from [0.75*R0, 1.25*R0] at
each join; the draws depend only on the seed and the join index, so curves
for different schemes under one seed share the same network conditions.
"""
from __future__ import annotations

import csv
import math
import random
import timeit
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

from .instrument import OpCounts

# Best-case spectral efficiency: 64QAM (6 bits/symbol) at code rate 4/5.
MAX_SPECTRAL_EFFICIENCY = 6 * 4 / 5


@dataclass(frozen=True)
class OpTimings:
    """Seconds per operation."""

    mul: float
    add: float
    hash: float
    inverse: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mul, self.add, self.hash, self.inverse)


@dataclass(frozen=True)
class CostModelConfig:
    r0: float = 100.0
    cp_factor: float = 0.1
    cw_factor: float = 1.0
    r: int = 4
    bw_eff: float = 1.0
    eta: float = 0.9
    snr_eff: float = 1.23
    jitter: bool = True
    jitter_range: tuple[float, float] = (0.75, 1.25)
    timings: OpTimings | None = None

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("R0 must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.snr_eff <= 0:
            raise ValueError("SNR_eff must be positive")
        if self.r < 1:
            raise ValueError("collaborator count r must be >= 1")
        lo, hi = self.jitter_range
        if not 0 < lo <= hi:
            raise ValueError("bad jitter range")

    @property
    def c_p(self) -> float:
        """Peer/pilot link capacity, 0.1*R0."""
        return self.cp_factor * self.r0

    @property
    def c_w(self) -> float:
        """eNodeB/backbone link capacity, 1.0*R0."""
        return self.cw_factor * self.r0


@dataclass(frozen=True)
class SchemeProfile:
    name: str
    op_counts: OpCounts | None
    tc_formula: Callable[[CostModelConfig], float] = field(compare=False)


SCHEMES: dict[str, SchemeProfile] = {
    "PJ-Sec": SchemeProfile("PJ-Sec", OpCounts(23, 12, 3, 1), lambda c: 4 * c.c_p),
    "IAP": SchemeProfile("IAP", OpCounts(52, 10, 3, 8), lambda c: 2 * c.c_w),
    "RIAPPA": SchemeProfile("RIAPPA", OpCounts(147, 25, 3, 21), lambda c: 3 * c.c_w),
    # the distributed scheme has no operation-count profile
    "DistributedSol": SchemeProfile("DistributedSol", None, lambda c: 1.5 * c.r * c.c_p),
}


def scheme(name: str | SchemeProfile) -> SchemeProfile:
    if isinstance(name, SchemeProfile):
        return name
    try:
        return SCHEMES[name]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; expected one of {sorted(SCHEMES)}") from None


def shannon_capacity(snr: float, cfg: CostModelConfig = CostModelConfig()) -> float:
    """Attenuated Shannon bound in bits/s/Hz, capped at the 64QAM 4/5 ceiling."""
    if snr < 0 or math.isnan(snr):
        raise ValueError("SNR must be a non-negative linear ratio")
    s = cfg.bw_eff * cfg.eta * math.log2(1 + snr / cfg.snr_eff)
    return min(s, cfg.bw_eff * MAX_SPECTRAL_EFFICIENCY)


def tc_per_join(profile: str | SchemeProfile, cfg: CostModelConfig = CostModelConfig()) -> float:
    return scheme(profile).tc_formula(cfg)


def jitter_factors(n: int, cfg: CostModelConfig, seed) -> list[float]:
    if not cfg.jitter:
        return [1.0] * n
    rng = random.Random(seed)
    lo, hi = cfg.jitter_range
    return [rng.uniform(lo, hi) for _ in range(n)]


def total_traffic(profile: str | SchemeProfile, n_joins: int,
                  cfg: CostModelConfig = CostModelConfig(), seed=0) -> list[float]:
    """Cumulative bandwidth after each of ``n_joins`` joins."""
    if n_joins < 1:
        raise ValueError("n_joins must be >= 1")
    base = tc_per_join(profile, cfg)
    curve, total = [], 0.0
    for j in jitter_factors(n_joins, cfg, seed):
        total += base * j
        curve.append(total)
    return curve


def measured_op_counts(transcript) -> OpCounts:
    """Operations one instrumented join actually performed (all three parties)."""
    return OpCounts(*transcript.ops.as_tuple())


def estimated_time(profile: str | SchemeProfile, timings: OpTimings) -> float:
    counts = scheme(profile).op_counts
    if counts is None:
        raise ValueError(f"{scheme(profile).name} has no operation-count profile")
    return sum(c * t for c, t in zip(counts.as_tuple(), timings.as_tuple()))


def calibrate_timings(group=None, number: int = 200) -> OpTimings:
    """Micro-benchmark this package's own primitives."""
    import hashlib

    from .group import get_group

    group = group or get_group()
    k = group.order // 3
    p = group.base_mul(7)
    q = group.base_mul(11)
    per = lambda stmt: timeit.timeit(stmt, number=number) / number  # noqa: E731
    return OpTimings(
        mul=per(lambda: group.mul(k, p)),
        add=per(lambda: group.add(p, q)),
        hash=per(lambda: hashlib.sha256(p.data * 4).digest()),
        inverse=per(lambda: pow(k, -1, group.order)),
    )


# Hops a Sybil attempt costs under each regime: a completed join is four
# peer-link messages; a rejected one stops after N->B and B->V.
FULL_JOIN_HOPS = 4
REJECTED_JOIN_HOPS = 2


def forged_attempt_costs(attempts: int, mitigated: bool, cfg: CostModelConfig,
                         factors: Sequence[float] | None = None) -> list[float]:
    """Bandwidth of each forged-ID attempt by one physical adversary.

    Unmitigated, every attempt completes a join. Mitigated, only the first
    succeeds and the rest are rejected at the vicinity head.
    """
    factors = factors if factors is not None else [1.0] * attempts
    out = []
    for i in range(attempts):
        hops = FULL_JOIN_HOPS if (not mitigated or i == 0) else REJECTED_JOIN_HOPS
        out.append(hops * cfg.c_p * factors[i])
    return out


def sybil_bandwidth(domain_bits: int, mitigated: bool, group_size: int = 64,
                    cfg: CostModelConfig = CostModelConfig(), seed=0) -> list[float]:
    """Cumulative Sybil traffic as members of a pilot-peer group each forge IDs.

    Each of ``group_size`` members tries every ID of a ``domain_bits``-bit
    forge domain; point ``i`` is the total after ``i + 1`` members. Jitter
    draws are shared between the mitigated and unmitigated curves.
    """
    if not 1 <= domain_bits <= 10:
        raise ValueError("domain_bits must be in 1..10")
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    per_member = 1 << domain_bits
    factors = jitter_factors(per_member * group_size, cfg, f"sybil:{seed}:{domain_bits}")
    curve, total = [], 0.0
    for m in range(group_size):
        chunk = factors[m * per_member:(m + 1) * per_member]
        total += sum(forged_attempt_costs(per_member, mitigated, cfg, chunk))
        curve.append(total)
    return curve


TRAFFIC_COLUMNS = ("scenario", "scheme", "n", "bandwidth")
SYBIL_COLUMNS = ("scenario", "domain_bits", "mitigated", "group_size", "bandwidth")


def write_traffic_csv(out: TextIO, scenario: str, curves: dict[str, list[float]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRAFFIC_COLUMNS)
    for name, curve in curves.items():
        for n, bw in enumerate(curve, start=1):
            w.writerow((scenario, name, n, f"{bw:.6f}"))


def write_sybil_csv(out: TextIO, scenario: str,
                    rows: Iterable[tuple[int, bool, int, float]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SYBIL_COLUMNS)
    for bits, mitigated, size, bw in rows:
        w.writerow((scenario, bits, int(mitigated), size, f"{bw:.6f}"))
