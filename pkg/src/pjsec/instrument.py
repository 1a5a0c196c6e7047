"""Per-session counting of the expensive cryptographic operations.

Counters live in a :class:`contextvars.ContextVar`, so every thread or task
that opens :func:`count_ops` gets its own tally; nested blocks all see the
increments made inside them.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, fields
from typing import Iterator


@dataclass
class OpCounts:
    mul: int = 0
    add: int = 0
    hash: int = 0
    inverse: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} count must be non-negative")

    def __add__(self, other: OpCounts) -> OpCounts:
        return OpCounts(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.mul, self.add, self.hash, self.inverse)

    def dominates(self, other: OpCounts) -> bool:
        """True when every count is >= ``other``'s and at least one is strictly greater."""
        mine, theirs = self.as_tuple(), other.as_tuple()
        return all(a >= b for a, b in zip(mine, theirs)) and mine != theirs


_active: contextvars.ContextVar[tuple[OpCounts, ...]] = contextvars.ContextVar(
    "pjsec_op_counters", default=()
)


def record(op: str, n: int = 1) -> None:
    for counts in _active.get():
        setattr(counts, op, getattr(counts, op) + n)


@contextmanager
def count_ops() -> Iterator[OpCounts]:
    counts = OpCounts()
    token = _active.set(_active.get() + (counts,))
    try:
        yield counts
    finally:
        _active.reset(token)
