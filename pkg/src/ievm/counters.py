"""Operation counters used as efficiency evidence.

Wall-clock timings depend on the machine; these counters do not. Any number
of collectors can be active at once (they nest); every active collector sees
every increment. Collection is process-local and not thread-safe, which
matches the single-writer model of the library.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, fields
from typing import Iterator


@dataclass
class Counters:
    weibull_refits: int = 0
    distance_evals: int = 0
    greedy_selections: int = 0
    bisection_iterations: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def snapshot(self) -> "Counters":
        return Counters(**self.as_dict())


_active: list[Counters] = []


def add(name: str, amount: int = 1) -> None:
    for bundle in _active:
        setattr(bundle, name, getattr(bundle, name) + amount)


@contextmanager
def collect() -> Iterator[Counters]:
    """Collect counts for everything executed inside the block."""
    bundle = Counters()
    _active.append(bundle)
    try:
        yield bundle
    finally:
        _active.remove(bundle)
