"""Global store of macroclassifiers shared between SOM cells.

Cells never own action vectors directly. They hold member entries that point
into this pool, and every entry counts once toward the numerosity of the
macroclassifier it references.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PoolError(RuntimeError):
    """Raised when numerosity bookkeeping is violated."""


class Group(enum.Enum):
    BEST = "best"
    NOVEL = "novel"


@dataclass(frozen=True)
class MacroClassifier:
    id: int
    action: np.ndarray
    numerosity: int = 0


@dataclass(eq=False)
class MemberEntry:
    """One cell membership of a macroclassifier.

    Fitness lives here, not on the macroclassifier: the same action vector can
    be worth very different amounts in different cells.
    """

    macro_id: int
    fitness: float
    group: Group


class Pool:
    """Macroclassifiers addressed by integer id, with O(1) uniform sampling."""

    def __init__(self):
        self._actions: dict[int, np.ndarray] = {}
        self._numerosity: dict[int, int] = {}
        # dense list of live ids for uniform sampling; _slot maps id -> index
        self._live: list[int] = []
        self._slot: dict[int, int] = {}
        self._next_id = 0
        self._micro = 0

    def create_macro(self, action) -> int:
        vec = np.array(action, dtype=float)
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise ValueError(f"action must be a finite 1-d vector, got {action!r}")
        if np.any(np.abs(vec) > 1.0):
            raise ValueError(f"action components must lie in [-1, 1], got {vec.tolist()}")
        vec.flags.writeable = False
        mid = self._next_id
        self._next_id += 1
        self._actions[mid] = vec
        self._numerosity[mid] = 0
        self._slot[mid] = len(self._live)
        self._live.append(mid)
        return mid

    def acquire_index(self, macro_id: int) -> None:
        if macro_id not in self._numerosity:
            raise PoolError(f"macroclassifier {macro_id} is not live")
        self._numerosity[macro_id] += 1
        self._micro += 1

    def release_index(self, macro_id: int) -> None:
        n = self._numerosity.get(macro_id)
        if n is None:
            raise PoolError(f"macroclassifier {macro_id} is not live")
        if n < 1:
            raise PoolError(f"macroclassifier {macro_id} has numerosity 0, nothing to release")
        self._micro -= 1
        if n == 1:
            self._delete(macro_id)
        else:
            self._numerosity[macro_id] = n - 1

    def _delete(self, macro_id: int) -> None:
        del self._actions[macro_id]
        del self._numerosity[macro_id]
        slot = self._slot.pop(macro_id)
        last = self._live.pop()
        if last != macro_id:
            self._live[slot] = last
            self._slot[last] = slot

    def census(self) -> tuple[int, int]:
        """Return ``(macro_count, micro_count)``."""
        return len(self._live), self._micro

    def action(self, macro_id: int) -> np.ndarray:
        return self._actions[macro_id]

    def numerosity(self, macro_id: int) -> int:
        return self._numerosity[macro_id]

    def is_live(self, macro_id: int) -> bool:
        return macro_id in self._numerosity

    def get(self, macro_id: int) -> MacroClassifier:
        return MacroClassifier(macro_id, self._actions[macro_id], self._numerosity[macro_id])

    def live_ids(self) -> list[int]:
        return list(self._live)

    def __len__(self):
        return len(self._live)

    def sample_ids(self, rng: np.random.Generator, k: int = 1) -> list[int]:
        """Draw ``k`` distinct live ids uniformly, each macroclassifier counted once."""
        if k > len(self._live):
            raise PoolError(f"cannot draw {k} distinct macroclassifiers from {len(self._live)}")
        if k == 1:
            return [self._live[int(rng.integers(len(self._live)))]]
        picks = rng.choice(len(self._live), size=k, replace=False)
        return [self._live[int(i)] for i in picks]

    def audit(self, entries) -> None:
        """Check numerosities against an iterable of every live MemberEntry.

        Raises PoolError on the first mismatch.
        """
        counts: dict[int, int] = {}
        for e in entries:
            counts[e.macro_id] = counts.get(e.macro_id, 0) + 1
        for mid, c in counts.items():
            if mid not in self._numerosity:
                raise PoolError(f"entry references dead macroclassifier {mid}")
            if self._numerosity[mid] != c:
                raise PoolError(
                    f"macroclassifier {mid}: numerosity {self._numerosity[mid]} != {c} entries"
                )
        orphans = set(self._numerosity) - set(counts)
        if orphans:
            raise PoolError(f"macroclassifiers with no entries: {sorted(orphans)[:10]}")
        if self._micro != sum(counts.values()):
            raise PoolError(f"micro count {self._micro} != {sum(counts.values())} entries")
        if len(self._live) != len(self._numerosity):
            raise PoolError("live list out of sync")
