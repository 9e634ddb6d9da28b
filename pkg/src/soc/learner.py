"""Self Organizing Classifiers.

A SOM partitions the observation space. Each map cell lazily grows its own
subpopulation of action-only classifiers (``beta`` best + ``nu`` novel), learns
their niche-local fitness with a Q-learning style target, and periodically
runs a local evolutionary step that keeps the best and regenerates the novel
group by indexing or differential evolution over the global pool.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .pool import Group, MemberEntry, Pool
from .som import SomGrid


class Mode(enum.Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


class LearnerError(RuntimeError):
    pass


@dataclass
class LearnerParams:
    eta: float = 0.2
    gamma: float = 0.9
    beta: int = 5
    nu: int = 10
    iota: int = 20
    initial_fitness: float = 0.0
    de_cr: float = 0.2
    neighbor_seed_radius: int = 4
    # seeded best entries copy the donor's fitness instead of starting fresh
    inherit_donor_fitness: bool = False
    indexing_probability: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        for name in ("beta", "nu", "iota"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.de_cr <= 1.0:
            raise ValueError(f"de_cr must be in [0, 1], got {self.de_cr}")
        if not 0.0 <= self.indexing_probability <= 1.0:
            raise ValueError("indexing_probability must be in [0, 1]")
        if self.neighbor_seed_radius < 0:
            raise ValueError("neighbor_seed_radius must be >= 0")

    @property
    def subpopulation(self) -> int:
        return self.beta + self.nu

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class Cell:
    __slots__ = ("index", "best", "novel", "experience", "initialized")

    def __init__(self, index: int):
        self.index = index
        self.best: list[MemberEntry] = []
        self.novel: list[MemberEntry] = []
        self.experience = 0
        self.initialized = False

    def entries(self) -> list[MemberEntry]:
        return self.best + self.novel

    def max_fitness(self) -> float:
        return max(e.fitness for e in self.best + self.novel)


@dataclass
class PendingUpdate:
    prev_cell: int
    prev_entry: MemberEntry
    reward: float | None = None


class SOCLearner:
    """SOM-structured classifier population driven one environment step at a time.

    Call :meth:`begin_trial` before each episode, then :meth:`step` with every
    observation. ``step`` returns the action to apply, or ``None`` once the
    episode is terminal. If the harness cuts an episode short, call
    :meth:`truncate` with the last observation instead of ``step``.
    """

    def __init__(self, params: LearnerParams | None = None, rows: int = 10, cols: int = 10,
                 rng: np.random.Generator | None = None, dim: int = 2):
        self.params = params or LearnerParams()
        self.rng = np.random.default_rng() if rng is None else rng
        self.dim = dim
        self.som = SomGrid(rows, cols, dim=dim, rng=self.rng)
        self.pool = Pool()
        self.cells = [Cell(i) for i in range(self.som.size)]
        self.pending: PendingUpdate | None = None
        self.evolutions = 0

    # -- population bookkeeping ------------------------------------------------

    def _random_action(self) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, self.dim)

    def _new_entry(self, action, group: Group, fitness: float | None = None) -> MemberEntry:
        mid = self.pool.create_macro(action)
        self.pool.acquire_index(mid)
        f = self.params.initial_fitness if fitness is None else fitness
        return MemberEntry(mid, f, group)

    def _index_entry(self, macro_id: int, group: Group, fitness: float) -> MemberEntry:
        self.pool.acquire_index(macro_id)
        return MemberEntry(macro_id, fitness, group)

    def find_donor(self, index: int) -> Cell | None:
        """Initialized neighbour maximizing ``experience / d**2`` within the seed radius."""
        radius = self.params.neighbor_seed_radius
        dist = self.som.distances_from(index)
        best_cell, best_score = None, 0.0
        for cell in self.cells:
            d = int(dist[cell.index])
            if d == 0 or d > radius or not cell.initialized or cell.experience <= 0:
                continue
            score = cell.experience / (d * d)
            if score > best_score:
                best_cell, best_score = cell, score
        return best_cell

    def ensure_cell(self, index: int) -> None:
        cell = self.cells[index]
        if cell.initialized:
            return
        p = self.params
        cell.novel = [self._new_entry(self._random_action(), Group.NOVEL) for _ in range(p.nu)]
        donor = self.find_donor(index)
        if donor is not None:
            cell.best = [
                self._index_entry(
                    e.macro_id,
                    Group.BEST,
                    e.fitness if p.inherit_donor_fitness else p.initial_fitness,
                )
                for e in donor.best[: p.beta]
            ]
        else:
            cell.best = [self._new_entry(self._random_action(), Group.BEST) for _ in range(p.beta)]
        cell.experience = 0
        cell.initialized = True

    # -- acting and learning ---------------------------------------------------

    def select_actor(self, index: int, mode: Mode) -> MemberEntry:
        cell = self.cells[index]
        if not cell.initialized:
            raise LearnerError(f"cell {self.som.coord(index)} has no population yet")
        group = cell.novel if mode is Mode.EXPLORE else cell.best
        entry = group[int(self.rng.integers(len(group)))]
        cell.experience += 1
        return entry

    def bootstrap_target(self, reward: float, index: int, terminal: bool) -> float:
        if terminal:
            return reward
        return reward + self.params.gamma * self.cells[index].max_fitness()

    def reinforce(self, pending: PendingUpdate, index: int, terminal: bool) -> float:
        if pending.reward is None:
            raise LearnerError("pending update has no reward")
        target = self.bootstrap_target(pending.reward, index, terminal)
        e = pending.prev_entry
        e.fitness += self.params.eta * (target - e.fitness)
        return e.fitness

    # -- evolution -------------------------------------------------------------

    def maybe_evolve(self, index: int) -> bool:
        cell = self.cells[index]
        p = self.params
        if cell.experience <= p.iota * p.subpopulation:
            return False
        ranked = sorted(cell.best + cell.novel, key=lambda e: -e.fitness)
        survivors = ranked[: p.beta]
        for e in ranked[p.beta:]:
            self.pool.release_index(e.macro_id)
        for e in survivors:
            e.group = Group.BEST
        cell.best = survivors
        cell.novel = [self.reproduce_novel(index) for _ in range(p.nu)]
        cell.experience = 0
        self.evolutions += 1
        return True

    def reproduce_novel(self, index: int) -> MemberEntry:
        p = self.params
        if len(self.pool) == 0:
            raise LearnerError("cannot reproduce from an empty pool")
        if self.rng.random() < p.indexing_probability:
            mid = self.pool.sample_ids(self.rng, 1)[0]
            return self._index_entry(mid, Group.NOVEL, p.initial_fitness)
        best = self.cells[index].best
        if best:
            target = self.pool.action(best[int(self.rng.integers(len(best)))].macro_id)
        else:
            target = self._random_action()
        return self._new_entry(self.de_reproduce(target), Group.NOVEL)

    def de_reproduce(self, target) -> np.ndarray:
        """DE/rand/1/bin child of ``target`` using three distinct pool vectors."""
        target = np.asarray(target, dtype=float)
        if len(self.pool) < 3:
            return self._random_action()
        x1, x2, x3 = (self.pool.action(i) for i in self.pool.sample_ids(self.rng, 3))
        scale = self.rng.random()
        while scale == 0.0:
            scale = self.rng.random()
        return de_crossover(x1 + scale * (x2 - x3), target, self.params.de_cr, self.rng)

    # -- the per-step cycle ----------------------------------------------------

    def begin_trial(self) -> None:
        self.pending = None

    def _sense(self, observation, reward, terminal) -> int:
        w = self.som.winner(observation)
        self.som.update(observation, w)
        self.ensure_cell(w)
        if self.pending is not None:
            self.pending.reward = reward
            self.reinforce(self.pending, w, terminal)
        self.maybe_evolve(w)
        return w

    def step(self, observation, reward_from_prev: float | None = None, terminal: bool = False,
             mode: Mode = Mode.EXPLOIT) -> np.ndarray | None:
        w = self._sense(observation, reward_from_prev, terminal)
        if terminal:
            self.pending = None
            return None
        entry = self.select_actor(w, mode)
        self.pending = PendingUpdate(w, entry)
        return self.pool.action(entry.macro_id)

    def truncate(self, observation, reward_from_prev: float) -> None:
        """Close an episode cut off by a step limit: bootstrap normally, act no more."""
        self._sense(observation, reward_from_prev, False)
        self.pending = None

    # -- read-only views -------------------------------------------------------

    def census(self) -> tuple[int, int]:
        return self.pool.census()

    def all_entries(self):
        for cell in self.cells:
            yield from cell.best
            yield from cell.novel

    def audit(self) -> None:
        self.pool.audit(self.all_entries())
        p = self.params
        for cell in self.cells:
            if cell.initialized:
                if len(cell.best) != p.beta or len(cell.novel) != p.nu:
                    raise LearnerError(f"cell {cell.index} holds {len(cell.best)}+{len(cell.novel)}")
            elif cell.best or cell.novel or cell.experience:
                raise LearnerError(f"uninitialized cell {cell.index} is not empty")

    def greedy_action(self, observation, rng: np.random.Generator) -> np.ndarray:
        """Exploit-mode action without touching any learner state.

        A winner cell that never got a population yields the zero vector.
        """
        cell = self.cells[self.som.winner(observation)]
        if not cell.initialized:
            return np.zeros(self.dim)
        return self.pool.action(cell.best[int(rng.integers(len(cell.best)))].macro_id)

    def winner_max_fitness(self, observation) -> float:
        cell = self.cells[self.som.winner(observation)]
        if not cell.initialized:
            return self.params.initial_fitness
        return cell.max_fitness()

    def cell_max_fitness(self) -> np.ndarray:
        return np.array([
            c.max_fitness() if c.initialized else np.nan for c in self.cells
        ]).reshape(self.som.rows, self.som.cols)

    def state_digest(self) -> str:
        """Hash of all mutable learner state, for read-only checks."""
        h = hashlib.sha256()
        h.update(self.som.weights.tobytes())
        h.update(str(self.som.iteration).encode())
        for c in self.cells:
            h.update(f"{c.index}:{c.experience}:{c.initialized}".encode())
            for e in c.best + c.novel:
                h.update(f"{e.macro_id}:{e.fitness!r}:{e.group.value};".encode())
        for mid in self.pool.live_ids():
            h.update(f"{mid}:{self.pool.numerosity(mid)}".encode())
            h.update(self.pool.action(mid).tobytes())
        if self.pending is not None:
            cell = self.cells[self.pending.prev_cell]
            pos = next(i for i, e in enumerate(cell.best + cell.novel)
                       if e is self.pending.prev_entry)
            h.update(f"p{self.pending.prev_cell}:{pos}".encode())
        h.update(repr(self.rng.bit_generator.state).encode())
        return h.hexdigest()


def de_crossover(mutant, target, cr: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover with one forced mutant gene, clamped to [-1, 1]."""
    dim = len(target)
    take = rng.random(dim) < cr
    take[int(rng.integers(dim))] = True
    return np.clip(np.where(take, mutant, target), -1.0, 1.0)
