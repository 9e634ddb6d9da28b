"""Trials, experiments, evaluation maps and batch aggregation."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Maze, resolve_maze
from .learner import LearnerParams, Mode, SOCLearner

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    maze: Maze | str = "empty-room"
    params: LearnerParams = field(default_factory=LearnerParams)
    som_rows: int = 10
    som_cols: int = 10
    trials: int = 10_000
    max_trial_steps: int = 500
    repetitions: int = 20
    base_seed: int = 0
    metric_window: int = 100
    census_every: int = 100
    map_samples: int = 100

    def __post_init__(self):
        if self.trials < self.metric_window:
            raise ValueError(f"trials ({self.trials}) must be >= metric_window ({self.metric_window})")
        if self.max_trial_steps < 1:
            raise ValueError("max_trial_steps must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.som_rows < 1 or self.som_cols < 1:
            raise ValueError("SOM dimensions must be positive")

    @property
    def max_population(self) -> int:
        return self.som_rows * self.som_cols * self.params.subpopulation


@dataclass
class Trace:
    seed: int
    trial_steps: np.ndarray
    trial_explore: np.ndarray
    trial_reached: np.ndarray
    census_step: np.ndarray
    census_micro: np.ndarray
    census_macro: np.ndarray
    behavior_map: np.ndarray
    fitness_map: np.ndarray
    som_weights: np.ndarray
    performance: np.ndarray
    evolutions: int = 0

    @property
    def exploit_steps(self) -> np.ndarray:
        return self.trial_steps[~self.trial_explore]

    @property
    def final_performance(self) -> float:
        return float(self.performance[-1])


@dataclass
class BatchResult:
    config: ExperimentConfig
    traces: list[Trace]
    performance: np.ndarray
    census_step: np.ndarray
    census_micro: np.ndarray
    census_macro: np.ndarray
    behavior_map: np.ndarray
    fitness_map: np.ndarray
    som_weights: np.ndarray

    @property
    def final_performance(self) -> float:
        return float(self.performance[-1])


def trial_mode(trial_index: int) -> Mode:
    return Mode.EXPLORE if trial_index % 2 == 0 else Mode.EXPLOIT


def run_trial(learner: SOCLearner, maze: Maze, mode: Mode, rng: np.random.Generator,
              max_steps: int = 500, on_step=None) -> tuple[int, bool]:
    """Play one episode from a random start. Returns ``(steps, reached_goal)``."""
    pos = maze.reset(rng)
    learner.begin_trial()
    action = learner.step(pos, None, False, mode)
    steps = 0
    while True:
        pos, reward, terminal = maze.step(pos, action)
        steps += 1
        if on_step is not None:
            on_step()
        if terminal:
            learner.step(pos, reward, True, mode)
            return steps, True
        if steps >= max_steps:
            learner.truncate(pos, reward)
            return steps, False
        action = learner.step(pos, reward, False, mode)


def sliding_mean(values, window: int) -> np.ndarray:
    """Mean of the last ``window`` values (fewer at the start) at every position."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    hi = np.arange(1, len(v) + 1)
    lo = np.maximum(0, hi - window)
    return (c[hi] - c[lo]) / (hi - lo)


def _cell_samples(maze: Maze, rng: np.random.Generator, n: int):
    for x in range(maze.width):
        for y in range(maze.height):
            yield x, y, np.array([x, y], dtype=float) + rng.random((n, 2))


def behavior_map(learner: SOCLearner, maze: Maze, rng: np.random.Generator,
                 samples: int = 100) -> np.ndarray:
    """Mean exploit action over ``samples`` uniform points per unit cell.

    Indexed ``[x, y]``. Learner state is left untouched.
    """
    out = np.zeros((maze.width, maze.height, learner.dim))
    for x, y, pts in _cell_samples(maze, rng, samples):
        out[x, y] = np.mean([learner.greedy_action(p, rng) for p in pts], axis=0)
    return out


def fitness_map(learner: SOCLearner, maze: Maze, rng: np.random.Generator,
                samples: int = 100) -> np.ndarray:
    """Mean over ``samples`` points per unit cell of the winner cell's max fitness."""
    out = np.zeros((maze.width, maze.height))
    for x, y, pts in _cell_samples(maze, rng, samples):
        out[x, y] = np.mean([learner.winner_max_fitness(p) for p in pts])
    return out


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def make_learner(config: ExperimentConfig, rng: np.random.Generator) -> SOCLearner:
    return SOCLearner(config.params, config.som_rows, config.som_cols, rng=rng)


def run_experiment(config: ExperimentConfig, seed: int) -> Trace:
    maze = resolve_maze(config.maze)
    learner_rng, env_rng, eval_rng = _streams(seed)
    learner = make_learner(config, learner_rng)

    steps = np.zeros(config.trials, dtype=np.int64)
    explore = np.zeros(config.trials, dtype=bool)
    reached = np.zeros(config.trials, dtype=bool)
    census_step, census_micro, census_macro = [], [], []
    total = 0

    def on_step():
        nonlocal total
        total += 1
        if total % config.census_every == 0:
            macro, micro = learner.census()
            census_step.append(total)
            census_micro.append(micro)
            census_macro.append(macro)

    for t in range(config.trials):
        mode = trial_mode(t)
        explore[t] = mode is Mode.EXPLORE
        steps[t], reached[t] = run_trial(
            learner, maze, mode, env_rng, config.max_trial_steps, on_step
        )
        if log.isEnabledFor(logging.DEBUG) and (t + 1) % 1000 == 0:
            exploit = steps[: t + 1][~explore[: t + 1]]
            log.debug("seed %d trial %d: last-100 exploit mean %.2f, census %s",
                      seed, t + 1, exploit[-config.metric_window:].mean(), learner.census())

    return Trace(
        seed=seed,
        trial_steps=steps,
        trial_explore=explore,
        trial_reached=reached,
        census_step=np.array(census_step, dtype=np.int64),
        census_micro=np.array(census_micro, dtype=np.int64),
        census_macro=np.array(census_macro, dtype=np.int64),
        behavior_map=behavior_map(learner, maze, eval_rng, config.map_samples),
        fitness_map=fitness_map(learner, maze, eval_rng, config.map_samples),
        som_weights=learner.som.weights.copy(),
        performance=sliding_mean(steps[~explore], config.metric_window),
        evolutions=learner.evolutions,
    )


def aggregate(config: ExperimentConfig, traces: list[Trace]) -> BatchResult:
    """Element-wise means across repetitions, in the order given."""
    n = min(len(t.census_step) for t in traces)
    return BatchResult(
        config=config,
        traces=traces,
        performance=np.mean([t.performance for t in traces], axis=0),
        census_step=traces[0].census_step[:n].copy(),
        census_micro=np.mean([t.census_micro[:n] for t in traces], axis=0),
        census_macro=np.mean([t.census_macro[:n] for t in traces], axis=0),
        behavior_map=np.mean([t.behavior_map for t in traces], axis=0),
        fitness_map=np.mean([t.fitness_map for t in traces], axis=0),
        som_weights=traces[0].som_weights.copy(),
    )


def _run_seed(args):
    config, seed = args
    return run_experiment(config, seed)


def run_batch(config: ExperimentConfig, jobs: int = 1) -> BatchResult:
    seeds = [config.base_seed + i for i in range(config.repetitions)]
    if jobs > 1 and len(seeds) > 1:
        if isinstance(config.maze, str):
            config = _with_maze(config, resolve_maze(config.maze))
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            traces = list(ex.map(_run_seed, [(config, s) for s in seeds]))
    else:
        traces = [run_experiment(config, s) for s in seeds]
    return aggregate(config, traces)


def _with_maze(config: ExperimentConfig, maze: Maze) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, maze=maze)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


CSV_FILES = (
    "performance.csv",
    "population.csv",
    "behavior_map.csv",
    "fitness_map.csv",
    "som_weights.csv",
)


def write_csvs(result: BatchResult, out_dir, which=CSV_FILES) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    bm, fm = result.behavior_map, result.fitness_map
    tables = {
        "performance.csv": (
            ["exploit_trial_index", "mean_steps_last_100"],
            enumerate(result.performance),
        ),
        "population.csv": (
            ["step", "micro_count", "macro_count"],
            zip(result.census_step, result.census_micro, result.census_macro),
        ),
        "behavior_map.csv": (
            ["cell_x", "cell_y", "mean_dx", "mean_dy"],
            ((x, y, bm[x, y, 0], bm[x, y, 1])
             for x in range(bm.shape[0]) for y in range(bm.shape[1])),
        ),
        "fitness_map.csv": (
            ["cell_x", "cell_y", "mean_max_fitness"],
            ((x, y, fm[x, y]) for x in range(fm.shape[0]) for y in range(fm.shape[1])),
        ),
        "som_weights.csv": (
            ["row", "col", "w0", "w1"],
            ((i // result.config.som_cols, i % result.config.som_cols, w[0], w[1])
             for i, w in enumerate(result.som_weights)),
        ),
    }
    for name in which:
        header, rows = tables[name]
        _write(out / name, header, rows)
        written.append(out / name)
    return written
