import csv

import numpy as np
import pytest

from soc.env import Maze, preset_maze
from soc.harness import (
    ExperimentConfig,
    aggregate,
    behavior_map,
    fitness_map,
    run_batch,
    run_experiment,
    run_trial,
    sliding_mean,
    trial_mode,
    write_csvs,
)
from soc.learner import LearnerParams, Mode, SOCLearner
from soc.pool import Group, MemberEntry


def small_config(**kw):
    base = dict(maze="empty-room", trials=120, repetitions=2, metric_window=20,
                map_samples=10, base_seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


class FixedPolicy:
    """Learner stub that always plays the same action."""

    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)
        self.calls = []

    def begin_trial(self):
        self.calls.append("begin")

    def step(self, obs, reward, terminal, mode):
        self.calls.append(("step", terminal))
        return None if terminal else self.action

    def truncate(self, obs, reward):
        self.calls.append("truncate")


def test_trial_one_step_from_goal():
    maze = Maze(2, 1, frozenset(), (1, 0))
    rng = np.random.default_rng(0)
    policy = FixedPolicy((1.0, 0.0))
    steps, reached = run_trial(policy, maze, Mode.EXPLOIT, rng)
    assert (steps, reached) == (1, True)
    assert policy.calls[-1] == ("step", True)


def test_trial_hits_step_cap():
    maze = preset_maze("empty-room")
    policy = FixedPolicy((0.0, 0.0))
    steps, reached = run_trial(policy, maze, Mode.EXPLOIT, np.random.default_rng(0), 500)
    assert (steps, reached) == (500, False)
    assert policy.calls[-1] == "truncate"
    assert sum(1 for c in policy.calls if c == ("step", False)) == 500


def test_trial_with_learner_bounds():
    maze = preset_maze("empty-room")
    lr = SOCLearner(rng=np.random.default_rng(1))
    rng = np.random.default_rng(2)
    for t in range(20):
        steps, reached = run_trial(lr, maze, trial_mode(t), rng, 50)
        assert 1 <= steps <= 50
        assert reached or steps == 50
        assert lr.pending is None


def test_trial_parity():
    assert [trial_mode(t) for t in range(4)] == [
        Mode.EXPLORE, Mode.EXPLOIT, Mode.EXPLORE, Mode.EXPLOIT
    ]


def test_sliding_mean_matches_brute_force():
    rng = np.random.default_rng(0)
    v = rng.integers(1, 500, 350)
    got = sliding_mean(v, 100)
    for k in range(len(v)):
        assert got[k] == pytest.approx(v[max(0, k - 99): k + 1].mean(), rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=50, metric_window=100)
    with pytest.raises(ValueError):
        ExperimentConfig(max_trial_steps=0)


@pytest.mark.parametrize(
    "params, rows, cols, cap",
    [(LearnerParams(), 10, 10, 1500), (LearnerParams(beta=2, nu=5), 10, 10, 700),
     (LearnerParams(), 7, 7, 735)],
)
def test_population_cap(params, rows, cols, cap):
    cfg = ExperimentConfig(params=params, som_rows=rows, som_cols=cols)
    assert cfg.max_population == cap


def test_experiment_trace_shape():
    cfg = small_config()
    tr = run_experiment(cfg, 5)
    assert tr.trial_steps.shape == (120,)
    assert list(tr.trial_explore[:4]) == [True, False, True, False]
    assert tr.performance.shape == (60,)
    assert tr.performance == pytest.approx(sliding_mean(tr.exploit_steps, 20))
    assert np.all((tr.trial_steps >= 1) & (tr.trial_steps <= 500))
    assert np.all(tr.trial_reached | (tr.trial_steps == 500))
    assert np.all(np.diff(tr.census_step) == 100)
    assert tr.census_step[-1] <= tr.trial_steps.sum()
    assert np.all(tr.census_micro <= cfg.max_population)
    assert tr.behavior_map.shape == (10, 10, 2)
    assert tr.fitness_map.shape == (10, 10)
    assert np.all((tr.fitness_map >= -200) & (tr.fitness_map <= 10_000))


def _learner_with_best(best_actions):
    """Every cell's best group holds the given actions; novel copies the first."""
    lr = SOCLearner(LearnerParams(beta=len(best_actions)), rng=np.random.default_rng(0))
    ids = [lr.pool.create_macro(a) for a in best_actions]
    for cell in lr.cells:
        for mid in ids:
            lr.pool.acquire_index(mid)
        cell.best = [MemberEntry(mid, 0.0, Group.BEST) for mid in ids]
        for _ in range(lr.params.nu):
            lr.pool.acquire_index(ids[0])
        cell.novel = [MemberEntry(ids[0], 0.0, Group.NOVEL) for _ in range(lr.params.nu)]
        cell.initialized = True
    lr.audit()
    return lr


def test_behavior_map_constant_policy():
    lr = _learner_with_best([(1.0, 0.0)])
    bm = behavior_map(lr, preset_maze("empty-room"), np.random.default_rng(0))
    assert np.array_equal(bm[..., 0], np.ones((10, 10)))
    assert np.array_equal(bm[..., 1], np.zeros((10, 10)))


def test_behavior_map_two_action_mix():
    lr = _learner_with_best([(1.0, 0.0), (0.0, 1.0)])
    bm = behavior_map(lr, preset_maze("empty-room"), np.random.default_rng(1))
    # per cell: binomial(100, 1/2) / 100, sd 0.05, so +-0.1 is a 2-sigma band
    within = np.abs(bm - 0.5) <= 0.1
    assert within.mean() >= 0.9
    assert np.all(np.abs(bm - 0.5) <= 0.2)
    assert np.abs(bm.mean(axis=(0, 1)) - 0.5).max() < 0.02


def test_fitness_map_untrained_is_zero():
    lr = SOCLearner(rng=np.random.default_rng(0))
    fm = fitness_map(lr, preset_maze("empty-room"), np.random.default_rng(0), samples=5)
    assert np.array_equal(fm, np.zeros((10, 10)))


def test_maps_are_read_only():
    cfg = small_config(trials=60)
    maze = preset_maze("empty-room")
    lr = SOCLearner(rng=np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for t in range(60):
        run_trial(lr, maze, trial_mode(t), rng, 100)
    before = lr.state_digest()
    behavior_map(lr, maze, np.random.default_rng(0), cfg.map_samples)
    fitness_map(lr, maze, np.random.default_rng(0), cfg.map_samples)
    assert lr.state_digest() == before


def test_batch_of_one_equals_trace():
    cfg = small_config(repetitions=1)
    res = run_batch(cfg)
    tr = res.traces[0]
    assert np.array_equal(res.performance, tr.performance)
    assert np.array_equal(res.behavior_map, tr.behavior_map)
    assert np.array_equal(res.census_micro, tr.census_micro)


def test_aggregate_is_elementwise_mean():
    cfg = small_config()
    t1 = run_experiment(cfg, 1)
    t2 = run_experiment(cfg, 2)
    res = aggregate(cfg, [t1, t2])
    assert np.allclose(res.behavior_map, (t1.behavior_map + t2.behavior_map) / 2)
    assert np.allclose(res.fitness_map, (t1.fitness_map + t2.fitness_map) / 2)
    assert np.allclose(res.performance, (t1.performance + t2.performance) / 2)
    n = min(len(t1.census_step), len(t2.census_step))
    assert len(res.census_step) == n


def test_distinct_seeds_distinct_traces():
    cfg = small_config()
    res = run_batch(cfg)
    a, b = res.traces
    assert (a.seed, b.seed) == (5, 6)
    assert not np.array_equal(a.trial_steps, b.trial_steps)


def test_batch_reproducible():
    cfg = small_config()
    r1, r2 = run_batch(cfg), run_batch(cfg)
    assert np.array_equal(r1.performance, r2.performance)
    assert np.array_equal(r1.behavior_map, r2.behavior_map)
    assert np.array_equal(r1.census_micro, r2.census_micro)


def test_parallel_batch_matches_serial():
    cfg = small_config(trials=40)
    serial = run_batch(cfg)
    parallel = run_batch(cfg, jobs=2)
    assert np.array_equal(serial.performance, parallel.performance)
    assert np.array_equal(serial.fitness_map, parallel.fitness_map)


def test_csv_outputs(tmp_path):
    res = run_batch(small_config(repetitions=1))
    write_csvs(res, tmp_path)
    headers = {
        "performance.csv": ["exploit_trial_index", "mean_steps_last_100"],
        "population.csv": ["step", "micro_count", "macro_count"],
        "behavior_map.csv": ["cell_x", "cell_y", "mean_dx", "mean_dy"],
        "fitness_map.csv": ["cell_x", "cell_y", "mean_max_fitness"],
        "som_weights.csv": ["row", "col", "w0", "w1"],
    }
    for name, header in headers.items():
        with open(tmp_path / name, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == header
        assert all(len(r) == len(header) for r in rows)
    with open(tmp_path / "behavior_map.csv") as f:
        assert len(f.readlines()) == 101
    with open(tmp_path / "performance.csv") as f:
        rows = list(csv.reader(f))[1:]
    assert float(rows[-1][1]) == pytest.approx(res.performance[-1])
