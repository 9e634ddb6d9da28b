"""Self Organizing Classifiers for continuous multi-step mazes."""

from .env import Maze, load_maze, preset_maze
from .harness import ExperimentConfig, run_batch, run_experiment, run_trial
from .learner import LearnerParams, Mode, SOCLearner
from .pool import Pool
from .som import SomGrid

__all__ = [
    "ExperimentConfig",
    "LearnerParams",
    "Maze",
    "Mode",
    "Pool",
    "SOCLearner",
    "SomGrid",
    "load_maze",
    "preset_maze",
    "run_batch",
    "run_experiment",
    "run_trial",
]
