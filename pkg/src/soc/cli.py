"""Command-line entry point: ``soc run``, ``soc maps``, ``soc validate-maze``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .env import PRESETS, MazeParseError, load_maze_file, resolve_maze
from .harness import CSV_FILES, ExperimentConfig, run_batch, write_csvs
from .learner import LearnerParams

log = logging.getLogger("soc")

PRESET_OVERRIDES = {
    "paper": {},
    "test-a": {"beta": 2, "nu": 5},
    "test-b": {"som_rows": 7, "som_cols": 7},
    "custom": {},
}

PARAM_KEYS = LearnerParams.field_names()
CONFIG_KEYS = [
    f.name for f in dataclasses.fields(ExperimentConfig) if f.name not in ("maze", "params")
]
# accepted in config files and --set, besides the learner/experiment fields
META_KEYS = ["maze", "preset", "seed", "jobs"]
MAP_FILES = ("behavior_map.csv", "fitness_map.csv", "som_weights.csv")


class UsageError(Exception):
    pass


def _parse_value(key: str, raw: str, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"{key}: expected {type(default).__name__}, got {raw!r}") from None
    return raw


def parse_pairs(lines, source: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS and key not in CONFIG_KEYS and key not in META_KEYS:
            raise UsageError(f"{source}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(settings: dict[str, str]) -> tuple[ExperimentConfig, dict]:
    """Resolve preset + key=value settings into an ExperimentConfig.

    Returns the config and the flat dict of every resolved value (for echoing).
    """
    preset = settings.get("preset", "paper")
    if preset not in PRESET_OVERRIDES:
        raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESET_OVERRIDES)}")
    defaults = ExperimentConfig.__dataclass_fields__
    base_params = LearnerParams()
    values: dict = {k: getattr(base_params, k) for k in PARAM_KEYS}
    for k in CONFIG_KEYS:
        values[k] = defaults[k].default
    values.update(PRESET_OVERRIDES[preset])
    for key, raw in settings.items():
        if key in ("preset", "maze", "jobs"):
            continue
        target = "base_seed" if key == "seed" else key
        values[target] = _parse_value(key, raw, values[target])
    maze = settings.get("maze", "empty-room")
    if maze not in PRESETS:
        maze = str(Path(maze).resolve())
    try:
        params = LearnerParams(**{k: values[k] for k in PARAM_KEYS})
        config = ExperimentConfig(
            maze=maze, params=params, **{k: values[k] for k in CONFIG_KEYS}
        )
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from None
    echo = {"preset": preset, "maze": maze, **values}
    return config, echo


def write_echo(echo: dict, out_dir: Path) -> Path:
    path = out_dir / "config.echo"
    with open(path, "w", encoding="utf-8") as f:
        for key, value in echo.items():
            f.write(f"{key}={value}\n")
    return path


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soc", description="Self Organizing Classifiers experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run a batch of experiments and write all CSVs"),
        ("maps", "run a batch and write only the map and SOM weight CSVs"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--maze", help=f"maze file or preset ({', '.join(PRESETS)})")
        s.add_argument("--preset", choices=sorted(PRESET_OVERRIDES))
        s.add_argument("--seed", type=int, help="base seed; repetition i uses seed+i")
        s.add_argument("--trials", type=int)
        s.add_argument("--repetitions", type=int)
        s.add_argument("--out-dir", default="results")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--config", help="file of key=value lines; flags take precedence")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any learner or experiment field (repeatable)")
    v = sub.add_parser("validate-maze", help="parse a maze file and describe it")
    v.add_argument("path")
    return p


def _settings_from_args(args) -> dict[str, str]:
    settings = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read config file: {e}") from None
        settings.update(parse_pairs(text.splitlines(), args.config))
    for key in ("maze", "preset", "seed", "trials", "repetitions"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = str(value)
    settings.update(parse_pairs(args.set, "--set"))
    return settings


def _validate_maze(path: str) -> int:
    try:
        maze = load_maze_file(path)
    except MazeParseError as e:
        print(f"soc: {path}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"soc: cannot read {path}: {e.strerror}", file=sys.stderr)
        return 2
    free = len(maze.free_cells())
    print(f"{path}: {maze.width}x{maze.height}, {len(maze.obstacles)} obstacle cells, "
          f"{free} free cells, goal at {maze.goal}")
    return 0


def _run(args, parser) -> int:
    try:
        settings = _settings_from_args(args)
        config, echo = build_config(settings)
        resolve_maze(config.maze)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"soc: error: {e}", file=sys.stderr)
        return 2
    except (OSError, MazeParseError) as e:
        parser.print_usage(sys.stderr)
        print(f"soc: error: maze: {e}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        parser.print_usage(sys.stderr)
        print("soc: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        result = run_batch(config, jobs=args.jobs)
        which = CSV_FILES if args.command == "run" else MAP_FILES
        paths = write_csvs(result, out_dir, which)
        paths.append(write_echo(echo, out_dir))
    except Exception as e:  # noqa: BLE001 - report any runtime failure as exit 1
        log.debug("run failed", exc_info=True)
        print(f"soc: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    log.info("final performance %.3f; wrote %s", result.final_performance,
             ", ".join(p.name for p in paths))
    return 0


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate-maze":
        return _validate_maze(args.path)
    return _run(args, parser)


if __name__ == "__main__":
    sys.exit(main())
