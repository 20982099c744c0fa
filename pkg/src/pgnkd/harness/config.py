"""Experiment configuration: ``key = value`` files plus ``--key value`` overrides."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from ..workspace import GridWorkspace, Pose
from ..workspace import load as load_workspace

OUTPUT_ROOT_ENV = "PGNKD_OUTPUT_ROOT"
BUNDLED = ("office", "gallery", "studio")
PLANNERS = ("random", "nnql", "mlp")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    workspace: str = "office"
    goal_x: float = 4.95
    goal_y: float = 2.45
    seed: int = 0
    teacher_episodes: int = 5000
    kd_states: int = 2000
    eval_episodes: int = 500
    planners: tuple = PLANNERS
    epsilon_initial: float = 1.0
    epsilon_minimum: float = 0.1
    epsilon_decay_fraction: float = 0.5
    train_episode_len: int = 4
    eval_steps: int = 50
    nn_threshold: float = 0.2
    samples_per_class: int = 20
    output_dir: str = "."

    def __post_init__(self):
        bad = [p for p in self.planners if p not in PLANNERS]
        if bad or not self.planners:
            raise ConfigError(f"planners must be drawn from {PLANNERS}, got {self.planners}")
        for name in ("teacher_episodes", "kd_states", "eval_episodes", "train_episode_len", "eval_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    @property
    def goal(self) -> Pose:
        return Pose(self.goal_x, self.goal_y, 0.0)

    def output_path(self) -> Path:
        """``output_dir`` resolved against the output-root environment variable if relative."""
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        return out if out.is_absolute() or not root else Path(root) / out

    def load_workspace(self) -> GridWorkspace:
        w = resolve_workspace(self.workspace)
        if not w.is_free(self.goal_x, self.goal_y):
            raise ConfigError(f"goal ({self.goal_x}, {self.goal_y}) is not on a free cell of {w.name}")
        return w

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {','.join(v) if isinstance(v, tuple) else v}")
        return "\n".join(lines) + "\n"


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("pgnkd") / "data" / f"{name}.wsp"))


def bundled_config(name: str, overrides: dict | None = None) -> "ExperimentConfig":
    """Configuration shipped next to a bundled workspace."""
    if name not in BUNDLED:
        raise ConfigError(f"no bundled workspace named {name!r}")
    path = Path(str(resources.files("pgnkd") / "data" / f"{name}.cfg"))
    return load_config(path, overrides)


def resolve_workspace(ref: str) -> GridWorkspace:
    """A bundled workspace name or a path to a ``.wsp`` file."""
    path = bundled_path(ref) if ref in BUNDLED else Path(ref)
    if not path.exists():
        raise ConfigError(f"workspace {ref!r} not found")
    return load_workspace(path)


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file (if any), then string ``overrides``."""
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    for key, raw in (overrides or {}).items():
        key = key.replace("-", "_")
        values[key] = _coerce(key, raw)
    return dataclasses.replace(ExperimentConfig(), **values)


def split_overrides(argv: list[str]) -> dict:
    """``['--seed', '3', '--goal-x', '1.5']`` -> ``{'seed': '3', 'goal_x': '1.5'}``."""
    out, i = {}, 0
    while i < len(argv):
        arg = argv[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(argv):
                raise ConfigError(f"missing value for {arg}")
            value = argv[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out
