"""End-to-end stages: classifiers, teacher, KD dataset, student, evaluation.

Every stage derives its random stream from the experiment seed alone, so
running the stages one by one (as the CLI does) or all at once gives the
same artifacts.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..canonical import canonicalize
from ..distill import KdSample, Perception, build_kd_dataset, distill
from ..embedding import GRID_COLS, GRID_ROWS, N_ANGLE_BINS, N_FPV_CLASSES, N_TPV_CLASSES, PlaceClassScheme, PlaceClassifier
from ..oracle import build_cost_field
from ..sensing import sense_bev, sense_fpv
from ..student import MlpStudent
from ..teacher import EpsilonSchedule, LearningParams, NnqlStore, train_teacher
from ..workspace import GridWorkspace, Pose
from .config import ExperimentConfig
from .evaluate import EvalResult, evaluate, random_planner, student_planner, teacher_planner

log = logging.getLogger(__name__)

CLASSIFIER_EPOCHS = 40
CLASSIFIER_LR = 0.05
CLASSIFIER_BATCH = 512
EVAL_SEED_OFFSET = 1000


def sample_class_poses(w: GridWorkspace, per_class: int, rng: np.random.Generator, max_tries: int = 400):
    """Up to ``per_class`` free poses drawn uniformly inside each FPV place class."""
    scheme = PlaceClassScheme.for_workspace(w)
    cell_w, cell_h = w.width_m / GRID_COLS, w.height_m / GRID_ROWS
    poses, labels = [], []
    for cls in range(N_FPV_CLASSES):
        cell, angle_bin = divmod(cls, N_ANGLE_BINS)
        row, col = divmod(cell, GRID_COLS)
        got = 0
        for _ in range(max_tries):
            if got == per_class:
                break
            x = (col + rng.random()) * cell_w
            y = (row + rng.random()) * cell_h
            if not w.is_free(x, y):
                continue
            heading = float((angle_bin * 30 - 15 + rng.integers(0, 30)) % 360)
            p = Pose(x, y, heading)
            if scheme.pose_to_class(p) != cls:
                continue
            poses.append(p)
            labels.append(cls)
            got += 1
    return poses, np.array(labels, dtype=np.int64)


def place_training_data(w: GridWorkspace, per_class: int, seed: int):
    rng = np.random.default_rng(seed)
    poses, fpv_labels = sample_class_poses(w, per_class, rng)
    X_fpv = np.array([sense_fpv(w, p).features() for p in poses])
    X_tpv = np.array([canonicalize(sense_bev(w, p)).descriptor.features() for p in poses])
    return X_fpv, fpv_labels, X_tpv, fpv_labels // N_ANGLE_BINS


def train_classifiers(w: GridWorkspace, per_class: int = 20, seed: int = 0,
                      max_epochs: int = CLASSIFIER_EPOCHS) -> tuple[PlaceClassifier, PlaceClassifier]:
    X_fpv, y_fpv, X_tpv, y_tpv = place_training_data(w, per_class, seed)
    kw = dict(learning_rate=CLASSIFIER_LR, batch_size=CLASSIFIER_BATCH, max_epochs=max_epochs, random_state=seed)
    fpv = PlaceClassifier(n_classes=N_FPV_CLASSES, **kw).fit(X_fpv, y_fpv)
    tpv = PlaceClassifier(n_classes=N_TPV_CLASSES, **kw).fit(X_tpv, y_tpv)
    return fpv, tpv


def teacher_stage(cfg: ExperimentConfig, w: GridWorkspace, perception: Perception) -> NnqlStore:
    params = LearningParams(episode_len=cfg.train_episode_len, nn_threshold=cfg.nn_threshold)
    schedule = EpsilonSchedule.reaching_minimum_at(cfg.teacher_episodes, cfg.epsilon_decay_fraction,
                                                   cfg.epsilon_initial, cfg.epsilon_minimum)
    return train_teacher(w, cfg.goal, cfg.teacher_episodes, perception.teacher_state,
                         np.random.default_rng([cfg.seed, 1]), params, schedule, build_cost_field(w, cfg.goal))


def kd_stage(cfg: ExperimentConfig, w: GridWorkspace, store: NnqlStore, perception: Perception) -> list[KdSample]:
    return build_kd_dataset(w, cfg.goal, store, perception, cfg.kd_states, np.random.default_rng([cfg.seed, 2]))


def distill_stage(cfg: ExperimentConfig, dataset: list[KdSample], student_params: dict | None = None) -> MlpStudent:
    return distill(dataset, MlpStudent(random_state=cfg.seed, **(student_params or {})))


def make_planner(name: str, perception: Perception | None = None, store: NnqlStore | None = None,
                 student: MlpStudent | None = None):
    if name == "random":
        return random_planner()
    if name == "nnql":
        return teacher_planner(store, perception)
    if name == "mlp":
        return student_planner(student, perception)
    raise ValueError(f"unknown planner {name!r}")


def eval_stage(cfg: ExperimentConfig, w: GridWorkspace, name: str, **models) -> EvalResult:
    return evaluate(w, cfg.goal, make_planner(name, **models), cfg.eval_episodes,
                    cfg.seed + EVAL_SEED_OFFSET, name, cfg.eval_steps)


@dataclass
class RunArtifacts:
    workspace: GridWorkspace
    goal: Pose
    perception: Perception | None = None
    store: NnqlStore | None = None
    dataset: list = field(default_factory=list)
    student: MlpStudent | None = None
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def run_pipeline(cfg: ExperimentConfig, w: GridWorkspace | None = None,
                 student_params: dict | None = None) -> RunArtifacts:
    """Train everything for one (workspace, goal) pair and evaluate ``cfg.planners``."""
    w = w if w is not None else cfg.load_workspace()
    art = RunArtifacts(w, cfg.goal)

    def timed(key, fn):
        t0 = time.perf_counter()
        out = fn()
        art.timings[key] = time.perf_counter() - t0
        return out

    fpv, tpv = timed("classifiers", lambda: train_classifiers(w, cfg.samples_per_class, cfg.seed))
    art.perception = Perception(w, fpv, tpv)
    if {"nnql", "mlp"} & set(cfg.planners):
        art.store = timed("teacher", lambda: teacher_stage(cfg, w, art.perception))
    if "mlp" in cfg.planners:
        art.dataset = timed("kd_dataset", lambda: kd_stage(cfg, w, art.store, art.perception))
        art.student = timed("distill", lambda: distill_stage(cfg, art.dataset, student_params))
    for name in cfg.planners:
        art.results[name] = timed(f"eval_{name}", lambda: eval_stage(
            cfg, w, name, perception=art.perception, store=art.store, student=art.student))
        log.info("%s %s rate=%.4f", w.name, name, art.results[name].rate)
    return art
