"""Teacher rollouts to rank-based KD samples, deduplication, and student training.

Student targets are expressed in the canonical local-map frame: the teacher's
robot-frame action ranking is rotated by the canonicalization shift, and the
student's canonical-frame choice is rotated back before it is executed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canonical import canonicalize, dedup_key
from .embedding import compress_600_to_50, rank_weights, rre
from .sensing import sense_bev, sense_fpv
from .student import MlpStudent
from .teacher import NnqlStore, q_lookup, select_action
from .workspace import (
    N_ACTIONS,
    GridWorkspace,
    Pose,
    execute,
    goal_reached,
    random_free_pose,
    safe_actions,
)

ROLLOUT_STEPS = 50
RESIDUAL_EPSILON = 0.1


@dataclass
class KdSample:
    input: np.ndarray  # 50-dim TPV RRE
    target: np.ndarray  # 13-dim, canonical frame
    key: str
    weight: float = 1.0


def action_rank_target(store: NnqlStore, s, safe) -> np.ndarray:
    """Reciprocal-rank distribution over the 13 actions from the teacher's q values.

    Safe actions rank above unsafe ones; within each group by descending q,
    then ascending index.
    """
    safe = set(safe)
    if not safe:
        raise ValueError("no safe action")
    q = [q_lookup(store, s, a) for a in range(N_ACTIONS)]
    order = sorted(range(N_ACTIONS), key=lambda a: (a not in safe, -q[a], a))
    target = np.empty(N_ACTIONS)
    target[order] = rank_weights(N_ACTIONS)
    return target


def to_canonical_actions(v, shift: int) -> np.ndarray:
    """Re-index a robot-frame action vector into the canonical frame.

    A canonical turn ``phi`` is the robot turn ``phi + 30 * shift``; the
    random turn is frame-free and stays at index 0.
    """
    v = np.asarray(v)
    return np.concatenate([v[..., :1], np.roll(v[..., 1:], -shift, axis=-1)], axis=-1)


def from_canonical_actions(v, shift: int) -> np.ndarray:
    v = np.asarray(v)
    return np.concatenate([v[..., :1], np.roll(v[..., 1:], shift, axis=-1)], axis=-1)


class Perception:
    """Bundles the two place classifiers into per-pose embeddings."""

    def __init__(self, w: GridWorkspace, fpv_classifier, tpv_classifier):
        self.w = w
        self.fpv_classifier = fpv_classifier
        self.tpv_classifier = tpv_classifier

    def teacher_state(self, p: Pose) -> np.ndarray:
        return rre(self.fpv_classifier.proba_one(sense_fpv(self.w, p).features()))

    def student_state(self, p: Pose):
        """``(50-dim RRE, canonical shift, canonical descriptor)``."""
        c = canonicalize(sense_bev(self.w, p))
        return rre(self.tpv_classifier.proba_one(c.descriptor.features())), c.shift, c


def argmax_agreement(perception: Perception, poses) -> float:
    """Share of poses where the compressed teacher embedding and the student
    embedding put their top weight on the same position class."""
    poses = list(poses)
    if not poses:
        raise ValueError("no poses given")
    hits = 0
    for p in poses:
        teacher = compress_600_to_50(perception.teacher_state(p))
        student, _, _ = perception.student_state(p)
        hits += int(np.argmax(teacher) == np.argmax(student))
    return hits / len(poses)


def merge_samples(samples: list[KdSample]) -> list[KdSample]:
    """Collapse samples sharing a key into one weight-averaged, renormalized sample."""
    groups: dict[str, list[KdSample]] = {}
    for smp in samples:
        groups.setdefault(smp.key, []).append(smp)
    merged = []
    for key, group in groups.items():
        weights = np.array([g.weight for g in group])
        target = (weights[:, None] * np.array([g.target for g in group])).sum(axis=0)
        merged.append(KdSample(group[0].input, target / target.sum(), key, float(weights.sum())))
    return merged


def collect_samples(w: GridWorkspace, goal: Pose, store: NnqlStore, perception: Perception,
                    n_states: int, rng: np.random.Generator,
                    epsilon: float = RESIDUAL_EPSILON) -> list[KdSample]:
    """Raw (unmerged) samples from epsilon-greedy teacher rollouts."""
    samples: list[KdSample] = []
    while len(samples) < n_states:
        pose = random_free_pose(w, rng)
        for _ in range(ROLLOUT_STEPS):
            if len(samples) >= n_states or goal_reached(pose, goal):
                break
            safe = safe_actions(w, pose)
            if not safe:
                break
            s = perception.teacher_state(pose)
            x, shift, canon = perception.student_state(pose)
            target = to_canonical_actions(action_rank_target(store, s, safe), shift)
            samples.append(KdSample(x, target, dedup_key(canon)))
            a = select_action(store, s, safe, epsilon, rng)
            pose = execute(w, pose, a, rng).pose_after
    return samples


def build_kd_dataset(w: GridWorkspace, goal: Pose, store: NnqlStore, perception: Perception,
                     n_states: int, rng: np.random.Generator) -> list[KdSample]:
    if n_states <= 0:
        raise ValueError("n_states must be positive")
    samples = collect_samples(w, goal, store, perception, n_states, rng)
    if not samples:
        raise ValueError("no reachable states were visited")
    return merge_samples(samples)


def dataset_arrays(dataset: list[KdSample]):
    X = np.array([s.input for s in dataset])
    T = np.array([s.target for s in dataset])
    W = np.array([s.weight for s in dataset])
    return X, T, W


def distill(dataset: list[KdSample], student: MlpStudent | None = None) -> MlpStudent:
    if not dataset:
        raise ValueError("empty KD dataset")
    student = student if student is not None else MlpStudent()
    X, T, W = dataset_arrays(dataset)
    return student.fit(X, T, sample_weight=W)


def student_action(student: MlpStudent, perception: Perception, p: Pose, safe) -> int:
    """Safe action with the highest student probability after undoing the canonical rotation."""
    x, shift, _ = perception.student_state(p)
    probs = from_canonical_actions(student.predict_proba(x[None, :])[0], shift)
    best = max(sorted(safe), key=lambda a: (probs[a], -a))
    return int(best)


# -- text export -----------------------------------------------------------

def save_dataset(dataset: list[KdSample], path) -> None:
    lines = []
    for s in dataset:
        values = [repr(float(v)) for v in s.input] + [repr(float(v)) for v in s.target]
        lines.append(" ".join([s.key, repr(float(s.weight))] + values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path, input_dim: int = 50) -> list[KdSample]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split()
        values = np.array([float(v) for v in parts[2:]])
        if len(values) != input_dim + N_ACTIONS:
            raise ValueError(f"bad KD record with {len(values)} values")
        out.append(KdSample(values[:input_dim], values[input_dim:], parts[0], float(parts[1])))
    return out
