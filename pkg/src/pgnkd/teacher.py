"""Nearest-neighbor Q-learning teacher on FPV reciprocal-rank embeddings."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .oracle import CostField, build_cost_field, episode_reward
from .workspace import (
    N_ACTIONS,
    GridWorkspace,
    Pose,
    execute,
    goal_reached,
    random_free_pose,
    safe_actions,
)

MAX_START_TRIES = 100


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.1
    gamma: float = 0.9
    episode_len: int = 4
    nn_threshold: float = 0.2

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass(frozen=True)
class EpsilonSchedule:
    initial: float = 1.0
    minimum: float = 0.1
    decay: float = 0.999

    @classmethod
    def reaching_minimum_at(cls, episodes: int, fraction: float = 0.5,
                            initial: float = 1.0, minimum: float = 0.1) -> "EpsilonSchedule":
        """Decay chosen so epsilon hits the floor after ``fraction`` of the budget."""
        if not 0 < minimum <= initial <= 1:
            raise ValueError("need 0 < minimum <= initial <= 1")
        horizon = max(fraction * episodes, 1.0)
        return cls(initial, minimum, (minimum / initial) ** (1.0 / horizon))

    def epsilon(self, t: int) -> float:
        return max(self.minimum, self.initial * self.decay ** t)


F32_UNIT = float(np.finfo(np.float32).eps) / 2


class Query:
    """A state embedding prepared for repeated nearest-neighbor lookups.

    The best match found for each action is cached together with the number
    of rows already scanned, so later lookups only scan newly inserted rows.
    Cached q values are never stored; they are read from the store each time.
    """

    __slots__ = ("s", "s32", "ss", "best")

    def __init__(self, s):
        self.s = np.asarray(s, dtype=float)
        self.s32 = self.s.astype(np.float32)
        self.ss = float(self.s @ self.s)
        self.best: dict[int, tuple[int, int, float]] = {}


def as_query(s) -> Query:
    return s if isinstance(s, Query) else Query(s)


class NnqlStore:
    """Per-action lists of ``(embedding, q)`` searched by exact linear scan.

    Scans run in float32 first; every row that float32 rounding could place
    at the minimum is then re-scored in float64, so the result equals an
    exact float64 scan (first minimum wins).
    """

    def __init__(self, dim: int, n_actions: int = N_ACTIONS):
        self.dim = dim
        self.n_actions = n_actions
        self._keys = [np.empty((0, dim)) for _ in range(n_actions)]
        self._keys32 = [np.empty((0, dim), dtype=np.float32) for _ in range(n_actions)]
        self._sq = [np.empty(0) for _ in range(n_actions)]
        self._q = [np.empty(0) for _ in range(n_actions)]
        self._size = [0] * n_actions
        self._max_sq = 0.0
        self.counter = 0

    def __len__(self):
        return sum(self._size)

    def entries(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        n = self._size[a]
        return self._keys[a][:n], self._q[a][:n]

    def _scan(self, qr: Query, a: int, lo: int, hi: int) -> tuple[int, float]:
        sq = self._sq[a][lo:hi]
        approx = sq.astype(np.float32) - 2.0 * (self._keys32[a][lo:hi] @ qr.s32) + np.float32(qr.ss)
        # rounding bound for the float32 expression, doubled for the pairwise comparison
        err = (self.dim + 8) * F32_UNIT * (self._max_sq + 2.0 * math.sqrt(self._max_sq * qr.ss) + qr.ss)
        cand = np.flatnonzero(approx <= approx.min() + 2.0 * err + 1e-30)
        rows = lo + cand
        exact = self._sq[a][rows] - 2.0 * (self._keys[a][rows] @ qr.s) + qr.ss
        k = int(np.argmin(exact))
        return int(rows[k]), max(float(exact[k]), 0.0)

    def nearest_sq(self, s, a: int) -> tuple[int, float]:
        """Index and squared distance of the closest entry for action ``a`` (-1 if none)."""
        qr = as_query(s)
        n = self._size[a]
        seen, i, d2 = qr.best.get(a, (0, -1, math.inf))
        if n > seen:
            j, dj = self._scan(qr, a, seen, n)
            if dj < d2:  # earlier rows win ties
                i, d2 = j, dj
            qr.best[a] = (n, i, d2)
        return i, d2

    def nearest(self, s, a: int) -> tuple[int, float]:
        """Index and Euclidean distance of the closest entry for action ``a`` (-1 if none)."""
        i, d2 = self.nearest_sq(s, a)
        return i, math.sqrt(d2)

    def insert(self, s, a: int, q: float = 0.0) -> int:
        n = self._size[a]
        if n == len(self._q[a]):
            cap = max(16, 2 * n)
            keys = np.empty((cap, self.dim))
            keys[:n] = self._keys[a][:n]
            keys32 = np.empty((cap, self.dim), dtype=np.float32)
            keys32[:n] = self._keys32[a][:n]
            sq = np.empty(cap)
            sq[:n] = self._sq[a][:n]
            qs = np.empty(cap)
            qs[:n] = self._q[a][:n]
            self._keys[a], self._keys32[a], self._sq[a], self._q[a] = keys, keys32, sq, qs
        s = as_query(s).s
        self._keys[a][n] = s
        self._keys32[a][n] = s
        self._sq[a][n] = float(s @ s)
        self._max_sq = max(self._max_sq, self._sq[a][n])
        self._q[a][n] = q
        self._size[a] = n + 1
        self.counter += 1
        return n

    def set_q(self, a: int, i: int, q: float) -> None:
        self._q[a][i] = q

    def q_values(self, s) -> np.ndarray:
        """``q_lookup`` for all actions at once."""
        qr = as_query(s)
        out = np.zeros(self.n_actions)
        for a in range(self.n_actions):
            if self._size[a]:
                out[a] = self._q[a][self.nearest_sq(qr, a)[0]]
        return out

    def __eq__(self, other):
        if not isinstance(other, NnqlStore):
            return NotImplemented
        if (self.dim, self.n_actions, self._size) != (other.dim, other.n_actions, other._size):
            return False
        return all(
            np.array_equal(k1, k2) and np.array_equal(q1, q2)
            for a in range(self.n_actions)
            for (k1, q1), (k2, q2) in [(self.entries(a), other.entries(a))]
        )


def q_lookup(store: NnqlStore, s, a: int) -> float:
    i, _ = store.nearest_sq(s, a)
    if i < 0:
        return 0.0
    return float(store._q[a][i])


def q_update(store: NnqlStore, s, a: int, reward: float, s_next,
             params: LearningParams = LearningParams()) -> float:
    """One tabular-style Q-learning step on the nearest stored state.

    A new zero-valued entry is inserted when nothing lies within
    ``params.nn_threshold``. Returns the updated q.
    """
    target = reward + params.gamma * float(store.q_values(s_next).max())
    i, d2 = store.nearest_sq(s, a)
    if i < 0 or math.sqrt(d2) > params.nn_threshold:
        i = store.insert(s, a, 0.0)
    q = store._q[a][i]
    q = q + params.alpha * (target - q)
    store.set_q(a, i, q)
    return float(q)


def select_action(store: NnqlStore, s, safe, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the safe set; greedy ties go to the lowest index."""
    safe = sorted(safe)
    if not safe:
        raise ValueError("no safe action to choose from")
    if eps > 0 and rng.random() < eps:
        return int(safe[rng.integers(len(safe))])
    q = store.q_values(s)
    best, best_q = safe[0], -math.inf
    for a in safe:
        if q[a] > best_q:
            best, best_q = a, q[a]
    return int(best)


def train_teacher(w: GridWorkspace, goal: Pose, episodes: int, embed, rng: np.random.Generator,
                  params: LearningParams = LearningParams(),
                  schedule: EpsilonSchedule | None = None,
                  cost_field: CostField | None = None,
                  store: NnqlStore | None = None) -> NnqlStore:
    """Epsilon-greedy episodes with the episode reward replayed on the last transition.

    ``embed(pose)`` maps a pose to the teacher's state embedding.
    """
    cf = cost_field if cost_field is not None else build_cost_field(w, goal)
    schedule = schedule if schedule is not None else EpsilonSchedule.reaching_minimum_at(episodes)
    if store is None:
        store = NnqlStore(len(embed(goal)))
    for t in range(episodes):
        eps = schedule.epsilon(t)
        for _ in range(MAX_START_TRIES):
            start = random_free_pose(w, rng)
            if math.isfinite(cf.pose_cost(start)):
                break
        else:
            raise RuntimeError("could not sample a start pose that reaches the goal")
        pose, s = start, Query(embed(start))
        transitions = []
        for _ in range(params.episode_len):
            if goal_reached(pose, goal):
                break
            safe = safe_actions(w, pose)
            if not safe:
                break
            a = select_action(store, s, safe, eps, rng)
            pose = execute(w, pose, a, rng).pose_after
            s_next = Query(embed(pose))
            transitions.append((s, a, s_next))
            s = s_next
        if not transitions:
            continue
        R = episode_reward(cf, start, pose)
        last = len(transitions) - 1
        for j, (s0, a, s1) in enumerate(transitions):
            q_update(store, s0, a, R if j == last else 0.0, s1, params)
    return store


class NnqlTeacher(BaseEstimator):
    """Estimator wrapper: ``fit`` trains on one (workspace, goal) pair."""

    def __init__(self, n_episodes=5000, alpha=0.1, gamma=0.9, episode_len=4,
                 nn_threshold=0.2, decay_fraction=0.5, random_state=0):
        self.n_episodes = n_episodes
        self.alpha = alpha
        self.gamma = gamma
        self.episode_len = episode_len
        self.nn_threshold = nn_threshold
        self.decay_fraction = decay_fraction
        self.random_state = random_state

    def fit(self, w: GridWorkspace, goal: Pose, embed):
        params = LearningParams(self.alpha, self.gamma, self.episode_len, self.nn_threshold)
        schedule = EpsilonSchedule.reaching_minimum_at(self.n_episodes, self.decay_fraction)
        rng = np.random.default_rng(self.random_state)
        self.store_ = train_teacher(w, goal, self.n_episodes, embed, rng, params, schedule)
        return self

    def act(self, s, safe, rng=None, eps: float = 0.0) -> int:
        return select_action(self.store_, s, safe, eps, rng)
