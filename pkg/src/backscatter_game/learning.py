"""Tabular Q-learning over quantized-SINR states, with hotbooting.

Hotbooting pre-trains the Q-table on realizations of a similar environment
with uniformly random actions, then hands the table and the matching
epsilon-greedy policy to the online learner as its starting point.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .errors import ConfigError

CACHE_FORMAT = "backscatter-game/hotboot"
CACHE_VERSION = 1
BIT_GENERATORS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")


@dataclass(frozen=True)
class ActionGrid:
    levels: tuple[float, ...]

    @classmethod
    def uniform(cls, max_value: float, steps: int) -> "ActionGrid":
        """``steps + 1`` evenly spaced levels from 0 to ``max_value`` inclusive."""
        if steps < 1 or not max_value > 0:
            raise ConfigError("action grid needs steps >= 1 and a positive maximum")
        return cls(tuple(max_value * k / steps for k in range(steps + 1)))

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


@dataclass(frozen=True)
class SinrQuantizer:
    """Maps SINR to one of ``len(edges_db) + 1`` states.

    State 0 collects everything below the lowest edge, including SINR = 0.
    A value exactly on an edge belongs to the bucket above it.
    """

    edges_db: tuple[float, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.edges_db, self.edges_db[1:])):
            raise ConfigError("quantizer edges must be strictly increasing")

    @classmethod
    def uniform_db(cls, n_levels: int = 8, lo_db: float = -10.0, hi_db: float = 40.0) -> "SinrQuantizer":
        if n_levels < 2:
            raise ConfigError("quantizer needs at least 2 levels")
        if n_levels == 2:
            return cls((lo_db,))
        return cls(tuple(float(x) for x in np.linspace(lo_db, hi_db, n_levels - 1)))

    @property
    def n_levels(self) -> int:
        return len(self.edges_db) + 1

    def __call__(self, value: float) -> int:
        return quantize(value, self)


def quantize(sinr_value: float, quantizer: SinrQuantizer) -> int:
    if sinr_value <= 0:
        return 0
    db = math.inf if math.isinf(sinr_value) else 10.0 * math.log10(sinr_value)
    return bisect.bisect_right(quantizer.edges_db, db)


@dataclass(frozen=True)
class LearnerConfig:
    beta: float = 0.5
    gamma: float = 0.8
    epsilon: float = 0.05
    seed: int = 0
    rng: str = "PCG64"

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta!r}", "beta")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma!r}", "gamma")
        if not 0 <= self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon!r}", "epsilon")
        if self.rng not in BIT_GENERATORS:
            raise ConfigError(f"rng must be one of {BIT_GENERATORS}, got {self.rng!r}", "rng")


def make_rng(seed, algorithm: str = "PCG64") -> np.random.Generator:
    """Generator on the named numpy bit generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(getattr(np.random, algorithm)(seed))


@dataclass
class QTable:
    q: np.ndarray
    v: np.ndarray
    pi: np.ndarray
    visits: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(
            q=np.zeros((n_states, n_actions)),
            v=np.zeros(n_states),
            pi=np.full((n_states, n_actions), 1.0 / n_actions),
            visits=np.zeros((n_states, n_actions), dtype=np.int64),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape

    def greedy(self, s: int) -> int:
        # np.argmax returns the first maximum, i.e. ties go to the lowest index
        return int(np.argmax(self.q[s]))


def epsilon_greedy_row(q_row: np.ndarray, epsilon: float) -> np.ndarray:
    n = len(q_row)
    if n == 1:
        return np.ones(1)
    row = np.full(n, epsilon / (n - 1))
    row[int(np.argmax(q_row))] = 1.0 - epsilon
    return row


def q_update(table: QTable, s: int, a: int, reward: float, s_next: int, cfg: LearnerConfig) -> QTable:
    n_states, n_actions = table.shape
    if not (0 <= s < n_states and 0 <= s_next < n_states and 0 <= a < n_actions):
        raise IndexError(f"state/action out of range: s={s}, a={a}, s_next={s_next}")
    target = reward + cfg.gamma * table.v[s_next]
    table.q[s, a] = (1.0 - cfg.beta) * table.q[s, a] + cfg.beta * target
    table.v[s] = table.q[s].max()
    table.visits[s, a] += 1
    return table


def select_action(table: QTable, s: int, cfg: LearnerConfig, rng: np.random.Generator) -> int:
    """Epsilon-greedy draw; refreshes ``table.pi[s]``.

    Two variates are consumed on every call so that the stream position does
    not depend on which branch was taken.
    """
    n = table.shape[1]
    greedy = table.greedy(s)
    table.pi[s] = epsilon_greedy_row(table.q[s], cfg.epsilon)
    u = rng.random()
    j = int(rng.integers(max(n - 1, 1)))
    if n == 1 or u >= cfg.epsilon:
        return greedy
    return j if j < greedy else j + 1


class Environment(Protocol):
    """One realization of the environment as seen by a single learner."""

    n_states: int
    n_actions: int

    def reset(self) -> int: ...

    def step(self, action: int) -> tuple[float, int]: ...


@dataclass
class HotbootCache:
    q_star: np.ndarray
    v_star: np.ndarray
    pi_star: np.ndarray
    meta: dict

    @property
    def shape(self) -> tuple[int, int]:
        return self.q_star.shape

    def to_json(self) -> str:
        payload = {
            "format": CACHE_FORMAT,
            "version": CACHE_VERSION,
            "shape": list(self.shape),
            "meta": self.meta,
            "q_star": self.q_star.tolist(),
            "v_star": self.v_star.tolist(),
            "pi_star": self.pi_star.tolist(),
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "HotbootCache":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"hotboot cache is not valid JSON: {exc}") from exc
        if payload.get("format") != CACHE_FORMAT or payload.get("version") != CACHE_VERSION:
            raise ConfigError("unsupported hotboot cache format or version")
        q = np.asarray(payload["q_star"], dtype=float)
        v = np.asarray(payload["v_star"], dtype=float)
        pi = np.asarray(payload["pi_star"], dtype=float)
        shape = tuple(payload["shape"])
        if q.shape != shape or pi.shape != shape or v.shape != (shape[0],):
            raise ConfigError("hotboot cache matrices disagree with the declared shape")
        return cls(q, v, pi, payload["meta"])

    @classmethod
    def load(cls, path) -> "HotbootCache":
        return cls.from_json(Path(path).read_text())


def realization_seeds(master_seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(count)


def hotboot_train(make_env: Callable[[np.random.Generator], Environment], I: int, N: int,
                  cfg: LearnerConfig, *, seeds=None, reduction: str = "sequential",
                  fingerprint: str = "") -> HotbootCache:
    """Pre-train a Q-table on ``I`` realizations of ``N`` slots with random actions.

    ``make_env(rng)`` builds one realization; the same generator then drives
    the uniform action choice. ``reduction="sequential"`` threads one table
    through all realizations in order. ``reduction="average"`` trains a
    private table per realization and merges them by visit-weighted mean,
    which makes the result independent of realization order.
    """
    if I < 1 or N < 1:
        raise ConfigError("hotbooting needs I >= 1 realizations and N >= 1 slots")
    if reduction not in ("sequential", "average"):
        raise ConfigError(f"unknown reduction {reduction!r}")
    seeds = list(seeds) if seeds is not None else realization_seeds(cfg.seed, I)
    if len(seeds) != I:
        raise ConfigError("need exactly one seed per realization")

    shared = None
    private = []
    for seed in seeds:
        rng = make_rng(seed, cfg.rng)
        env = make_env(rng)
        if shared is None or reduction == "average":
            table = QTable.zeros(env.n_states, env.n_actions)
        else:
            table = shared
        s = env.reset()
        for _ in range(N):
            a = int(rng.integers(env.n_actions))
            reward, s_next = env.step(a)
            q_update(table, s, a, reward, s_next, cfg)
            s = s_next
        if reduction == "average":
            private.append(table)
        shared = table

    if reduction == "average":
        q = np.zeros(shared.shape)
        visits = sum(t.visits for t in private)
        for idx in np.ndindex(*q.shape):
            n = visits[idx]
            if n:
                # fsum is exactly rounded, so the merge is order independent
                q[idx] = math.fsum(t.visits[idx] * t.q[idx] for t in private) / n
        shared = QTable(q=q, v=q.max(axis=1), pi=np.empty_like(q), visits=visits)

    pi = np.vstack([epsilon_greedy_row(row, cfg.epsilon) for row in shared.q])
    meta = {
        "I": I,
        "N": N,
        "fingerprint": fingerprint,
        "reduction": reduction,
        "seed": cfg.seed,
        "rng": cfg.rng,
        "coverage": float(np.count_nonzero(shared.visits)) / shared.visits.size,
    }
    return HotbootCache(shared.q.copy(), shared.v.copy(), pi, meta)


def init_learner(cache: HotbootCache | None, shape: tuple[int, int],
                 fingerprint: str | None = None) -> QTable:
    """Fresh table (zeros, uniform policy) or a copy of a hotboot cache."""
    table = QTable.zeros(*shape)
    if cache is None:
        return table
    if tuple(cache.shape) != tuple(shape):
        raise ConfigError(f"hotboot cache shape {cache.shape} does not match learner shape {tuple(shape)}")
    if fingerprint is not None and cache.meta.get("fingerprint") != fingerprint:
        raise ConfigError("hotboot cache was trained on a different environment (fingerprint mismatch)")
    table.q = cache.q_star.copy()
    table.v = cache.v_star.copy()
    table.pi = cache.pi_star.copy()
    return table
