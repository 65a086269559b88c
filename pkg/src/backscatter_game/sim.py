"""Slotted repeated game between the backscatter user and the interferer."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import LinkGains, PhyConfig, sinr as link_sinr
from .errors import ConfigError, DomainError
from .learning import (
    ActionGrid,
    HotbootCache,
    LearnerConfig,
    QTable,
    SinrQuantizer,
    hotboot_train,
    init_learner,
    make_rng,
    q_update,
    select_action,
)
from .stackelberg import (
    GameParams,
    jammer_best_response,
    jammer_utility,
    stackelberg_equilibrium,
    user_best_response,
    user_utility,
)

KINDS = ("q-learning", "hotboot-q", "random", "fixed", "equilibrium-oracle", "best-response-oracle")
TRACE_HEADER = ("slot", "phi", "p_j_watts", "sinr", "state", "u_user", "u_jammer")
SWEEP_HEADER = ("varied_value", "strategy", "seed", "tail_utility", "convergence_slot")
SWEEP_FIELDS = ("d_hap", "c_phi")

DEFAULT_SLOTS = 2000
DEFAULT_WINDOW = 100
DEFAULT_THRESHOLD = 0.9
TAIL_FRACTION = 0.2


@dataclass(frozen=True)
class StrategySpec:
    """Policy choice for one player.

    ``value`` is the fixed action for ``fixed``; ``learner`` overrides the
    run-wide learner settings for the Q variants; ``cache`` or ``cache_path``
    supplies the pre-trained table for ``hotboot-q``.
    """

    kind: str
    value: float | None = None
    learner: LearnerConfig | None = None
    cache_path: str | None = None
    cache: HotbootCache | None = field(default=None, compare=False, repr=False)

    @property
    def label(self) -> str:
        return self.kind

    def validate(self, role: str, game: GameParams) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"{role}.kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "fixed":
            upper = game.phi_max if role == "user" else game.p_j_max
            if self.value is None or not 0 <= self.value <= upper:
                raise ConfigError(f"{role}.value must lie in [0, {upper}] for a fixed strategy")
        elif self.value is not None:
            raise ConfigError(f"{role}.value is only meaningful for the fixed strategy")
        if self.kind == "hotboot-q" and role != "user":
            raise ConfigError("hotboot-q is only available to the user")


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    phi: float
    p_j: float
    sinr: float
    state: int
    u_user: float
    u_jammer: float

    def row(self) -> tuple:
        return (self.slot, self.phi, self.p_j, self.sinr, self.state, self.u_user, self.u_jammer)


@dataclass
class RunResult:
    trace: list[SlotRecord]
    avg_user_utility_tail: float
    convergence_slot: int | None
    seed: int
    user: str = ""
    jammer: str = ""

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "user": self.user,
            "jammer": self.jammer,
            "slots": len(self.trace),
            "avg_user_utility_tail": self.avg_user_utility_tail,
            "convergence_slot": self.convergence_slot,
        }

    def to_dict(self, include_trace: bool = True) -> dict:
        out = self.summary()
        if include_trace:
            out["trace"] = [asdict(r) for r in self.trace]
        return out

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.to_dict(include_trace), sort_keys=True)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.trace:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in r.row()])
        return buf.getvalue()


def tail_mean(values) -> float:
    values = np.asarray(values, dtype=float)
    n_tail = max(1, int(round(TAIL_FRACTION * len(values))))
    return float(np.mean(values[-n_tail:]))


def convergence_slot(trace, window: int = DEFAULT_WINDOW,
                     threshold_fraction: float = DEFAULT_THRESHOLD) -> int | None:
    """First slot count ``n`` at which the mean of slots ``n-window+1..n`` reaches the target.

    The target is ``threshold_fraction`` of the tail mean, taken as
    ``tail - (1 - threshold_fraction) * |tail|`` so that it stays below the
    tail mean for negative utilities too. ``None`` means never reached.
    ``trace`` is a sequence of ``SlotRecord`` or of user utilities.
    """
    if window < 1 or not 0 < threshold_fraction <= 1:
        raise DomainError("window must be >= 1 and threshold_fraction in (0, 1]")
    values = np.asarray([r.u_user if isinstance(r, SlotRecord) else r for r in trace], dtype=float)
    if len(values) < window:
        raise DomainError(f"trace of {len(values)} slots is shorter than the window {window}")
    tail = tail_mean(values)
    target = tail - (1.0 - threshold_fraction) * abs(tail)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    moving = (csum[window:] - csum[:-window]) / window
    hits = np.nonzero(moving >= target)[0]
    return int(hits[0]) + window if hits.size else None


class Physics:
    """Memoized per-slot evaluation of the link and both utilities."""

    def __init__(self, phy: PhyConfig, game: GameParams, quantizer: SinrQuantizer):
        self.phy = phy
        self.game = game
        self.gains = LinkGains.from_phy(phy)
        self.quantizer = quantizer
        self._memo: dict[tuple[float, float], tuple[float, int, float, float]] = {}
        self._jammer_br: dict[float, float] = {}
        self._user_br: dict[float, float] = {}
        self._equilibrium = None

    def evaluate(self, phi: float, p_j: float) -> tuple[float, int, float, float]:
        """``(observed SINR, state, u_user, u_jammer)``; no backscatter reads as SINR 0."""
        key = (phi, p_j)
        hit = self._memo.get(key)
        if hit is None:
            s = 0.0 if phi == 0 else float(link_sinr(phi, p_j, self.gains))
            hit = (
                s,
                self.quantizer(s),
                float(user_utility(phi, p_j, self.gains, self.game)),
                float(jammer_utility(phi, p_j, self.gains, self.game)) + 0.0,
            )
            self._memo[key] = hit
        return hit

    def jammer_br(self, phi: float) -> float:
        if phi not in self._jammer_br:
            self._jammer_br[phi] = jammer_best_response(phi, self.gains, self.game)
        return self._jammer_br[phi]

    def user_br(self, p_j: float) -> float:
        if p_j not in self._user_br:
            self._user_br[p_j] = user_best_response(p_j, self.gains, self.game)
        return self._user_br[p_j]

    @property
    def equilibrium(self):
        if self._equilibrium is None:
            self._equilibrium = stackelberg_equilibrium(self.gains, self.game)
        return self._equilibrium


@dataclass
class SlotContext:
    prev_phi: float = 0.0
    prev_p_j: float = 0.0
    phi: float | None = None


class Policy:
    def act(self, state: int, rng, ctx: SlotContext) -> tuple[float, int | None]:
        raise NotImplementedError

    def learn(self, state: int, action: int | None, reward: float, next_state: int) -> None:
        pass


class FixedPolicy(Policy):
    def __init__(self, value: float):
        self.value = value

    def act(self, state, rng, ctx):
        return self.value, None


class RandomPolicy(Policy):
    def __init__(self, grid: ActionGrid):
        self.grid = grid

    def act(self, state, rng, ctx):
        a = int(rng.integers(len(self.grid)))
        return self.grid[a], a


class QPolicy(Policy):
    def __init__(self, grid: ActionGrid, table: QTable, cfg: LearnerConfig):
        self.grid = grid
        self.table = table
        self.cfg = cfg

    def act(self, state, rng, ctx):
        a = select_action(self.table, state, self.cfg, rng)
        return self.grid[a], a

    def learn(self, state, action, reward, next_state):
        q_update(self.table, state, action, reward, next_state, self.cfg)


class OraclePolicy(Policy):
    """Full-information play: equilibrium strategy or best response to the opponent.

    As follower the interferer answers the current slot's ``phi``; the user
    answers the interferer's power from the previous slot.
    """

    def __init__(self, physics: Physics, role: str, kind: str):
        self.physics = physics
        self.role = role
        self.kind = kind

    def act(self, state, rng, ctx):
        eq_kind = self.kind == "equilibrium-oracle"
        if self.role == "user":
            value = self.physics.equilibrium.phi_star if eq_kind else self.physics.user_br(ctx.prev_p_j)
        else:
            value = self.physics.equilibrium.p_j_star if eq_kind else self.physics.jammer_br(ctx.phi)
        return value, None


def env_fingerprint(phy: PhyConfig, game: GameParams, user_grid: ActionGrid,
                    jammer_grid: ActionGrid, quantizer: SinrQuantizer) -> str:
    payload = {
        "phy": asdict(phy),
        "game": asdict(game),
        "user_grid": list(user_grid.levels),
        "jammer_grid": list(jammer_grid.levels),
        "sinr_edges_db": list(quantizer.edges_db),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class Setting:
    """Everything that defines the environment of one episode."""

    phy: PhyConfig = field(default_factory=PhyConfig)
    game: GameParams = field(default_factory=GameParams)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    quantizer: SinrQuantizer = field(default_factory=SinrQuantizer.uniform_db)

    @property
    def user_grid(self) -> ActionGrid:
        return ActionGrid.uniform(self.game.phi_max, self.game.k)

    @property
    def jammer_grid(self) -> ActionGrid:
        return ActionGrid.uniform(self.game.p_j_max, self.game.m)

    def fingerprint(self) -> str:
        return env_fingerprint(self.phy, self.game, self.user_grid, self.jammer_grid, self.quantizer)


def _build_policy(spec: StrategySpec, role: str, setting: Setting, physics: Physics) -> Policy:
    grid = setting.user_grid if role == "user" else setting.jammer_grid
    if spec.kind == "fixed":
        return FixedPolicy(float(spec.value))
    if spec.kind == "random":
        return RandomPolicy(grid)
    if spec.kind in ("equilibrium-oracle", "best-response-oracle"):
        return OraclePolicy(physics, role, spec.kind)
    cfg = spec.learner or setting.learner
    shape = (setting.quantizer.n_levels, len(grid))
    cache = None
    if spec.kind == "hotboot-q":
        cache = spec.cache
        if cache is None and spec.cache_path is not None:
            cache = HotbootCache.load(spec.cache_path)
        if cache is None:
            raise ConfigError("hotboot-q needs a hotboot cache (train one with `hotboot`)")
        return QPolicy(grid, init_learner(cache, shape, setting.fingerprint()), cfg)
    return QPolicy(grid, init_learner(None, shape), cfg)


def run_episode(setting: Setting, user: StrategySpec, jammer: StrategySpec, T: int = DEFAULT_SLOTS,
                seed: int = 0, window: int = DEFAULT_WINDOW,
                threshold: float = DEFAULT_THRESHOLD, physics: Physics | None = None) -> RunResult:
    """Play ``T`` slots; learners act on the state quantized from the previous slot's SINR."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    user.validate("user", setting.game)
    jammer.validate("jammer", setting.game)
    physics = physics or Physics(setting.phy, setting.game, setting.quantizer)
    user_pol = _build_policy(user, "user", setting, physics)
    jammer_pol = _build_policy(jammer, "jammer", setting, physics)

    user_ss, jammer_ss = np.random.SeedSequence(seed).spawn(2)
    rng_u = make_rng(user_ss, setting.learner.rng)
    rng_j = make_rng(jammer_ss, setting.learner.rng)

    trace = []
    state = 0
    ctx = SlotContext()
    for n in range(1, T + 1):
        ctx.phi = None
        phi, a_u = user_pol.act(state, rng_u, ctx)
        ctx.phi = phi
        p_j, a_j = jammer_pol.act(state, rng_j, ctx)
        s_val, next_state, u_u, u_j = physics.evaluate(phi, p_j)
        user_pol.learn(state, a_u, u_u, next_state)
        jammer_pol.learn(state, a_j, u_j, next_state)
        trace.append(SlotRecord(n, phi, p_j, s_val, state, u_u, u_j))
        ctx.prev_phi, ctx.prev_p_j = phi, p_j
        state = next_state

    utilities = [r.u_user for r in trace]
    conv = convergence_slot(utilities, window, threshold) if T >= window else None
    return RunResult(trace, tail_mean(utilities), conv, seed, user.label, jammer.label)


class GameEnvironment:
    """The user's view of the game: physics plus a scripted interferer.

    With ``perturb > 0`` each realization scales both distances by an
    independent factor drawn from ``1 +- perturb``.
    """

    def __init__(self, setting: Setting, jammer: StrategySpec, rng: np.random.Generator,
                 perturb: float = 0.0):
        if perturb:
            phy = replace(
                setting.phy,
                d_hap=setting.phy.d_hap * (1.0 + perturb * rng.uniform(-1.0, 1.0)),
                d_j=setting.phy.d_j * (1.0 + perturb * rng.uniform(-1.0, 1.0)),
            )
            setting = replace(setting, phy=phy)
        self.setting = setting
        self.physics = Physics(setting.phy, setting.game, setting.quantizer)
        self.grid = setting.user_grid
        self.jammer = _build_policy(jammer, "jammer", setting, self.physics)
        self.rng = rng
        self.n_states = setting.quantizer.n_levels
        self.n_actions = len(self.grid)
        self.ctx = SlotContext()
        self.state = 0

    def reset(self) -> int:
        self.ctx = SlotContext()
        self.state = 0
        return 0

    def step(self, action: int) -> tuple[float, int]:
        phi = self.grid[action]
        self.ctx.phi = phi
        p_j, a_j = self.jammer.act(self.state, self.rng, self.ctx)
        _, next_state, u_u, u_j = self.physics.evaluate(phi, p_j)
        self.jammer.learn(self.state, a_j, u_j, next_state)
        self.ctx.prev_phi, self.ctx.prev_p_j = phi, p_j
        self.state = next_state
        return u_u, next_state


def train_hotboot(setting: Setting, jammer: StrategySpec, I: int = 20, N: int = 500,
                  reduction: str = "sequential", perturb: float = 0.0, seeds=None) -> HotbootCache:
    """Hotboot cache for the user against ``jammer`` in ``setting``."""
    jammer.validate("jammer", setting.game)
    return hotboot_train(
        lambda rng: GameEnvironment(setting, jammer, rng, perturb),
        I, N, setting.learner, seeds=seeds, reduction=reduction,
        fingerprint=setting.fingerprint(),
    )


@dataclass(frozen=True)
class SweepRow:
    varied_value: float
    strategy: str
    seed: int
    tail_utility: float
    convergence_slot: int | None

    def row(self) -> tuple:
        conv = "" if self.convergence_slot is None else self.convergence_slot
        return (repr(self.varied_value), self.strategy, self.seed, repr(self.tail_utility), conv)


def vary_setting(setting: Setting, vary: str, value: float) -> Setting:
    if vary == "d_hap":
        return replace(setting, phy=replace(setting.phy, d_hap=float(value)))
    if vary == "c_phi":
        return replace(setting, game=replace(setting.game, c_phi=float(value)))
    raise ConfigError(f"can only vary one of {SWEEP_FIELDS}, got {vary!r}")


def sweep(setting: Setting, vary: str, values, user_specs, jammer: StrategySpec,
          T: int = DEFAULT_SLOTS, seeds=tuple(range(10)), hotboot_I: int = 20, hotboot_N: int = 500,
          window: int = DEFAULT_WINDOW, threshold: float = DEFAULT_THRESHOLD) -> list[SweepRow]:
    """Run every (value, strategy, seed) combination; all points are validated first."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    points = []
    for value in values:
        try:
            point = vary_setting(setting, vary, value)
        except DomainError as exc:
            raise ConfigError(f"invalid {vary} value {value!r}: {exc}") from exc
        for spec in user_specs:
            spec.validate("user", point.game)
        jammer.validate("jammer", point.game)
        points.append((value, point))

    rows = []
    for value, point in points:
        physics = Physics(point.phy, point.game, point.quantizer)
        for spec in user_specs:
            if spec.kind == "hotboot-q" and spec.cache is None and spec.cache_path is None:
                spec = replace(spec, cache=train_hotboot(point, jammer, hotboot_I, hotboot_N))
            for seed in seeds:
                res = run_episode(point, spec, jammer, T, seed, window, threshold, physics)
                rows.append(SweepRow(float(value), spec.label, seed, res.avg_user_utility_tail,
                                     res.convergence_slot))
    return rows


def summarize(rows: list[SweepRow]) -> list[dict]:
    """Mean and standard error of the tail utility per (value, strategy)."""
    groups: dict[tuple[float, str], list[float]] = {}
    for r in rows:
        groups.setdefault((r.varied_value, r.strategy), []).append(r.tail_utility)
    out = []
    for (value, strategy), xs in groups.items():
        arr = np.asarray(xs)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out.append({"varied_value": value, "strategy": strategy, "n": len(arr),
                    "mean_tail_utility": float(arr.mean()), "stderr": se})
    return out


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow(r.row())
    return buf.getvalue()
