"""Interference-avoidance game for RF-powered backscatter links.

Static leader/follower equilibrium plus a slotted repeated game played by
tabular Q-learning agents with optional hotbooting.
"""
from .channel import (
    LinkGains,
    PhyConfig,
    backscatter_tx_power,
    backscattered_bits,
    dbm_to_watts,
    friis_gain,
    harvested_energy,
    received_power,
    sinr,
    watts_to_dbm,
)
from .errors import ConfigError, DomainError
from .learning import (
    ActionGrid,
    HotbootCache,
    LearnerConfig,
    QTable,
    SinrQuantizer,
    hotboot_train,
    init_learner,
    q_update,
    quantize,
    select_action,
)
from .sim import RunResult, Setting, SlotRecord, StrategySpec, convergence_slot, run_episode, sweep
from .stackelberg import (
    Equilibrium,
    GameParams,
    concavity_scan,
    jammer_best_response,
    jammer_br_quadratic,
    jammer_utility,
    stackelberg_equilibrium,
    user_best_response,
    user_foc,
    user_utility,
)

__version__ = "0.1.0"
