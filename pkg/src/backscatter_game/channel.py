"""Free-space link model for an RF-powered backscatter tag.

The tag harvests for ``1 - phi`` of a unit slot and backscatters for ``phi``.
All functions accept Python floats or numpy arrays and broadcast.

The received power ``delta * P_hap * friis`` is folded into the effective
user-to-HAP gain ``LinkGains.h`` so that the SINR reduces to::

    (1 - phi) * h * refl / (phi * (p_j * g + n0))
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

BOLTZMANN = 1.380649e-23
SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)[()]


def watts_to_dbm(x):
    w = np.asarray(x, dtype=float)
    if np.any(w <= 0):
        raise DomainError("power must be > 0 W to express in dBm")
    return (10.0 * np.log10(w) + 30.0)[()]


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)[()]


def thermal_noise(bandwidth_hz: float, temperature_k: float = 290.0) -> float:
    """kTB noise power in watts."""
    return BOLTZMANN * temperature_k * bandwidth_hz


def wavelength(freq_hz: float) -> float:
    return SPEED_OF_LIGHT / freq_hz


@dataclass(frozen=True)
class PhyConfig:
    """Radio constants, all in SI units and linear scale.

    ``g_j = 0`` is accepted and models an interferer that cannot reach
    the HAP at all; ``delta = 0`` models a tag that harvests nothing.
    """

    p_hap: float = float(dbm_to_watts(43.0))
    delta: float = 0.5
    g_t: float = float(db_to_linear(6.0))
    g_r: float = float(db_to_linear(6.0))
    g_j: float = float(db_to_linear(1.8))
    lambda_hap: float = wavelength(2.4e9)
    lambda_j: float = wavelength(2.4e9)
    d_hap: float = 15.0
    d_j: float = 20.0
    gamma0: float = 1.0
    gamma1: float = -1.0
    n0: float = thermal_noise(1e6)

    def __post_init__(self):
        for name in ("p_hap", "g_t", "g_r", "lambda_hap", "lambda_j", "d_hap", "d_j", "n0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a finite value > 0, got {value!r}", name)
        if not (math.isfinite(self.g_j) and self.g_j >= 0):
            raise DomainError(f"g_j must be a finite value >= 0, got {self.g_j!r}", "g_j")
        if not 0 <= self.delta <= 1:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta!r}", "delta")
        if abs(self.gamma0 - self.gamma1) == 0:
            raise DomainError("gamma0 and gamma1 must differ", "gamma1")


@dataclass(frozen=True)
class LinkGains:
    """Derived channel quantities.

    ``h`` is the effective user-to-HAP gain including the received power
    (watts), ``g`` the interferer-to-HAP gain, ``refl`` the modulation
    depth ``|gamma0 - gamma1|**2`` and ``n0`` the receiver noise power.
    """

    h: float
    g: float
    refl: float
    n0: float

    @classmethod
    def from_phy(cls, cfg: PhyConfig) -> "LinkGains":
        return cls(
            h=float(received_power(cfg)),
            g=float(friis_gain(cfg.g_j, cfg.g_t, cfg.lambda_j, cfg.d_j)) if cfg.g_j > 0 else 0.0,
            refl=abs(cfg.gamma0 - cfg.gamma1) ** 2,
            n0=cfg.n0,
        )


def friis_gain(g_tx, g_rx, lam, d):
    """Free-space power gain ``g_tx * g_rx * lam**2 / (4 pi d)**2``."""
    args = [np.asarray(a, dtype=float) for a in (g_tx, g_rx, lam, d)]
    if any(np.any(a <= 0) for a in args):
        raise DomainError("friis_gain arguments must all be > 0")
    g_tx, g_rx, lam, d = args
    return (g_tx * g_rx * lam**2 / (4.0 * math.pi * d) ** 2)[()]


def received_power(cfg: PhyConfig):
    return cfg.delta * cfg.p_hap * friis_gain(cfg.g_t, cfg.g_r, cfg.lambda_hap, cfg.d_hap)


def _check_fraction(phi, lo_open=False):
    phi = np.asarray(phi, dtype=float)
    lo_bad = phi <= 0 if lo_open else phi < 0
    if np.any(lo_bad | (phi > 1) | np.isnan(phi)):
        raise DomainError(f"phi must lie in {'(0' if lo_open else '[0'}, 1]", "phi")
    return phi


def harvested_energy(phi, p_r):
    phi = _check_fraction(phi)
    p_r = np.asarray(p_r, dtype=float)
    if np.any(p_r < 0):
        raise DomainError("received power must be >= 0")
    return ((1.0 - phi) * p_r)[()]


def backscatter_tx_power(phi, e_h):
    phi = _check_fraction(phi, lo_open=True)
    return (np.asarray(e_h, dtype=float) / phi)[()]


def sinr(phi, p_j, gains: LinkGains):
    """SINR at the HAP; ``inf`` at ``phi = 0`` and ``0`` at ``phi = 1``."""
    phi = _check_fraction(phi)
    p_j = np.asarray(p_j, dtype=float)
    if np.any(p_j < 0):
        raise DomainError("jamming power must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - phi) * gains.h * gains.refl / (phi * (p_j * gains.g + gains.n0))
    out = np.where(phi == 0, np.inf, out)
    return out[()]


def backscattered_bits(phi, p_j, gains: LinkGains, params):
    """Bits delivered in one slot: ``phi * kappa * W * log2(1 + SINR)``.

    ``params`` needs ``kappa`` and ``w`` attributes (see ``GameParams``).
    """
    s = sinr(phi, p_j, gains)
    phi = np.asarray(phi, dtype=float)
    with np.errstate(invalid="ignore"):
        bits = phi * params.kappa * params.w * np.log2(1.0 + s)
    return np.where((phi == 0) | (phi == 1), 0.0, bits)[()]
