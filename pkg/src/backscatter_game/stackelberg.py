"""Static leader/follower game between the backscatter user and the interferer.

The user (leader) picks the backscattering fraction ``phi``; the interferer
(follower) picks its jamming power ``p_j``. Both sub-games are concave in the
mover's own strategy, so each best response is a one-dimensional concave
maximization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._optimize import golden_section_max, newton_bisect
from .channel import LinkGains, backscattered_bits
from .errors import DomainError

log = logging.getLogger(__name__)

LN2 = math.log(2.0)

GOLDEN_TOL = 1e-9
NEWTON_XTOL = 1e-10
NEWTON_FTOL = 1e-9
BRACKET_EPS = 1e-9
LEADER_GRID = 256
CERT_GRID = 200
CERT_RTOL = 1e-6


@dataclass(frozen=True)
class GameParams:
    """Prices and strategy bounds. ``k`` and ``m`` size the learning action grids."""

    kappa: float = 1.0
    w: float = 1e6
    c_phi: float = 0.1
    c_j: float = 0.1
    p_j_max: float = 1.0
    phi_max: float = 1.0
    k: int = 10
    m: int = 10

    def __post_init__(self):
        if not 0 <= self.kappa <= 1:
            raise DomainError(f"kappa must lie in [0, 1], got {self.kappa!r}", "kappa")
        if not self.w > 0:
            raise DomainError(f"w must be > 0, got {self.w!r}", "w")
        if not self.c_phi >= 0:
            raise DomainError(f"c_phi must be >= 0, got {self.c_phi!r}", "c_phi")
        if not self.c_j > 0:
            raise DomainError(f"c_j must be > 0, got {self.c_j!r}", "c_j")
        if not (self.p_j_max > 0 and math.isfinite(self.p_j_max)):
            raise DomainError(f"p_j_max must be a finite value > 0, got {self.p_j_max!r}", "p_j_max")
        if not 0 < self.phi_max <= 1:
            raise DomainError(f"phi_max must lie in (0, 1], got {self.phi_max!r}", "phi_max")
        for name in ("k", "m"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise DomainError(f"{name} must be an integer >= 1, got {value!r}", name)


@dataclass(frozen=True)
class QuadraticCoeffs:
    a: float
    b: float
    c: float

    def positive_root(self) -> float | None:
        """Largest real root if it is positive, else ``None``."""
        if self.a == 0:
            return -self.c / self.b if self.b != 0 and -self.c / self.b > 0 else None
        disc = self.b * self.b - 4.0 * self.a * self.c
        if disc < 0:
            return None
        root = (-self.b + math.sqrt(disc)) / (2.0 * self.a)
        return root if root > 0 else None


@dataclass(frozen=True)
class Equilibrium:
    phi_star: float
    p_j_star: float
    u_user: float
    u_jammer: float
    certified: bool
    violation: dict | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "phi_star": self.phi_star,
            "p_j_star_watts": self.p_j_star,
            "u_user": self.u_user,
            "u_jammer": self.u_jammer,
            "certified": self.certified,
        }
        if self.violation is not None:
            out["violation"] = self.violation
        return out


def _nonneg_power(p_j):
    p_j = np.asarray(p_j, dtype=float)
    if np.any(p_j < 0):
        raise DomainError("jamming power must be >= 0")
    return p_j


def user_utility(phi, p_j, gains: LinkGains, params: GameParams):
    """Delivered bits minus the price of the airtime bought from the HAP."""
    bits = backscattered_bits(phi, _nonneg_power(p_j), gains, params)
    return (bits - params.c_phi * np.asarray(phi, dtype=float))[()]


def jammer_utility(phi, p_j, gains: LinkGains, params: GameParams):
    p_j = _nonneg_power(p_j)
    bits = backscattered_bits(phi, p_j, gains, params)
    return (-bits - params.c_j * p_j)[()]


def jammer_marginal(phi, p_j, gains: LinkGains, params: GameParams):
    """Analytic derivative of ``jammer_utility`` with respect to ``p_j``."""
    phi = np.asarray(phi, dtype=float)
    x = _nonneg_power(p_j) * gains.g + gains.n0
    hr = gains.h * gains.refl
    num = phi * (1.0 - phi) * params.kappa * params.w * gains.g * hr
    return (num / (LN2 * x * (phi * x + (1.0 - phi) * hr)) - params.c_j)[()]


def jammer_br_quadratic(phi: float, gains: LinkGains, params: GameParams) -> QuadraticCoeffs:
    """Closed-form stationarity quadratic ``a p^2 + b p + c = 0`` for the jammer.

    The constant term carries ``(1 - phi) * C_J * H`` without the ``N0``
    factor the exact stationarity condition has, so the root is only used
    as a cross-check against the numerical best response.
    """
    if not 0 < phi < 1:
        raise DomainError("phi must lie strictly inside (0, 1)")
    g, n0, cj = gains.g, gains.n0, params.c_j
    hr = gains.h * gains.refl
    kw = params.kappa * params.w
    a = LN2 * phi * cj * g * g
    b = 2.0 * LN2 * phi * cj * n0 * g + LN2 * (1.0 - phi) * g * cj * hr
    c = LN2 * phi * cj * n0 * n0 + LN2 * (1.0 - phi) * cj * hr - phi * (1.0 - phi) * g * hr * kw
    return QuadraticCoeffs(a, b, c)


def jammer_best_response(phi: float, gains: LinkGains, params: GameParams) -> float:
    if not 0 <= phi <= 1 or math.isnan(phi):
        raise DomainError("phi must lie in [0, 1]")
    p_max = params.p_j_max
    if phi in (0.0, 1.0) or gains.g == 0 or params.kappa == 0:
        # jamming cannot change the bit count, so any power is pure cost
        return 0.0

    def f(p):
        return float(jammer_utility(phi, p, gains, params))

    x, _ = golden_section_max(f, 0.0, p_max, GOLDEN_TOL * p_max)
    best_p, best_u = 0.0, f(0.0)
    for p in sorted((x, p_max)):
        u = f(p)
        if u > best_u:
            best_p, best_u = p, u

    root = jammer_br_quadratic(phi, gains, params).positive_root()
    closed = min(max(root, 0.0), p_max) if root is not None else 0.0
    if abs(closed - best_p) > 1e-6 * p_max:
        log.debug("closed-form discrepancy at phi=%.6g: quadratic %.6g W vs numeric %.6g W",
                  phi, closed, best_p)
    return best_p


def user_foc(phi, p_j, gains: LinkGains, params: GameParams):
    """Derivative of ``user_utility`` with respect to ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if np.any((phi <= 0) | (phi >= 1)):
        raise DomainError("phi must lie strictly inside (0, 1)")
    x = _nonneg_power(p_j) * gains.g + gains.n0
    hr = gains.h * gains.refl
    kw = params.kappa * params.w
    ratio = hr * (1.0 - phi) / (x * phi)
    d = x * phi + hr * (1.0 - phi)
    return (kw * np.log1p(ratio) / LN2 - kw * hr / (LN2 * d) - params.c_phi)[()]


def user_foc_slope(phi, p_j, gains: LinkGains, params: GameParams):
    """Second derivative of ``user_utility`` in ``phi`` (always negative)."""
    phi = np.asarray(phi, dtype=float)
    x = _nonneg_power(p_j) * gains.g + gains.n0
    hr = gains.h * gains.refl
    d = x * phi + hr * (1.0 - phi)
    return (-params.kappa * params.w * hr * hr / (LN2 * phi * d * d))[()]


def user_best_response(p_j: float, gains: LinkGains, params: GameParams) -> float:
    if not p_j >= 0:
        raise DomainError("jamming power must be >= 0")
    phi_max = params.phi_max
    candidates = [0.0, phi_max]
    lo, hi = BRACKET_EPS, phi_max - BRACKET_EPS
    if params.kappa > 0 and hi > lo:
        # f is decreasing (concave utility), so the sign pattern decides the case
        f_lo = float(user_foc(lo, p_j, gains, params))
        f_hi = float(user_foc(hi, p_j, gains, params)) if hi < 1 else -math.inf
        if f_lo > 0 > f_hi:
            root = newton_bisect(
                lambda t: float(user_foc(t, p_j, gains, params)),
                lambda t: float(user_foc_slope(t, p_j, gains, params)),
                lo, hi, xtol=NEWTON_XTOL, ftol=NEWTON_FTOL,
            )
            candidates.insert(1, root)
        elif f_hi >= 0:
            candidates.insert(1, hi)
    best_phi, best_u = None, -math.inf
    for phi in candidates:
        u = float(user_utility(phi, p_j, gains, params))
        if u > best_u:
            best_phi, best_u = phi, u
    return best_phi


def leader_utility(phi: float, gains: LinkGains, params: GameParams) -> float:
    """User utility when the interferer best-responds to ``phi``."""
    return float(user_utility(phi, jammer_best_response(phi, gains, params), gains, params))


def certify(phi_star: float, p_j_star: float, gains: LinkGains, params: GameParams,
            n_grid: int = CERT_GRID, rtol: float = CERT_RTOL) -> dict | None:
    """Check unilateral deviations on uniform grids; return the worst violation or ``None``."""
    u_star = float(user_utility(phi_star, p_j_star, gains, params))
    j_star = float(jammer_utility(phi_star, p_j_star, gains, params))
    phis = np.linspace(0.0, params.phi_max, n_grid)
    powers = np.linspace(0.0, params.p_j_max, n_grid)
    gain_u = user_utility(phis, p_j_star, gains, params) - u_star
    gain_j = jammer_utility(phi_star, powers, gains, params) - j_star
    tol_u = rtol * max(1.0, abs(u_star))
    tol_j = rtol * max(1.0, abs(j_star))
    worst = None
    iu, ij = int(np.argmax(gain_u)), int(np.argmax(gain_j))
    if gain_u[iu] > tol_u:
        worst = {"player": "user", "phi": float(phis[iu]), "gain": float(gain_u[iu])}
    if gain_j[ij] > tol_j and (worst is None or gain_j[ij] / tol_j > worst["gain"] / tol_u):
        worst = {"player": "jammer", "p_j": float(powers[ij]), "gain": float(gain_j[ij])}
    return worst


def stackelberg_equilibrium(gains: LinkGains, params: GameParams) -> Equilibrium:
    """Backward induction: follower best response inside a grid-seeded golden-section leader search."""
    phi_max = params.phi_max
    grid = np.linspace(0.0, phi_max, LEADER_GRID)
    values = [leader_utility(float(phi), gains, params) for phi in grid]
    i = int(np.argmax(values))
    best_phi, best_u = float(grid[i]), values[i]
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, LEADER_GRID - 1)])
    x, fx = golden_section_max(lambda t: leader_utility(t, gains, params), lo, hi, GOLDEN_TOL * phi_max)
    if fx > best_u:
        best_phi, best_u = x, fx

    p_star = jammer_best_response(best_phi, gains, params)
    violation = certify(best_phi, p_star, gains, params)
    return Equilibrium(
        phi_star=best_phi,
        p_j_star=p_star,
        u_user=float(user_utility(best_phi, p_star, gains, params)),
        u_jammer=float(jammer_utility(best_phi, p_star, gains, params)),
        certified=violation is None,
        violation=violation,
    )


def random_game(rng: np.random.Generator) -> tuple[LinkGains, GameParams]:
    """Draw a game in normalized units (utilities of order one) for property checks."""

    def logu(lo, hi):
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))

    gains = LinkGains(h=logu(1e-2, 10.0), g=logu(1e-2, 1.0), refl=float(rng.uniform(0.5, 4.0)),
                      n0=logu(1e-3, 1e-1))
    params = GameParams(
        kappa=float(rng.uniform(0.5, 1.0)),
        w=float(rng.uniform(1.0, 5.0)),
        c_phi=float(rng.uniform(0.0, 1.0)),
        c_j=logu(0.05, 5.0),
        p_j_max=float(rng.uniform(0.5, 5.0)),
        phi_max=1.0 if rng.random() < 0.5 else float(rng.uniform(0.5, 1.0)),
    )
    return gains, params


@dataclass
class ConcavityReport:
    objective: str
    n_draws: int
    n_points: int
    max_second_derivative: float
    worst_draw: int

    def to_dict(self) -> dict:
        return asdict(self)


CONCAVITY_POINTS = 64
CONCAVITY_REL_STEP = 1e-4


def second_derivative_profile(objective: str, gains: LinkGains, params: GameParams,
                              other: float, n_points: int = CONCAVITY_POINTS) -> np.ndarray:
    """Central differences of the analytic gradient on an interior grid of the mover's axis.

    ``other`` is the opponent's fixed strategy (``phi`` for the jammer
    objective, ``p_j`` for the user objective).
    """
    frac = np.arange(1, n_points + 1) / (n_points + 1)
    if objective == "jammer":
        x = frac * params.p_j_max
        grad = lambda t: jammer_marginal(other, t, gains, params)  # noqa: E731
    elif objective == "user":
        x = frac * params.phi_max
        x = x[x < 1.0]
        grad = lambda t: user_foc(t, other, gains, params)  # noqa: E731
    else:
        raise ValueError(f"unknown objective {objective!r}")
    h = CONCAVITY_REL_STEP * x
    return (grad(x + h) - grad(x - h)) / (2.0 * h)


def concavity_scan(objective: str, n_draws: int, seed: int) -> ConcavityReport:
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng(seed)
    worst, worst_i = -math.inf, -1
    for i in range(n_draws):
        gains, params = random_game(rng)
        if objective == "jammer":
            other = float(rng.uniform(0.02, 0.98))
        else:
            other = float(rng.uniform(0.0, params.p_j_max))
        d2 = float(np.max(second_derivative_profile(objective, gains, params, other)))
        if d2 > worst:
            worst, worst_i = d2, i
    return ConcavityReport(objective, n_draws, CONCAVITY_POINTS, worst, worst_i)
