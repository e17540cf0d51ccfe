"""Explicit constants and right-hand sides of the Harnack-type estimates.

Everything that can overflow is available in log-space; at |x - y| = 1 the
Harnack prefactor is already about exp(32), so verdicts compare logs.
Removable singularities at omega = 0 go through ``expm1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, DegenerateDelta, ExponentDegenerate, NonConstantZeta
from .scenario import Scenario, ZetaSchedule

N_QUAD = 1024


def harnack_power(q: float, r: float) -> float:
    """Exponent 2(4 + r - q)/(2 + r) carried by |x - y|."""
    return 2.0 * (4.0 + r - q) / (2.0 + r)


def _require_delta(scenario: Scenario) -> float:
    d = scenario.delta
    if not 0.0 < d < 1.0:
        raise DegenerateDelta(f"delta = {d} is outside (0, 1)")
    return d


def decay_integral(rate: float, a: float, b: float) -> float:
    """Integral of exp(-rate t) over [a, b], stable as rate -> 0."""
    x = rate * (b - a)
    if x == 0.0:
        return b - a
    return math.exp(-rate * a) * (-math.expm1(-x)) / rate


def zeta_decay_integral(zeta: ZetaSchedule, rate: float, T: float, power: int = 1) -> float:
    """Exact integral of zeta_t**power * exp(-rate t) over [0, T]."""
    return sum(v ** power * decay_integral(rate, a, b) for a, b, v in zeta.pieces(T))


def simpson(fn, a: float, b: float, n: int) -> float:
    """Composite Simpson rule on ``n`` panels (rounded up to even)."""
    n += n % 2
    t = np.linspace(a, b, n + 1)
    y = fn(t)
    return float((b - a) / (3 * n) * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def _zeta_quadrature(zeta: ZetaSchedule, rate: float, T: float, power: int, n_quad: int) -> float:
    # split at the jumps so each panel sees a smooth integrand
    return sum(v ** power * simpson(lambda t: np.exp(-rate * t), a, b, n_quad)
               for a, b, v in zeta.pieces(T))


def _assemble_theta(delta, gamma, r, i_sq, i_lin):
    return (4.0 * delta ** (-2.0 * (3.0 + r) / (2.0 + r)) * gamma ** (-2.0 / (2.0 + r))
            * i_sq ** (r / (2.0 + r)) / i_lin ** 2)


def theta_quadrature(scenario: Scenario, T: float, n_quad: int = N_QUAD) -> float:
    """Harnack constant Theta_T with both time integrals done by Simpson's rule."""
    if not T > 0:
        raise ValueError("T must be > 0")
    if n_quad < 16:
        raise ValueError("n_quad must be >= 16")
    d = _require_delta(scenario)
    rate = d * scenario.omega
    i_sq = _zeta_quadrature(scenario.zeta, rate, T, 2, n_quad)
    i_lin = _zeta_quadrature(scenario.zeta, rate, T, 1, n_quad)
    return _assemble_theta(d, scenario.gamma, scenario.r, i_sq, i_lin)


def theta_exact(scenario: Scenario, T: float) -> float:
    """Theta_T with the piecewise integrals in closed form (any zeta)."""
    if not T > 0:
        raise ValueError("T must be > 0")
    d = _require_delta(scenario)
    rate = d * scenario.omega
    return _assemble_theta(d, scenario.gamma, scenario.r,
                           zeta_decay_integral(scenario.zeta, rate, T, 2),
                           zeta_decay_integral(scenario.zeta, rate, T, 1))


def theta_closed_form(scenario: Scenario, T: float) -> float:
    """The simplified constant for constant zeta.

    4 d^-1 g^(-2/(2+r)) z^(-4/(2+r)) [(1 - exp(-d w T))/w]^(-(4+r)/(2+r)),
    where the bracket tends to d T as w -> 0.
    """
    if not scenario.zeta.is_constant:
        raise NonConstantZeta("closed form needs a constant zeta")
    if not T > 0:
        raise ValueError("T must be > 0")
    d = _require_delta(scenario)
    r, w = scenario.r, scenario.omega
    z = scenario.zeta.values[0]
    bracket = d * decay_integral(d * w, 0.0, T)
    return (4.0 / d * scenario.gamma ** (-2.0 / (2.0 + r)) * z ** (-4.0 / (2.0 + r))
            * bracket ** (-(4.0 + r) / (2.0 + r)))


def _check_alpha(alpha: float):
    if not alpha > 1:
        raise AlphaOutOfRange(f"alpha must exceed 1, got {alpha}")


@dataclass(frozen=True)
class HarnackBound:
    """(P_T f)^alpha(x) <= exp(exponent(x, y)) P_T f^alpha(y)."""

    theta: float
    q: float
    r: float
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.theta > 0:
            raise ValueError("theta must be > 0")

    @classmethod
    def for_scenario(cls, scenario: Scenario, T: float, alpha: float, n_quad: int = N_QUAD,
                     theta_scale: float = 1.0) -> "HarnackBound":
        return cls(theta_scale * theta_quadrature(scenario, T, n_quad), scenario.q, scenario.r, alpha)

    @property
    def power(self) -> float:
        return harnack_power(self.q, self.r)

    def log_prefactor(self, dist: float) -> float:
        if dist == 0:
            return 0.0
        return self.alpha / (2.0 * (self.alpha - 1.0)) * self.theta * dist ** self.power

    def exponent(self, x, y) -> float:
        return self.log_prefactor(float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float))))


def harnack_log_rhs(bound: HarnackBound, x, y, p_t_f_alpha_at_y: float) -> float:
    if p_t_f_alpha_at_y < 0:
        raise ValueError("P_T f^alpha(y) must be >= 0")
    return bound.exponent(x, y) + (math.log(p_t_f_alpha_at_y) if p_t_f_alpha_at_y > 0 else -math.inf)


def harnack_rhs(bound: HarnackBound, x, y, p_t_f_alpha_at_y: float) -> float:
    """Linear-scale right-hand side; may overflow to inf, see :func:`harnack_log_rhs`."""
    if p_t_f_alpha_at_y < 0:
        raise ValueError("P_T f^alpha(y) must be >= 0")
    e = bound.exponent(x, y)
    return math.exp(e) * p_t_f_alpha_at_y if e < 709.0 else (math.inf if p_t_f_alpha_at_y > 0 else 0.0)


def msde_harnack_log_constant(alpha: float, omega: float, t: float, dist: float) -> float:
    """alpha w dist^2 / ((alpha - 1)(1 - exp(-2 w t))), equal to alpha dist^2/((alpha-1) 2t) at w = 0."""
    _check_alpha(alpha)
    if not t > 0:
        raise ValueError("t must be > 0")
    if dist == 0:
        return 0.0
    rate = 1.0 / (2.0 * t) if omega == 0 else omega / -math.expm1(-2.0 * omega * t)
    return alpha * dist ** 2 * rate / (alpha - 1.0)


def _check_exponents(q: float, r: float):
    if not q < 4.0 + r:
        raise ExponentDegenerate(f"need q < 4 + r, got q={q}, r={r}")


def strong_feller_log_rhs(theta_t: float, dist: float, q: float, r: float, f_sup: float) -> float:
    _check_exponents(q, r)
    if not theta_t > 0:
        raise ValueError("theta must be > 0")
    if dist == 0 or f_sup == 0:
        return -math.inf
    p = harnack_power(q, r)
    return math.log(f_sup) + 0.5 * math.log(theta_t) + 0.5 * p * math.log(dist) + 0.5 * theta_t * dist ** p


def strong_feller_rhs(theta_t: float, dist: float, q: float, r: float, f_sup: float) -> float:
    """Modulus f_sup Theta^(1/2) dist^(p/2) exp(Theta dist^p / 2) of the gradient-free estimate."""
    lg = strong_feller_log_rhs(theta_t, dist, q, r, f_sup)
    return math.exp(lg) if lg < 709.0 else math.inf


def log_harnack_term(theta_T: float, dist: float, q: float, r: float) -> float:
    return 0.5 * theta_T * dist ** harnack_power(q, r) if dist else 0.0


def log_harnack_rhs(theta_T: float, dist: float, q: float, r: float, log_p_t_f_at_y: float) -> float:
    return log_p_t_f_at_y + log_harnack_term(theta_T, dist, q, r)
