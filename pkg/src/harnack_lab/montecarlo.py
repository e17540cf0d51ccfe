"""Monte Carlo estimates of P_T f and verdicts on the semigroup inequalities.

Verdicts are three-valued and compare logs:

* ``violated``: the lower 3-sigma end of the left side exceeds the upper
  3-sigma end of the right side,
* ``holds``: the point estimates satisfy the inequality,
* ``inconclusive``: neither, i.e. a violation inside the noise band.

Both starting points use the same stream ids (common random numbers), so
the x = y case reduces to Jensen's inequality for sample averages and holds
exactly, not just statistically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import bounds
from .coupling import C_THR, coupled_batch
from .errors import (ExponentDegenerate, FunctionBelowOne, FunctionUnbounded, InvalidScenario)
from .integrator import terminal_states
from .scenario import Scenario

Z_CRIT = 3.0
TOL_LOG = 1e-12
VERDICTS = ("holds", "violated", "inconclusive")


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Test function on R^d with declared bounds ``inf <= f <= sup``."""

    __test__ = False  # keep pytest from collecting this class

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    sup: float = math.inf
    inf: float = 0.0
    lipschitz: float = math.inf

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.fn(x)

    @classmethod
    def exp_linear(cls, lam, shift: float = 0.0, sup: Optional[float] = None) -> "TestFunction":
        """exp(lam . x) + shift; pass ``sup`` when the domain bounds lam . x above."""
        lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
        name = "exp_linear(" + ",".join(f"{v:g}" for v in lam) + (f")+{shift:g}" if shift else ")")
        return cls(name, lambda x: np.exp(x @ lam) + shift,
                   sup=math.inf if sup is None else float(sup), inf=float(shift))

    @classmethod
    def shifted_indicator_smooth(cls, center, radius: float, width: float) -> "TestFunction":
        """1 + smoothed indicator of the ball B(center, radius); values in [1, 2].

        Equal to 2 on the ball, 1 beyond ``radius + width``, with a cosine
        ramp in between.
        """
        c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if not (radius >= 0 and width > 0):
            raise ValueError("need radius >= 0 and width > 0")

        def f(x):
            s = np.clip((np.linalg.norm(x - c, axis=1) - radius) / width, 0.0, 1.0)
            return 1.0 + 0.5 * (1.0 + np.cos(math.pi * s))

        name = f"smooth_ind(c={','.join(f'{v:g}' for v in c)},r={radius:g},w={width:g})"
        return cls(name, f, sup=2.0, inf=1.0, lipschitz=math.pi / (2.0 * width))

    @classmethod
    def bounded_lipschitz(cls, fn, sup: float, lipschitz: float, inf: float = 0.0,
                          name: str = "bounded_lipschitz") -> "TestFunction":
        return cls(name, fn, sup=float(sup), inf=float(inf), lipschitz=float(lipschitz))

    @classmethod
    def constant(cls, value: float = 1.0) -> "TestFunction":
        return cls(f"const({value:g})", lambda x: np.full(x.shape[0], float(value)),
                   sup=abs(value), inf=value, lipschitz=0.0)


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=np.float64)
        n = v.shape[0]
        mean = float(np.sum(v) / n)  # numpy sums pairwise
        se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, n)

    @property
    def lower(self) -> float:
        return self.mean - Z_CRIT * self.stderr

    @property
    def upper(self) -> float:
        return self.mean + Z_CRIT * self.stderr


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


@dataclass
class HarnackReport:
    """One inequality instance. ``log_lhs``/``log_rhs`` are point values, both sides in log-space."""

    kind: str
    lhs: Estimate
    rhs: Estimate
    rhs_factor: float
    log_lhs: float
    log_rhs: float
    slack: float
    verdict: str


def _verdict(log_lhs, log_rhs, log_lhs_lo, log_rhs_hi):
    slack = log_rhs_hi - log_lhs_lo
    if slack < 0:
        return slack, "violated"
    if log_lhs <= log_rhs + TOL_LOG * max(1.0, abs(log_rhs)):
        return slack, "holds"
    return slack, "inconclusive"


def _distance(x, y) -> float:
    return float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))


def estimate_semigroup(scenario: Scenario, x, T: float, f: TestFunction, n_paths: int, h: float,
                       seed: int, stream_offset: int = 0, backend: Optional[str] = None) -> Estimate:
    """Mean and stderr of f(X_T) over stream ids ``stream_offset ..``."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if T == 0:
        return Estimate(float(f(np.asarray(x, float))[0]), 0.0, n_paths)
    xs = terminal_states(scenario, x, T, h, seed, n_paths, stream_offset, backend)
    return Estimate.from_samples(f(xs))


def _pair_states(scenario, x, y, T, h, seed, n_paths, backend):
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    xs = terminal_states(scenario, x, T, h, seed, n_paths, 0, backend)
    ys = xs if np.array_equal(np.asarray(x, float), np.asarray(y, float)) else \
        terminal_states(scenario, y, T, h, seed, n_paths, 0, backend)
    return xs, ys


def harnack_log_prefactor(scenario: Scenario, x, y, T: float, alpha: float, bound: str = "theorem",
                          theta_scale: float = 1.0) -> float:
    """Log of the Harnack prefactor; ``bound`` picks the general or the finite-dimensional constant."""
    dist = _distance(x, y)
    if bound == "theorem":
        return bounds.HarnackBound.for_scenario(scenario, T, alpha, theta_scale=theta_scale).log_prefactor(dist)
    if bound == "msde":
        if not scenario.diffusion.is_identity:
            raise InvalidScenario("the finite-dimensional constant assumes sigma = I")
        return theta_scale * bounds.msde_harnack_log_constant(alpha, scenario.one_sided_lipschitz(), T, dist)
    raise ValueError(f"unknown bound {bound!r}")


def verify_harnack(scenario: Scenario, x, y, T: float, alpha: float, f: TestFunction, n_paths: int,
                   h: float, seed: int, bound: str = "theorem", theta_scale: float = 1.0,
                   backend: Optional[str] = None) -> HarnackReport:
    """(P_T f)^alpha(x) <= exp(prefactor) P_T f^alpha(y)."""
    if not alpha > 1:
        from .errors import AlphaOutOfRange
        raise AlphaOutOfRange(f"alpha must exceed 1, got {alpha}")
    log_pref = harnack_log_prefactor(scenario, x, y, T, alpha, bound, theta_scale)
    xs, ys = _pair_states(scenario, x, y, T, h, seed, n_paths, backend)
    ex = Estimate.from_samples(f(xs))
    lhs = Estimate(ex.mean ** alpha, alpha * ex.mean ** (alpha - 1) * ex.stderr, ex.n)
    rhs = Estimate.from_samples(f(ys) ** alpha)
    log_lhs = alpha * _log(ex.mean)
    log_rhs = log_pref + _log(rhs.mean)
    slack, verdict = _verdict(log_lhs, log_rhs, _log(lhs.lower), log_pref + _log(rhs.upper))
    return HarnackReport("harnack", lhs, rhs, log_pref, log_lhs, log_rhs, slack, verdict)


def verify_log_harnack(scenario: Scenario, x, y, T: float, f: TestFunction, n_paths: int, h: float,
                       seed: int, theta_scale: float = 1.0, backend: Optional[str] = None) -> HarnackReport:
    """P_T(log f)(x) <= log P_T f(y) + Theta_T |x - y|^p / 2 for f >= 1."""
    if f.inf < 1:
        raise FunctionBelowOne(f"{f.name} is not bounded below by 1")
    theta = theta_scale * bounds.theta_quadrature(scenario, T)
    term = bounds.log_harnack_term(theta, _distance(x, y), scenario.q, scenario.r)
    xs, ys = _pair_states(scenario, x, y, T, h, seed, n_paths, backend)
    lhs = Estimate.from_samples(np.log(f(xs)))
    rhs = Estimate.from_samples(f(ys))
    log_rhs = bounds.log_harnack_rhs(theta, _distance(x, y), scenario.q, scenario.r, _log(rhs.mean))
    slack, verdict = _verdict(lhs.mean, log_rhs, lhs.lower, term + _log(rhs.upper))
    return HarnackReport("log_harnack", lhs, rhs, term, lhs.mean, log_rhs, slack, verdict)


@dataclass
class TransferCheck:
    name: str
    weighted: Estimate
    direct: Estimate
    gap: float
    passed: bool


@dataclass
class GirsanovReport:
    mean_R: Estimate
    mass_passed: bool
    transfers: List[TransferCheck]
    coupled_fraction: float

    @property
    def transfer_gap(self) -> float:
        return max((t.gap for t in self.transfers), default=0.0)

    @property
    def passed(self) -> bool:
        return self.mass_passed and all(t.passed for t in self.transfers)


def _within(a: Estimate, b: Estimate) -> bool:
    return abs(a.mean - b.mean) <= Z_CRIT * math.hypot(a.stderr, b.stderr)


def verify_girsanov(scenario: Scenario, x, y, T: float, f, n_paths: int, h: float, seed: int,
                    mode: str = "singular_eta", c_thr: float = C_THR,
                    independent_offset: Optional[int] = None,
                    backend: Optional[str] = None) -> GirsanovReport:
    """E R_T = 1 and E[R_T f(Y_T)] = P_T f(x) against an independent direct estimate.

    Coupled runs use stream ids ``0 .. n - 1``; the direct estimate uses ids
    starting at ``independent_offset`` (default ``n``), so the two are independent.
    """
    fs: Sequence[TestFunction] = [f] if isinstance(f, TestFunction) else list(f)
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    batch = coupled_batch(scenario, x, y, T, h, seed, n_paths, mode, c_thr, 0, backend)
    r = batch.r_T
    mean_r = Estimate.from_samples(r)
    mass_ok = abs(mean_r.mean - 1.0) <= Z_CRIT * mean_r.stderr
    off = n_paths if independent_offset is None else independent_offset
    xs = terminal_states(scenario, x, T, h, seed, n_paths, off, backend)
    checks = []
    for fn in fs:
        w = Estimate.from_samples(r * fn(batch.y_T))
        dct = Estimate.from_samples(fn(xs))
        checks.append(TransferCheck(fn.name, w, dct, abs(w.mean - dct.mean), _within(w, dct)))
    return GirsanovReport(mean_r, mass_ok, checks, float(batch.coupled.mean()))


@dataclass
class StrongFellerReport:
    diff: Estimate
    lhs: float
    lhs_lower: float
    rhs: float
    passed: bool


def verify_strong_feller(scenario: Scenario, x, y, T: float, f: TestFunction, n_paths: int, h: float,
                         seed: int, common_noise: bool = True,
                         backend: Optional[str] = None) -> StrongFellerReport:
    """|P_T f(x) - P_T f(y)| against the explicit modulus; pass iff the 3-sigma lower end is below it."""
    if not scenario.q < 4 + scenario.r:
        raise ExponentDegenerate("strong Feller bound needs q < 4 + r")
    if not math.isfinite(f.sup):
        raise FunctionUnbounded(f"{f.name} has no finite declared sup")
    theta = bounds.theta_quadrature(scenario, T)
    rhs = bounds.strong_feller_rhs(theta, _distance(x, y), scenario.q, scenario.r, f.sup)
    if common_noise:
        xs, ys = _pair_states(scenario, x, y, T, h, seed, n_paths, backend)
        diff = Estimate.from_samples(f(xs) - f(ys))
    else:
        ex = Estimate.from_samples(f(terminal_states(scenario, x, T, h, seed, n_paths, 0, backend)))
        ey = Estimate.from_samples(f(terminal_states(scenario, y, T, h, seed, n_paths, n_paths, backend)))
        diff = Estimate(ex.mean - ey.mean, math.hypot(ex.stderr, ey.stderr), n_paths)
    lhs = abs(diff.mean)
    lower = max(lhs - Z_CRIT * diff.stderr, 0.0)
    return StrongFellerReport(diff, lhs, lower, rhs, lower <= rhs)


VERDICT_HEADER = ["scenario", "x", "y", "T", "alpha", "f", "lhs", "rhs", "slack", "verdict", "n", "h", "seed"]


def verdict_row(scenario: Scenario, x, y, T, alpha, f: TestFunction, report: HarnackReport, h, seed):
    """CSV row with both sides in log-space."""
    return [scenario.name, np.asarray(x, float), np.asarray(y, float), T,
            alpha if alpha is not None else "", f.name, report.log_lhs, report.log_rhs,
            report.slack, report.verdict, report.lhs.n, h, seed]
