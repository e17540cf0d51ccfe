"""Coupling by change of drift and the Girsanov ledger.

X and Y share the noise. X additionally feels ``-U_t`` with

    U_t = eta_t (X_t - Y_t) / |X_t - Y_t|^delta        (mode singular_eta)
    U_t = xi_t |x - y| (X_t - Y_t) / |X_t - Y_t|       (mode linear_xi)

until the gap drops below the threshold ``c_thr * sqrt(h)``. From then on
Y is set equal to X and U vanishes. The density of the measure under which
X solves the undriven equation is R_T = exp(N_T - [N]_T / 2), with
N and [N] accumulated as left-endpoint sums. For the Euler-type scheme this
change of measure is exact, step by step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels, parallel
from .bounds import decay_integral, zeta_decay_integral
from .errors import CoincidentStart, DegenerateDelta, StepTooCoarse
from .integrator import (CHUNK_FLOATS, NoiseStream, PathSample, _check_domain, _check_start,
                         noise_block, time_grid)
from .scenario import Scenario, ZetaSchedule

MODES = ("singular_eta", "linear_xi")
C_THR = 0.5
# overshoot guard: scale * gap^(1 - power) * h <= H_FRACTION * gap at the threshold
H_FRACTION = 0.5


def coupling_drift(x, y, eta: float, delta: float, pre_tau: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    gap = x - np.asarray(y, dtype=np.float64)
    g = float(np.linalg.norm(gap))
    if not pre_tau or g == 0.0:
        return np.zeros_like(gap)
    return eta * gap / g ** delta


@dataclass(frozen=True)
class EtaSchedule:
    """eta_t = theta_T zeta_t exp(-delta omega t / 2)."""

    theta_T: float
    delta: float
    omega: float
    zeta: ZetaSchedule

    def __call__(self, t):
        return self.theta_T * self.zeta(t) * np.exp(-0.5 * self.delta * self.omega * np.asarray(t, float))

    def closing_integral(self, T: float) -> float:
        """Integral of (delta/2) exp(-delta omega t/2) eta_t over [0, T]; equals |x - y|^delta."""
        return 0.5 * self.delta * self.theta_T * zeta_decay_integral(self.zeta, self.delta * self.omega, T)

    def maximum(self, T: float) -> float:
        ts = [0.0] + [b for b in self.zeta.breakpoints if b < T] + [float(T)]
        return float(max(self(t) for t in ts))


@dataclass(frozen=True)
class XiSchedule:
    """xi_t = exp(-omega t) / integral_0^T exp(-2 omega s) ds."""

    omega: float
    T: float

    @property
    def denominator(self) -> float:
        return decay_integral(2.0 * self.omega, 0.0, self.T)

    def __call__(self, t):
        return np.exp(-self.omega * np.asarray(t, float)) / self.denominator

    def maximum(self, T: Optional[float] = None) -> float:
        T = self.T if T is None else T
        return float(max(self(0.0), self(T)))


def make_eta_schedule(scenario: Scenario, x, y, T: float) -> EtaSchedule:
    d = scenario.delta
    if not 0.0 < d < 1.0:
        raise DegenerateDelta(f"delta = {d} is outside (0, 1)")
    if not T > 0:
        raise ValueError("T must be > 0")
    dist = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    if dist == 0.0:
        raise CoincidentStart("x = y: nothing to couple")
    theta = 2.0 / d * dist ** d / zeta_decay_integral(scenario.zeta, d * scenario.omega, T)
    return EtaSchedule(theta, d, scenario.omega, scenario.zeta)


def make_xi_schedule(omega: float, T: float) -> XiSchedule:
    if not T > 0:
        raise ValueError("T must be > 0")
    return XiSchedule(float(omega), float(T))


@dataclass
class GirsanovLedger:
    n_T: float
    qv_T: float

    @property
    def r_T(self) -> float:
        return math.exp(self.n_T - 0.5 * self.qv_T)


def girsanov_density(trajectory: "CoupledTrajectory") -> float:
    return trajectory.girsanov.r_T


@dataclass
class CoupledTrajectory:
    x_path: PathSample
    y_path: PathSample
    tau: float
    girsanov: GirsanovLedger
    mode: str
    scale: np.ndarray = field(repr=False)
    power: float = 0.0
    u_norm: np.ndarray = field(default=None, repr=False)
    n_running: np.ndarray = field(default=None, repr=False)
    qv_running: np.ndarray = field(default=None, repr=False)

    @property
    def coupled(self) -> bool:
        return math.isfinite(self.tau)

    def trace_header(self):
        return ["t", "gap", "eta", "abs_U", "N", "QV"]

    def trace_rows(self):
        t = self.x_path.times
        gap = np.linalg.norm(self.x_path.states - self.y_path.states, axis=1)
        u = np.append(self.u_norm, 0.0 if self.coupled else self.scale[-1] * gap[-1] ** (1 - self.power))
        for k in range(len(t)):
            yield [t[k], gap[k], self.scale[k], u[k], self.n_running[k], self.qv_running[k]]


@dataclass
class CoupledBatch:
    """Terminal summary of many coupled trajectories, in stream-id order."""

    x_T: np.ndarray
    y_T: np.ndarray
    tau: np.ndarray
    n_T: np.ndarray
    qv_T: np.ndarray

    @property
    def coupled(self) -> np.ndarray:
        return np.isfinite(self.tau)

    @property
    def r_T(self) -> np.ndarray:
        return np.exp(self.n_T - 0.5 * self.qv_T)


def _drift_plan(scenario: Scenario, x, y, T: float, times, mode: str):
    """Per-grid-point drift scale and the power applied to the gap."""
    if mode == "singular_eta":
        eta = make_eta_schedule(scenario, x, y, T)
        return eta(times), eta.delta, eta.maximum(T)
    if mode == "linear_xi":
        xi = make_xi_schedule(scenario.one_sided_lipschitz(), T)
        dist = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
        return xi(times) * dist, 1.0, xi.maximum() * dist
    raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")


def h_max(scale_max: float, power: float, c_thr: float = C_THR) -> float:
    """Largest h with scale_max * eps^(1-power) * h <= H_FRACTION * eps at eps = c_thr sqrt(h)."""
    if scale_max <= 0:
        return math.inf
    return (H_FRACTION * c_thr ** power / scale_max) ** (1.0 / (1.0 - 0.5 * power))


def _prepare(scenario, x, y, T, h, mode, c_thr):
    x = _check_start(scenario, x)
    y = _check_start(scenario, y)
    if not T > 0 or not 0 < h <= T:
        raise ValueError("need T > 0 and 0 < h <= T")
    times, hs = time_grid(T, h)
    eps = c_thr * math.sqrt(h)
    if np.array_equal(x, y):
        return x, y, times, hs, np.zeros_like(times), 1.0, eps
    scale, power, smax = _drift_plan(scenario, x, y, T, times, mode)
    hm = h_max(smax, power, c_thr)
    if h > hm:
        raise StepTooCoarse(f"h = {h:g} exceeds h_max = {hm:.3g} for this schedule")
    return x, y, times, hs, scale, power, eps


def simulate_coupled(scenario: Scenario, x, y, T: float, h: float, noise: NoiseStream,
                     mode: str = "singular_eta", c_thr: float = C_THR,
                     backend: Optional[str] = None) -> CoupledTrajectory:
    x, y, times, hs, scale, power, eps = _prepare(scenario, x, y, T, h, mode, c_thr)
    n, d = hs.shape[0], scenario.dim
    z = noise.normals(n, d)
    be = kernels.get_backend(scenario, backend)
    out = be.coupled(scenario, x, y, z[None], hs, times, scale, power, eps, True)
    _check_domain(scenario, out["x"])
    _check_domain(scenario, out["y"])
    dw = np.sqrt(hs)[:, None] * z
    return CoupledTrajectory(
        x_path=PathSample(times, out["x"], out["kx"], dw),
        y_path=PathSample(times, out["y"], out["ky"], dw),
        tau=float(out["tau"][0]),
        girsanov=GirsanovLedger(float(out["n_T"][0]), float(out["qv_T"][0])),
        mode=mode, scale=scale, power=power,
        u_norm=out["u_norm"], n_running=out["n"], qv_running=out["qv"],
    )


def coupled_batch(scenario: Scenario, x, y, T: float, h: float, seed: int, n_paths: int,
                  mode: str = "singular_eta", c_thr: float = C_THR, stream_offset: int = 0,
                  backend: Optional[str] = None) -> CoupledBatch:
    """Coupled runs for stream ids ``stream_offset .. stream_offset + n_paths - 1``."""
    x, y, times, hs, scale, power, eps = _prepare(scenario, x, y, T, h, mode, c_thr)
    n, d = hs.shape[0], scenario.dim
    be = kernels.get_backend(scenario, backend)

    def work(b):
        z = noise_block(seed, np.arange(stream_offset + b[0], stream_offset + b[1]), n, d)
        return be.coupled(scenario, x, y, z, hs, times, scale, power, eps, False)

    chunk = max(1, CHUNK_FLOATS // (n * d))
    parts = parallel.map_ordered(work, parallel.chunk_bounds(n_paths, chunk))
    cat = {k: np.concatenate([p[k] for p in parts]) for k in ("x_T", "y_T", "tau", "n_T", "qv_T")}
    _check_domain(scenario, cat["x_T"])
    _check_domain(scenario, cat["y_T"])
    return CoupledBatch(**cat)
