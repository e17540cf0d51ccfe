"""Invariant-measure sampling by time averages along one long trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import CenterOutsideDomain, InvalidWindow
from .integrator import CHUNK_FLOATS, NoiseStream, _check_domain, _check_start
from .montecarlo import Estimate
from .scenario import Scenario

TOP_SHARE = 0.01
TOP_SHARE_LIMIT = 0.5


@dataclass
class EmpiricalMeasure:
    samples: np.ndarray
    scenario: Scenario
    burn_in: float
    stride: float
    horizon: float
    h: float

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def total_time(self) -> float:
        return self.horizon


def _steps(t: float, h: float, what: str) -> int:
    n = t / h
    k = int(round(n))
    if abs(n - k) > 1e-9 * max(1.0, n):
        raise InvalidWindow(f"{what} = {t:g} is not a multiple of h = {h:g}")
    return k


def sample_invariant(scenario: Scenario, x0, burn_in: float = 10.0, horizon: float = 1e4,
                     stride: float = 0.5, h: float = 1e-3, seed: int = 0, stream_id: int = 0,
                     backend: Optional[str] = None) -> EmpiricalMeasure:
    """States at times burn_in, burn_in + stride, ... <= horizon of a single path.

    The noise stream is read in consecutive chunks, which yields exactly the
    numbers a single read would.
    """
    if not (burn_in > 0 and horizon > 0 and stride > 0 and h > 0):
        raise InvalidWindow("burn_in, horizon, stride and h must be > 0")
    if horizon < burn_in:
        raise InvalidWindow(f"horizon {horizon:g} is shorter than burn_in {burn_in:g}")
    x = _check_start(scenario, x0).copy()
    n_total = _steps(horizon, h, "horizon")
    first = _steps(burn_in, h, "burn_in")
    every = _steps(stride, h, "stride")
    # step k (0-based) lands on time (k + 1) h
    rec = np.arange(first, n_total + 1, every) - 1
    if rec.size < 2:
        raise InvalidWindow("window retains fewer than 2 samples")
    d = scenario.dim
    gen = NoiseStream(seed, stream_id).generator()
    be = kernels.get_backend(scenario, backend)
    chunk = max(1, CHUNK_FLOATS // d)
    out = []
    for start in range(0, n_total, chunk):
        stop = min(start + chunk, n_total)
        z = gen.standard_normal((stop - start, d))
        local = rec[(rec >= start) & (rec < stop)] - start
        x, part = be.segment(scenario, x, z, h, local)
        out.append(part)
    samples = np.concatenate(out)
    _check_domain(scenario, samples)
    return EmpiricalMeasure(samples, scenario, burn_in, stride, horizon, h)


def moment(measure: EmpiricalMeasure, power: float) -> Estimate:
    """E|x|^power; stderr treats the thinned samples as independent."""
    if not power >= 1:
        raise ValueError("power must be >= 1")
    return Estimate.from_samples(np.linalg.norm(measure.samples, axis=1) ** power)


@dataclass
class ExpMomentEstimate:
    estimate: Estimate
    top_share: float
    unstable: bool


def exp_moment(measure: EmpiricalMeasure, theta: float, power: float = 2.0) -> ExpMomentEstimate:
    """E exp(theta |x|^power), flagged unstable when the top 1% of samples carry over half the mean."""
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if not power >= 2:
        raise ValueError("power must be >= 2")
    v = np.exp(theta * np.linalg.norm(measure.samples, axis=1) ** power)
    k = max(1, int(math.ceil(TOP_SHARE * v.size)))
    total = float(np.sum(v))
    share = float(np.sum(np.sort(v)[-k:]) / total) if math.isfinite(total) else 1.0
    return ExpMomentEstimate(Estimate.from_samples(v), share, share > TOP_SHARE_LIMIT)


@dataclass
class CoverageReport:
    centers: np.ndarray
    hit_fraction: np.ndarray

    @property
    def all_hit(self) -> bool:
        return bool(np.all(self.hit_fraction > 0))


def support_coverage(measure: EmpiricalMeasure, centers, radius: float) -> CoverageReport:
    if not radius > 0:
        raise ValueError("radius must be > 0")
    c = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if c.shape[1] != measure.samples.shape[1]:
        c = c.reshape(-1, measure.samples.shape[1])
    inside = measure.scenario.operator.in_domain_closure(c)
    if not np.all(inside):
        raise CenterOutsideDomain(f"centers {c[~np.asarray(inside)].tolist()} are outside closure(D(A))")
    dist = np.linalg.norm(measure.samples[None, :, :] - c[:, None, :], axis=2)
    return CoverageReport(c, (dist <= radius).mean(axis=1))
