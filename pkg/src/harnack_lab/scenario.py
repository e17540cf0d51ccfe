"""Problem instances and runtime checks of their standing hypotheses.

A :class:`Scenario` bundles the operator A, drift B, diffusion sigma and the
declared constants (gamma, omega, q, r, C_sigma, zeta). The constants are
declared by the user and *checked*, never inferred: :func:`validate`
falsifies each hypothesis by sampling inside a ball.

In R^d the Gelfand triple collapses to V = H = R^d, so |.|_V = |.|_H and the
embedding constant ``lambda_embed`` is 1 unless the user says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidExponents, InvalidScenario, SingularSigma
from .operators import MonotoneOperator, _frozen

DRIFT_KINDS = ("linear", "power_dissipative", "affine")


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """The single-valued drift B.

    ``linear``: B x = M x. ``affine``: B x = M x + shift.
    ``power_dissipative``: B x = -gain * x * |x|^(exponent - 2).

    ``growth_constant`` is the declared C_B in |Bx| <= C_B (1 + |x|^(q-1));
    when omitted a kind-specific default is used (see :meth:`default_growth`).
    """

    kind: str
    dim: int
    matrix: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    gain: float = 0.0
    exponent: float = 2.0
    growth_constant: Optional[float] = None

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise InvalidScenario(f"unknown drift kind {self.kind!r}")
        if self.kind in ("linear", "affine"):
            if self.matrix is None or self.matrix.shape != (self.dim, self.dim):
                raise DimensionMismatch("drift matrix must be dim x dim")
        if self.kind == "affine" and (self.shift is None or self.shift.shape != (self.dim,)):
            raise DimensionMismatch("affine drift needs a shift of length dim")
        if self.kind == "power_dissipative":
            if not self.exponent >= 2:
                raise InvalidScenario("power_dissipative exponent must be >= 2")
            if not self.gain > 0:
                raise InvalidScenario("power_dissipative gain must be > 0")

    @classmethod
    def linear(cls, matrix, growth_constant=None) -> "DriftSpec":
        m = _frozen(np.atleast_2d(matrix))
        return cls("linear", m.shape[0], matrix=m, growth_constant=growth_constant)

    @classmethod
    def affine(cls, matrix, shift, growth_constant=None) -> "DriftSpec":
        m = _frozen(np.atleast_2d(matrix))
        return cls("affine", m.shape[0], matrix=m, shift=_frozen(np.atleast_1d(shift)),
                   growth_constant=growth_constant)

    @classmethod
    def power_dissipative(cls, dim: int, exponent: float, gain: float, growth_constant=None) -> "DriftSpec":
        return cls("power_dissipative", dim, gain=float(gain), exponent=float(exponent),
                   growth_constant=growth_constant)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            return x @ self.matrix.T
        if self.kind == "affine":
            return x @ self.matrix.T + self.shift
        nrm = np.linalg.norm(x, axis=-1, keepdims=True)
        return -self.gain * x * nrm ** (self.exponent - 2.0)

    def default_growth(self) -> float:
        if self.growth_constant is not None:
            return float(self.growth_constant)
        if self.kind == "linear":
            return float(np.linalg.norm(self.matrix, 2))
        if self.kind == "affine":
            return float(max(np.linalg.norm(self.matrix, 2), np.linalg.norm(self.shift)))
        return self.gain


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """Constant, additive diffusion coefficient sigma (a d x d matrix).

    A singular sigma is representable so that validation can report it;
    anything that needs sigma^{-1} raises :class:`SingularSigma`.
    """

    matrix: np.ndarray
    sigma_inverse: Optional[np.ndarray] = field(default=None, init=False)
    hs_norm: float = field(default=0.0, init=False)
    condition: float = field(default=math.inf, init=False)

    def __post_init__(self):
        m = _frozen(np.atleast_2d(self.matrix))
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch("sigma must be square")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "hs_norm", float(np.linalg.norm(m, "fro")))
        cond = float(np.linalg.cond(m)) if np.any(m) else math.inf
        object.__setattr__(self, "condition", cond)
        if np.isfinite(cond) and cond < 1e12:
            object.__setattr__(self, "sigma_inverse", _frozen(np.linalg.inv(m)))

    @classmethod
    def scalar(cls, s: float, dim: int = 1) -> "DiffusionSpec":
        return cls(float(s) * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim)))

    def inverse(self) -> np.ndarray:
        if self.sigma_inverse is None:
            raise SingularSigma("sigma is not invertible")
        return self.sigma_inverse


@dataclass(frozen=True, eq=False)
class ZetaSchedule:
    """Strictly positive weight t -> zeta_t in the norm-control condition.

    ``piecewise_constant`` takes ``values[i]`` on ``[breakpoints[i-1],
    breakpoints[i])`` with ``breakpoints`` the interior jump times.
    """

    kind: str
    values: tuple
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise_constant"):
            raise InvalidScenario(f"unknown zeta kind {self.kind!r}")
        if any(not v > 0 for v in self.values):
            raise InvalidScenario("zeta must be strictly positive")
        if self.kind == "constant" and len(self.values) != 1:
            raise InvalidScenario("constant zeta takes one value")
        if self.kind == "piecewise_constant":
            if len(self.breakpoints) != len(self.values) - 1:
                raise InvalidScenario("need len(values) - 1 breakpoints")
            if any(b <= 0 for b in self.breakpoints) or list(self.breakpoints) != sorted(set(self.breakpoints)):
                raise InvalidScenario("breakpoints must be positive and strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "ZetaSchedule":
        return cls("constant", (float(value),))

    @classmethod
    def piecewise_constant(cls, breakpoints, values) -> "ZetaSchedule":
        return cls("piecewise_constant", tuple(float(v) for v in values), tuple(float(b) for b in breakpoints))

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "constant":
            return np.full(t.shape, self.values[0]) if t.ndim else self.values[0]
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right")
        out = np.asarray(self.values)[idx]
        return out if t.ndim else float(out)

    def pieces(self, T: float):
        """``(a, b, value)`` triples covering ``[0, T]``."""
        edges = [0.0] + [b for b in self.breakpoints if b < T] + [float(T)]
        return [(edges[i], edges[i + 1], float(self(edges[i]))) for i in range(len(edges) - 1)]


def delta(q: float, r: float) -> float:
    """Exponent 1 - q/(4 + r) of the singular coupling drift.

    Lies in [0, 1) under the preconditions; 0 exactly when q = 4 + r, which
    callers must treat as degenerate (the coupling needs delta in (0, 1)).
    """
    if not q > 1:
        raise InvalidExponents(f"q must exceed 1, got {q}")
    if not (r >= 0 and r >= q - 4):
        raise InvalidExponents(f"r must satisfy r >= max(0, q - 4), got r={r}, q={q}")
    return 1.0 - q / (4.0 + r)


@dataclass(frozen=True, eq=False)
class Scenario:
    operator: MonotoneOperator
    drift: DriftSpec
    diffusion: DiffusionSpec
    gamma: float
    omega: float
    q: float
    r: float = 0.0
    C_sigma: float = 1.0
    lambda_embed: float = 1.0
    zeta: ZetaSchedule = field(default_factory=lambda: ZetaSchedule.constant(1.0))
    name: str = "scenario"

    def __post_init__(self):
        d = self.operator.dim
        if self.drift.dim != d or self.diffusion.dim != d:
            raise DimensionMismatch(
                f"operator dim {d}, drift dim {self.drift.dim}, diffusion dim {self.diffusion.dim}")
        if not self.q > 1:
            raise InvalidScenario(f"q must exceed 1, got {self.q}")
        if not self.gamma > 0:
            raise InvalidScenario(f"gamma must be > 0, got {self.gamma}")
        if not (self.r >= 0 and self.r >= self.q - 4):
            raise InvalidScenario(f"r must satisfy r >= max(0, q - 4), got {self.r}")
        if not self.lambda_embed > 0:
            raise InvalidScenario("lambda_embed must be > 0")
        if not self.C_sigma > 0:
            raise InvalidScenario("C_sigma must be > 0")

    @property
    def dim(self) -> int:
        return self.operator.dim

    @property
    def delta(self) -> float:
        return delta(self.q, self.r)

    @property
    def harnack_power(self) -> float:
        """Exponent 2(4 + r - q)/(2 + r) applied to |x - y| in the bounds."""
        return 2.0 * (4.0 + self.r - self.q) / (2.0 + self.r)

    def one_sided_lipschitz(self) -> float:
        """Constant w with <x - y, Bx - By> <= w |x - y|^2 implied by the declared constants."""
        return self.omega - self.gamma if self.q == 2 else self.omega

    def replace(self, **changes) -> "Scenario":
        kw = {k: getattr(self, k) for k in (
            "operator", "drift", "diffusion", "gamma", "omega", "q", "r",
            "C_sigma", "lambda_embed", "zeta", "name")}
        kw.update(changes)
        return Scenario(**kw)


def reflected_ou(dim: int = 1, rate: float = 1.0, sigma: float = 1.0) -> Scenario:
    """Ornstein-Uhlenbeck process reflected at the boundary of {x_1 >= 0}."""
    from .operators import ConvexSet

    normal = np.zeros(dim)
    normal[0] = 1.0
    return Scenario(
        operator=MonotoneOperator.normal_cone(ConvexSet.halfspace(normal, 0.0)),
        drift=DriftSpec.linear(-rate * np.eye(dim)),
        diffusion=DiffusionSpec.scalar(sigma, dim),
        gamma=rate, omega=0.0, q=2.0, r=0.0,
        C_sigma=abs(sigma) * math.sqrt(dim),
        zeta=ZetaSchedule.constant(min(1.0, abs(sigma))),
        name="reflected_ou",
    )


def scalar_ou(rate: float) -> Scenario:
    """Unconstrained dX = rate*X dt + dW (A = 0), declared with gamma = 1, omega = rate + 1."""
    return Scenario(
        operator=MonotoneOperator.zero(1),
        drift=DriftSpec.linear([[rate]]),
        diffusion=DiffusionSpec.scalar(1.0),
        gamma=1.0, omega=rate + 1.0, q=2.0, r=0.0, C_sigma=1.0,
        name=f"scalar_ou({rate:g})",
    )


@dataclass
class HypothesisCheck:
    passed: bool
    slack: float
    detail: str = ""


@dataclass
class ValidationReport:
    per_hypothesis: Dict[str, HypothesisCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.per_hypothesis.values())

    def failures(self):
        return [k for k, c in self.per_hypothesis.items() if not c.passed]


def _ball_pairs(rng, n, dim, radius):
    def uniform_ball(m):
        v = rng.standard_normal((m, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * radius * rng.uniform(size=(m, 1)) ** (1.0 / dim)

    x = uniform_ball(n)
    y = uniform_ball(n)
    # half the pairs are close together, to probe small |x - y|
    half = n // 2
    u = rng.standard_normal((half, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    y[:half] = x[:half] + u * radius * 10.0 ** rng.uniform(-4, 0, size=(half, 1))
    return x, y


def validate(scenario: Scenario, n_samples: int = 10_000, radius: float = 10.0,
             seed: int = 0, tol: float = 1e-10) -> ValidationReport:
    """Falsification checks of (H1)-(H5), (H6') and the norm-control condition.

    Slack is the worst value of ``rhs - lhs`` over the samples (so negative
    slack means a sampled counterexample). Failures are reported, not raised.
    """
    if n_samples < 1 or not radius > 0:
        raise ValueError("need n_samples >= 1 and radius > 0")
    rng = np.random.default_rng(seed)
    s = scenario
    B = s.drift
    out: Dict[str, HypothesisCheck] = {}

    op = s.operator
    # Checked up to translation: the estimates only involve differences of
    # states, so any interior point can play the role of the origin.
    if op.kind == "normal_cone":
        from .operators import contains_zero_interior, has_interior
        st = op.set
        # signed distance of 0 to the boundary, negative when outside
        if st.kind == "halfspace":
            margin = -st.offset / np.linalg.norm(st.normal)
        elif st.kind == "box":
            margin = float(np.min(np.minimum(-st.lower, st.upper)))
        else:
            margin = st.radius - float(np.linalg.norm(st.center))
        at_zero = "0 is interior" if contains_zero_interior(st) else "0 is not interior, holds after a shift"
        out["H1"] = HypothesisCheck(has_interior(st), float(margin) + 0.0, f"D(A) has interior points; {at_zero}")
    else:
        out["H1"] = HypothesisCheck(op.domain_contains_zero_interior(), math.inf, "0 in interior of D(A)")

    x, y = _ball_pairs(rng, n_samples, s.dim, radius)
    z = rng.standard_normal((n_samples, s.dim))
    # hemicontinuity: a tiny perturbation of y moves <x, B y> by a tiny amount
    g0 = np.einsum("ij,ij->i", x, B(y))
    g1 = np.einsum("ij,ij->i", x, B(y + 1e-8 * z))
    slack2 = 1e-5 * (1.0 + np.abs(g0)) - np.abs(g1 - g0)
    out["H2"] = HypothesisCheck(bool(np.all(slack2 >= 0)), float(slack2.min()),
                                "eps -> <x, B(y + eps z)> continuous at 0")

    d = x - y
    dn = np.linalg.norm(d, axis=1)
    dB = B(x) - B(y)
    inner = np.einsum("ij,ij->i", d, dB)
    scale = 1.0 + np.abs(inner) + dn ** 2
    slack3 = -inner
    out["H3"] = HypothesisCheck(bool(np.all(slack3 >= -tol * scale)), float(slack3.min()),
                                "<x - y, Bx - By> <= 0")

    rhs4 = -s.gamma * dn ** s.q + s.omega * dn ** 2
    slack4 = rhs4 - inner
    scale4 = scale + s.gamma * dn ** s.q + abs(s.omega) * dn ** 2
    out["H4"] = HypothesisCheck(bool(np.all(slack4 >= -tol * scale4)), float(slack4.min()),
                                "<x - y, Bx - By> <= -gamma|x - y|^q + omega|x - y|^2")

    cb = B.default_growth()
    xn = np.linalg.norm(x, axis=1)
    slack5 = cb * (1.0 + xn ** (s.q - 1.0)) - np.linalg.norm(B(x), axis=1)
    out["H5"] = HypothesisCheck(bool(np.all(slack5 >= -tol * (1.0 + cb * xn ** (s.q - 1.0)))),
                                float(slack5.min()), f"|Bx| <= {cb:g}(1 + |x|^(q-1))")

    D = s.diffusion
    if D.sigma_inverse is None:
        out["H6'"] = HypothesisCheck(False, -math.inf, "sigma is singular")
    else:
        resid = float(np.max(np.abs(D.matrix @ D.sigma_inverse - np.eye(s.dim))))
        ok = resid <= 1e-10 and D.hs_norm <= s.C_sigma * (1 + 1e-12)
        out["H6'"] = HypothesisCheck(ok, s.C_sigma - D.hs_norm,
                                     f"cond={D.condition:.3g}, |sigma sigma^-1 - I|={resid:.2g}")

    if D.sigma_inverse is None:
        out["norm_control"] = HypothesisCheck(False, -math.inf, "sigma is singular")
    else:
        zr = zeta_admissible(s, n_samples=min(n_samples, 4096), seed=seed)
        out["norm_control"] = HypothesisCheck(zr.passed, 1.0 - zr.max_ratio, f"max ratio {zr.max_ratio:.6g}")
    return ValidationReport(out)


@dataclass
class ZetaReport:
    max_ratio: float
    passed: bool


def zeta_admissible(scenario: Scenario, n_samples: int = 4096, seed: int = 0,
                    tol: float = 1e-9, radius: float = 10.0, T: Optional[float] = None) -> ZetaReport:
    """Sampled check of zeta_t^2 |x|_sigma^(2+r) |x|^(q-2-r) <= |x|^q.

    Here |x|_sigma = |sigma^{-1} x| and |.|_V = |.|_H. The right singular
    directions of sigma^{-1} are always included, since they carry the
    extreme ratio. The origin is skipped (0/0).
    """
    s = scenario
    sinv = s.diffusion.inverse()
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n_samples, s.dim))
    pts *= radius * rng.uniform(size=(n_samples, 1)) / np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1e-300)
    _, _, vt = np.linalg.svd(sinv)
    pts = np.vstack([pts, vt, -vt, 0.0 * vt[:1]])
    nrm = np.linalg.norm(pts, axis=1)
    keep = nrm > 0
    pts, nrm = pts[keep], nrm[keep]
    snorm = np.linalg.norm(pts @ sinv.T, axis=1)
    # every jump value of zeta plus a grid; zeta is piecewise constant
    horizon = T if T is not None else (max(s.zeta.breakpoints) + 1.0 if s.zeta.breakpoints else 1.0)
    ts = np.unique(np.concatenate([np.linspace(0.0, horizon, 33), np.asarray(s.zeta.breakpoints)]))
    zmax = float(np.max(s.zeta(ts)))
    ratio = zmax ** 2 * snorm ** (2 + s.r) * nrm ** (s.q - 2 - s.r) / nrm ** s.q
    m = float(ratio.max())
    return ZetaReport(m, m <= 1.0 + tol)
