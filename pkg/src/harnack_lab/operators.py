"""Maximal monotone operators accessed through their resolvents.

An operator is never evaluated pointwise. Everything downstream (the
integrator, the coupling) touches ``A`` only through

    J_lam(x) = (I + lam*A)^{-1} x          (resolvent)
    A_lam(x) = (x - J_lam(x)) / lam        (Yosida approximation)

so set-valued operators such as normal cones never need an explicit
selection. All functions accept a single vector of shape ``(d,)`` or a batch
of shape ``(n, d)`` and act row-wise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, NonPositiveLambda

TOL_MONOTONE = 1e-10
TOL_DOMAIN = 1e-9

SET_KINDS = ("halfspace", "box", "ball")
OPERATOR_KINDS = ("zero", "normal_cone", "linear_psd", "scaled_subgradient_abs", "callback")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConvexSet:
    """Closed convex set in R^d.

    ``halfspace`` is ``{x : normal.x >= offset}``, ``box`` is
    ``{lower <= x <= upper}`` and ``ball`` is ``{|x - center| <= radius}``.
    Use the named constructors rather than the raw fields.
    """

    kind: str
    vec_a: np.ndarray
    vec_b: Optional[np.ndarray] = None
    scalar: float = 0.0

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind == "box" and np.any(self.vec_a > self.vec_b):
            raise ValueError("box requires lower <= upper")
        if self.kind == "ball" and not self.scalar > 0:
            raise ValueError("ball requires radius > 0")
        if self.kind == "halfspace" and not np.any(self.vec_a != 0):
            raise ValueError("halfspace normal must be nonzero")

    @classmethod
    def halfspace(cls, normal, offset: float) -> "ConvexSet":
        return cls("halfspace", _frozen(normal), None, float(offset))

    @classmethod
    def box(cls, lower, upper) -> "ConvexSet":
        return cls("box", _frozen(lower), _frozen(upper))

    @classmethod
    def ball(cls, center, radius: float) -> "ConvexSet":
        return cls("ball", _frozen(center), None, float(radius))

    @property
    def dim(self) -> int:
        return self.vec_a.shape[0]

    @property
    def normal(self):
        return self.vec_a

    @property
    def offset(self):
        return self.scalar

    @property
    def lower(self):
        return self.vec_a

    @property
    def upper(self):
        return self.vec_b

    @property
    def center(self):
        return self.vec_a

    @property
    def radius(self):
        return self.scalar

    def project(self, x) -> np.ndarray:
        """Euclidean projection, row-wise."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "box":
            return np.minimum(np.maximum(x, self.lower), self.upper)
        if self.kind == "halfspace":
            n = self.normal
            gap = self.offset - x @ n
            step = np.maximum(gap, 0.0) / (n @ n)
            return x + np.multiply.outer(step, n)
        dx = x - self.center
        dist = np.linalg.norm(dx, axis=-1, keepdims=True)
        scale = np.where(dist > self.radius, self.radius / np.maximum(dist, 1e-300), 1.0)
        return self.center + dx * scale

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol: float = TOL_DOMAIN) -> np.ndarray:
        return self.distance(x) <= tol

    def sample(self, rng: np.random.Generator, n: int, spread: float = 3.0) -> np.ndarray:
        """Points of the set (projections of a Gaussian cloud)."""
        if self.kind == "ball":
            base = self.center
        elif self.kind == "box":
            base = 0.5 * (self.lower + self.upper)
        else:
            base = self.normal * self.offset / (self.normal @ self.normal)
        cloud = base + spread * rng.standard_normal((n, self.dim))
        return self.project(cloud)


def contains_zero_interior(s: ConvexSet) -> bool:
    """True iff the origin is an interior point of ``s`` (strict inequalities)."""
    if s.kind == "halfspace":
        return bool(s.offset < 0.0)
    if s.kind == "box":
        return bool(np.all(s.lower < 0.0) and np.all(s.upper > 0.0))
    return bool(np.linalg.norm(s.center) < s.radius)


def has_interior(s: ConvexSet) -> bool:
    if s.kind == "box":
        return bool(np.all(s.lower < s.upper))
    return True


ResolventCallback = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class MonotoneOperator:
    """A maximal monotone operator on R^d, identified by its resolvent.

    Built-in kinds:

    * ``zero`` -- A = 0, D(A) = R^d.
    * ``normal_cone`` -- the normal cone of a :class:`ConvexSet`; the
      resolvent is the projection and D(A) is the set itself.
    * ``linear_psd`` -- A x = M x with M positive semidefinite.
    * ``scaled_subgradient_abs`` -- A = weight * subdifferential of |.|_1;
      the resolvent is the componentwise soft threshold.

    ``callback`` is the extension point: ``resolvent(lam, x)`` must return
    the resolvent row-wise for batches of shape ``(n, d)``, and
    ``domain_distance(x)`` (optional) the distance to closure(D(A)).
    Callback operators always run on the numpy backend.
    """

    kind: str
    dim: int
    set: Optional[ConvexSet] = None
    matrix: Optional[np.ndarray] = None
    weight: float = 0.0
    callback: Optional[ResolventCallback] = field(default=None, compare=False)
    domain_distance: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == "normal_cone" and (self.set is None or self.set.dim != self.dim):
            raise DimensionMismatch("normal cone set must match operator dim")
        if self.kind == "linear_psd":
            if self.matrix is None or self.matrix.shape != (self.dim, self.dim):
                raise DimensionMismatch("linear_psd needs a dim x dim matrix")
        if self.kind == "scaled_subgradient_abs" and self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.kind == "callback" and self.callback is None:
            raise ValueError("callback operator needs a resolvent callable")

    @classmethod
    def zero(cls, dim: int) -> "MonotoneOperator":
        return cls("zero", dim)

    @classmethod
    def normal_cone(cls, s: ConvexSet) -> "MonotoneOperator":
        return cls("normal_cone", s.dim, set=s)

    @classmethod
    def linear_psd(cls, matrix) -> "MonotoneOperator":
        m = _frozen(np.atleast_2d(matrix))
        return cls("linear_psd", m.shape[0], matrix=m)

    @classmethod
    def scaled_subgradient_abs(cls, dim: int, weight: float) -> "MonotoneOperator":
        return cls("scaled_subgradient_abs", dim, weight=float(weight))

    @classmethod
    def from_callback(cls, dim: int, resolvent: ResolventCallback, domain_distance=None) -> "MonotoneOperator":
        return cls("callback", dim, callback=resolvent, domain_distance=domain_distance)

    def is_psd(self, tol: float = 1e-12) -> bool:
        if self.kind != "linear_psd":
            return True
        sym = 0.5 * (self.matrix + self.matrix.T)
        return bool(np.linalg.eigvalsh(sym).min() >= -tol)

    def domain_contains_zero_interior(self) -> bool:
        if self.kind == "normal_cone":
            return contains_zero_interior(self.set)
        if self.kind == "callback" and self.domain_distance is not None:
            # a small sphere around 0 must sit inside the domain
            probe = 1e-6 * np.vstack([np.eye(self.dim), -np.eye(self.dim)])
            return bool(np.all(self.domain_distance(probe) == 0.0))
        return True

    def domain_distance_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "normal_cone":
            return self.set.distance(x)
        if self.kind == "callback" and self.domain_distance is not None:
            return np.asarray(self.domain_distance(x), dtype=np.float64)
        return np.zeros(x.shape[:-1])

    def in_domain_closure(self, x, tol: float = TOL_DOMAIN) -> np.ndarray:
        return self.domain_distance_of(x) <= tol


@dataclass(frozen=True, eq=False)
class GraphPair:
    point: np.ndarray
    value: np.ndarray


def _check_args(op: MonotoneOperator, lam: float, x) -> np.ndarray:
    if not lam > 0:
        raise NonPositiveLambda(f"resolvent parameter must be > 0, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != op.dim:
        raise DimensionMismatch(f"expected trailing dimension {op.dim}, got shape {x.shape}")
    return x


def resolvent(op: MonotoneOperator, lam: float, x) -> np.ndarray:
    """Return ``z`` with ``x - z in lam * A(z)``."""
    x = _check_args(op, lam, x)
    kind = op.kind
    if kind == "zero":
        return x.copy()
    if kind == "normal_cone":
        return op.set.project(x)
    if kind == "linear_psd":
        mat = np.eye(op.dim) + lam * op.matrix
        return np.linalg.solve(mat, x.T).T
    if kind == "scaled_subgradient_abs":
        return np.sign(x) * np.maximum(np.abs(x) - lam * op.weight, 0.0)
    return np.asarray(op.callback(lam, x), dtype=np.float64)


def yosida(op: MonotoneOperator, lam: float, x) -> np.ndarray:
    x = _check_args(op, lam, x)
    return (x - resolvent(op, lam, x)) / lam


def graph_pair(op: MonotoneOperator, lam: float, x) -> GraphPair:
    """The pair (J_lam x, A_lam x), which always lies on Gr(A)."""
    z = resolvent(op, lam, x)
    return GraphPair(z, (np.asarray(x, dtype=np.float64) - z) / lam)


def is_graph_pair(op: MonotoneOperator, pair: GraphPair, n_samples: int = 256,
                  seed: int = 0, tol: float = 1e-9) -> bool:
    """Spot check that ``pair.value`` is a selection of A at ``pair.point``.

    Uses the monotonicity characterization: (x, y) is on the graph of a
    maximal monotone A iff <x - u, y - v> >= 0 for every graph pair (u, v).
    For normal cones this is the variational inequality
    ``value.(z - point) <= 0`` over sampled ``z`` in the set.
    """
    x = np.asarray(pair.point, dtype=np.float64)
    y = np.asarray(pair.value, dtype=np.float64)
    if not op.in_domain_closure(x):
        return False
    rng = np.random.default_rng(seed)
    if op.kind == "normal_cone":
        z = op.set.sample(rng, n_samples)
        return bool(np.max((z - x) @ y) <= tol * (1.0 + np.linalg.norm(y)))
    if op.kind == "zero":
        return bool(np.linalg.norm(y) <= tol)
    if op.kind == "linear_psd":
        return bool(np.linalg.norm(op.matrix @ x - y) <= tol * (1.0 + np.linalg.norm(y)))
    pts = x + rng.standard_normal((n_samples, op.dim)) * np.exp(rng.uniform(-3, 2, (n_samples, 1)))
    lams = np.exp(rng.uniform(-4, 1))
    gp = graph_pair(op, lams, pts)
    prods = np.einsum("ij,ij->i", x - gp.point, y - gp.value)
    return bool(prods.min() >= -tol)


@dataclass(frozen=True, eq=False)
class MonotoneReport:
    min_inner_product: float
    pass_: bool
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.pass_


def check_monotone(op: MonotoneOperator, n_samples: int = 1000, seed: int = 0,
                   tol: float = TOL_MONOTONE) -> MonotoneReport:
    """Randomized monotonicity check on graph pairs produced by the resolvent.

    Points are drawn at random scales, each with its own resolvent
    parameter; pairs ``(J_lam u, A_lam u)`` are compared against each other.
    For ``linear_psd`` the graph is ``{(z, Mz)}`` directly, so an indefinite
    matrix is caught even where ``I + lam*M`` is singular.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = op.dim
    scales = np.exp(rng.uniform(-3.0, 2.0, size=(2 * n_samples, 1)))
    u = rng.standard_normal((2 * n_samples, d)) * scales
    lams = np.exp(rng.uniform(-4.0, 1.0, size=2 * n_samples))
    if op.kind == "linear_psd":
        pts = u
        vals = u @ op.matrix.T
    else:
        pts = np.empty_like(u)
        vals = np.empty_like(u)
        for i in range(2 * n_samples):
            gp = graph_pair(op, lams[i], u[i])
            pts[i], vals[i] = gp.point, gp.value
    dp = pts[:n_samples] - pts[n_samples:]
    dv = vals[:n_samples] - vals[n_samples:]
    m = float(np.einsum("ij,ij->i", dp, dv).min())
    return MonotoneReport(m, m >= -tol, n_samples)
