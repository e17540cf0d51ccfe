"""Small hand-checkable values for each public operation."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from harnack_lab import bounds as B
from harnack_lab import integrator as I
from harnack_lab import scenario as S
from harnack_lab.operators import (ConvexSet, MonotoneOperator, check_monotone, contains_zero_interior,
                                   resolvent, yosida)

HALF_LINE = MonotoneOperator.normal_cone(ConvexSet.halfspace([1.0], 0.0))


def test_resolvent_values():
    assert resolvent(HALF_LINE, 0.5, [-1.0])[0] == 0.0
    np.testing.assert_array_equal(resolvent(MonotoneOperator.zero(2), 7.0, [3.0, -2.0]), [3.0, -2.0])
    # bisection oracle on z + lam sign(z) = x
    z = brentq(lambda u: u + 0.3 * np.sign(u) - 1.0, 1e-9, 1.0, xtol=1e-15)
    assert resolvent(MonotoneOperator.scaled_subgradient_abs(1, 1.0), 0.3, [1.0])[0] == pytest.approx(z)
    assert z == pytest.approx(0.7)


def test_yosida_values():
    assert yosida(HALF_LINE, 0.5, [-1.0])[0] == -2.0
    assert yosida(MonotoneOperator.zero(1), 1.0, [5.0])[0] == 0.0
    assert yosida(MonotoneOperator.linear_psd([[1.0]]), 1.0, [2.0])[0] == pytest.approx(1.0)


def test_monotone_values():
    rep = check_monotone(MonotoneOperator.zero(1), n_samples=100)
    assert rep.min_inner_product == 0.0 and rep.passed
    assert check_monotone(MonotoneOperator.normal_cone(ConvexSet.box([0.0], [1.0]))).passed
    # exhaustive d = 1 grid for the box normal cone
    g = np.linspace(-2, 3, 201)
    pts = ConvexSet.box([0.0], [1.0]).project(g[:, None])[:, 0]
    vals = g - pts
    assert np.min(np.subtract.outer(pts, pts) * np.subtract.outer(vals, vals)) >= 0
    # one negative eigenvalue: along that eigenvector <x - y, M(x - y)> < 0
    m = np.array([[1.0, 0.0], [0.0, -0.5]])
    e = np.array([0.0, 1.0])
    assert e @ m @ e == -0.5
    assert not check_monotone(MonotoneOperator.linear_psd(m)).passed


def test_interior_values():
    assert contains_zero_interior(ConvexSet.ball([0.0, 0.0], 1.0))
    assert not contains_zero_interior(ConvexSet.box([0.0], [1.0]))
    assert contains_zero_interior(ConvexSet.halfspace([1.0, 0.0], -0.1))


def test_validation_values(rou):
    assert S.validate(rou).passed
    rep = S.validate(rou.replace(gamma=2.0))
    assert not rep.per_hypothesis["H4"].passed and rep.per_hypothesis["H4"].slack < 0
    assert S.delta(2, 2) == pytest.approx(2 / 3)
    assert S.delta(4, 0) == 0.0


def test_zeta_values():
    for q, r in ((2, 0), (3, 0), (3, 1)):
        rep = S.zeta_admissible(S.reflected_ou(2).replace(q=q, r=r))
        assert rep.passed and rep.max_ratio == pytest.approx(1.0)
    sc = S.reflected_ou(2, sigma=2.0).replace(zeta=S.ZetaSchedule.constant(2.83))
    assert not S.zeta_admissible(sc).passed
    assert S.zeta_admissible(S.reflected_ou(2, sigma=2.0).replace(zeta=S.ZetaSchedule.constant(2.0))).passed


def test_step_values(rou):
    x1, dk = I.step(rou, [0.1], 0.01, [-0.5])
    assert x1[0] == 0.0 and dk[0] == pytest.approx(-0.401)
    lin = S.Scenario(MonotoneOperator.linear_psd([[1.0]]), S.DriftSpec.linear([[0.0]]), S.DiffusionSpec.scalar(1.0),
                     gamma=1.0, omega=1.0, q=2.0)
    x1, dk = I.step(lin, [1.0], 1.0, [0.0])
    assert x1[0] == pytest.approx(0.5) and dk[0] == pytest.approx(0.5)
    zero = S.Scenario(MonotoneOperator.zero(2), S.DriftSpec.linear(np.zeros((2, 2))), S.DiffusionSpec.scalar(1.0, 2),
                      gamma=1.0, omega=1.0, q=2.0, C_sigma=2.0)
    x1, dk = I.step(zero, [1.0, 2.0], 0.1, [0.3, -0.3])
    np.testing.assert_allclose(x1, [1.3, 1.7])
    assert np.all(dk == 0)


def test_path_values(rou):
    p = I.simulate_path(rou, [0.3], 0.0, 0.1, I.NoiseStream(0))
    assert p.states.shape == (1, 1) and p.k_total_variation == 0.0
    a = I.simulate_path(rou, [1.0], 1.0, 1e-3, I.NoiseStream(9)).terminal
    b = I.simulate_path(rou, [1.0], 1.0, 1e-3, I.NoiseStream(9)).terminal
    assert a.tobytes() == b.tobytes()
    sigma = np.array([[1.0, 0.5], [0.0, 2.0]])
    free = S.Scenario(MonotoneOperator.zero(2), S.DriftSpec.linear(np.zeros((2, 2))), S.DiffusionSpec(sigma),
                      gamma=1.0, omega=1.0, q=2.0, C_sigma=3.0)
    p = I.simulate_path(free, [0.1, 0.2], 1.0, 0.01, I.NoiseStream(4))
    z = I.NoiseStream(4).normals(100, 2)
    np.testing.assert_allclose(p.terminal, [0.1, 0.2] + (0.1 * z).sum(axis=0) @ sigma.T, atol=1e-12)
    same = I.discrete_monotonicity_check(p, p)
    assert same.passed and np.all(same.pairings == 0)


def test_bound_values():
    sc = S.reflected_ou(1)
    assert B.theta_quadrature(sc, 1.0) == pytest.approx(32.0)
    assert B.theta_exact(sc.replace(gamma=2.0), 1.0) == pytest.approx(16.0)
    # large-T plateau for omega > 0 and decay for omega < 0
    w = 1.0
    plateau = 4 / sc.delta * w ** 2
    assert B.theta_closed_form(sc.replace(omega=w), 200.0) == pytest.approx(plateau, rel=1e-12)
    assert B.theta_closed_form(sc.replace(omega=-1.0), 50.0) < 1e-9
    hb = B.HarnackBound(32.0, 2.0, 0.0, 2.0)
    assert hb.log_prefactor(1.0) == 32.0
    pref = [B.HarnackBound(32.0, 2.0, 0.0, a).log_prefactor(1.0) for a in (1.5, 2, 10, 1e6)]
    assert all(np.diff(pref) < 0) and pref[-1] == pytest.approx(16.0, rel=1e-5)
    assert B.msde_harnack_log_constant(2.0, 1e-8, 1.0, 1.0) == pytest.approx(1.0, rel=1e-7)
    assert B.msde_harnack_log_constant(2.0, 0.0, 1.0, 0.0) == 0.0
    assert B.msde_harnack_log_constant(2.0, 1.0, 1.0, 1.0) == pytest.approx(2.3130, abs=1e-4)
    assert B.strong_feller_rhs(32.0, 0.1, 2, 0, 1.0) == pytest.approx(0.664, abs=1e-3)
    sf = [B.strong_feller_rhs(32.0, d, 2, 0, 1.0) for d in np.linspace(0.01, 1, 30)]
    assert all(np.diff(sf) > 0)
    assert B.log_harnack_rhs(32.0, 1.0, 2, 0, 0.0) == 16.0
    assert B.log_harnack_rhs(32.0, 0.0, 2, 0, -0.5) == -0.5
    assert B.log_harnack_term(32.0, 0.5, 2, 0) == pytest.approx(16.0 * 0.25)
    assert math.isfinite(B.harnack_log_rhs(hb, [0.0], [1.0], 1.0))
