import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from harnack_lab import bounds as B
from harnack_lab import scenario as S
from harnack_lab.errors import AlphaOutOfRange, DegenerateDelta, ExponentDegenerate, NonConstantZeta


def make(q=2.0, r=0.0, gamma=1.0, omega=0.0, zeta=None):
    base = S.reflected_ou(1)
    return base.replace(q=q, r=r, gamma=gamma, omega=omega, zeta=zeta or S.ZetaSchedule.constant(1.0))


def theta_by_quad(sc, T):
    d, r = sc.delta, sc.r
    w = d * sc.omega
    cuts = sorted({0.0, T, *[b for b in sc.zeta.breakpoints if b < T]})
    i_sq = sum(quad(lambda t: sc.zeta(t) ** 2 * math.exp(-w * t), a, b, epsabs=0, epsrel=1e-13)[0]
               for a, b in zip(cuts, cuts[1:]))
    i_lin = sum(quad(lambda t: sc.zeta(t) * math.exp(-w * t), a, b, epsabs=0, epsrel=1e-13)[0]
                for a, b in zip(cuts, cuts[1:]))
    return 4 * d ** (-2 * (3 + r) / (2 + r)) * sc.gamma ** (-2 / (2 + r)) * i_sq ** (r / (2 + r)) / i_lin ** 2


def test_reflected_ou_hand_value():
    # delta = 1/2, gamma = zeta = 1, omega = 0: Theta_T = 4 delta^-3 / T^2 = 32 / T^2
    sc = S.reflected_ou(1)
    for T in (0.5, 1.0, 2.0):
        assert B.theta_closed_form(sc, T) == pytest.approx(32 / T ** 2, rel=1e-14)
        assert B.theta_exact(sc, T) == pytest.approx(32 / T ** 2, rel=1e-14)
        assert B.theta_quadrature(sc, T) == pytest.approx(32 / T ** 2, rel=1e-12)


def test_harnack_power_values():
    assert B.harnack_power(2, 0) == 2.0
    assert B.harnack_power(3, 0) == 1.0
    assert B.harnack_power(4, 0) == 0.0
    assert B.harnack_power(5, 2) == pytest.approx(0.5)


@pytest.mark.parametrize("q,r,gamma,omega,T", [
    (2, 0, 1, 0, 1), (2, 0, 0.5, 1.0, 0.3), (3, 0, 2, -1, 2), (3, 1, 1, 0.5, 1), (5, 2, 1, 1e-12, 4)])
def test_theta_against_scipy_quad(q, r, gamma, omega, T):
    sc = make(q, r, gamma, omega)
    ref = theta_by_quad(sc, T)
    assert B.theta_exact(sc, T) == pytest.approx(ref, rel=1e-11)
    assert B.theta_quadrature(sc, T) == pytest.approx(ref, rel=1e-10)
    assert B.theta_closed_form(sc, T) == pytest.approx(ref, rel=1e-11)


def test_theta_piecewise_zeta_against_quad():
    z = S.ZetaSchedule.piecewise_constant([0.3, 0.7], [1.0, 0.5, 0.8])
    sc = make(3.0, 1.0, 1.5, 0.7, z)
    for T in (0.2, 0.5, 1.0, 3.0):
        ref = theta_by_quad(sc, T)
        assert B.theta_exact(sc, T) == pytest.approx(ref, rel=1e-11)
        assert B.theta_quadrature(sc, T) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(NonConstantZeta):
        B.theta_closed_form(sc, 1.0)


def test_quadrature_closed_form_grid():
    worst = 0.0
    for T, w, g, (q, r) in itertools.product((0.1, 1.0, 5.0), (-1, -1e-12, 0, 1e-12, 1), (0.5, 2.0),
                                             ((2, 0), (3, 0), (3, 1), (1.5, 0.5))):
        sc = make(q, r, g, w)
        worst = max(worst, abs(B.theta_quadrature(sc, T) / B.theta_closed_form(sc, T) - 1))
    assert worst <= 1e-8


def test_theta_continuous_in_omega():
    vals = [B.theta_closed_form(make(omega=w), 1.0) for w in (-1e-9, 0.0, 1e-9)]
    assert max(vals) - min(vals) <= 1e-8 * vals[1]


def test_theta_decreasing_in_T():
    for w in (-1.0, 0.0, 1.0):
        ts = np.linspace(0.1, 5, 40)
        th = [B.theta_exact(make(omega=w), t) for t in ts]
        assert np.all(np.diff(th) < 0)


def test_theta_errors():
    with pytest.raises(DegenerateDelta):
        B.theta_quadrature(make(q=4.0, r=0.0), 1.0)
    with pytest.raises(ValueError):
        B.theta_quadrature(make(), 0.0)
    with pytest.raises(ValueError):
        B.theta_quadrature(make(), 1.0, n_quad=4)


def test_decay_integral():
    assert B.decay_integral(0.0, 1.0, 3.0) == 2.0
    assert B.decay_integral(2.0, 0.0, 1.0) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-15)
    assert B.decay_integral(1e-300, 0.0, 1.0) == pytest.approx(1.0)


def test_simpson_exact_on_cubics():
    assert B.simpson(lambda t: t ** 3 - 2 * t, 0.0, 2.0, 2) == pytest.approx(0.0, abs=1e-14)
    assert B.simpson(lambda t: t ** 2, 0.0, 3.0, 3) == pytest.approx(9.0, rel=1e-14)


def test_harnack_bound_hand_values():
    hb = B.HarnackBound(theta=32.0, q=2.0, r=0.0, alpha=2.0)
    # alpha / (2 (alpha - 1)) * Theta * d^2 = 1 * 32 * 0.25
    assert hb.log_prefactor(0.5) == pytest.approx(8.0)
    assert hb.exponent([0.0, 0.0], [0.3, 0.4]) == pytest.approx(8.0)
    assert B.harnack_log_rhs(hb, [0.0], [0.5], math.e) == pytest.approx(9.0)
    assert B.harnack_rhs(hb, [0.0], [0.5], 1.0) == pytest.approx(math.exp(8.0))
    assert B.harnack_rhs(hb, [0.0], [100.0], 1.0) == math.inf
    assert B.harnack_rhs(hb, [0.0], [0.0], 3.0) == 3.0
    with pytest.raises(AlphaOutOfRange):
        B.HarnackBound(32.0, 2.0, 0.0, 1.0)


def test_msde_constant():
    assert B.msde_harnack_log_constant(2.0, 0.0, 1.0, 1.0) == pytest.approx(1.0)
    # alpha w d^2 / ((alpha - 1)(1 - exp(-2 w t))) with alpha=3, w=-1, t=0.5, d=2
    assert B.msde_harnack_log_constant(3.0, -1.0, 0.5, 2.0) == pytest.approx(
        3 * -1 * 4 / (2 * (1 - math.exp(1.0))), rel=1e-14)
    near = B.msde_harnack_log_constant(2.0, 1e-12, 1.0, 1.0)
    assert near == pytest.approx(1.0, rel=1e-9)


def test_strong_feller_hand_value():
    v = B.strong_feller_rhs(32.0, 0.1, 2.0, 0.0, 2.0)
    assert v == pytest.approx(2 * math.sqrt(32) * 0.1 * math.exp(0.16), rel=1e-14)
    assert B.strong_feller_rhs(32.0, 0.0, 2.0, 0.0, 2.0) == 0.0
    assert B.strong_feller_rhs(32.0, 50.0, 2.0, 0.0, 2.0) == math.inf
    with pytest.raises(ExponentDegenerate):
        B.strong_feller_rhs(1.0, 0.1, 4.0, 0.0, 1.0)


def test_log_harnack():
    assert B.log_harnack_term(32.0, 0.5, 2.0, 0.0) == pytest.approx(4.0)
    assert B.log_harnack_rhs(32.0, 0.5, 2.0, 0.0, 1.5) == pytest.approx(5.5)
    assert B.log_harnack_term(32.0, 0.0, 2.0, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 10), st.floats(-2, 2), st.floats(0.1, 5), st.sampled_from([(2, 0), (3, 0), (3, 1), (1.5, 0)]))
def test_property_quadrature_agrees(T, w, g, qr):
    sc = make(qr[0], qr[1], g, w)
    assert B.theta_quadrature(sc, T) == pytest.approx(B.theta_closed_form(sc, T), rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 20), st.floats(0, 5), st.floats(0, 5))
def test_property_prefactor_monotone_in_distance(alpha, d1, d2):
    hb = B.HarnackBound(10.0, 2.0, 0.0, alpha)
    lo, hi = sorted((d1, d2))
    assert hb.log_prefactor(lo) <= hb.log_prefactor(hi)


def test_closed_form_monotone_in_gamma_and_zeta():
    for w in (-1.0, 0.0, 1.0):
        by_gamma = [B.theta_closed_form(make(gamma=g, omega=w), 1.0) for g in (0.5, 1.0, 2.0, 4.0)]
        by_zeta = [B.theta_closed_form(make(omega=w, zeta=S.ZetaSchedule.constant(z)), 1.0) for z in (0.25, 0.5, 1.0)]
        assert np.all(np.diff(by_gamma) < 0) and np.all(np.diff(by_zeta) < 0)


def test_prefactor_monotone_in_alpha():
    vals = [B.HarnackBound(10.0, 2.0, 0.0, a).log_prefactor(0.7) for a in (1.1, 1.5, 2.0, 4.0, 100.0)]
    assert np.all(np.diff(vals) < 0)
