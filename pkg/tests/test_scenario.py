import math

import numpy as np
import pytest

from harnack_lab import scenario as S
from harnack_lab.errors import DimensionMismatch, InvalidExponents, InvalidScenario, SingularSigma
from harnack_lab.operators import ConvexSet, MonotoneOperator


@pytest.mark.parametrize("q,r,expected", [(2, 0, 0.5), (3, 0, 0.25), (3, 1, 0.4), (6, 2, 0.0), (1.5, 0, 0.625)])
def test_delta_hand_values(q, r, expected):
    assert S.delta(q, r) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("q,r", [(1.0, 0.0), (0.5, 0.0), (5.0, 0.5), (2.0, -0.1)])
def test_delta_rejects(q, r):
    with pytest.raises(InvalidExponents):
        S.delta(q, r)


def test_harnack_power_matches_formula(rou):
    assert rou.harnack_power == pytest.approx(2.0)
    sc = rou.replace(q=3.0, r=1.0)
    assert sc.harnack_power == pytest.approx(2 * 2 / 3)


def test_reflected_ou_validates(rou, rou2):
    for sc in (rou, rou2):
        rep = S.validate(sc, n_samples=2000)
        assert rep.passed, rep.failures()
    assert "0 is not interior" in S.validate(rou, n_samples=100).per_hypothesis["H1"].detail


def test_scalar_ou_validates():
    for rate in (-1.0, 0.0):
        assert S.validate(S.scalar_ou(rate), n_samples=2000).passed
    # an expanding drift satisfies H4 with omega = rate + 1 but not the literal H3
    assert S.validate(S.scalar_ou(1.0), n_samples=2000).failures() == ["H3"]


def test_growing_drift_fails_dissipativity(rou):
    rep = S.validate(rou.replace(drift=S.DriftSpec.linear([[0.5]])), n_samples=500)
    assert "H3" in rep.failures() and "H4" in rep.failures()
    assert rep.per_hypothesis["H3"].slack < 0


def test_overstated_gamma_fails_h4(rou):
    rep = S.validate(rou.replace(gamma=1.5), n_samples=500)
    assert rep.failures() == ["H4"]


def test_understated_growth_fails_h5(rou):
    rep = S.validate(rou.replace(drift=S.DriftSpec.linear([[-1.0]], growth_constant=0.5)), n_samples=500)
    assert "H5" in rep.failures()


def test_power_dissipative_drift():
    # <x - y, Bx - By> <= -gain 2^(2-p) |x - y|^p for B x = -gain |x|^(p-2) x
    for p in (2.0, 3.0, 4.0):
        sc = S.Scenario(MonotoneOperator.zero(2), S.DriftSpec.power_dissipative(2, p, 1.5),
                        S.DiffusionSpec.scalar(1.0, 2), gamma=1.5 * 2 ** (2 - p), omega=0.0, q=p, C_sigma=math.sqrt(2))
        assert S.validate(sc, n_samples=2000).passed


def test_singular_sigma_reported(rou2):
    sc = rou2.replace(diffusion=S.DiffusionSpec(np.array([[1.0, 0.0], [0.0, 0.0]])))
    rep = S.validate(sc, n_samples=100)
    assert "H6'" in rep.failures() and "norm_control" in rep.failures()
    with pytest.raises(SingularSigma):
        sc.diffusion.inverse()


def test_zeta_norm_control(rou):
    # |x|_sigma = |x| / sigma, so the condition is zeta <= sigma
    assert S.zeta_admissible(rou.replace(zeta=S.ZetaSchedule.constant(1.0))).passed
    rep = S.zeta_admissible(rou.replace(zeta=S.ZetaSchedule.constant(1.1)))
    assert not rep.passed and rep.max_ratio == pytest.approx(1.21)
    pw = S.ZetaSchedule.piecewise_constant([0.5], [1.0, 1.2])
    assert not S.zeta_admissible(rou.replace(zeta=pw)).passed


def test_zeta_schedule():
    z = S.ZetaSchedule.piecewise_constant([0.5, 1.0], [1.0, 0.5, 0.25])
    assert z(0.0) == 1.0 and z(0.5) == 0.5 and z(0.99) == 0.5 and z(3.0) == 0.25
    assert z.pieces(0.75) == [(0.0, 0.5, 1.0), (0.5, 0.75, 0.5)]
    assert not z.is_constant
    assert S.ZetaSchedule.piecewise_constant([1.0], [2.0, 2.0]).is_constant
    for bad in (lambda: S.ZetaSchedule.constant(0.0),
                lambda: S.ZetaSchedule.piecewise_constant([1.0], [1.0]),
                lambda: S.ZetaSchedule.piecewise_constant([1.0, 0.5], [1.0, 1.0, 1.0])):
        with pytest.raises(InvalidScenario):
            bad()


def test_scenario_rejects_bad_inputs(rou):
    with pytest.raises(DimensionMismatch):
        rou.replace(drift=S.DriftSpec.linear(-np.eye(2)))
    with pytest.raises(InvalidScenario):
        rou.replace(gamma=0.0)
    with pytest.raises(InvalidScenario):
        rou.replace(q=1.0)
    with pytest.raises(InvalidScenario):
        rou.replace(q=5.0, r=0.0)
    with pytest.raises(InvalidScenario):
        S.DriftSpec.power_dissipative(1, 1.5, 1.0)


def test_one_sided_lipschitz(rou):
    assert rou.one_sided_lipschitz() == -1.0
    assert S.scalar_ou(0.7).one_sided_lipschitz() == pytest.approx(0.7)
    assert rou.replace(q=3.0).one_sided_lipschitz() == 0.0


def test_box_domain_h1_margin():
    sc = S.Scenario(MonotoneOperator.normal_cone(ConvexSet.box([-1.0], [2.0])), S.DriftSpec.linear([[-1.0]]),
                    S.DiffusionSpec.scalar(1.0), gamma=1.0, omega=0.0, q=2.0)
    h1 = S.validate(sc, n_samples=100).per_hypothesis["H1"]
    assert h1.passed and h1.slack == pytest.approx(1.0)
    assert math.isfinite(h1.slack)
