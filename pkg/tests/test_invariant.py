import math

import numpy as np
import pytest
from scipy.integrate import quad

from harnack_lab import invariant as V
from harnack_lab import scenario as S
from harnack_lab.errors import CenterOutsideDomain, InvalidWindow
from harnack_lab.montecarlo import Estimate


@pytest.fixture(scope="module")
def rou_long():
    return V.sample_invariant(S.reflected_ou(1), [0.5], 10.0, 4000.0, 1.0, 1e-4, seed=1)


def half_normal_expect(fn):
    # stationary law of the reflected OU: density 2 N(0, 1/2) on [0, inf)
    return quad(lambda x: fn(x) * 2 * math.exp(-x * x) / math.sqrt(math.pi), 0, math.inf)[0]


def test_half_normal_oracle_values():
    assert half_normal_expect(lambda x: x) == pytest.approx(1 / math.sqrt(math.pi))
    assert half_normal_expect(lambda x: x * x) == pytest.approx(0.5)
    val = quad(lambda x: 2 * math.exp(-0.5 * x * x) / math.sqrt(math.pi), 0, math.inf)[0]
    assert val == pytest.approx(math.sqrt(2))


def test_window_layout(rou):
    m = V.sample_invariant(rou, [0.5], 1.0, 3.0, 0.5, 0.01)
    assert m.n == 5 and m.total_time == 3.0
    # the same path sampled more finely contains the coarse samples
    fine = V.sample_invariant(rou, [0.5], 1.0, 3.0, 0.25, 0.01)
    np.testing.assert_array_equal(fine.samples[::2], m.samples)


def test_window_errors(rou):
    with pytest.raises(InvalidWindow):
        V.sample_invariant(rou, [0.5], 10.0, 5.0)
    with pytest.raises(InvalidWindow):
        V.sample_invariant(rou, [0.5], 1.0, 2.0, 0.333, 0.01)
    with pytest.raises(InvalidWindow):
        V.sample_invariant(rou, [0.5], 1.0, 1.2, 0.5, 0.01)
    with pytest.raises(InvalidWindow):
        V.sample_invariant(rou, [0.5], 0.0, 1.0)


def test_chunked_read_is_seamless(rou, monkeypatch):
    ref = V.sample_invariant(rou, [0.5], 1.0, 5.0, 0.1, 0.01, seed=3)
    monkeypatch.setattr(V, "CHUNK_FLOATS", 37)
    np.testing.assert_array_equal(V.sample_invariant(rou, [0.5], 1.0, 5.0, 0.1, 0.01, seed=3).samples, ref.samples)


def test_scalar_ou_variance():
    # Euler stationary variance is 1 / (2 - h), 0.5025 at h = 0.01
    m = V.sample_invariant(S.scalar_ou(-1.0), [0.0], 10.0, 4000.0, 2.0, 0.01, seed=2)
    assert abs(V.moment(m, 2).mean / 0.5 - 1) <= 0.05
    assert abs(np.mean(m.samples)) <= 4 * math.sqrt(0.5 / m.n)


def test_reflected_ou_moments(rou_long):
    assert abs(V.moment(rou_long, 1).mean * math.sqrt(math.pi) - 1) <= 0.03
    assert abs(V.moment(rou_long, 2).mean / 0.5 - 1) <= 0.05
    e = V.exp_moment(rou_long, 0.5)
    assert abs(e.estimate.mean / math.sqrt(2) - 1) <= 0.05 and not e.unstable
    assert V.exp_moment(rou_long, 1.5).unstable
    assert V.exp_moment(rou_long, 1e-9).estimate.mean == pytest.approx(1.0, abs=1e-8)


def test_stationarity_and_thinning(rou_long):
    x = rou_long.samples[:, 0]
    # first and second half agree; every-other-sample thinning agrees with the whole
    a, b = Estimate.from_samples(x[: x.size // 2]), Estimate.from_samples(x[x.size // 2:])
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)
    c = Estimate.from_samples(x[::2])
    assert abs(c.mean - a.mean / 2 - b.mean / 2) <= 3 * c.stderr


def test_coverage(rou_long, rou):
    cov = V.support_coverage(rou_long, [0.0, 0.5, 1.0, 2.0], 0.25)
    assert cov.all_hit
    mass = [half_normal_expect(lambda x, c=c: float(abs(x - c) <= 0.25)) for c in (0.0, 0.5, 1.0, 2.0)]
    np.testing.assert_allclose(cov.hit_fraction, mass, atol=0.03)
    assert not V.support_coverage(rou_long, [10.0], 0.25).all_hit
    mean = float(rou_long.samples.mean())
    assert V.support_coverage(rou_long, [mean], 0.1).all_hit
    with pytest.raises(CenterOutsideDomain):
        V.support_coverage(rou_long, [-1.0], 0.25)


def test_degenerate_measure(rou):
    m = V.EmpiricalMeasure(np.zeros((3, 1)), rou, 1.0, 1.0, 3.0, 0.1)
    assert V.moment(m, 1).mean == 0.0
    with pytest.raises(ValueError):
        V.moment(m, 0.5)
    with pytest.raises(ValueError):
        V.exp_moment(m, 0.0)


def test_restart_from_sample(rou_long):
    start = rou_long.samples[len(rou_long.samples) // 2]
    again = V.sample_invariant(S.reflected_ou(1), start, 1.0, 4000.0, 1.0, 1e-4, seed=77)
    a, b = V.moment(rou_long, 2), V.moment(again, 2)
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)
