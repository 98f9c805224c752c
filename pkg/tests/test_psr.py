import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayespsr import gp, psr
from bayespsr.gp import VALUE, Dataset, KernelParams


def gp_derivative_1d(y, v, sigma_sq, sigma0_sq, gamma_sq, alpha_prime=0.0, offsets=None):
    """Oracle: 1D GP with the VQE kernel conditioned on the design, derivative at alpha'."""
    offsets = psr.equidistant_offsets(v) if offsets is None else offsets
    p = KernelParams(gamma_sq, sigma0_sq, (v,))
    ds = Dataset.empty(1).append(offsets[:, None], y, sigma_sq)
    post = gp.posterior(ds, np.array([[alpha_prime]]), p, tags=[0])
    return post.mean[0], post.var[0]


def trig_poly(rng, v):
    a = rng.normal(size=2 * v + 1)
    k = np.arange(1, v + 1)
    f = lambda t: a[0] + np.cos(np.outer(t, k)) @ a[1:v + 1] + np.sin(np.outer(t, k)) @ a[v + 1:]
    df = lambda t: (-np.sin(np.outer(t, k)) * k) @ a[1:v + 1] + (np.cos(np.outer(t, k)) * k) @ a[v + 1:]
    return f, df


def test_psr_first_on_sine():
    # f = sin(x): derivative at 0 is 1 for any valid shift
    for a in (0.3, np.pi / 2, 2.0):
        assert psr.psr_first(np.sin(-a), np.sin(a), a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        psr.psr_first(0.0, 0.0, np.pi)


@pytest.mark.parametrize("v", [1, 2, 3, 4])
def test_general_psr_exact_on_trig_polynomials(v, rng):
    f, df = trig_poly(rng, v)
    y = f(psr.equidistant_offsets(v))
    assert psr.psr_general(y, v) == pytest.approx(df(np.array([0.0]))[0], abs=1e-10)


def test_equidistant_points_wrap_and_validate():
    pts = psr.equidistant_points(np.array([6.0, 1.0]), 0, 2)
    assert pts.shape == (4, 2)
    assert np.all((pts >= 0) & (pts < 2 * np.pi))
    np.testing.assert_array_equal(pts[:, 1], 1.0)
    with pytest.raises(ValueError):
        psr.equidistant_points(np.zeros(2), 2, 1)


def test_psr_general_shape_check():
    with pytest.raises(ValueError):
        psr.psr_general(np.zeros(3), 1)


@pytest.mark.parametrize("v", [1, 2, 3])
@pytest.mark.parametrize("alpha_prime", [0.0, 0.37, 1.9, -2.4])
def test_closed_form_matches_gp(v, alpha_prime, rng):
    y = rng.normal(size=2 * v)
    m, s = psr.bpsr_closed_form(y, v, 0.05, 3.0, 2.0, alpha_prime)
    gm, gs = gp_derivative_1d(y, v, 0.05, 3.0, 2.0, alpha_prime)
    assert m == pytest.approx(gm, rel=1e-8, abs=1e-12)
    assert s == pytest.approx(gs, rel=1e-8)


@pytest.mark.parametrize("v", [1, 2, 3])
def test_singular_branch_matches_gp(v, rng):
    # alpha' equal to twice a design offset hits a removable 1/sin singularity
    ap = 2 * psr.equidistant_offsets(v)[0]
    y = rng.normal(size=2 * v)
    m, s = psr.bpsr_closed_form(y, v, 0.01, 1.0, 3.0, ap)
    gm, gs = gp_derivative_1d(y, v, 0.01, 1.0, 3.0, ap)
    assert m == pytest.approx(gm, rel=1e-7)
    assert s == pytest.approx(gs, rel=1e-8)


@pytest.mark.parametrize("v", [1, 2, 3])
def test_center_forms_agree(v, rng):
    y = rng.normal(size=2 * v)
    m, s = psr.bpsr_closed_form(y, v, 0.2, 5.0, 1.0)
    assert psr.bpsr_center_mean(y, v, 0.2, 5.0, 1.0) == pytest.approx(m, rel=1e-12)
    assert psr.bpsr_center_var(v, 0.2, 5.0, 1.0) == pytest.approx(s, rel=1e-12)


@pytest.mark.parametrize("v", [1, 2, 3])
def test_asymptotic_variance_leading_order(v):
    s_exact = psr.bpsr_center_var(v, 1e-6, 1.0, 1.0)
    _, s_asym = psr.bpsr_asymptotic(np.zeros(2 * v), v, 1e-6, 1.0, 1.0)
    assert s_exact == pytest.approx(s_asym, rel=1e-4)


def test_asymptotic_variance_value():
    # V=1 noise-free limit: sigma^2 (2 + 1) / 6 = sigma^2 / 2, i.e. two points shifted by pi/2
    assert psr.bpsr_asymptotic(np.zeros(2), 1, 0.4, 1.0, 1.0)[1] == pytest.approx(0.2)


def test_noiseless_limit_recovers_psr(rng):
    for v in (1, 2, 3):
        y = rng.normal(size=2 * v)
        m, _ = psr.bpsr_closed_form(y, v, 1e-12, 1.0, 3.0)
        assert m == pytest.approx(psr.psr_general(y, v), abs=1e-9)


@pytest.mark.parametrize("alpha", [0.2, np.pi / 3, np.pi / 2, 2.5])
def test_first_closed_form_matches_gp(alpha, rng):
    y1, y2 = rng.normal(size=2)
    m, s = psr.bpsr_first_closed_form(y1, y2, alpha, 0.3, 10.0, 3.0)
    gm, gs = gp_derivative_1d(np.array([y1, y2]), 1, 0.3, 10.0, 3.0, offsets=np.array([-alpha, alpha]))
    assert m == pytest.approx(gm, rel=1e-9)
    assert s == pytest.approx(gs, rel=1e-9)


def test_first_closed_form_domain():
    with pytest.raises(ValueError):
        psr.bpsr_first_closed_form(0, 0, 0.0, 1, 1, 1)
    with pytest.raises(ValueError):
        psr.bpsr_first_closed_form(0, 0, 1.0, -1, 1, 1)


def test_first_closed_form_optimal_shift_is_right_angle():
    grid = np.linspace(0.01, np.pi - 0.01, 2001)
    var = [psr.bpsr_first_closed_form(0, 0, a, 0.5, 100.0, 9.0)[1] for a in grid]
    assert grid[int(np.argmin(var))] == pytest.approx(np.pi / 2, abs=np.pi / 2000)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(1e-4, 1.0), st.floats(0.5, 10.0), st.floats(-np.pi, np.pi),
       st.integers(0, 2**31 - 1))
def test_closed_form_property(v, ratio, gamma_sq, ap, seed):
    y = np.random.default_rng(seed).normal(size=2 * v)
    m, s = psr.bpsr_closed_form(y, v, ratio * 4.0, 4.0, gamma_sq, ap)
    gm, gs = gp_derivative_1d(y, v, ratio * 4.0, 4.0, gamma_sq, ap)
    assert s >= 0
    assert m == pytest.approx(gm, rel=1e-6, abs=1e-9)
    assert s == pytest.approx(gs, rel=1e-6, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, np.pi - 0.05), st.floats(1e-3, 10.0))
def test_first_closed_form_variance_below_noise(alpha, sigma_sq):
    # two observations never leave the derivative less certain than sigma^2 / (2 sin^2 a) allows
    _, s = psr.bpsr_first_closed_form(0.0, 0.0, alpha, sigma_sq, 100.0, 9.0)
    assert 0 < s <= sigma_sq / (2 * np.sin(alpha) ** 2) + 1e-12
