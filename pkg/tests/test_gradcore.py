import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayespsr import gp, psr, simulator as sim
from bayespsr.gp import Dataset, KernelParams
from bayespsr.optimizers import KappaSchedule, OptimizerConfig, Problem, gradcore_select, kappa_update, run_gradcore


def test_kappa_schedule_validation():
    with pytest.raises(ValueError):
        KappaSchedule(0.0, 1.0, 0, 1.0)
    with pytest.raises(ValueError):
        KappaSchedule(1.0, 1.0, -1, 1.0)


def test_kappa_schedule_from_config():
    s = KappaSchedule.from_config(OptimizerConfig(budget=1), 2048.0, 40)
    assert (s.c0, s.c1, s.t_initial, s.kappa0_sq) == (1.0, 1.2, 40, 8.0)


def test_kappa_zero_gradient_hits_floor():
    s = KappaSchedule(0.01, 1.2, 0, 1.0)
    np.testing.assert_array_equal(kappa_update(s, np.zeros(4), 3), 0.01)


def test_kappa_initial_phase_ignores_gradient():
    s = KappaSchedule(0.01, 1.2, 10, 0.5)
    np.testing.assert_array_equal(kappa_update(s, np.full(3, 100.0), 9), 0.5)


def test_kappa_hand_value():
    s = KappaSchedule(1e-9, 1.2, 0, 1.0)
    np.testing.assert_allclose(kappa_update(s, np.array([3.0, 4.0]), 0), 15.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(1.0, 10.0))
def test_kappa_scales_quadratically(g, scale):
    s = KappaSchedule(1e-300, 1.2, 0, 1.0)
    g = np.array(g)
    base = kappa_update(s, g, 5)[0]
    if base > 1e-250:
        assert kappa_update(s, scale * g, 5)[0] == pytest.approx(scale**2 * base, rel=1e-12)


def test_select_empty_dataset_matches_closed_form():
    p = KernelParams.uniform(3.0, 100.0, 2)
    kappa_sq, sigma_bar_sq = 0.05, 8.0
    sel = gradcore_select(Dataset.empty(2), np.array([1.0, 2.0]), kappa_sq, sigma_bar_sq, np.pi / 2, p)
    grid = np.geomspace(2 * kappa_sq, sigma_bar_sq, 64)
    ok = [psr.bpsr_first_closed_form(0, 0, np.pi / 2, s, 100.0, 3.0)[1] <= kappa_sq for s in grid]
    best = grid[np.flatnonzero(ok)[-1]]
    assert not sel.miss.any()
    np.testing.assert_array_equal(sel.shots, int(np.ceil(sigma_bar_sq / best - 1e-9)))
    # analytic bound: s / ((g/2 + 1) s / s0 + 2) <= kappa^2
    s_star = 2 * kappa_sq / (1 - (3.0 / 2 + 1) * kappa_sq / 100.0)
    assert best <= s_star < best * (grid[1] / grid[0])


def test_select_information_free_regime():
    p = KernelParams.uniform(9.0, 100.0, 3)
    prior_var = 100.0 * 2 / 11
    sel = gradcore_select(Dataset.empty(3), np.zeros(3), prior_var * 1.01, 1.0, np.pi / 2, p)
    np.testing.assert_array_equal(sel.shots, 1)


def test_select_flags_miss_when_unreachable():
    p = KernelParams.uniform(9.0, 100.0, 2)
    # a shift of pi/50 makes the pair nearly uninformative about the derivative
    sel = gradcore_select(Dataset.empty(2), np.zeros(2), 1e-3, 1.0, np.pi / 50, p)
    assert sel.miss.all()
    np.testing.assert_array_equal(sel.shots, int(np.ceil(1.0 / 2e-3)))


def test_select_uniform_variant(rng):
    p = KernelParams.uniform(9.0, 100.0, 3)
    # an accurate earlier pair along axis 0 makes that axis cheaper
    x_hat = np.array([0.1, 0.2, 0.3])
    prev = np.tile(x_hat, (2, 1))
    prev[:, 0] += [-np.pi / 2, np.pi / 2]
    ds = Dataset.empty(3).append(prev, rng.normal(size=2), 0.01)
    a = gradcore_select(ds, np.array([0.1, 0.2, 0.3]), 0.02, 4.0, np.pi / 2, p)
    b = gradcore_select(ds, np.array([0.1, 0.2, 0.3]), 0.02, 4.0, np.pi / 2, p, uniform=True)
    assert a.shots[0] < a.shots[-1]
    np.testing.assert_array_equal(b.shots, a.shots.max())


def test_select_rejects_bad_thresholds():
    p = KernelParams.uniform(9.0, 100.0, 2)
    with pytest.raises(ValueError):
        gradcore_select(Dataset.empty(2), np.zeros(2), 0.0, 1.0, np.pi / 2, p)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 60), st.floats(1e-3, 1.0), st.integers(0, 2**31 - 1))
def test_selection_meets_constraint(n_prev, kappa_sq, seed):
    r = np.random.default_rng(seed)
    p = KernelParams.uniform(9.0, 100.0, 4)
    x_hat = r.uniform(0, 2 * np.pi, 4)
    ds = Dataset.empty(4).append(r.uniform(0, 2 * np.pi, (n_prev, 4)), r.normal(size=n_prev),
                                 r.uniform(0.01, 1.0, n_prev))
    sigma_bar_sq = 5.0
    sel = gradcore_select(ds, x_hat, kappa_sq, sigma_bar_sq, np.pi / 2, p)
    grown = ds.append(sel.points, 0.0, sigma_bar_sq / sel.shots)
    _, var = gp.grad_posterior(grown, x_hat, p)
    assert np.all(sel.shots >= 1)
    assert np.all(var[~sel.miss] <= kappa_sq * (1 + 1e-6))


def test_run_accounting_and_constraint():
    pb = Problem(sim.build_ising(3), sim.build_efficient_su2(3, 1), 3.0)
    cfg = OptimizerConfig(budget=10**6, max_steps=30, t_initial=5)
    state = run_gradcore(pb, cfg, np.full(12, 1.0), np.random.default_rng(0))
    cum = 0
    for r in state.history:
        cum += r.shots
        assert r.cumulative_shots == cum
        if not r.constraint_miss:
            assert np.all(r.grad_var <= r.kappa_sq * (1 + 1e-6))
    assert state.cumulative_shots <= cfg.budget
    assert len({r.shots for r in state.history}) > 1


def test_run_is_deterministic():
    pb = Problem(sim.build_ising(3), sim.build_efficient_su2(3, 1), 3.0)
    cfg = OptimizerConfig(budget=10**5, max_steps=15)
    a = run_gradcore(pb, cfg, np.full(12, 1.0), np.random.default_rng(7))
    b = run_gradcore(pb, cfg, np.full(12, 1.0), np.random.default_rng(7))
    assert [r.shots for r in a.history] == [r.shots for r in b.history]
    assert np.array_equal(a.x_hat, b.x_hat)
