"""Upper-level machinery: exact hypergradient, the distributed v/alpha
updates, and the full bilevel loop on instances small enough to verify
against independent oracles (finite differences, grid search)."""

import numpy as np
import pytest

from binum.analysis import finite_difference_hypergradient
from binum.bilevel import MetricsRecord, UpperConfig, alpha_update, \
    exact_hypergradient, estimated_hypergradient, \
    generalized_projected_gradient, lu_solve, run_dbinum, v_update
from binum.broadcast import broadcast_round
from binum.feedback import FeedbackMode
from binum.functions import FunctionSet, Regularizer, SurrogateUtility, \
    TrueUtility, psi_total
from binum.lower import LowerConfig, phi_hessian, solve_lower

from conftest import af_surrogate, chain_net, make_fs, quad_reg, \
    random_feasible_x, random_instance, single_link_net

TIGHT = LowerConfig(stepsize=1.0, max_iters=200000, delta_phi=1e-8)


class TestLuSolve:
    def test_matches_numpy(self, rng):
        for n in (1, 2, 5, 9):
            A = rng.normal(size=(n, n)) + n * np.eye(n)
            b = rng.normal(size=n)
            assert np.allclose(lu_solve(A, b), np.linalg.solve(A, b),
                               rtol=1e-10, atol=1e-12)

    def test_needs_pivoting(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(lu_solve(A, np.array([2.0, 3.0])),
                              np.array([3.0, 2.0]))

    def test_singular_raises(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(np.linalg.LinAlgError):
            lu_solve(A, np.array([1.0, 1.0]))

    def test_inputs_untouched(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        Ac, bc = A.copy(), b.copy()
        lu_solve(A, b)
        assert np.array_equal(A, Ac) and np.array_equal(b, bc)


class TestExactHypergradient:
    def test_zero_at_fixed_rate_one(self):
        # quadratic regularizer with mu=0.4 on a 2-user shared link and
        # eps=0.2 puts the lower-level optimum exactly at x=(1,1) for any
        # alpha (stationarity: x^-a - eps*x - mu*(x1+x2) = 1-0.2-0.8 = 0),
        # where the mixed derivative -x^-a ln x vanishes, so the
        # hypergradient is exactly zero
        net = single_link_net(n=2, cap=100.0)
        fs = FunctionSet(
            surrogates=(af_surrogate(alpha0=2.0), af_surrogate(alpha0=1.5)),
            trues=(TrueUtility("log_form", 2.0, 1.0),) * 2,
            regularizers=(quad_reg(mu=0.4),),
            epsilon=0.2)
        for alpha in ([2.0, 1.5], [3.0, 0.7], [1.2, 2.6]):
            x, cert = solve_lower(net, fs, np.array(alpha), TIGHT)
            assert cert.converged
            assert np.allclose(x, 1.0, atol=1e-9)
            hyper = exact_hypergradient(net, fs, np.array(alpha), x)
            assert np.allclose(hyper, 0.0, atol=1e-8)

    def test_constant_true_utilities(self):
        # quadratic trues with a=0 are flat, so g=0 and the sensitivity
        # is exactly zero regardless of the instance
        net = chain_net()
        fs = make_fs(net, trues=[TrueUtility("quadratic", 0.0)] * 3)
        x, _ = solve_lower(net, fs, np.full(3, 2.0), TIGHT)
        hyper = exact_hypergradient(net, fs, np.full(3, 2.0), x)
        assert np.array_equal(hyper, np.zeros(3))

    def test_matches_finite_differences(self, rng):
        # spot check; the 50-instance sweep is an acceptance criterion
        net, fs = random_instance(rng, 3, 2)
        alpha = fs.alpha0()
        x, _ = solve_lower(net, fs, alpha, TIGHT)
        exact = exact_hypergradient(net, fs, alpha, x)
        fd = finite_difference_hypergradient(net, fs, alpha, 1e-4, TIGHT)
        assert np.allclose(exact, fd, rtol=1e-4, atol=1e-7)


class TestVUpdate:
    def test_eta_zero_keeps_v(self, rng):
        net, fs = random_instance(rng, 4, 2)
        x = random_feasible_x(rng, net)
        v = rng.normal(size=4)
        views = broadcast_round(net, fs, x, v, fs.alpha0())
        out = v_update(fs, views, rng.normal(size=4), 0.0)
        assert np.array_equal(out, v)

    def test_zero_v_gives_minus_eta_feedback(self, rng):
        net, fs = random_instance(rng, 4, 2)
        x = random_feasible_x(rng, net)
        fb = rng.normal(size=4)
        views = broadcast_round(net, fs, x, np.zeros(4), fs.alpha0())
        out = v_update(fs, views, fb, 0.5)
        assert np.allclose(out, -0.5 * fb, rtol=1e-15)

    def test_matches_centralized_formula(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 7))
            net, fs = random_instance(rng, n, int(rng.integers(1, 4)))
            x = random_feasible_x(rng, net)
            v = rng.normal(size=n)
            fb = rng.normal(size=n)
            alpha = rng.uniform(1.2, 3.0, size=n)
            eta = float(rng.uniform(0.05, 2.0))
            views = broadcast_round(net, fs, x, v, alpha)
            got = v_update(fs, views, fb, eta)
            H = phi_hessian(net, fs, x, alpha)
            expect = v + eta * (H @ v) - eta * fb
            assert np.allclose(got, expect, rtol=1e-12, atol=1e-12)

    def test_rejects_nonfinite_feedback(self, rng):
        net, fs = random_instance(rng, 2, 1)
        x = random_feasible_x(rng, net)
        views = broadcast_round(net, fs, x, np.zeros(2), fs.alpha0())
        from binum.functions import FunctionError
        with pytest.raises(FunctionError, match="non-finite"):
            v_update(fs, views, np.array([1.0, np.nan]), 0.5)


class TestAlphaUpdate:
    def test_interior_step(self):
        net = single_link_net(n=1)
        fs = make_fs(net)  # surrogate box [0.2, 8], alpha0=2
        # dadx at x=e is -e^-2 * 1 = -0.13533...; v=1, beta=0.1
        x = np.array([np.e])
        out = alpha_update(fs, np.array([2.0]), x, np.array([1.0]), 0.1)
        d = -np.e ** -2.0
        assert out[0] == pytest.approx(2.0 - 0.1 * d, rel=1e-12)

    def test_clamps_to_box(self):
        net = single_link_net(n=2)
        fs = make_fs(net)
        x = np.array([3.0, 3.0])
        # huge v of opposite signs pushes one end past each bound
        out = alpha_update(fs, np.array([2.0, 2.0]), x,
                           np.array([1e6, -1e6]), 1.0)
        assert set(np.round(out, 12)) <= {0.2, 8.0}

    def test_zero_v_is_identity(self):
        net = single_link_net(n=3)
        fs = make_fs(net)
        a = np.array([1.5, 2.0, 2.5])
        out = alpha_update(fs, a, np.full(3, 2.0), np.zeros(3), 0.5)
        assert np.array_equal(out, a)


class TestGeneralizedProjectedGradient:
    def test_interior_equals_gradient(self):
        g = np.array([0.3, -0.7])
        got = generalized_projected_gradient(np.array([2.0, 2.0]), g, 0.1,
                                             0.2, 8.0)
        assert np.allclose(got, g, rtol=1e-12)

    def test_binding_upper_bound(self):
        # alpha=7.9, grad=2, beta=0.1 -> step hits 8.0, displacement 0.1,
        # reported 0.1/0.1 = 1.0
        got = generalized_projected_gradient(np.array([7.9]),
                                             np.array([2.0]), 0.1, 0.2, 8.0)
        assert got[0] == pytest.approx(1.0, rel=1e-12)

    def test_pinned_at_bound(self):
        # at the bound with the gradient pointing out, displacement is 0
        got = generalized_projected_gradient(np.array([8.0]),
                                             np.array([5.0]), 0.1, 0.2, 8.0)
        assert got[0] == 0.0


class TestEstimatedHypergradient:
    def test_matches_exact_through_inverse(self, rng):
        # feeding v' = -H^{-1} g (the converged tracker) reproduces the
        # exact oracle
        net, fs = random_instance(rng, 4, 2)
        alpha = fs.alpha0()
        x, _ = solve_lower(net, fs, alpha, TIGHT)
        from binum.feedback import query_gradient
        g = np.array([float(query_gradient(t, x[i]))
                      for i, t in enumerate(fs.trues)])
        H = phi_hessian(net, fs, x, alpha)
        v_star = lu_solve(H, g)
        est = estimated_hypergradient(fs, alpha, x, v_star)
        assert np.allclose(est, exact_hypergradient(net, fs, alpha, x),
                           rtol=1e-10, atol=1e-12)


def one_user_instance():
    net = single_link_net(n=1, cap=100.0)
    fs = FunctionSet(
        surrogates=(SurrogateUtility("alpha_fair", 1.05, 8.0, 2.0),),
        trues=(TrueUtility("log_form", 2.0, 1.0),),
        regularizers=(Regularizer("log_barrier", tau=1e-3, cap=100.0),),
        epsilon=1e-3)
    return net, fs


class TestRunDbinum:
    def test_single_user_matches_grid_search(self):
        # independent oracle: brute-force the best alpha on a fine grid
        # and check the loop climbs to within grid resolution of it
        net, fs = one_user_instance()
        best = -np.inf
        for a in np.arange(1.05, 8.0, 0.01):
            x, cert = solve_lower(net, fs, np.array([a]), TIGHT)
            assert cert.converged
            best = max(best, psi_total(fs, x))
        recs, aborted = run_dbinum(net, fs, TIGHT,
                                   UpperConfig(eta=1.0, beta=0.05,
                                               rounds=4000))
        assert aborted is None
        assert recs[-1].psi >= best - 1e-3

    def test_psi_climbs_after_burn_in(self):
        net, fs = one_user_instance()
        recs, aborted = run_dbinum(net, fs, TIGHT,
                                   UpperConfig(eta=1.0, beta=0.05,
                                               rounds=4000))
        assert aborted is None
        psis = [r.psi for r in recs]
        tail = psis[len(psis) // 2:]
        assert all(b >= a - 1e-9 for a, b in zip(tail, tail[1:]))
        assert psis[-1] > psis[0]

    def test_alpha_settles(self):
        net, fs = one_user_instance()
        recs, _ = run_dbinum(net, fs, TIGHT,
                             UpperConfig(eta=1.0, beta=0.05, rounds=4000))
        assert abs(recs[-1].alphas[0] - recs[-2].alphas[0]) < 1e-6

    def test_alpha_stays_in_box(self, rng):
        net, fs = random_instance(rng, 3, 2)
        recs, aborted = run_dbinum(
            net, fs, LowerConfig(1.0, 200000, 1e-4),
            UpperConfig(eta=0.5, beta=1e-3, rounds=50))
        assert aborted is None
        lo, hi = fs.alpha_lo(), fs.alpha_hi()
        for r in recs:
            a = np.array(r.alphas)
            assert np.all(a >= lo) and np.all(a <= hi)

    def test_records_shape(self, rng):
        net, fs = random_instance(rng, 3, 2)
        recs, aborted = run_dbinum(
            net, fs, LowerConfig(1.0, 200000, 1e-4),
            UpperConfig(eta=0.5, beta=1e-3, rounds=7))
        assert aborted is None
        assert [r.round for r in recs] == list(range(7))
        for r in recs:
            assert isinstance(r, MetricsRecord)
            assert len(r.rates) == 3 and len(r.alphas) == 3
            assert r.gproj_norm >= 0.0 and r.lower_iters >= 0
            assert r.clip_count == 0  # gradient mode never draws

    def test_deterministic_records(self, rng):
        net, fs = random_instance(rng, 3, 2)
        mode = FeedbackMode("two_point", delta_s=1e-3, seed=5)
        args = (net, fs, LowerConfig(1.0, 200000, 1e-4),
                UpperConfig(eta=0.5, beta=1e-3, rounds=25))
        a, _ = run_dbinum(*args, mode=mode)
        b, _ = run_dbinum(*args, mode=mode)
        assert a == b

    def test_abort_reports_round(self):
        # a one-iteration lower budget cannot converge; the run stops with
        # a message naming round 0 and returns no records
        net, fs = one_user_instance()
        recs, aborted = run_dbinum(net, fs, LowerConfig(1.0, 1, 1e-10),
                                   UpperConfig(eta=1.0, beta=0.05, rounds=9))
        assert recs == []
        assert aborted is not None and "round 0" in aborted


class TestUpperConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="eta"):
            UpperConfig(eta=0.0, beta=1.0, rounds=1)
        with pytest.raises(ValueError, match="beta"):
            UpperConfig(eta=1.0, beta=-1.0, rounds=1)
        with pytest.raises(ValueError, match="rounds"):
            UpperConfig(eta=1.0, beta=1.0, rounds=0)
