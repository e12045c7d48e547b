import math

import numpy as np
import pytest
from oracles import brute_quantile_interval, lp_quantile_lasso

from resque.quantile import (
    CqrFit,
    FoldedPenalty,
    QuantileGrid,
    check_loss,
    composite_objective,
    cqr_init,
    cqr_lla,
    cyclic_discrepancy,
    lambda2_validation,
    lambda23_default,
    penalty_derivative,
    sample_quantile_lower,
)

SOLVER = dict(rho=2.0, alpha=1.8, tol=1e-7, max_iter=60000)


def test_quantile_grid_validation():
    g = QuantileGrid()
    assert g.K >= 2
    with pytest.raises(ValueError):
        QuantileGrid((0.5,))
    with pytest.raises(ValueError):
        QuantileGrid((0.5, 0.5))
    with pytest.raises(ValueError):
        QuantileGrid((0.01, 0.5), tau0=0.05)
    with pytest.raises(ValueError):
        QuantileGrid((0.5, 0.99), tau0=0.05)


def test_check_loss_examples():
    assert check_loss(2.0, 0.5) == 1.0
    assert check_loss(-2.0, 0.25) == 1.5
    for tau in (0.1, 0.5, 0.9):
        assert check_loss(0.0, tau) == 0.0
    with pytest.raises(ValueError):
        check_loss(1.0, 1.0)


def test_penalty_derivative_examples():
    scad = FoldedPenalty("scad", lam=0.4, a=3.7)
    assert penalty_derivative(scad, 0.0) == pytest.approx(0.4)
    assert penalty_derivative(scad, 3.7 * 0.4) == 0.0
    assert penalty_derivative(scad, 10.0) == 0.0
    mcp = FoldedPenalty("mcp", lam=1.0, a=3.0)
    assert penalty_derivative(mcp, 1.5) == pytest.approx(0.5)


def test_penalty_properties_grid():
    for pen in (FoldedPenalty("scad", 0.7, 3.7), FoldedPenalty("mcp", 0.7, 3.0)):
        t = np.linspace(0, 2 * pen.a * pen.lam, 2000)
        dv = pen.derivative(t)
        assert np.all(dv >= 0)
        assert np.all(np.diff(dv) <= 1e-12)
        assert dv[0] >= pen.a1 * pen.lam
        assert np.all(dv[t >= pen.a * pen.lam] == 0.0)
    with pytest.raises(ValueError):
        FoldedPenalty("scad", 1.0, 1.5)
    with pytest.raises(ValueError):
        FoldedPenalty("ridge", 1.0, 3.0)
    with pytest.raises(ValueError):
        FoldedPenalty("scad", 1.0, 3.7).derivative(-0.1)


def test_sample_quantile_lower_against_bruteforce():
    rng = np.random.default_rng(0)
    for trial in range(100):
        n = int(rng.integers(3, 40))
        y = np.round(rng.standard_normal(n), 3)  # force occasional ties
        for tau in QuantileGrid().taus:
            got = sample_quantile_lower(y, tau)
            assert got == brute_quantile_interval(y, tau)[0]


def test_intercept_only_examples():
    grid = QuantileGrid((0.25, 0.5), tau0=0.05)
    Z = np.zeros((5, 0))
    fit = cqr_init(Z, np.array([1.0, 2.0, 3.0, 4.0, 5.0]), grid, 0.0, **SOLVER)
    assert fit.b[1] == 3.0
    assert fit.collapsed and fit.discrepancy == 0.0
    fit4 = cqr_init(np.zeros((4, 0)), np.array([1.0, 2.0, 3.0, 4.0]), grid, 0.0, **SOLVER)
    assert fit4.b[0] == 1.0  # lower endpoint of the [1, 2] minimizer interval


def test_full_shrinkage_limit():
    rng = np.random.default_rng(1)
    n = 201
    Z = rng.standard_normal((n, 3))
    Z = (Z - Z.mean(0)) / Z.std(0)
    y = rng.standard_normal(n)
    grid = QuantileGrid()
    fit = cqr_init(Z, y, grid, 1.5, **SOLVER)
    assert np.all(fit.gamma == 0.0)
    for k, tau in enumerate(grid.taus):
        assert fit.b[k] == sample_quantile_lower(y, tau)
    assert fit.collapsed


def test_init_matches_lp_objective():
    rng = np.random.default_rng(2)
    grid = QuantileGrid((0.5, 0.8), tau0=0.05)
    for trial in range(6):
        n = int(rng.integers(20, 50))
        d = int(rng.integers(1, 5))
        Z = rng.standard_normal((n, d))
        y = Z @ rng.normal(0, 1, d) + rng.standard_normal(n)
        lam2 = 0.05
        fit = cqr_init(Z, y, grid, lam2, **SOLVER)
        for k, tau in enumerate(grid.taus):
            ours = composite_objective(
                Z, y, (tau,), fit.gamma[[k]], fit.b[[k]], lam2
            )
            exact = lp_quantile_lasso(Z, y, tau, lam2)
            assert ours <= exact + 2e-5


def test_init_subgradient_and_residual_fraction():
    rng = np.random.default_rng(3)
    n, d = 400, 4
    Z = rng.standard_normal((n, d))
    Z = (Z - Z.mean(0)) / Z.std(0)
    y = Z @ np.array([0.5, -0.3, 0.0, 0.0]) + rng.standard_normal(n)
    grid = QuantileGrid()
    lam2 = 0.02
    fit = cqr_init(Z, y, grid, lam2, **SOLVER)
    for k, tau in enumerate(grid.taus):
        r = y - Z @ fit.gamma[k] - fit.b[k]
        # points at the kink carry a subgradient interval, not a value
        at_kink = np.abs(r) <= 2e-3
        score = Z.T @ ((tau - (r < 0)) * ~at_kink) / n
        span = np.abs(Z[at_kink]).sum(axis=0) / n
        lo, hi = score - span, score + span
        assert np.all(lo <= lam2 + 2e-3) and np.all(hi >= -lam2 - 2e-3)
        frac = np.mean(r < 0)
        slack = (d + 1) / n + 0.02
        assert tau - slack <= frac <= tau + slack


def test_row_permutation_invariance():
    rng = np.random.default_rng(4)
    n, d = 150, 3
    Z = rng.standard_normal((n, d))
    y = Z @ np.array([0.4, 0.0, -0.2]) + rng.standard_normal(n)
    grid = QuantileGrid()
    fit = cqr_init(Z, y, grid, 0.03, **SOLVER)
    perm = rng.permutation(n)
    fit_p = cqr_init(Z[perm], y[perm], grid, 0.03, **SOLVER)
    np.testing.assert_allclose(fit.gamma, fit_p.gamma, atol=1e-5)
    np.testing.assert_allclose(fit.b, fit_p.b, atol=1e-5)


def _toy_problem(seed=5, n=300, hetero=True):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, n)
    Z = ((z - z.mean()) / z.std())[:, None]
    eps = rng.uniform(-1, 1, n)
    y = (np.exp(0.6 * z) if hetero else np.ones(n)) * eps
    yh = np.log(np.maximum(np.abs(y), 1e-10))
    return Z, yh


def test_lla_zero_weights_returns_init():
    Z, yh = _toy_problem()
    grid = QuantileGrid()
    init = cqr_init(Z, yh, grid, 0.01, **SOLVER)
    pen = FoldedPenalty("scad", 1e-9, 3.7)  # a*lam below every init diff
    out = cqr_lla(Z, yh, grid, 0.01, pen, init, **SOLVER)
    if np.all(out.fused_weights == 0.0):
        np.testing.assert_array_equal(out.gamma, init.gamma)


def test_lla_fusion_dominated_limit():
    Z, yh = _toy_problem(hetero=True)
    grid = QuantileGrid()
    init = cqr_init(Z, yh, grid, 0.01, **SOLVER)
    pen = FoldedPenalty("scad", 50.0, 3.7)
    out = cqr_lla(Z, yh, grid, 0.01, pen, init, **SOLVER)
    assert out.collapsed
    assert out.discrepancy == 0.0
    assert np.all(out.gamma == out.gamma[0])


def test_lla_objective_never_worse_than_init():
    grid = QuantileGrid()
    for seed in range(5):
        Z, yh = _toy_problem(seed=seed, hetero=seed % 2 == 0)
        init = cqr_init(Z, yh, grid, 0.02, **SOLVER)
        pen = FoldedPenalty("scad", 0.05, 3.7)
        out = cqr_lla(Z, yh, grid, 0.02, pen, init, **SOLVER)
        init_obj = composite_objective(
            Z, yh, grid.taus, init.gamma, init.b, 0.02, out.fused_weights
        )
        assert out.objective <= init_obj + 1e-9


def test_lla_matches_cvxpy_on_small_instance():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(6)
    n, d = 60, 2
    Z = rng.standard_normal((n, d))
    y = Z @ np.array([0.4, 0.0]) + rng.standard_normal(n)
    grid = QuantileGrid((0.5, 0.7, 0.9), tau0=0.05)
    lam2 = 0.03
    init = cqr_init(Z, y, grid, lam2, **SOLVER)
    pen = FoldedPenalty("scad", 0.04, 3.7)
    out = cqr_lla(Z, y, grid, lam2, pen, init, **SOLVER)
    w = out.fused_weights
    K = grid.K
    gv = [cp.Variable(d) for _ in range(K)]
    bv = [cp.Variable() for _ in range(K)]
    terms = []
    for k, tau in enumerate(grid.taus):
        r = y - Z @ gv[k] - bv[k]
        terms.append(
            cp.sum(cp.pos(r) * tau + cp.pos(-r) * (1 - tau)) / n
            + lam2 * cp.norm1(gv[k])
        )
        terms.append(w[k] * cp.norm2(gv[k] - gv[(k + 1) % K]))
    prob = cp.Problem(cp.Minimize(cp.sum(cp.hstack(terms))))
    prob.solve(solver=cp.CLARABEL)
    ours = composite_objective(Z, y, grid.taus, out.gamma, out.b, lam2, w)
    assert ours <= prob.value + 5e-5


def test_collapse_monotone_on_lambda3_ladder():
    Z, yh = _toy_problem(seed=7)
    grid = QuantileGrid()
    init = cqr_init(Z, yh, grid, 0.01, **SOLVER)
    flags = []
    for lam3 in (1e-4, 1e-3, 1e-2, 0.1, 1.0):
        pen = FoldedPenalty("scad", lam3, 3.7)
        out = cqr_lla(Z, yh, grid, 0.01, pen, init, **SOLVER)
        flags.append(out.collapsed)
    first_true = flags.index(True) if True in flags else len(flags)
    assert all(flags[first_true:])


def test_lambda23_default():
    lam2, lam3 = lambda23_default(100, 100, 1.0, 1.0, 0.0, 0.0)
    assert lam2 == lam3 == 0.0
    lam2, lam3 = lambda23_default(100, 100, 1.0, 1.0, 1.0, 1.0)
    assert lam2 == pytest.approx(0.2146, abs=2e-4)
    assert lam3 == pytest.approx(lam2)
    base = lambda23_default(500, 20, 2.0, 3.0, 1.0, 1.0)
    doubled = lambda23_default(500, 20, 2.0, 6.0, 1.0, 1.0)
    assert doubled[1] == pytest.approx(base[1] * math.sqrt(2))
    assert doubled[0] == base[0]
    with pytest.raises(ValueError):
        lambda23_default(0, 1, 1, 1, 1, 1)


def test_lambda2_validation_grid():
    Z, yh = _toy_problem(seed=8, n=250)
    best, losses = lambda2_validation(
        Z, yh, QuantileGrid(), 0.02, rho=2.0, alpha=1.8, tol=1e-5, max_iter=20000
    )
    assert best in (0.25, 0.5, 1.0, 2.0, 4.0)
    assert set(losses) == {0.25, 0.5, 1.0, 2.0, 4.0}


def test_collapse_behavior_homoscedastic_vs_reverse():
    """Invariant levels fuse; the reverse-direction fit does not."""
    grid = QuantileGrid()
    n = 2000
    hits = 0
    for seed in range(6):
        rng = np.random.default_rng(100 + seed)
        x1 = rng.uniform(-1, 1, n)
        x2 = 0.8 * x1 + np.exp(0.5 * x1) * rng.uniform(-1, 1, n)

        def side(y, x):
            xs = ((x - x.mean()) / x.std())[:, None]
            b = np.polyfit(x, y, 1)
            resid = y - np.polyval(b, x)
            yh = np.log(np.maximum(np.abs(resid), 1e-10))
            lam2, lam3 = 0.16 * 0.0616, 0.2 * 0.0616
            init = cqr_init(xs, yh, grid, lam2, rho=2.0, alpha=1.8, tol=1e-5, max_iter=20000)
            pen = FoldedPenalty("scad", lam3, 3.7)
            return cqr_lla(xs, yh, grid, lam2, pen, init, rho=2.0, alpha=1.8, tol=1e-5, max_iter=20000)

        sink = side(x2, x1)
        anti = side(x1, x2)
        hits += sink.collapsed and not anti.collapsed
    assert hits >= 4
