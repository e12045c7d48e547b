"""Reference NumPy implementations of the hot solver kernels.

Three solvers live here: a proximal-gradient lasso with per-coordinate
penalties, a scaled ADMM for single-level quantile regression with a
weighted l1 penalty, and a scaled ADMM for composite quantile
regression with an l1 penalty plus weighted group penalties on cyclic
successive-level coefficient differences. The compiled extension in
``_fastpath`` implements the same algorithms with the same update
order; either backend must satisfy the same contracts.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

BACKEND = "numpy"


def _soft(x: np.ndarray, thresh: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def _prox_check(v: np.ndarray, tau: float, kappa: float) -> np.ndarray:
    # prox of kappa * check_tau at v
    return v - np.clip(v, (tau - 1.0) * kappa, tau * kappa)


def _block_soft(v: np.ndarray, thresh: float) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm <= thresh or nrm == 0.0:
        return np.zeros_like(v)
    return (1.0 - thresh / nrm) * v


def lasso_pg(
    X: np.ndarray,
    y: np.ndarray,
    lam: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 10000,
):
    """Accelerated proximal gradient with backtracking for the lasso.

    Minimizes ``(1/2n) sum (y_i - x_i'b - b0)^2 + sum_l lam_l |b_l|``
    with the intercept unpenalized (profiled out by centering). A
    monotone safeguard falls back to a plain descent step whenever the
    accelerated candidate would increase the objective, so the recorded
    objective trace is non-increasing.

    Returns ``(beta, intercept, trace, n_iter, kkt, converged)`` where
    ``kkt`` is the largest violation of the soft-threshold stationarity
    condition at the output.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = X.shape
    lam = np.ascontiguousarray(np.broadcast_to(lam, (d,)), dtype=np.float64)
    xm = X.mean(axis=0) if d else np.zeros(0)
    ym = float(y.mean())
    if d == 0:
        c0 = 0.5 * float(np.mean((y - ym) ** 2))
        return np.zeros(0), ym, np.array([c0]), 0, 0.0, True

    Xc = X - xm
    yc = y - ym
    G = Xc.T @ Xc / n
    q = Xc.T @ yc / n
    c0 = 0.5 * float(yc @ yc) / n

    def smooth(b):
        return 0.5 * float(b @ (G @ b)) - float(q @ b) + c0

    def objective(b):
        return smooth(b) + float(lam @ np.abs(b))

    def kkt_residual(b):
        g = G @ b - q
        nz = b != 0.0
        viol = np.where(
            nz, np.abs(g + lam * np.sign(b)), np.maximum(np.abs(g) - lam, 0.0)
        )
        return float(viol.max())

    lip = float(np.linalg.eigvalsh(G)[-1]) if d > 1 else float(G[0, 0])
    step = 1.0 / max(lip, 1e-12)

    beta = np.zeros(d)
    z = beta.copy()
    t = 1.0
    obj = objective(beta)
    trace = [obj]
    kkt = kkt_residual(beta)
    converged = kkt <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        gz = G @ z - q
        fz = smooth(z)
        while True:
            cand = _soft(z - step * gz, step * lam)
            diff = cand - z
            f_cand = smooth(cand)
            # backtracking on the majorization of the smooth part
            if f_cand <= fz + float(gz @ diff) + 0.5 / step * float(diff @ diff) + 1e-12:
                break
            step *= 0.5
        obj_cand = f_cand + float(lam @ np.abs(cand))
        if obj_cand > obj:
            # monotone fallback: plain step from the current iterate
            gb = G @ beta - q
            fb = smooth(beta)
            while True:
                cand = _soft(beta - step * gb, step * lam)
                diff = cand - beta
                f_cand = smooth(cand)
                if f_cand <= fb + float(gb @ diff) + 0.5 / step * float(diff @ diff) + 1e-12:
                    break
                step *= 0.5
            obj_cand = f_cand + float(lam @ np.abs(cand))
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = cand + ((t - 1.0) / t_next) * (cand - beta)
        t = t_next
        stalled = obj - obj_cand <= 1e-15 * max(1.0, abs(obj))
        beta = cand
        obj = min(obj, obj_cand)
        trace.append(obj)
        kkt = kkt_residual(beta)
        if kkt <= tol:
            converged = True
        elif stalled and it > 20:
            break
    if not converged:
        # active-set polish: exact stationarity solve on the support
        beta, obj, kkt = _active_set_polish(G, q, lam, beta, obj, c0, kkt)
        trace.append(obj)
        converged = kkt <= tol
    intercept = ym - float(xm @ beta)
    return beta, intercept, np.asarray(trace), it, kkt, converged


def _active_set_polish(G, q, lam, beta, obj, c0, kkt):
    """Solve the sign-fixed stationarity system on the detected support.

    Accepted only when the signs survive and no inactive coordinate
    violates its bound, so the result is the exact minimizer whenever
    the support was already correct.
    """
    active = np.nonzero(beta)[0]
    if active.size == 0:
        return beta, obj, kkt
    signs = np.sign(beta[active])
    try:
        x = np.linalg.solve(
            G[np.ix_(active, active)], q[active] - lam[active] * signs
        )
    except np.linalg.LinAlgError:
        return beta, obj, kkt
    if np.any(np.sign(x) != signs):
        return beta, obj, kkt
    cand = np.zeros_like(beta)
    cand[active] = x
    g = G @ cand - q
    inactive = np.setdiff1d(np.arange(beta.size), active)
    if inactive.size and np.any(np.abs(g[inactive]) > lam[inactive] + 1e-12):
        return beta, obj, kkt
    cand_obj = 0.5 * float(cand @ (G @ cand)) - float(q @ cand) + c0 + float(
        lam @ np.abs(cand)
    )
    if cand_obj > obj:
        return beta, obj, kkt
    nz = cand != 0.0
    viol = np.where(
        nz, np.abs(g + lam * np.sign(cand)), np.maximum(np.abs(g) - lam, 0.0)
    )
    return cand, cand_obj, float(viol.max())


def qr_admm(
    Z: np.ndarray,
    y: np.ndarray,
    tau: float,
    lam: np.ndarray,
    rho: float = 1.0,
    alpha: float = 1.8,
    tol: float = 1e-7,
    max_iter: int = 20000,
):
    """Scaled ADMM for l1-penalized quantile regression at one level.

    Minimizes ``(1/n) sum check_tau(y_i - z_i'g - b) + sum_l lam_l |g_l|``
    via the splitting ``r = y - Zg - b``, ``w = g``. The quadratic block
    is solved through a Cholesky factor that is independent of ``rho``,
    so residual-balancing updates of ``rho`` need no refactorization.

    Returns ``(gamma, b, n_iter, converged)`` with ``gamma`` taken from
    the soft-threshold copy (exact zeros).
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = Z.shape
    lam = np.ascontiguousarray(np.broadcast_to(lam, (d,)), dtype=np.float64)
    A = np.concatenate([Z, np.ones((n, 1))], axis=1)
    M = A.T @ A
    M[np.arange(d), np.arange(d)] += 1.0
    chol = cho_factor(M, lower=True)

    # warm start at the intercept-only solution
    r = y - np.quantile(y, tau)
    w = np.zeros(d)
    u = np.zeros(n)
    v = np.zeros(d)
    y_norm = float(np.linalg.norm(y))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        rhs = A.T @ (y - r + u)
        rhs[:d] += w - v
        theta = cho_solve(chol, rhs)
        gamma = theta[:d]
        b = theta[d]
        c = y - A @ theta
        c_hat = alpha * c + (1.0 - alpha) * r
        r_prev, w_prev = r, w
        r = _prox_check(c_hat + u, tau, 1.0 / (n * rho))
        u = u + c_hat - r
        g_hat = alpha * gamma + (1.0 - alpha) * w
        w = _soft(g_hat + v, lam / rho)
        v = v + g_hat - w

        pri = np.sqrt(
            float(np.sum((c - r) ** 2)) + float(np.sum((gamma - w) ** 2))
        )
        s_theta = A.T @ (r - r_prev)
        s_theta[:d] -= w - w_prev
        dual = rho * float(np.linalg.norm(s_theta))
        ax = np.sqrt(float(np.sum(c**2)) + float(np.sum(gamma**2)))
        zn = np.sqrt(float(np.sum(r**2)) + float(np.sum(w**2)))
        eps_pri = np.sqrt(n + d) * tol + tol * max(ax, zn, y_norm)
        du = A.T @ u
        du[:d] += v
        eps_dual = np.sqrt(d + 1) * tol + tol * rho * float(np.linalg.norm(du))
        if pri <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if it % 10 == 0:
            pr, dr = pri / eps_pri, dual / eps_dual
            if pr > 10.0 * dr and rho < 1e8:
                rho *= 2.0
                u *= 0.5
                v *= 0.5
            elif dr > 10.0 * pr and rho > 1e-8:
                rho *= 0.5
                u *= 2.0
                v *= 2.0
    return w, float(b), it, converged


def cqr_fused_admm(
    Z: np.ndarray,
    y: np.ndarray,
    taus: np.ndarray,
    lam2: float,
    fuse_w: np.ndarray,
    rho: float = 1.0,
    alpha: float = 1.8,
    tol: float = 1e-7,
    max_iter: int = 20000,
):
    """Scaled ADMM for composite quantile regression with fusion weights.

    Minimizes, over coefficient vectors ``g_k`` and intercepts ``b_k``,

        sum_k [ (1/n) sum_i check_{tau_k}(y_i - z_i'g_k - b_k)
                + lam2 ||g_k||_1 ] + sum_k fuse_w[k] ||g_k - g_{k+1}||_2

    with the cyclic convention ``g_{K+1} = g_1``. Splitting introduces a
    residual matrix per level, an l1 copy per level, and a difference
    copy per cyclic pair; the difference copies come out of a block
    soft-threshold, so fully fused pairs are exact zeros there.

    Returns ``(W, b, D, n_iter, converged)`` where ``W`` is ``(K, d)``
    (the l1 copies), ``b`` is ``(K,)`` and ``D`` is ``(K, d)`` with row
    k holding the fused-difference copy for the pair (k, k+1).
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.float64)
    n, d = Z.shape
    K = len(taus)
    fuse_w = np.ascontiguousarray(np.broadcast_to(fuse_w, (K,)), dtype=np.float64)

    G = Z.T @ Z
    s = Z.sum(axis=0)
    lap = 2.0 * np.eye(K)
    for k in range(K):
        lap[k, (k + 1) % K] -= 1.0
        lap[(k + 1) % K, k] -= 1.0
    m = K * (d + 1)
    H = np.zeros((m, m))
    for k in range(K):
        i0 = k * (d + 1)
        H[i0 : i0 + d, i0 : i0 + d] = G + (1.0 + lap[k, k]) * np.eye(d)
        H[i0 : i0 + d, i0 + d] = s
        H[i0 + d, i0 : i0 + d] = s
        H[i0 + d, i0 + d] = n
        for l in range(K):
            if l != k and lap[k, l] != 0.0:
                j0 = l * (d + 1)
                H[i0 : i0 + d, j0 : j0 + d] += lap[k, l] * np.eye(d)
    chol = cho_factor(H, lower=True)

    R = np.empty((n, K))
    for k in range(K):
        R[:, k] = y - np.quantile(y, taus[k])
    W = np.zeros((d, K))
    D = np.zeros((d, K))
    U = np.zeros((n, K))
    V = np.zeros((d, K))
    E = np.zeros((d, K))
    nxt = [(k + 1) % K for k in range(K)]
    prv = [(k - 1) % K for k in range(K)]
    y_norm = float(np.linalg.norm(y)) * np.sqrt(K)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        rhs = np.empty(m)
        T = y[:, None] - R + U
        WV = W - V
        DE = D - E
        for k in range(K):
            i0 = k * (d + 1)
            rhs[i0 : i0 + d] = Z.T @ T[:, k] + WV[:, k] + DE[:, k] - DE[:, prv[k]]
            rhs[i0 + d] = T[:, k].sum()
        theta = cho_solve(chol, rhs)
        theta = theta.reshape(K, d + 1)
        Gam = theta[:, :d].T
        b = theta[:, d]

        C = y[:, None] - Z @ Gam - b[None, :]
        C_hat = alpha * C + (1.0 - alpha) * R
        R_prev, W_prev, D_prev = R, W, D
        R = np.empty_like(R_prev)
        kap = 1.0 / (n * rho)
        for k in range(K):
            R[:, k] = _prox_check(C_hat[:, k] + U[:, k], taus[k], kap)
        U = U + C_hat - R

        G_hat = alpha * Gam + (1.0 - alpha) * W
        W = _soft(G_hat + V, lam2 / rho)
        V = V + G_hat - W

        diffs = Gam - Gam[:, nxt]
        D_hat = alpha * diffs + (1.0 - alpha) * D
        D = np.empty_like(D_prev)
        for k in range(K):
            D[:, k] = _block_soft(D_hat[:, k] + E[:, k], fuse_w[k] / rho)
        E = E + D_hat - D

        pri = np.sqrt(
            float(np.sum((C - R) ** 2))
            + float(np.sum((Gam - W) ** 2))
            + float(np.sum((diffs - D) ** 2))
        )
        dR = R - R_prev
        dW = W - W_prev
        dD = D - D_prev
        s_theta = np.empty(m)
        for k in range(K):
            i0 = k * (d + 1)
            s_theta[i0 : i0 + d] = (
                Z.T @ dR[:, k] - dW[:, k] - dD[:, k] + dD[:, prv[k]]
            )
            s_theta[i0 + d] = dR[:, k].sum()
        dual = rho * float(np.linalg.norm(s_theta))
        ax = np.sqrt(
            float(np.sum(C**2)) + float(np.sum(Gam**2)) + float(np.sum(diffs**2))
        )
        zn = np.sqrt(
            float(np.sum(R**2)) + float(np.sum(W**2)) + float(np.sum(D**2))
        )
        eps_pri = np.sqrt(K * (n + 2 * d)) * tol + tol * max(ax, zn, y_norm)
        s_vec = np.empty(m)
        for k in range(K):
            i0 = k * (d + 1)
            s_vec[i0 : i0 + d] = Z.T @ U[:, k] + V[:, k] + E[:, k] - E[:, prv[k]]
            s_vec[i0 + d] = U[:, k].sum()
        eps_dual = np.sqrt(m) * tol + tol * rho * float(np.linalg.norm(s_vec))
        if pri <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if it % 10 == 0:
            pr, dr = pri / eps_pri, dual / eps_dual
            if pr > 10.0 * dr and rho < 1e8:
                rho *= 2.0
                U *= 0.5
                V *= 0.5
                E *= 0.5
            elif dr > 10.0 * pr and rho > 1e-8:
                rho *= 0.5
                U *= 2.0
                V *= 2.0
                E *= 2.0
    return W.T.copy(), b.copy(), D.T.copy(), it, converged
