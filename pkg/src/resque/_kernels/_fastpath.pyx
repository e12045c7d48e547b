# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled solver kernels: same algorithms as ``numpy_impl``.

Setup work (Gram matrices, Cholesky factors, spectral norms) runs
through NumPy/SciPy; the iteration loops run as C with BLAS/LAPACK
calls, which removes the per-iteration Python overhead that dominates
the pure backend on small designs.
"""

import numpy as np
from scipy.linalg import cho_factor

cimport numpy as cnp
from libc.math cimport fabs, sqrt, log
from scipy.linalg.cython_blas cimport dgemv, ddot, dnrm2
from scipy.linalg.cython_lapack cimport dpotrs

cnp.import_array()

BACKEND = "cython"


cdef inline double _soft1(double x, double t) noexcept nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef void _matvec(double[:, ::1] A, double[::1] x, double[::1] out) noexcept nogil:
    # out = A @ x for C-contiguous A (n x d)
    cdef int n = A.shape[0]
    cdef int d = A.shape[1]
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    if n == 0 or d == 0:
        return
    dgemv("T", &d, &n, &one, &A[0, 0], &d, &x[0], &inc, &zero, &out[0], &inc)


cdef void _rmatvec(double[:, ::1] A, double[::1] r, double[::1] out) noexcept nogil:
    # out = A.T @ r
    cdef int n = A.shape[0]
    cdef int d = A.shape[1]
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    if n == 0 or d == 0:
        return
    dgemv("N", &d, &n, &one, &A[0, 0], &d, &r[0], &inc, &zero, &out[0], &inc)


cdef double _nrm2(double[::1] x) noexcept nogil:
    cdef int n = x.shape[0]
    cdef int inc = 1
    if n == 0:
        return 0.0
    return dnrm2(&n, &x[0], &inc)


cdef double _dot(double[::1] x, double[::1] y) noexcept nogil:
    cdef int n = x.shape[0]
    cdef int inc = 1
    if n == 0:
        return 0.0
    return ddot(&n, &x[0], &inc, &y[0], &inc)


cdef int _chol_solve(double[:, ::1] factor, double[::1] b) noexcept nogil:
    # factor: numpy lower-Cholesky of M, C-contiguous; in Fortran view it
    # is the upper factor U with M = U'U, so uplo="U" applies.
    cdef int m = factor.shape[0]
    cdef int one = 1
    cdef int info = 0
    dpotrs("U", &m, &one, &factor[0, 0], &m, &b[0], &m, &info)
    return info


def lasso_pg(X, y, lam, double tol=1e-8, int max_iter=10000):
    """Accelerated proximal gradient with backtracking; Gram form."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    cdef int n = X.shape[0]
    cdef int d = X.shape[1]
    lam_arr = np.array(np.broadcast_to(lam, (d,)), dtype=np.float64)
    xm = X.mean(axis=0) if d else np.zeros(0)
    cdef double ym = float(y_arr.mean())
    if d == 0:
        c0_empty = 0.5 * float(np.mean((y_arr - ym) ** 2))
        return np.zeros(0), ym, np.array([c0_empty]), 0, 0.0, True

    Xc = X - xm
    yc = y_arr - ym
    G_arr = np.ascontiguousarray(Xc.T @ Xc / n)
    q_arr = np.ascontiguousarray(Xc.T @ yc / n)
    cdef double c0 = 0.5 * float(yc @ yc) / n
    cdef double lip
    if d > 1:
        lip = float(np.linalg.eigvalsh(G_arr)[-1])
    else:
        lip = float(G_arr[0, 0])
    cdef double step = 1.0 / max(lip, 1e-12)

    cdef double[:, ::1] G = G_arr
    cdef double[::1] q = q_arr
    cdef double[::1] lamv = lam_arr

    trace_arr = np.empty(max_iter + 1)
    cdef double[::1] trace = trace_arr
    beta_arr = np.zeros(d)
    cdef double[::1] beta = beta_arr
    z_arr = np.zeros(d)
    cdef double[::1] z = z_arr
    cand_arr = np.zeros(d)
    cdef double[::1] cand = cand_arr
    g_arr = np.zeros(d)
    cdef double[::1] g = g_arr
    tmp_arr = np.zeros(d)
    cdef double[::1] tmp = tmp_arr

    cdef double obj, kkt, t, t_next, fz, f_cand, obj_cand, lin, quad, pen, gl, viol
    cdef bint converged, stalled
    cdef int it = 0
    cdef int l

    with nogil:
        # objective and kkt at zero
        obj = c0
        kkt = 0.0
        for l in range(d):
            viol = fabs(q[l]) - lamv[l]
            if viol > kkt:
                kkt = viol
        converged = kkt <= tol
        t = 1.0
        while not converged and it < max_iter:
            if it == 0:
                trace[0] = obj
            it += 1
            # gradient at z
            _matvec(G, z, g)
            for l in range(d):
                g[l] -= q[l]
            fz = 0.5 * (_dot(z, g) - _dot(z, q)) + c0
            while True:
                pen = 0.0
                lin = 0.0
                quad = 0.0
                for l in range(d):
                    cand[l] = _soft1(z[l] - step * g[l], step * lamv[l])
                    tmp[l] = cand[l] - z[l]
                    lin += g[l] * tmp[l]
                    quad += tmp[l] * tmp[l]
                    pen += lamv[l] * fabs(cand[l])
                _matvec(G, cand, tmp)
                f_cand = 0.5 * _dot(cand, tmp) - _dot(cand, q) + c0
                if f_cand <= fz + lin + 0.5 / step * quad + 1e-12:
                    break
                step *= 0.5
            obj_cand = f_cand + pen
            if obj_cand > obj:
                # monotone fallback from beta
                _matvec(G, beta, g)
                for l in range(d):
                    g[l] -= q[l]
                fz = 0.5 * (_dot(beta, g) - _dot(beta, q)) + c0
                while True:
                    pen = 0.0
                    lin = 0.0
                    quad = 0.0
                    for l in range(d):
                        cand[l] = _soft1(beta[l] - step * g[l], step * lamv[l])
                        tmp[l] = cand[l] - beta[l]
                        lin += g[l] * tmp[l]
                        quad += tmp[l] * tmp[l]
                        pen += lamv[l] * fabs(cand[l])
                    _matvec(G, cand, tmp)
                    f_cand = 0.5 * _dot(cand, tmp) - _dot(cand, q) + c0
                    if f_cand <= fz + lin + 0.5 / step * quad + 1e-12:
                        break
                    step *= 0.5
                obj_cand = f_cand + pen
                t = 1.0
            t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            for l in range(d):
                tmp[l] = cand[l] + ((t - 1.0) / t_next) * (cand[l] - beta[l])
            t = t_next
            stalled = (obj - obj_cand) <= 1e-15 * (1.0 if obj < 1.0 else obj)
            for l in range(d):
                beta[l] = cand[l]
                z[l] = tmp[l]
            if obj_cand < obj:
                obj = obj_cand
            trace[it] = obj
            # kkt at beta
            _matvec(G, beta, g)
            kkt = 0.0
            for l in range(d):
                gl = g[l] - q[l]
                if beta[l] > 0.0:
                    viol = fabs(gl + lamv[l])
                elif beta[l] < 0.0:
                    viol = fabs(gl - lamv[l])
                else:
                    viol = fabs(gl) - lamv[l]
                    if viol < 0.0:
                        viol = 0.0
                if viol > kkt:
                    kkt = viol
            if kkt <= tol:
                converged = True
            elif stalled and it > 20:
                break

    if it == 0:
        trace_arr[0] = obj
    n_trace = it + 1
    if not converged:
        beta_arr, obj_p, kkt = _polish(G_arr, q_arr, lam_arr, beta_arr, float(obj), c0, float(kkt))
        trace_arr[n_trace - 1] = min(trace_arr[n_trace - 1], obj_p)
        converged = kkt <= tol
    intercept = ym - float(xm @ beta_arr)
    return beta_arr, intercept, trace_arr[:n_trace].copy(), it, kkt, bool(converged)


def _polish(G, q, lam, beta, double obj, double c0, double kkt):
    # active-set polish: exact stationarity solve on the detected support
    active = np.nonzero(beta)[0]
    if active.size == 0:
        return beta, obj, kkt
    signs = np.sign(beta[active])
    try:
        x = np.linalg.solve(G[np.ix_(active, active)], q[active] - lam[active] * signs)
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
    cand_obj = 0.5 * float(cand @ (G @ cand)) - float(q @ cand) + c0 + float(lam @ np.abs(cand))
    if cand_obj > obj:
        return beta, obj, kkt
    nz = cand != 0.0
    viol = np.where(nz, np.abs(g + lam * np.sign(cand)), np.maximum(np.abs(g) - lam, 0.0))
    return cand, cand_obj, float(viol.max())


def qr_admm(Z, y, double tau, lam, double rho=1.0, double alpha=1.8,
            double tol=1e-7, int max_iter=20000):
    """Scaled ADMM for weighted-l1 quantile regression at one level."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    cdef int n = Z.shape[0]
    cdef int d = Z.shape[1]
    lam_arr = np.array(np.broadcast_to(lam, (d,)), dtype=np.float64)
    A_arr = np.ascontiguousarray(np.concatenate([Z, np.ones((n, 1))], axis=1))
    M = A_arr.T @ A_arr
    M[np.arange(d), np.arange(d)] += 1.0
    factor_arr = np.ascontiguousarray(cho_factor(M, lower=True)[0])

    r_arr = y_arr - np.quantile(y_arr, tau)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] factor = factor_arr
    cdef double[::1] yv = y_arr
    cdef double[::1] lamv = lam_arr
    cdef double[::1] r = r_arr
    w_arr = np.zeros(d)
    cdef double[::1] w = w_arr
    u_arr = np.zeros(n)
    cdef double[::1] u = u_arr
    v_arr = np.zeros(d)
    cdef double[::1] v = v_arr
    rhs_arr = np.zeros(d + 1)
    cdef double[::1] rhs = rhs_arr
    c_arr = np.zeros(n)
    cdef double[::1] c = c_arr
    atv_arr = np.zeros(n)
    cdef double[::1] atv = atv_arr
    rprev_arr = np.zeros(n)
    cdef double[::1] r_prev = rprev_arr
    wprev_arr = np.zeros(d)
    cdef double[::1] w_prev = wprev_arr
    s_arr = np.zeros(d + 1)
    cdef double[::1] s_theta = s_arr

    cdef double y_norm = float(np.linalg.norm(y_arr))
    cdef bint converged = False
    cdef double kap, b, pri, dual, ax, zn, eps_pri, eps_dual, vv, gh, ch, acc, pr, dr
    cdef int it = 0
    cdef int i, l, info
    cdef double b_out = 0.0

    with nogil:
        for it in range(1, max_iter + 1):
            # rhs = A.T (y - r + u); rhs[:d] += w - v
            for i in range(n):
                atv[i] = yv[i] - r[i] + u[i]
            _rmatvec(A, atv, rhs)
            for l in range(d):
                rhs[l] += w[l] - v[l]
            info = _chol_solve(factor, rhs)
            # c = y - A theta
            _matvec(A, rhs, atv)
            for i in range(n):
                c[i] = yv[i] - atv[i]
            b_out = rhs[d]
            kap = 1.0 / (n * rho)
            pri = 0.0
            for i in range(n):
                r_prev[i] = r[i]
                ch = alpha * c[i] + (1.0 - alpha) * r[i]
                vv = ch + u[i]
                r[i] = vv - _clip(vv, (tau - 1.0) * kap, tau * kap)
                u[i] = u[i] + ch - r[i]
                acc = c[i] - r[i]
                pri += acc * acc
            for l in range(d):
                w_prev[l] = w[l]
                gh = alpha * rhs[l] + (1.0 - alpha) * w[l]
                w[l] = _soft1(gh + v[l], lamv[l] / rho)
                v[l] = v[l] + gh - w[l]
                acc = rhs[l] - w[l]
                pri += acc * acc
            pri = sqrt(pri)
            # dual residual
            for i in range(n):
                atv[i] = r[i] - r_prev[i]
            _rmatvec(A, atv, s_theta)
            for l in range(d):
                s_theta[l] -= w[l] - w_prev[l]
            dual = rho * _nrm2(s_theta)
            ax = 0.0
            for i in range(n):
                ax += c[i] * c[i]
            for l in range(d):
                ax += rhs[l] * rhs[l]
            ax = sqrt(ax)
            zn = 0.0
            for i in range(n):
                zn += r[i] * r[i]
            for l in range(d):
                zn += w[l] * w[l]
            zn = sqrt(zn)
            eps_pri = sqrt(<double>(n + d)) * tol + tol * max(max(ax, zn), y_norm)
            _rmatvec(A, u, s_theta)
            for l in range(d):
                s_theta[l] += v[l]
            eps_dual = sqrt(<double>(d + 1)) * tol + tol * rho * _nrm2(s_theta)
            if pri <= eps_pri and dual <= eps_dual:
                converged = True
                break
            if it % 10 == 0:
                pr = pri / eps_pri
                dr = dual / eps_dual
                if pr > 10.0 * dr and rho < 1e8:
                    rho *= 2.0
                    for i in range(n):
                        u[i] *= 0.5
                    for l in range(d):
                        v[l] *= 0.5
                elif dr > 10.0 * pr and rho > 1e-8:
                    rho *= 0.5
                    for i in range(n):
                        u[i] *= 2.0
                    for l in range(d):
                        v[l] *= 2.0
    return w_arr, float(b_out), it, bool(converged)


def cqr_fused_admm(Z, y, taus, double lam2, fuse_w, double rho=1.0,
                   double alpha=1.8, double tol=1e-7, int max_iter=20000):
    """Scaled ADMM for composite quantile regression with fusion weights."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    taus_arr = np.ascontiguousarray(taus, dtype=np.float64)
    cdef int n = Z.shape[0]
    cdef int d = Z.shape[1]
    cdef int K = taus_arr.shape[0]
    fw_arr = np.array(np.broadcast_to(fuse_w, (K,)), dtype=np.float64)

    G = Z.T @ Z
    s_col = Z.sum(axis=0)
    lap = 2.0 * np.eye(K)
    for kk in range(K):
        lap[kk, (kk + 1) % K] -= 1.0
        lap[(kk + 1) % K, kk] -= 1.0
    m = K * (d + 1)
    H = np.zeros((m, m))
    for kk in range(K):
        a0 = kk * (d + 1)
        H[a0 : a0 + d, a0 : a0 + d] = G + (1.0 + lap[kk, kk]) * np.eye(d)
        H[a0 : a0 + d, a0 + d] = s_col
        H[a0 + d, a0 : a0 + d] = s_col
        H[a0 + d, a0 + d] = n
        for ll in range(K):
            if ll != kk and lap[kk, ll] != 0.0:
                b0 = ll * (d + 1)
                H[a0 : a0 + d, b0 : b0 + d] += lap[kk, ll] * np.eye(d)
    factor_arr = np.ascontiguousarray(cho_factor(H, lower=True)[0])

    R_arr = np.empty((K, n))
    for kk in range(K):
        R_arr[kk] = y_arr - np.quantile(y_arr, taus_arr[kk])

    cdef double[:, ::1] Zv = Z
    cdef double[::1] yv = y_arr
    cdef double[::1] tv = taus_arr
    cdef double[::1] fw = fw_arr
    cdef double[:, ::1] factor = factor_arr
    cdef double[:, ::1] R = R_arr
    W_arr = np.zeros((K, d))
    cdef double[:, ::1] W = W_arr
    D_arr = np.zeros((K, d))
    cdef double[:, ::1] D = D_arr
    U_arr = np.zeros((K, n))
    cdef double[:, ::1] U = U_arr
    V_arr = np.zeros((K, d))
    cdef double[:, ::1] V = V_arr
    E_arr = np.zeros((K, d))
    cdef double[:, ::1] E = E_arr
    Gam_arr = np.zeros((K, d))
    cdef double[:, ::1] Gam = Gam_arr
    b_arr = np.zeros(K)
    cdef double[::1] b = b_arr
    rhs_arr = np.zeros(m)
    cdef double[::1] rhs = rhs_arr
    tmpn_arr = np.zeros(n)
    cdef double[::1] tmpn = tmpn_arr
    tmpd_arr = np.zeros(d)
    cdef double[::1] tmpd = tmpd_arr
    C_arr = np.zeros((K, n))
    cdef double[:, ::1] C = C_arr
    Rp_arr = np.zeros((K, n))
    cdef double[:, ::1] R_prev = Rp_arr
    Wp_arr = np.zeros((K, d))
    cdef double[:, ::1] W_prev = Wp_arr
    Dp_arr = np.zeros((K, d))
    cdef double[:, ::1] D_prev = Dp_arr
    diffs_arr = np.zeros((K, d))
    cdef double[:, ::1] diffs = diffs_arr

    cdef double y_norm = float(np.linalg.norm(y_arr)) * sqrt(K)
    cdef bint converged = False
    cdef double kap, pri, dual, ax, zn, eps_pri, eps_dual, vv, ch, gh, dh, acc, nrm, thr, pr, dr
    cdef int it = 0
    cdef int i, l, k2, nxt, prv, i0, info

    with nogil:
        for it in range(1, max_iter + 1):
            # rhs assembly
            for k2 in range(K):
                i0 = k2 * (d + 1)
                for i in range(n):
                    tmpn[i] = yv[i] - R[k2, i] + U[k2, i]
                _rmatvec(Zv, tmpn, tmpd)
                prv = (k2 - 1) % K
                if prv < 0:
                    prv += K
                acc = 0.0
                for i in range(n):
                    acc += tmpn[i]
                for l in range(d):
                    rhs[i0 + l] = (
                        tmpd[l]
                        + (W[k2, l] - V[k2, l])
                        + (D[k2, l] - E[k2, l])
                        - (D[prv, l] - E[prv, l])
                    )
                rhs[i0 + d] = acc
            info = _chol_solve(factor, rhs)
            for k2 in range(K):
                i0 = k2 * (d + 1)
                for l in range(d):
                    Gam[k2, l] = rhs[i0 + l]
                b[k2] = rhs[i0 + d]
            # residual blocks
            kap = 1.0 / (n * rho)
            pri = 0.0
            for k2 in range(K):
                for l in range(d):
                    tmpd[l] = Gam[k2, l]
                _matvec(Zv, tmpd, tmpn)
                for i in range(n):
                    C[k2, i] = yv[i] - tmpn[i] - b[k2]
                    R_prev[k2, i] = R[k2, i]
                    ch = alpha * C[k2, i] + (1.0 - alpha) * R[k2, i]
                    vv = ch + U[k2, i]
                    R[k2, i] = vv - _clip(vv, (tv[k2] - 1.0) * kap, tv[k2] * kap)
                    U[k2, i] = U[k2, i] + ch - R[k2, i]
                    acc = C[k2, i] - R[k2, i]
                    pri += acc * acc
            for k2 in range(K):
                for l in range(d):
                    W_prev[k2, l] = W[k2, l]
                    gh = alpha * Gam[k2, l] + (1.0 - alpha) * W[k2, l]
                    W[k2, l] = _soft1(gh + V[k2, l], lam2 / rho)
                    V[k2, l] = V[k2, l] + gh - W[k2, l]
                    acc = Gam[k2, l] - W[k2, l]
                    pri += acc * acc
            for k2 in range(K):
                nxt = (k2 + 1) % K
                nrm = 0.0
                for l in range(d):
                    diffs[k2, l] = Gam[k2, l] - Gam[nxt, l]
                    D_prev[k2, l] = D[k2, l]
                    tmpd[l] = alpha * diffs[k2, l] + (1.0 - alpha) * D[k2, l] + E[k2, l]
                    nrm += tmpd[l] * tmpd[l]
                nrm = sqrt(nrm)
                thr = fw[k2] / rho
                for l in range(d):
                    if nrm <= thr or nrm == 0.0:
                        D[k2, l] = 0.0
                    else:
                        D[k2, l] = (1.0 - thr / nrm) * tmpd[l]
                    dh = alpha * diffs[k2, l] + (1.0 - alpha) * D_prev[k2, l]
                    E[k2, l] = E[k2, l] + dh - D[k2, l]
                    acc = diffs[k2, l] - D[k2, l]
                    pri += acc * acc
            pri = sqrt(pri)
            # dual residual mapped into the quadratic block's space
            dual = 0.0
            for k2 in range(K):
                for i in range(n):
                    tmpn[i] = R[k2, i] - R_prev[k2, i]
                _rmatvec(Zv, tmpn, tmpd)
                prv = (k2 - 1) % K
                if prv < 0:
                    prv += K
                acc = 0.0
                for i in range(n):
                    acc += tmpn[i]
                dual += acc * acc
                for l in range(d):
                    vv = (
                        tmpd[l]
                        - (W[k2, l] - W_prev[k2, l])
                        - (D[k2, l] - D_prev[k2, l])
                        + (D[prv, l] - D_prev[prv, l])
                    )
                    dual += vv * vv
            dual = rho * sqrt(dual)
            ax = 0.0
            zn = 0.0
            for k2 in range(K):
                for i in range(n):
                    ax += C[k2, i] * C[k2, i]
                    zn += R[k2, i] * R[k2, i]
                for l in range(d):
                    ax += Gam[k2, l] * Gam[k2, l] + diffs[k2, l] * diffs[k2, l]
                    zn += W[k2, l] * W[k2, l] + D[k2, l] * D[k2, l]
            ax = sqrt(ax)
            zn = sqrt(zn)
            eps_pri = sqrt(<double>(K * (n + 2 * d))) * tol + tol * max(max(ax, zn), y_norm)
            acc = 0.0
            for k2 in range(K):
                for i in range(n):
                    tmpn[i] = U[k2, i]
                _rmatvec(Zv, tmpn, tmpd)
                prv = (k2 - 1) % K
                if prv < 0:
                    prv += K
                vv = 0.0
                for i in range(n):
                    vv += U[k2, i]
                acc += vv * vv
                for l in range(d):
                    vv = tmpd[l] + V[k2, l] + E[k2, l] - E[prv, l]
                    acc += vv * vv
            eps_dual = sqrt(<double>m) * tol + tol * rho * sqrt(acc)
            if pri <= eps_pri and dual <= eps_dual:
                converged = True
                break
            if it % 10 == 0:
                pr = pri / eps_pri
                dr = dual / eps_dual
                if pr > 10.0 * dr and rho < 1e8:
                    rho *= 2.0
                    for k2 in range(K):
                        for i in range(n):
                            U[k2, i] *= 0.5
                        for l in range(d):
                            V[k2, l] *= 0.5
                            E[k2, l] *= 0.5
                elif dr > 10.0 * pr and rho > 1e-8:
                    rho *= 0.5
                    for k2 in range(K):
                        for i in range(n):
                            U[k2, i] *= 2.0
                        for l in range(d):
                            V[k2, l] *= 2.0
                            E[k2, l] *= 2.0
    return W_arr, b_arr, D_arr, it, bool(converged)
