"""Compiled inner loops for the theta-scheme and its discrete adjoint.

Unknowns are the interior nodal values, interleaved per node as (eta_i, u_i),
so each step system is block tridiagonal with 2x2 blocks. With ``m`` interior
nodes the h1 operator is ``tridiag(ho, hd, ho)`` and the advection operator is
``tridiag(1/2, 0, -1/2)`` (skew on the interior).

Status codes returned by the marches: 0 ok, 1 Newton did not converge,
2 singular block pivot, 3 non-finite residual.
"""

import numpy as np
from numba import njit

OK, NO_CONVERGENCE, SINGULAR, NONFINITE = 0, 1, 2, 3


@njit(cache=True)
def h_apply(v, hd, ho, out):
    m = v.shape[0]
    for i in range(m):
        s = hd * v[i]
        if i > 0:
            s += ho * v[i - 1]
        if i < m - 1:
            s += ho * v[i + 1]
        out[i] = s


@njit(cache=True)
def b_apply(v, out):
    m = v.shape[0]
    for i in range(m):
        s = 0.0
        if i > 0:
            s += 0.5 * v[i - 1]
        if i < m - 1:
            s -= 0.5 * v[i + 1]
        out[i] = s


@njit(cache=True)
def block_factor(L, D, U, Dinv, X):
    """Block LU of a block-tridiagonal matrix; returns False on a singular pivot."""
    m = D.shape[0]
    scale = 0.0
    for i in range(m):
        for a in range(2):
            for b in range(2):
                if abs(D[i, a, b]) > scale:
                    scale = abs(D[i, a, b])
    if scale == 0.0:
        return False
    p00 = D[0, 0, 0]
    p01 = D[0, 0, 1]
    p10 = D[0, 1, 0]
    p11 = D[0, 1, 1]
    for i in range(m):
        if i > 0:
            # D'_i = D_i - L_i X_{i-1}
            l00, l01, l10, l11 = L[i, 0, 0], L[i, 0, 1], L[i, 1, 0], L[i, 1, 1]
            x00, x01, x10, x11 = X[i - 1, 0, 0], X[i - 1, 0, 1], X[i - 1, 1, 0], X[i - 1, 1, 1]
            p00 = D[i, 0, 0] - (l00 * x00 + l01 * x10)
            p01 = D[i, 0, 1] - (l00 * x01 + l01 * x11)
            p10 = D[i, 1, 0] - (l10 * x00 + l11 * x10)
            p11 = D[i, 1, 1] - (l10 * x01 + l11 * x11)
        det = p00 * p11 - p01 * p10
        if not np.isfinite(det) or abs(det) <= 1e-14 * scale * scale:
            return False
        i00 = p11 / det
        i01 = -p01 / det
        i10 = -p10 / det
        i11 = p00 / det
        Dinv[i, 0, 0] = i00
        Dinv[i, 0, 1] = i01
        Dinv[i, 1, 0] = i10
        Dinv[i, 1, 1] = i11
        if i < m - 1:
            u00, u01, u10, u11 = U[i, 0, 0], U[i, 0, 1], U[i, 1, 0], U[i, 1, 1]
            X[i, 0, 0] = i00 * u00 + i01 * u10
            X[i, 0, 1] = i00 * u01 + i01 * u11
            X[i, 1, 0] = i10 * u00 + i11 * u10
            X[i, 1, 1] = i10 * u01 + i11 * u11
    return True


@njit(cache=True)
def block_solve(L, Dinv, X, r1, r2, x1, x2):
    """Solve with factors from :func:`block_factor`; rhs/solution split by component."""
    m = Dinv.shape[0]
    y1 = 0.0
    y2 = 0.0
    for i in range(m):
        a1 = r1[i]
        a2 = r2[i]
        if i > 0:
            a1 -= L[i, 0, 0] * y1 + L[i, 0, 1] * y2
            a2 -= L[i, 1, 0] * y1 + L[i, 1, 1] * y2
        y1 = Dinv[i, 0, 0] * a1 + Dinv[i, 0, 1] * a2
        y2 = Dinv[i, 1, 0] * a1 + Dinv[i, 1, 1] * a2
        x1[i] = y1
        x2[i] = y2
    for i in range(m - 2, -1, -1):
        x1[i] -= X[i, 0, 0] * x1[i + 1] + X[i, 0, 1] * x2[i + 1]
        x2[i] -= X[i, 1, 0] * x1[i + 1] + X[i, 1, 1] * x2[i + 1]


@njit(cache=True)
def jacobian_blocks(eta, u, M, hd, ho, dt, theta, a, L, D, U):
    """Blocks of d(residual)/d(new state) at ``(eta, u)``.

    Column j of the advection operator carries the nodal factor of node j.
    """
    m = eta.shape[0]
    k = dt * theta
    for i in range(m):
        for j in range(i - 1, i + 2):
            if j < 0 or j >= m:
                continue
            if j == i:
                hij = hd
                bij = 0.0
            elif j == i - 1:
                hij = ho
                bij = 0.5
            else:
                hij = ho
                bij = -0.5
            Mj = M[j]
            b00 = hij * Mj - k * bij * (a * u[j] / Mj)
            b01 = -k * bij * (1.0 + a * eta[j] / Mj)
            b10 = -k * bij
            b11 = hij - k * bij * (a * u[j] / (Mj * Mj))
            if j == i:
                D[i, 0, 0] = b00
                D[i, 0, 1] = b01
                D[i, 1, 0] = b10
                D[i, 1, 1] = b11
            elif j == i - 1:
                L[i, 0, 0] = b00
                L[i, 0, 1] = b01
                L[i, 1, 0] = b10
                L[i, 1, 1] = b11
            else:
                U[i, 0, 0] = b00
                U[i, 0, 1] = b01
                U[i, 1, 0] = b10
                U[i, 1, 1] = b11


@njit(cache=True)
def transpose_blocks(L, D, U, Lt, Dt, Ut):
    m = D.shape[0]
    for i in range(m):
        for p in range(2):
            for q in range(2):
                Dt[i, p, q] = D[i, q, p]
                if i > 0:
                    Lt[i, p, q] = U[i - 1, q, p]
                if i < m - 1:
                    Ut[i, p, q] = L[i + 1, q, p]


@njit(cache=True)
def fluxes(eta, u, M, a, w, z):
    for i in range(eta.shape[0]):
        w[i] = u[i] + a * eta[i] * u[i] / M[i]
        q = u[i] / M[i]
        z[i] = eta[i] + 0.5 * a * q * q


@njit(cache=True)
def old_level_terms(eta0, u0, M, hd, ho, dt, theta, a, c1, c2, tmp1, tmp2, tmp3):
    """Parts of the residual that depend only on the previous level."""
    m = eta0.shape[0]
    for i in range(m):
        tmp3[i] = M[i] * eta0[i]
    h_apply(tmp3, hd, ho, c1)
    h_apply(u0, hd, ho, c2)
    fluxes(eta0, u0, M, a, tmp1, tmp2)
    b_apply(tmp1, tmp3)
    k = dt * (1.0 - theta)
    for i in range(m):
        c1[i] += k * tmp3[i]
    b_apply(tmp2, tmp3)
    for i in range(m):
        c2[i] += k * tmp3[i]


@njit(cache=True)
def residual(eta, u, M, hd, ho, dt, theta, a, c1, c2, r1, r2, w, z, tmp):
    """``R = P(x) - dt*theta*F(x) - c`` with ``c`` from :func:`old_level_terms`; returns inf-norm."""
    m = eta.shape[0]
    for i in range(m):
        tmp[i] = M[i] * eta[i]
    h_apply(tmp, hd, ho, r1)
    h_apply(u, hd, ho, r2)
    fluxes(eta, u, M, a, w, z)
    k = dt * theta
    b_apply(w, tmp)
    for i in range(m):
        r1[i] = r1[i] - k * tmp[i] - c1[i]
    b_apply(z, tmp)
    for i in range(m):
        r2[i] = r2[i] - k * tmp[i] - c2[i]
    nrm = 0.0
    for i in range(m):
        v = max(abs(r1[i]), abs(r2[i]))
        if not np.isfinite(v):
            return np.inf
        if v > nrm:
            nrm = v
    return nrm


@njit(cache=True)
def theta_step(eta0, u0, M, hd, ho, dt, theta, a, tol, max_iter, eta, u):
    """One step of the theta-scheme by Newton's method from the guess ``(eta0, u0)``.

    Writes the new level into ``eta``/``u``. Returns (status, iterations, residual).
    """
    m = eta0.shape[0]
    c1 = np.empty(m)
    c2 = np.empty(m)
    r1 = np.empty(m)
    r2 = np.empty(m)
    d1 = np.empty(m)
    d2 = np.empty(m)
    w = np.empty(m)
    z = np.empty(m)
    tmp = np.empty(m)
    tmp2 = np.empty(m)
    tmp3 = np.empty(m)
    L = np.zeros((m, 2, 2))
    D = np.zeros((m, 2, 2))
    U = np.zeros((m, 2, 2))
    Dinv = np.zeros((m, 2, 2))
    X = np.zeros((m, 2, 2))
    old_level_terms(eta0, u0, M, hd, ho, dt, theta, a, c1, c2, tmp, tmp2, tmp3)
    for i in range(m):
        eta[i] = eta0[i]
        u[i] = u0[i]
    return _newton(eta, u, M, hd, ho, dt, theta, a, tol, max_iter, c1, c2,
                   r1, r2, d1, d2, w, z, tmp, L, D, U, Dinv, X)


@njit(cache=True)
def _newton(eta, u, M, hd, ho, dt, theta, a, tol, max_iter, c1, c2,
            r1, r2, d1, d2, w, z, tmp, L, D, U, Dinv, X):
    m = eta.shape[0]
    res = residual(eta, u, M, hd, ho, dt, theta, a, c1, c2, r1, r2, w, z, tmp)
    it = 0
    while True:
        if not np.isfinite(res):
            return NONFINITE, it, res
        if res <= tol:
            return OK, it, res
        if it >= max_iter:
            return NO_CONVERGENCE, it, res
        jacobian_blocks(eta, u, M, hd, ho, dt, theta, a, L, D, U)
        if not block_factor(L, D, U, Dinv, X):
            return SINGULAR, it, res
        for i in range(m):
            r1[i] = -r1[i]
            r2[i] = -r2[i]
        block_solve(L, Dinv, X, r1, r2, d1, d2)
        for i in range(m):
            eta[i] += d1[i]
            u[i] += d2[i]
        it += 1
        res = residual(eta, u, M, hd, ho, dt, theta, a, c1, c2, r1, r2, w, z, tmp)


@njit(cache=True)
def march(eta_init, u_init, M, hd, ho, dt, theta, a, n_steps, tol, max_iter, linear,
          eta_out, u_out):
    """Time-march the scheme, filling ``eta_out``/``u_out`` of shape (n_steps+1, m).

    Returns (status, failing step index, last residual, total Newton iterations).
    On the linear path the step matrix is factored once and each step is a
    single solve.
    """
    m = eta_init.shape[0]
    c1 = np.empty(m)
    c2 = np.empty(m)
    r1 = np.empty(m)
    r2 = np.empty(m)
    d1 = np.empty(m)
    d2 = np.empty(m)
    w = np.empty(m)
    z = np.empty(m)
    tmp = np.empty(m)
    tmp2 = np.empty(m)
    tmp3 = np.empty(m)
    L = np.zeros((m, 2, 2))
    D = np.zeros((m, 2, 2))
    U = np.zeros((m, 2, 2))
    Dinv = np.zeros((m, 2, 2))
    X = np.zeros((m, 2, 2))
    eta = np.empty(m)
    u = np.empty(m)
    for i in range(m):
        eta_out[0, i] = eta_init[i]
        u_out[0, i] = u_init[i]
    if linear:
        jacobian_blocks(eta_init, u_init, M, hd, ho, dt, theta, 0.0, L, D, U)
        if not block_factor(L, D, U, Dinv, X):
            return SINGULAR, 0, np.inf, 0
    total = 0
    for n in range(n_steps):
        old_level_terms(eta_out[n], u_out[n], M, hd, ho, dt, theta, a, c1, c2, tmp, tmp2, tmp3)
        for i in range(m):
            eta[i] = eta_out[n, i]
            u[i] = u_out[n, i]
        if linear:
            res = residual(eta, u, M, hd, ho, dt, theta, a, c1, c2, r1, r2, w, z, tmp)
            if not np.isfinite(res):
                return NONFINITE, n, res, total
            for i in range(m):
                r1[i] = -r1[i]
                r2[i] = -r2[i]
            block_solve(L, Dinv, X, r1, r2, d1, d2)
            for i in range(m):
                eta[i] += d1[i]
                u[i] += d2[i]
            total += 1
        else:
            status, it, res = _newton(eta, u, M, hd, ho, dt, theta, a, tol, max_iter, c1, c2,
                                      r1, r2, d1, d2, w, z, tmp, L, D, U, Dinv, X)
            total += it
            if status != OK:
                return status, n, res, total
        for i in range(m):
            eta_out[n + 1, i] = eta[i]
            u_out[n + 1, i] = u[i]
    return OK, n_steps, 0.0, total


@njit(cache=True)
def _jy_transpose_apply(eta0, u0, M, hd, ho, dt, theta, a, l1, l2, o1, o2, t1, t2, t3, t4):
    """``o = J_y^T l`` where ``J_y`` is d(residual)/d(previous level)."""
    m = eta0.shape[0]
    k = dt * (1.0 - theta)
    h_apply(l1, hd, ho, t1)
    h_apply(l2, hd, ho, t2)
    # B^T = -B on the interior
    b_apply(l1, t3)
    b_apply(l2, t4)
    for j in range(m):
        bt1 = -t3[j]
        bt2 = -t4[j]
        Mj = M[j]
        o1[j] = -Mj * t1[j] - k * (a * u0[j] / Mj) * bt1 - k * bt2
        o2[j] = -k * (1.0 + a * eta0[j] / Mj) * bt1 - t2[j] - k * (a * u0[j] / (Mj * Mj)) * bt2


@njit(cache=True)
def adjoint_sweep(eta_traj, u_traj, M, hd, ho, dt, theta, a, linear, g_eta, g_u,
                  grad_M, mu_eta, mu_u):
    """Backward sweep of the discrete adjoint.

    ``g_eta``/``g_u`` hold dPhi/d(final state). Accumulates ``-sum_n J_M^T lambda_n``
    into ``grad_M`` and leaves dJ/d(initial state) in ``mu_eta``/``mu_u``.
    Returns a status code.
    """
    n_steps = eta_traj.shape[0] - 1
    m = eta_traj.shape[1]
    L = np.zeros((m, 2, 2))
    D = np.zeros((m, 2, 2))
    U = np.zeros((m, 2, 2))
    Lt = np.zeros((m, 2, 2))
    Dt = np.zeros((m, 2, 2))
    Ut = np.zeros((m, 2, 2))
    Dinv = np.zeros((m, 2, 2))
    X = np.zeros((m, 2, 2))
    l1 = np.empty(m)
    l2 = np.empty(m)
    t1 = np.empty(m)
    t2 = np.empty(m)
    t3 = np.empty(m)
    t4 = np.empty(m)
    o1 = np.empty(m)
    o2 = np.empty(m)
    for i in range(m):
        mu_eta[i] = g_eta[i]
        mu_u[i] = g_u[i]
    if linear:
        jacobian_blocks(eta_traj[0], u_traj[0], M, hd, ho, dt, theta, 0.0, L, D, U)
        transpose_blocks(L, D, U, Lt, Dt, Ut)
        if not block_factor(Lt, Dt, Ut, Dinv, X):
            return SINGULAR
    for n in range(n_steps - 1, -1, -1):
        eta1 = eta_traj[n + 1]
        u1 = u_traj[n + 1]
        eta0 = eta_traj[n]
        u0 = u_traj[n]
        if not linear:
            jacobian_blocks(eta1, u1, M, hd, ho, dt, theta, a, L, D, U)
            transpose_blocks(L, D, U, Lt, Dt, Ut)
            if not block_factor(Lt, Dt, Ut, Dinv, X):
                return SINGULAR
        block_solve(Lt, Dinv, X, mu_eta, mu_u, l1, l2)
        # grad_M -= J_M^T lambda
        h_apply(l1, hd, ho, t1)
        b_apply(l1, t3)
        b_apply(l2, t4)
        for j in range(m):
            Mj = M[j]
            g = t1[j] * (eta1[j] - eta0[j])
            if a != 0.0:
                bt1 = -t3[j]
                bt2 = -t4[j]
                g += dt * a / (Mj * Mj) * (theta * eta1[j] * u1[j]
                                           + (1.0 - theta) * eta0[j] * u0[j]) * bt1
                g += dt * a / (Mj * Mj * Mj) * (theta * u1[j] * u1[j]
                                                + (1.0 - theta) * u0[j] * u0[j]) * bt2
            grad_M[j] -= g
        _jy_transpose_apply(eta0, u0, M, hd, ho, dt, theta, a, l1, l2, o1, o2, t1, t2, t3, t4)
        for i in range(m):
            mu_eta[i] = -o1[i]
            mu_u[i] = -o2[i]
    return OK
