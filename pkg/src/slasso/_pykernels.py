"""Pure-Python/NumPy counterparts of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same return conventions. Used when the extension is not
built or when ``SLASSO_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np


def soft_threshold(z, t):
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def cholesky_lower(A):
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            return L, j
        L[j, j] = math.sqrt(s)
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L, -1


def jacobi_eigvals(A, tol, max_sweeps):
    a = np.array(A, dtype=np.float64, copy=True)
    n = a.shape[0]
    scale = math.sqrt(float(np.sum(a * a)))
    if scale == 0.0:
        return np.zeros(n), 0
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        off = float(np.sum(a[iu] ** 2))
        if off == 0.0 or math.sqrt(2.0 * off) <= tol * scale:
            return np.diag(a).copy(), sweep
        for i in range(n - 1):
            for j in range(i + 1, n):
                apq = a[i, j]
                if apq == 0.0:
                    continue
                app = a[i, i]
                aqq = a[j, j]
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[i, j] = 0.0
                    a[j, i] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                g = a[:, i].copy()
                h = a[:, j].copy()
                new_i = g - s * (h + g * tau)
                new_j = h + s * (g - h * tau)
                a[:, i] = new_i
                a[:, j] = new_j
                a[i, :] = new_i
                a[j, :] = new_j
                a[i, i] = app - t * apq
                a[j, j] = aqq + t * apq
                a[i, j] = 0.0
                a[j, i] = 0.0
    return np.diag(a).copy(), max_sweeps


def _tv_prox_into(y, x, lam):
    width = len(y)
    if width <= 0:
        return
    if lam <= 0.0:
        x[:] = y
        return
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam, minlam = 2.0 * lam, -lam
    while True:
        while k == width - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kminus = kplus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin, umax = lam, minlam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kminus = kplus = k0
                vmax = y[k0]
                vmin = vmax - twolam
                umin, umax = lam, minlam
            else:
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= minlam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = minlam


def tv_prox(v, gamma):
    y = [float(a) for a in np.asarray(v, dtype=np.float64)]
    x = [0.0] * len(y)
    _tv_prox_into(y, x, float(gamma))
    return np.array(x, dtype=np.float64)


def _prox(v, l1_weight, tv_weight):
    if tv_weight > 0.0:
        v = tv_prox(v, tv_weight)
    return soft_threshold(v, l1_weight)


def _kkt(x, Kx, c, lam):
    g = 2.0 * (Kx - c)
    r = np.where(
        x > 0.0,
        np.abs(g + lam),
        np.where(x < 0.0, np.abs(g - lam), np.maximum(np.abs(g) - lam, 0.0)),
    )
    return float(r.max()) if r.size else 0.0


def _tv(a):
    return float(np.abs(np.diff(a)).sum())


def fista_gram(K, c, yy, lam, gamma, beta0, lipschitz, max_iter, tol, restart):
    K = np.asarray(K, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    p = K.shape[0]
    L = float(lipschitz)
    x = np.array(beta0, dtype=np.float64, copy=True)
    trace = [0.0]
    if p == 0:
        return x, 0, True, 0.0, L, np.array(trace)
    fused = gamma > 0.0

    def residual(x, Kx, L):
        if fused:
            xn = _prox(x - 2.0 * (Kx - c) / L, lam / L, gamma / L)
            return float(np.max(np.abs(x - xn))) * L
        return _kkt(x, Kx, c, lam)

    Kx = K @ x
    y, Ky = x.copy(), Kx.copy()
    F = x @ Kx - 2.0 * (x @ c) + yy + lam * np.abs(x).sum() + gamma * _tv(x)
    trace[0] = F
    t = 1.0
    at_rest = True
    n_iter = 0
    converged = False
    resid = math.inf
    for it in range(max_iter):
        resid = residual(x, Kx, L)
        if resid <= tol:
            converged = True
            break
        f_y = y @ Ky - 2.0 * (y @ c) + yy
        grad_y = 2.0 * (Ky - c)
        refreshed = False
        while True:
            xn = _prox(y - grad_y / L, lam / L, gamma / L)
            Kxn = K @ xn
            quad, lin = xn @ Kxn, xn @ c
            f_new = quad - 2.0 * lin + yy
            slack = 1e-12 * (abs(quad) + 2.0 * abs(lin) + yy + 1.0)
            d = xn - y
            dd = d @ d
            quad_model = f_y + grad_y @ d + 0.5 * L * dd
            if f_new <= quad_model + slack or dd == 0.0:
                break
            if not refreshed:
                # Ky is carried by linear updates; rule out drift before shrinking the step
                Ky = K @ y
                f_y = y @ Ky - 2.0 * (y @ c) + yy
                grad_y = 2.0 * (Ky - c)
                refreshed = True
                continue
            L *= 2.0
        F_new = f_new + lam * np.abs(xn).sum() + gamma * _tv(xn)
        n_iter = it + 1
        if restart and F_new > F and not at_rest:
            y, Ky = x.copy(), Kx.copy()
            t = 1.0
            at_rest = True
            trace.append(F)
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        y = xn + mom * (xn - x)
        Ky = Kxn + mom * (Kxn - Kx)
        x, Kx = xn, Kxn
        at_rest = mom == 0.0
        t = t_new
        F = F_new
        trace.append(F)
    else:
        resid = residual(x, Kx, L)
        converged = resid <= tol
    return x, n_iter, bool(converged), float(resid), L, np.array(trace)
