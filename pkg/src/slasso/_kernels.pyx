# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a line-for-line counterpart in ``_pykernels``; the
two are selected between in ``_backend`` and must return identical results
up to floating point reassociation.
"""

import numpy as np
from libc.math cimport sqrt, fabs


cdef inline double _soft(double z, double t) nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def soft_threshold(const double[::1] z, double t):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _soft(z[i], t)
    return out


def cholesky_lower(const double[:, ::1] A):
    """Return ``(L, pivot)``; ``pivot`` is -1 on success, else the failing row."""
    cdef Py_ssize_t n = A.shape[0], i, j, k
    cdef double s
    out = np.zeros((n, n))
    cdef double[:, ::1] L = out
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return out, j
        L[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return out, -1


def jacobi_eigvals(const double[:, ::1] A, double tol, int max_sweeps):
    """Cyclic Jacobi rotations; returns ``(eigenvalues unsorted, sweeps)``."""
    cdef Py_ssize_t n = A.shape[0], i, j, k
    cdef int sweep
    cdef double off, scale, apq, app, aqq, theta, t, c, s, tau, g, h
    work = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = work
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = sqrt(scale)
    if scale == 0.0:
        return np.zeros(n), 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off == 0.0 or sqrt(2.0 * off) <= tol * scale:
            return np.array([a[i, i] for i in range(n)]), sweep
        for i in range(n - 1):
            for j in range(i + 1, n):
                apq = a[i, j]
                if apq == 0.0:
                    continue
                app = a[i, i]
                aqq = a[j, j]
                g = 100.0 * fabs(apq)
                if sweep > 3 and fabs(app) + g == fabs(app) and fabs(aqq) + g == fabs(aqq):
                    a[i, j] = 0.0
                    a[j, i] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[i, i] = app - t * apq
                a[j, j] = aqq + t * apq
                a[i, j] = 0.0
                a[j, i] = 0.0
                for k in range(n):
                    if k == i or k == j:
                        continue
                    g = a[k, i]
                    h = a[k, j]
                    a[k, i] = g - s * (h + g * tau)
                    a[k, j] = h + s * (g - h * tau)
                    a[i, k] = a[k, i]
                    a[j, k] = a[k, j]
    return np.array([a[i, i] for i in range(n)]), max_sweeps


cdef void _tv_prox(const double* y, double* x, Py_ssize_t width, double lam) nogil:
    # Condat's direct algorithm for the 1-D total-variation prox.
    cdef Py_ssize_t k = 0, k0 = 0, kplus = 0, kminus = 0
    cdef double umin = lam, umax = -lam
    cdef double vmin = y[0] - lam, vmax = y[0] + lam
    cdef double twolam = 2.0 * lam, minlam = -lam
    if width <= 0:
        return
    if lam <= 0.0:
        for k in range(width):
            x[k] = y[k]
        return
    while True:
        while k == width - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k0
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
            k = k0
            kminus = k0
            kplus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kminus = k0
                kplus = k0
                vmax = y[k0]
                vmin = vmax - twolam
                umin = lam
                umax = minlam
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


def tv_prox(const double[::1] v, double gamma):
    cdef Py_ssize_t n = v.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    if n > 0:
        _tv_prox(&v[0], &o[0], n, gamma)
    return out


cdef inline void _symv(const double[:, ::1] K, const double* x, double* out, Py_ssize_t p) nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(p):
        s = 0.0
        for j in range(p):
            s += K[i, j] * x[j]
        out[i] = s


cdef inline double _dot(const double* a, const double* b, Py_ssize_t p) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(p):
        s += a[i] * b[i]
    return s


cdef inline double _l1(const double* a, Py_ssize_t p) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(p):
        s += fabs(a[i])
    return s


cdef inline double _tv(const double* a, Py_ssize_t p) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(1, p):
        s += fabs(a[i] - a[i - 1])
    return s


cdef void _prox(const double* v, double* out, double* tmp, Py_ssize_t p,
                double l1_weight, double tv_weight) nogil:
    cdef Py_ssize_t i
    if tv_weight > 0.0:
        _tv_prox(v, tmp, p, tv_weight)
        for i in range(p):
            out[i] = _soft(tmp[i], l1_weight)
    else:
        for i in range(p):
            out[i] = _soft(v[i], l1_weight)


cdef double _kkt(const double* x, const double* Kx, const double[::1] c,
                 Py_ssize_t p, double lam) nogil:
    cdef Py_ssize_t j
    cdef double g, r, worst = 0.0
    for j in range(p):
        g = 2.0 * (Kx[j] - c[j])
        if x[j] > 0.0:
            r = fabs(g + lam)
        elif x[j] < 0.0:
            r = fabs(g - lam)
        else:
            r = fabs(g) - lam
            if r < 0.0:
                r = 0.0
        if r > worst:
            worst = r
    return worst


def fista_gram(const double[:, ::1] K, const double[::1] c, double yy,
               double lam, double gamma, const double[::1] beta0,
               double lipschitz, int max_iter, double tol, bint restart):
    """Accelerated proximal gradient on ``b'Kb - 2c'b + yy + lam|b|_1 + gamma TV(b)``.

    Returns ``(beta, iterations, converged, residual, lipschitz, trace)``.
    With ``gamma == 0`` the residual is the subgradient KKT violation, else
    the sup-norm of the gradient mapping.
    """
    cdef Py_ssize_t p = K.shape[0], j
    cdef int it, n_iter = 0
    cdef double L = lipschitz, t = 1.0, t_new, mom
    cdef double F, F_new, f_y, f_new, quad_model, d, dd, gd, resid, slack
    cdef bint converged = False, fused = gamma > 0.0, at_rest = True, refreshed

    out_x = np.array(beta0, dtype=np.float64, copy=True)
    buf = np.zeros((7, p))
    trace = np.empty(max_iter + 1)
    cdef double[::1] x = out_x
    cdef double[:, ::1] b = buf
    cdef double[::1] tr = trace
    cdef double* Kx = &b[0, 0]
    cdef double* y = &b[1, 0]
    cdef double* Ky = &b[2, 0]
    cdef double* xn = &b[3, 0]
    cdef double* Kxn = &b[4, 0]
    cdef double* v = &b[5, 0]
    cdef double* tmp = &b[6, 0]

    if p == 0:
        return out_x, 0, True, 0.0, L, trace[:1]

    with nogil:
        _symv(K, &x[0], Kx, p)
        for j in range(p):
            y[j] = x[j]
            Ky[j] = Kx[j]
        F = _dot(&x[0], Kx, p) - 2.0 * _dot(&x[0], &c[0], p) + yy \
            + lam * _l1(&x[0], p) + gamma * _tv(&x[0], p)
        tr[0] = F

        for it in range(max_iter):
            # residual at the current iterate
            if fused:
                for j in range(p):
                    v[j] = x[j] - 2.0 * (Kx[j] - c[j]) / L
                _prox(v, xn, tmp, p, lam / L, gamma / L)
                resid = 0.0
                for j in range(p):
                    d = fabs(x[j] - xn[j]) * L
                    if d > resid:
                        resid = d
            else:
                resid = _kkt(&x[0], Kx, c, p, lam)
            if resid <= tol:
                converged = True
                break

            f_y = _dot(y, Ky, p) - 2.0 * _dot(y, &c[0], p) + yy
            refreshed = False
            while True:
                for j in range(p):
                    v[j] = y[j] - 2.0 * (Ky[j] - c[j]) / L
                _prox(v, xn, tmp, p, lam / L, gamma / L)
                _symv(K, xn, Kxn, p)
                slack = _dot(xn, Kxn, p)
                gd = _dot(xn, &c[0], p)
                f_new = slack - 2.0 * gd + yy
                slack = 1e-12 * (fabs(slack) + 2.0 * fabs(gd) + yy + 1.0)
                gd = 0.0
                dd = 0.0
                for j in range(p):
                    d = xn[j] - y[j]
                    gd += 2.0 * (Ky[j] - c[j]) * d
                    dd += d * d
                quad_model = f_y + gd + 0.5 * L * dd
                if f_new <= quad_model + slack or dd == 0.0:
                    break
                if not refreshed:
                    # Ky is carried by linear updates; rule out drift before shrinking the step
                    _symv(K, y, Ky, p)
                    f_y = _dot(y, Ky, p) - 2.0 * _dot(y, &c[0], p) + yy
                    refreshed = True
                    continue
                L *= 2.0

            F_new = f_new + lam * _l1(xn, p) + gamma * _tv(xn, p)
            n_iter = it + 1
            if restart and F_new > F and not at_rest:
                # momentum overshoot: drop the step and restart from x
                for j in range(p):
                    y[j] = x[j]
                    Ky[j] = Kx[j]
                t = 1.0
                at_rest = True
                tr[n_iter] = F
                continue

            t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            for j in range(p):
                y[j] = xn[j] + mom * (xn[j] - x[j])
                Ky[j] = Kxn[j] + mom * (Kxn[j] - Kx[j])
                x[j] = xn[j]
                Kx[j] = Kxn[j]
            at_rest = mom == 0.0
            t = t_new
            F = F_new
            tr[n_iter] = F
        else:
            # loop exhausted: final residual check at the last iterate
            if fused:
                for j in range(p):
                    v[j] = x[j] - 2.0 * (Kx[j] - c[j]) / L
                _prox(v, xn, tmp, p, lam / L, gamma / L)
                resid = 0.0
                for j in range(p):
                    d = fabs(x[j] - xn[j]) * L
                    if d > resid:
                        resid = d
            else:
                resid = _kkt(&x[0], Kx, c, p, lam)
            converged = resid <= tol

    return out_x, n_iter, bool(converged), resid, L, trace[: n_iter + 1].copy()
