# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled barrier kernels: hot inner loop of the interior-point solver.

Semantics are identical to `noma_coc._kernels_py`; see that module for the
definition of phi. The Newton loop, line search, and a small dense Cholesky
all run without touching the Python interpreter, which is what makes bulk
dataset generation and the brute-force baseline fast.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log

cnp.import_array()

cdef double LN2 = 0.6931471805599453

cdef double RIDGE0 = 1e-12
cdef double RIDGE_GROWTH = 100.0
cdef double RIDGE_MAX = 1e8
cdef double MIN_STEP = 1e-14


cdef double _phi_value(double[:, ::1] num, double[::1] num0,
                       double[:, ::1] den, double[::1] den0,
                       double[:, ::1] G, double[::1] h,
                       double t, double[::1] x) noexcept nogil:
    cdef Py_ssize_t T = num.shape[0], m = G.shape[0], n = x.shape[0]
    cdef Py_ssize_t i, j, p
    cdef double a, b, r, val = 0.0
    for i in range(T):
        a = num0[i]
        b = den0[i]
        for p in range(n):
            a += num[i, p] * x[p]
            b += den[i, p] * x[p]
        if a <= 0.0 or b <= 0.0:
            return INFINITY
        val -= (t / LN2) * (log(a) - log(b))
    for j in range(m):
        r = h[j]
        for p in range(n):
            r -= G[j, p] * x[p]
        if r <= 0.0:
            return INFINITY
        val -= log(r)
    return val


cdef int _phi_eval(double[:, ::1] num, double[::1] num0,
                   double[:, ::1] den, double[::1] den0,
                   double[:, ::1] G, double[::1] h,
                   double t, double[::1] x,
                   double* val, double[::1] grad, double[:, ::1] hess) noexcept nogil:
    # Returns 0 on success, -1 when x is outside the barrier domain.
    cdef Py_ssize_t T = num.shape[0], m = G.shape[0], n = x.shape[0]
    cdef Py_ssize_t i, j, p, q
    cdef double a, b, r, w, wa, wb
    val[0] = 0.0
    for p in range(n):
        grad[p] = 0.0
        for q in range(n):
            hess[p, q] = 0.0
    for i in range(T):
        a = num0[i]
        b = den0[i]
        for p in range(n):
            a += num[i, p] * x[p]
            b += den[i, p] * x[p]
        if a <= 0.0 or b <= 0.0:
            val[0] = INFINITY
            return -1
        val[0] -= (t / LN2) * (log(a) - log(b))
        wa = (t / LN2) / a
        wb = (t / LN2) / b
        for p in range(n):
            grad[p] += -wa * num[i, p] + wb * den[i, p]
        wa = wa / a
        wb = wb / b
        for p in range(n):
            for q in range(n):
                hess[p, q] += wa * num[i, p] * num[i, q] - wb * den[i, p] * den[i, q]
    for j in range(m):
        r = h[j]
        for p in range(n):
            r -= G[j, p] * x[p]
        if r <= 0.0:
            val[0] = INFINITY
            return -1
        val[0] -= log(r)
        w = 1.0 / r
        for p in range(n):
            grad[p] += G[j, p] * w
        w = w * w
        for p in range(n):
            for q in range(n):
                hess[p, q] += w * G[j, p] * G[j, q]
    return 0


cdef int _cholesky(double[:, ::1] A, Py_ssize_t n) noexcept nogil:
    # In-place lower-triangular factorization; -1 when not positive definite.
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return -1
        A[j, j] = s ** 0.5
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] L, double[::1] rhs, double[::1] out,
                      Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= L[i, k] * out[k]
        out[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, n):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]


cdef double _direction(double[:, ::1] hess, double[::1] grad,
                       double[:, ::1] work, double[::1] dx, double[::1] jac,
                       Py_ssize_t n) noexcept nogil:
    # Newton direction with Jacobi preconditioning (symmetrize to unit
    # diagonal, since barrier curvatures span many orders of magnitude) and
    # an escalating ridge for indefiniteness; returns the squared decrement.
    cdef Py_ssize_t p, q
    cdef double ridge = 0.0, lam2, d
    for p in range(n):
        d = hess[p, p] if hess[p, p] > 0 else -hess[p, p]
        if d < 1e-300:
            d = 1.0
        jac[p] = 1.0 / d ** 0.5
    while True:
        for p in range(n):
            for q in range(n):
                work[p, q] = hess[p, q] * jac[p] * jac[q]
            work[p, p] += ridge
            dx[p] = -grad[p] * jac[p]
        if _cholesky(work, n) == 0:
            _chol_solve(work, dx, dx, n)
            lam2 = 0.0
            for p in range(n):
                dx[p] *= jac[p]
                lam2 -= grad[p] * dx[p]
            if lam2 >= 0.0 or ridge > RIDGE_MAX:
                return lam2
        ridge = RIDGE0 if ridge == 0.0 else ridge * RIDGE_GROWTH
        if ridge > RIDGE_MAX * RIDGE_GROWTH:
            return -1.0


def phi_value(num, num0, den, den0, G, h, double t, x):
    """Barrier objective at x; +inf outside the domain."""
    cdef double[:, ::1] num_v = np.ascontiguousarray(num, dtype=np.float64)
    cdef double[::1] num0_v = np.ascontiguousarray(num0, dtype=np.float64)
    cdef double[:, ::1] den_v = np.ascontiguousarray(den, dtype=np.float64)
    cdef double[::1] den0_v = np.ascontiguousarray(den0, dtype=np.float64)
    cdef double[:, ::1] G_v = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] h_v = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] x_v = np.ascontiguousarray(x, dtype=np.float64)
    return _phi_value(num_v, num0_v, den_v, den0_v, G_v, h_v, t, x_v)


def phi_eval(num, num0, den, den0, G, h, double t, x):
    """Barrier objective, gradient, and Hessian at x."""
    cdef double[:, ::1] num_v = np.ascontiguousarray(num, dtype=np.float64)
    cdef double[::1] num0_v = np.ascontiguousarray(num0, dtype=np.float64)
    cdef double[:, ::1] den_v = np.ascontiguousarray(den, dtype=np.float64)
    cdef double[::1] den0_v = np.ascontiguousarray(den0, dtype=np.float64)
    cdef double[:, ::1] G_v = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] h_v = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] x_v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = x_v.shape[0]
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    cdef double[::1] grad_v = grad
    cdef double[:, ::1] hess_v = hess
    cdef double val = 0.0
    _phi_eval(num_v, num0_v, den_v, den0_v, G_v, h_v, t, x_v, &val, grad_v, hess_v)
    return val, grad, hess


def newton(num, num0, den, den0, G, h, double t, x,
           double tol, int max_iter, double ls_alpha, double ls_beta):
    """Damped Newton minimization of phi from a strictly feasible x.

    Returns (x, iterations, converged), staying strictly feasible throughout.
    """
    cdef double[:, ::1] num_v = np.ascontiguousarray(num, dtype=np.float64)
    cdef double[::1] num0_v = np.ascontiguousarray(num0, dtype=np.float64)
    cdef double[:, ::1] den_v = np.ascontiguousarray(den, dtype=np.float64)
    cdef double[::1] den0_v = np.ascontiguousarray(den0, dtype=np.float64)
    cdef double[:, ::1] G_v = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] h_v = np.ascontiguousarray(h, dtype=np.float64)
    xa = np.array(x, dtype=np.float64)
    cdef double[::1] x_v = xa
    cdef Py_ssize_t n = x_v.shape[0]
    cdef Py_ssize_t p
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    work = np.zeros((n, n))
    dxa = np.zeros(n)
    xna = np.zeros(n)
    jaca = np.zeros(n)
    cdef double[::1] grad_v = grad
    cdef double[:, ::1] hess_v = hess
    cdef double[:, ::1] work_v = work
    cdef double[::1] dx_v = dxa
    cdef double[::1] xn_v = xna
    cdef double[::1] jac_v = jaca
    cdef double val = 0.0, lam2, step, gdx, v
    cdef int it
    with nogil:
        for it in range(max_iter):
            _phi_eval(num_v, num0_v, den_v, den0_v, G_v, h_v, t, x_v, &val, grad_v, hess_v)
            lam2 = _direction(hess_v, grad_v, work_v, dx_v, jac_v, n)
            if lam2 >= 0.0 and lam2 / 2.0 <= tol:
                with gil:
                    return xa, it, True
            gdx = 0.0
            for p in range(n):
                gdx += grad_v[p] * dx_v[p]
            step = 1.0
            while True:
                for p in range(n):
                    xn_v[p] = x_v[p] + step * dx_v[p]
                v = _phi_value(num_v, num0_v, den_v, den0_v, G_v, h_v, t, xn_v)
                if v != INFINITY and v <= val + ls_alpha * step * gdx:
                    break
                step *= ls_beta
                if step < MIN_STEP:
                    with gil:
                        return xa, it, False
            for p in range(n):
                x_v[p] = xn_v[p]
    return xa, max_iter, False
