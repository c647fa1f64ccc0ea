"""Pure-numpy twin of the compiled barrier kernels.

The barrier subproblem minimized here is

    phi(x) = -(t/ln2) * sum_i [ln(num_i.x + num0_i) - ln(den_i.x + den0_i)]
             - sum_j ln(h_j - G_j.x)

i.e. a log-barrier centering step for maximizing a sum of log-affine-ratio
spectral-efficiency terms over the polyhedron G x <= h. The compiled module
(`noma_coc._kernels`) implements the same three entry points with identical
semantics; tests assert the two agree.
"""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)

_RIDGE0 = 1e-12
_RIDGE_GROWTH = 100.0
_RIDGE_MAX = 1e8
_MIN_STEP = 1e-14


def phi_value(num, num0, den, den0, G, h, t, x) -> float:
    """Barrier objective at x; +inf outside the domain."""
    r = h - G @ x
    a = num @ x + num0
    b = den @ x + den0
    if np.any(r <= 0) or np.any(a <= 0) or np.any(b <= 0):
        return math.inf
    val = -(t / LN2) * (np.log(a).sum() - np.log(b).sum()) - np.log(r).sum()
    return float(val)


def phi_eval(num, num0, den, den0, G, h, t, x):
    """Barrier objective, gradient, and Hessian at x."""
    r = h - G @ x
    a = num @ x + num0
    b = den @ x + den0
    if np.any(r <= 0) or np.any(a <= 0) or np.any(b <= 0):
        n = x.shape[0]
        return math.inf, np.zeros(n), np.zeros((n, n))
    val = -(t / LN2) * (np.log(a).sum() - np.log(b).sum()) - np.log(r).sum()
    grad = -(t / LN2) * (num.T @ (1.0 / a) - den.T @ (1.0 / b)) + G.T @ (1.0 / r)
    hess = (
        (t / LN2) * ((num.T * (1.0 / a**2)) @ num - (den.T * (1.0 / b**2)) @ den)
        + (G.T * (1.0 / r**2)) @ G
    )
    return float(val), grad, hess


def _direction(hess, grad):
    """Newton direction with Jacobi preconditioning and an escalating ridge.

    Per-variable curvatures span many orders of magnitude (barrier terms go
    like 1/slack^2), so the system is symmetrized to unit diagonal before
    factorizing; the ridge handles indefiniteness (the SE terms are not
    jointly concave, so this can happen at large t)."""
    d = np.abs(np.diag(hess))
    d[d < 1e-300] = 1.0
    s = 1.0 / np.sqrt(d)
    H = hess * np.outer(s, s)
    g = grad * s
    ridge = 0.0
    eye = np.eye(H.shape[0])
    while True:
        try:
            L = np.linalg.cholesky(H + ridge * eye)
        except np.linalg.LinAlgError:
            ridge = _RIDGE0 if ridge == 0.0 else ridge * _RIDGE_GROWTH
            if ridge > _RIDGE_MAX:
                raise
            continue
        y = np.linalg.solve(L, -g)
        dx = s * np.linalg.solve(L.T, y)
        lam2 = float(-grad @ dx)
        if lam2 >= 0:
            return dx, lam2
        ridge = _RIDGE0 if ridge == 0.0 else ridge * _RIDGE_GROWTH
        if ridge > _RIDGE_MAX:
            return dx, lam2


def newton(num, num0, den, den0, G, h, t, x, tol, max_iter, ls_alpha, ls_beta):
    """Damped Newton minimization of phi from a strictly feasible x.

    Returns (x, iterations, converged). The iterate stays strictly feasible
    throughout (line search rejects points outside the barrier domain).
    """
    x = np.array(x, dtype=float)
    for it in range(max_iter):
        val, grad, hess = phi_eval(num, num0, den, den0, G, h, t, x)
        dx, lam2 = _direction(hess, grad)
        if lam2 / 2.0 <= tol:
            return x, it, True
        step = 1.0
        gdx = float(grad @ dx)
        while True:
            xn = x + step * dx
            v = phi_value(num, num0, den, den0, G, h, t, xn)
            if math.isfinite(v) and v <= val + ls_alpha * step * gdx:
                break
            step *= ls_beta
            if step < _MIN_STEP:
                return x, it, False
        x = xn
    return x, max_iter, False
