"""Log-barrier interior-point driver over a canonical problem form.

Canonical form (variables are scaled powers, see solver.py):

    maximize  sum_i [ln(num_i.x + num0_i) - ln(den_i.x + den0_i)] / ln2
    s.t.      G x <= h

All constraints are affine; the spectral-efficiency objective supplies the
log-affine-ratio terms. The outer loop is the textbook barrier method: Newton
centering at increasing t until m/t drops below the outer tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError
from .kernels import get_kernels

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SolverConfig:
    mu: float = 10.0  # barrier growth
    t0: float = 1.0  # initial barrier weight
    newton_tol: float = 1e-9  # squared-decrement/2 stop
    outer_tol: float = 1e-8  # stop when m/t < outer_tol
    max_newton: int = 200
    ls_alpha: float = 0.25  # sufficient decrease
    ls_beta: float = 0.5  # backtracking shrink
    kernel: str = "auto"  # "auto" | "pure" | "compiled"

    def __post_init__(self):
        if self.mu <= 1 or self.newton_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("mu must exceed 1 and tolerances must be positive")


@dataclass
class CanonicalProblem:
    """Objective terms, constraint polyhedron, and bookkeeping for one solve."""

    num: np.ndarray  # (T, n)
    num0: np.ndarray  # (T,)
    den: np.ndarray  # (T, n)
    den0: np.ndarray  # (T,)
    G: np.ndarray  # (m, n)
    h: np.ndarray  # (m,)
    names: list[str]  # one per constraint row, for certificates
    x_upper: np.ndarray  # per-variable bound used by phase-I

    def n_vars(self) -> int:
        return self.G.shape[1]

    def objective_bits(self, x: np.ndarray) -> float:
        a = self.num @ x + self.num0
        b = self.den @ x + self.den0
        return float((np.log(a).sum() - np.log(b).sum()) / LN2)

    def strictly_feasible(self, x: np.ndarray, margin: float = 0.0) -> bool:
        if np.any(self.h - self.G @ x <= margin):
            return False
        return bool(
            np.all(self.num @ x + self.num0 > 0) and np.all(self.den @ x + self.den0 > 0)
        )


@dataclass
class SolveTrace:
    records: list[dict] = field(default_factory=list)

    def add(self, **kw) -> None:
        self.records.append(kw)


def phase_one(prob: CanonicalProblem) -> np.ndarray:
    """Find a strictly feasible point by minimizing the max violation (an LP),
    or raise InfeasibleError carrying the binding constraint set."""
    m, n = prob.G.shape
    a_ub = np.hstack([prob.G, -np.ones((m, 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    bounds = [(0.0, float(ub)) for ub in prob.x_upper] + [(-1.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=prob.h, bounds=bounds, method="highs")
    if not res.success:
        raise InfeasibleError(f"phase-I LP failed: {res.message}")
    s_star = res.x[-1]
    x = res.x[:-1]
    if s_star >= -1e-10:
        slack = prob.h - prob.G @ x
        binding = [prob.names[j] for j in np.flatnonzero(slack <= s_star + 1e-9)]
        raise InfeasibleError(
            f"no strictly feasible point (phase-I optimum {s_star:.3e})", binding=binding
        )
    return x


def solve_barrier(
    prob: CanonicalProblem,
    config: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    trace: SolveTrace | None = None,
) -> np.ndarray:
    """Run the barrier method; returns the final (strictly feasible) iterate."""
    config = config or SolverConfig()
    kern = get_kernels(config.kernel)
    if x0 is None or not prob.strictly_feasible(x0):
        x0 = phase_one(prob)
    x = np.array(x0, dtype=float)
    m = prob.G.shape[0]
    t = config.t0
    while True:
        x, iters, converged = kern.newton(
            prob.num,
            prob.num0,
            prob.den,
            prob.den0,
            prob.G,
            prob.h,
            t,
            x,
            config.newton_tol,
            config.max_newton,
            config.ls_alpha,
            config.ls_beta,
        )
        if trace is not None:
            trace.add(
                t=t,
                newton_iters=int(iters),
                converged=bool(converged),
                objective_bits=prob.objective_bits(x),
                gap_bound=m / t,
            )
        if m / t < config.outer_tol:
            return x
        t *= config.mu


def barrier_gradient(
    prob: CanonicalProblem, x: np.ndarray, t: float, kernel: str = "auto"
) -> tuple[float, np.ndarray]:
    """Barrier objective value and analytic gradient at x (for verification)."""
    kern = get_kernels(kernel)
    val, grad, _ = kern.phi_eval(
        prob.num, prob.num0, prob.den, prob.den0, prob.G, prob.h, t, x
    )
    return val, grad
