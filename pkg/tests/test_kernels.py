import numpy as np
import pytest

from noma_coc.barrier import SolverConfig, barrier_gradient, solve_barrier
from noma_coc.channel import generate_topology
from noma_coc.kernels import active_kernel_name, get_kernels
from noma_coc.solver import _analytic_start, canonicalize, make_instance

try:
    get_kernels("compiled")
    HAS_COMPILED = True
except ImportError:
    HAS_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAS_COMPILED, reason="compiled kernels not built")


def _problem(seed=0, mode="pre_outage"):
    sc = generate_topology(3, 4, 3, seed=seed)
    if mode == "pre_outage":
        inst = make_instance(sc, 1, "pre_outage")
    else:
        from noma_coc.association import associate

        assoc, _ = associate(sc)
        bs_id = next(iter(sorted({b for b, _ in assoc.entries.values()})))
        inst = make_instance(sc, bs_id, "compensation", assoc=assoc)
    prob, layout = canonicalize(inst)
    x0 = _analytic_start(inst, layout)
    assert x0 is not None and prob.strictly_feasible(x0)
    return prob, x0


def test_kernel_selection():
    assert get_kernels("pure").__name__.endswith("_kernels_py")
    assert active_kernel_name() in ("pure", "compiled")
    if not HAS_COMPILED:
        with pytest.raises(ImportError):
            get_kernels("compiled")


@needs_compiled
@pytest.mark.parametrize("mode", ["pre_outage", "compensation"])
def test_twin_phi_agreement(mode):
    pure = get_kernels("pure")
    comp = get_kernels("compiled")
    prob, x0 = _problem(seed=3, mode=mode)
    args = (prob.num, prob.num0, prob.den, prob.den0, prob.G, prob.h)
    for t in (1.0, 100.0, 1e6):
        vp = pure.phi_value(*args, t, x0)
        vc = comp.phi_value(*args, t, x0)
        assert vc == pytest.approx(vp, rel=1e-12)
        vp, gp, hp = pure.phi_eval(*args, t, x0)
        vc, gc, hc = comp.phi_eval(*args, t, x0)
        assert vc == pytest.approx(vp, rel=1e-12)
        np.testing.assert_allclose(gc, gp, rtol=1e-10)
        np.testing.assert_allclose(hc, hp, rtol=1e-10)


@needs_compiled
def test_twin_phi_outside_domain():
    pure = get_kernels("pure")
    comp = get_kernels("compiled")
    prob, x0 = _problem(seed=4)
    bad = -np.abs(x0) - 1.0
    args = (prob.num, prob.num0, prob.den, prob.den0, prob.G, prob.h)
    assert pure.phi_value(*args, 1.0, bad) == np.inf
    assert comp.phi_value(*args, 1.0, bad) == np.inf


@needs_compiled
@pytest.mark.parametrize("mode", ["pre_outage", "compensation"])
def test_twin_newton_agreement(mode):
    pure = get_kernels("pure")
    comp = get_kernels("compiled")
    prob, x0 = _problem(seed=7, mode=mode)
    args = (prob.num, prob.num0, prob.den, prob.den0, prob.G, prob.h)
    for t in (1.0, 1e4):
        xp, ip_, cp = pure.newton(*args, t, x0.copy(), 1e-9, 200, 0.25, 0.5)
        xc, ic, cc = comp.newton(*args, t, x0.copy(), 1e-9, 200, 0.25, 0.5)
        assert cp and cc
        # identical arithmetic path: iterates should match closely
        assert ip_ == ic
        np.testing.assert_allclose(xc, xp, rtol=1e-8, atol=1e-12)


@needs_compiled
def test_twin_full_solves_agree():
    prob, x0 = _problem(seed=11, mode="compensation")
    xp = solve_barrier(prob, SolverConfig(kernel="pure"), x0=x0)
    xc = solve_barrier(prob, SolverConfig(kernel="compiled"), x0=x0)
    assert prob.objective_bits(xc) == pytest.approx(prob.objective_bits(xp), abs=1e-8)


@pytest.mark.parametrize("mode", ["pre_outage", "compensation"])
def test_barrier_gradient_matches_finite_differences(mode):
    prob, x0 = _problem(seed=5, mode=mode)
    rng = np.random.default_rng(0)
    for t in (1.0, 1e3):
        for _ in range(3):
            x = x0 * (1.0 + 0.01 * rng.standard_normal(len(x0)))
            if not prob.strictly_feasible(x):
                x = x0
            val, grad = barrier_gradient(prob, x, t, kernel="pure")
            fd = np.zeros_like(grad)
            for i in range(len(x)):
                # relative step: the scaled variables span orders of magnitude
                h = 1e-4 * abs(x[i]) + 1e-12
                xp_, xm = x.copy(), x.copy()
                xp_[i] += h
                xm[i] -= h
                vp, _ = barrier_gradient(prob, xp_, t, kernel="pure")
                vm, _ = barrier_gradient(prob, xm, t, kernel="pure")
                fd[i] = (vp - vm) / (2 * h)
            denom = np.maximum(np.abs(fd), np.abs(grad))
            rel = np.abs(grad - fd) / np.maximum(denom, 1e-12)
            assert np.max(rel) < 1e-5
