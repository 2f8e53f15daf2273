"""Fast invariant suites behind the ``check`` CLI subcommand.

Each check returns (name, passed, detail).  These are smoke-level
versions of the full pytest suite, runnable from an installed package.
"""

from __future__ import annotations

import numpy as np

from .fem import fem_predictor
from .formulations import METHODS, Formulation, discrete_loss_grad
from .metrics import compute_errors
from .network import Architecture, forward_batch, init_params, params_from_vector
from .precision import DOUBLE
from .problem import ProblemSpec, solve_analytic
from .runner import default_epsilon_grid
from .sampling import uniform_rule


def check_oracle_validity():
    """Analytic profile satisfies PDE and Robin conditions on the whole grid."""
    worst_pde = worst_bc = 0.0
    x = np.linspace(0.0, 1.0, 1000)
    for eps in default_epsilon_grid():
        spec = ProblemSpec(epsilon=eps)
        sol = solve_analytic(spec)
        u, du = sol.eval(x)
        ddu = sol.eval_second(x)
        resid = -spec.epsilon * ddu + spec.drift * du - spec.source
        scale = np.maximum(1.0, np.abs(spec.epsilon * ddu) + np.abs(spec.drift * du)
                           + abs(spec.source))
        worst_pde = max(worst_pde, float(np.max(np.abs(resid) / scale)))
        for x0, n, g in ((0.0, -1.0, spec.g0), (1.0, 1.0, spec.g1)):
            ub, dub = sol.eval(x0)
            bc = spec.alpha * n * dub + spec.kappa * ub - g
            sc = max(1.0, abs(spec.alpha * dub) + abs(spec.kappa * ub) + abs(g))
            worst_bc = max(worst_bc, abs(bc) / sc)
    ok = worst_pde <= 1e-8 and worst_bc <= 1e-9
    return ("oracle validity", ok,
            f"max rel PDE residual {worst_pde:.2e}, max rel Robin residual {worst_bc:.2e}")


def check_autodiff():
    """Input derivatives and loss gradient agree with finite differences."""
    arch = Architecture()
    params = init_params(arch, seed=0, precision=DOUBLE)
    h = 1e-5
    worst = 0.0
    for x in (0.15, 0.42, 0.77):
        v_m, dv_m, _ = forward_batch(params, [x - h])
        v_p, dv_p, _ = forward_batch(params, [x + h])
        v, dv, ddv = forward_batch(params, [x])
        worst = max(worst, abs((v_p[0] - v_m[0]) / (2 * h) - dv[0]) / (1 + abs(dv[0])))
        worst = max(worst, abs((dv_p[0] - dv_m[0]) / (2 * h) - ddv[0]) / (1 + abs(ddv[0])))
    spec = ProblemSpec(epsilon=1.0)
    rule = uniform_rule(10, 1.0)
    worst_g = 0.0
    for method in METHODS:
        form = Formulation(method, spec, warn_coercivity=False)
        r = uniform_rule(10, form.domain_end)
        vec = params.to_vector()
        _, grad = discrete_loss_grad(form, params, r)
        for idx in (0, 57, 150):
            e = np.zeros_like(vec)
            e[idx] = 1e-6
            lp, _ = discrete_loss_grad(form, params_from_vector(arch, vec + e, DOUBLE), r)
            lm, _ = discrete_loss_grad(form, params_from_vector(arch, vec - e, DOUBLE), r)
            fd = (lp.total - lm.total) / 2e-6
            worst_g = max(worst_g, abs(fd - grad[idx]) / (1 + abs(grad[idx])))
    ok = worst <= 1e-6 and worst_g <= 1e-5
    return ("autodiff vs finite differences", ok,
            f"max rel mismatch: derivatives {worst:.2e}, loss gradient {worst_g:.2e}")


def check_normalizer():
    """Closed-form Z matches dense trapezoid quadrature."""
    worst = 0.0
    for eps in (0.05, 0.25, 1.0):
        a = 1.0 / (2.0 * eps)
        closed = -np.expm1(-a) / a
        x = np.linspace(0.0, 1.0, 1_000_001)
        quad = float(np.trapezoid(np.exp(-a * x), x))
        worst = max(worst, abs(closed - quad) / closed)
    return ("exponential-sampler normalizer", worst <= 1e-8,
            f"max rel deviation {worst:.2e}")


def check_fem_rates():
    """P1 convergence at eps=1: l2 slope -2, h1 slope -1 (+-0.3)."""
    spec = ProblemSpec(epsilon=1.0)
    sol = solve_analytic(spec)
    ns = np.array([11, 101, 1001])
    el2, eh1 = [], []
    for n in ns:
        rep = compute_errors(fem_predictor(spec, int(n)), sol, int(n))
        el2.append(rep.e_l2)
        eh1.append(rep.e_h1)
    s2 = np.polyfit(np.log(ns - 1), np.log(el2), 1)[0]
    s1 = np.polyfit(np.log(ns - 1), np.log(eh1), 1)[0]
    ok = abs(s2 + 2.0) <= 0.3 and abs(s1 + 1.0) <= 0.3
    return ("fem convergence rates", ok, f"l2 slope {s2:.2f}, h1 slope {s1:.2f}")


ALL_CHECKS = (check_oracle_validity, check_autodiff, check_normalizer, check_fem_rates)


def run_checks() -> bool:
    all_ok = True
    for check in ALL_CHECKS:
        name, ok, detail = check()
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        all_ok = all_ok and ok
    return all_ok
