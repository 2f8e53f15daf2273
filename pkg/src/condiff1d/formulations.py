"""The five loss formulations and their discrete quadrature losses.

Methods and the function the network represents:

  v    collocation on the strong residual of u            (network = u)
  vz   collocation on the strong residual of the
       symmetrized variable z = u * exp(-F x/(2 eps))     (network = z)
  wz   Ritz energy of the symmetrized problem             (network = z)
  w    same energy, network parametrizes u and the loss
       transforms it pointwise to the z variable          (network = u)
  rwz  Ritz energy on the rescaled domain (0, 1/eps)      (network = z~)

The symmetrizing direction matters: z = u exp(-F x/(2 eps)) solves
-z'' + (F^2/(4 eps^2)) z = (f/eps) exp(-F x/(2 eps)), which is coercive,
and the way back u = exp(+F x/(2 eps)) z carries the growing exponential
(the blow-up channel of the z-based methods at small eps).

Every density returns both its value and, on request, its partial
derivatives with respect to (value, dvalue, ddvalue) of the represented
function, which is all the chain rule needs to turn the network's
vector-Jacobian product into the full loss gradient.

Exponential factors are computed in double and rounded to the working
precision; leaving the working range raises the overflow/underflow flags
on the returned breakdown instead of silently propagating inf.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import network as net
from .precision import DOUBLE, compute_dtype, guarded_exp, storage_dtype
from .problem import AnalyticSolution, DomainError, ProblemSpec
from .sampling import EXPONENTIAL, QuadratureRule

METHOD_V = "v"
METHOD_VZ = "vz"
METHOD_W = "w"
METHOD_WZ = "wz"
METHOD_RWZ = "rwz"
METHODS = (METHOD_V, METHOD_VZ, METHOD_W, METHOD_WZ, METHOD_RWZ)
ENERGY_METHODS = (METHOD_W, METHOD_WZ, METHOD_RWZ)


class SamplerMismatch(ValueError):
    """Quadrature rule incompatible with the formulation."""


@dataclass
class LossBreakdown:
    total: float
    bulk: float
    boundary: float
    overflow: bool = False
    underflow: bool = False

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.total))


class Formulation:
    """One loss formulation bound to a problem instance."""

    def __init__(self, method: str, spec: ProblemSpec, warn_coercivity: bool = True):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.spec = spec
        self.domain_end = 1.0 / spec.epsilon if method == METHOD_RWZ else 1.0
        if method in ENERGY_METHODS:
            report = spec.coercivity_report()
            self.coercivity = report
            if warn_coercivity and not report.ok:
                warnings.warn(
                    f"coercivity violated for {method} (bulk={report.bulk_coefficient:.3g}, "
                    f"left={report.left_boundary:.3g}, right={report.right_boundary:.3g}); "
                    "the energy may not have a minimum", RuntimeWarning)
        else:
            self.coercivity = None

    # -- bulk densities ------------------------------------------------------

    def bulk_density(self, x, v, dv, ddv, precision: str = DOUBLE, grad: bool = False):
        """R at bulk points.  Returns (R, partials, flags) where partials is
        None or (dR/dv, dR/ddv, dR/dddv) and flags is (overflow, underflow)."""
        s = self.spec
        cdt = compute_dtype(precision)
        x = np.asarray(x, dtype=np.float64)
        v = np.asarray(v, dtype=cdt)
        dv = np.asarray(dv, dtype=cdt)
        ddv = np.asarray(ddv, dtype=cdt)
        lam = cdt.type(s.bulk_weight)
        eps = cdt.type(s.epsilon)
        drift = cdt.type(s.drift)
        src = cdt.type(s.source)
        of = uf = False
        zeros = np.zeros_like(v)

        if self.method == METHOD_V:
            r = -eps * ddv + drift * dv - src
            dens = lam * r * r
            parts = (zeros, 2.0 * lam * r * drift, -2.0 * lam * r * eps) if grad else None

        elif self.method == METHOD_VZ:
            c2 = cdt.type(s.zpde_coefficient())
            e, of, uf = guarded_exp(-s.drift * x / (2.0 * s.epsilon), precision)
            r = -ddv + c2 * v - (src / eps) * e
            dens = lam * r * r
            parts = (2.0 * lam * r * c2, zeros, -2.0 * lam * r) if grad else None

        elif self.method == METHOD_WZ:
            c2 = cdt.type(s.zpde_coefficient())
            e, of, uf = guarded_exp(-s.drift * x / (2.0 * s.epsilon), precision)
            dens = 0.5 * (dv * dv + c2 * v * v) - (src / eps) * e * v
            parts = (c2 * v - (src / eps) * e, dv, zeros) if grad else None

        elif self.method == METHOD_W:
            c2 = cdt.type(s.zpde_coefficient())
            e, of, uf = guarded_exp(-s.drift * x / (2.0 * s.epsilon), precision)
            half_rate = drift / (2.0 * eps)
            vb = e * v
            dvb = e * (dv - half_rate * v)
            dens = 0.5 * (dvb * dvb + c2 * vb * vb) - (src / eps) * e * vb
            if grad:
                d_vb = c2 * vb - (src / eps) * e
                parts = (d_vb * e - dvb * e * half_rate, dvb * e, zeros)
            else:
                parts = None

        else:  # rwz, x is the rescaled coordinate y
            c2 = cdt.type(s.drift**2 / 4.0)
            e, of, uf = guarded_exp(-s.drift * x / 2.0, precision)
            dens = 0.5 * (dv * dv + c2 * v * v) - src * e * v
            parts = (c2 * v - src * e, dv, zeros) if grad else None

        return dens, parts, (of, uf)

    # -- boundary densities ---------------------------------------------------

    def boundary_density(self, side: int, v, dv, precision: str = DOUBLE,
                         grad: bool = False):
        """S at one endpoint (side 0 = left, 1 = right).  Returns
        (S, partials, flags) with partials None or (dS/dv, dS/ddv)."""
        s = self.spec
        cdt = compute_dtype(precision)
        v = cdt.type(v)
        dv = cdt.type(dv)
        n = -1.0 if side == 0 else 1.0
        g = s.g0 if side == 0 else s.g1
        lam = s.bulk_weight
        of = uf = False

        if self.method == METHOD_V:
            resid = cdt.type(s.alpha) * cdt.type(n) * dv + cdt.type(s.kappa) * v - cdt.type(g)
            dens = cdt.type(1.0 - lam) * resid * resid
            parts = (2.0 * cdt.type(1.0 - lam) * resid * cdt.type(s.kappa),
                     2.0 * cdt.type(1.0 - lam) * resid * cdt.type(s.alpha * n)) if grad else None

        elif self.method == METHOD_VZ:
            x_side = 0.0 if side == 0 else 1.0
            e, of, uf = guarded_exp(-s.drift * x_side / (2.0 * s.epsilon), precision)
            kap_eff = cdt.type(s.kappa + s.alpha * s.drift * n / (2.0 * s.epsilon))
            resid = cdt.type(s.alpha * n) * dv + kap_eff * v - e * cdt.type(g)
            dens = cdt.type(1.0 - lam) * resid * resid
            parts = (2.0 * cdt.type(1.0 - lam) * resid * kap_eff,
                     2.0 * cdt.type(1.0 - lam) * resid * cdt.type(s.alpha * n)) if grad else None

        elif self.method == METHOD_WZ:
            x_side = 0.0 if side == 0 else 1.0
            e, of, uf = guarded_exp(-s.drift * x_side / (2.0 * s.epsilon), precision)
            bcoef = cdt.type(s.kappa / s.alpha + s.drift * n / (2.0 * s.epsilon))
            dens = 0.5 * bcoef * v * v - (e * cdt.type(g / s.alpha)) * v
            parts = (bcoef * v - e * cdt.type(g / s.alpha), cdt.type(0.0)) if grad else None

        elif self.method == METHOD_W:
            x_side = 0.0 if side == 0 else 1.0
            e, of, uf = guarded_exp(-s.drift * x_side / (2.0 * s.epsilon), precision)
            bcoef = cdt.type(s.kappa / s.alpha + s.drift * n / (2.0 * s.epsilon))
            vb = e * v
            dens = 0.5 * bcoef * vb * vb - (e * cdt.type(g / s.alpha)) * vb
            parts = ((bcoef * vb - e * cdt.type(g / s.alpha)) * e, cdt.type(0.0)) if grad else None

        else:  # rwz, endpoints y = 0 and y = 1/eps
            y_side = 0.0 if side == 0 else 1.0 / s.epsilon
            e, of, uf = guarded_exp(-s.drift * y_side / 2.0, precision)
            bcoef = cdt.type(s.epsilon * s.kappa / s.alpha + s.drift * n / 2.0)
            dens = 0.5 * bcoef * v * v - (e * cdt.type(g / s.alpha)) * v
            parts = (bcoef * v - e * cdt.type(g / s.alpha), cdt.type(0.0)) if grad else None

        return dens, parts, (of, uf)

    # -- exact solution mapped into this method's variable ---------------------

    def transform_exact(self, sol: AnalyticSolution):
        """Callable t -> (value, dvalue, ddvalue) of the exact solution in the
        coordinate and variable this formulation trains on.  Test oracle."""
        s = self.spec
        half_rate = s.drift / (2.0 * s.epsilon)

        def z_triple(x):
            u, du = sol.eval(x)
            ddu = sol.eval_second(x)
            e = np.exp(-half_rate * np.asarray(x, dtype=np.float64))
            z = e * u
            dz = e * (du - half_rate * u)
            ddz = e * (ddu - 2.0 * half_rate * du + half_rate**2 * u)
            return z, dz, ddz

        if self.method in (METHOD_V, METHOD_W):
            def fn(x):
                u, du = sol.eval(x)
                return u, du, sol.eval_second(x)
            return fn
        if self.method in (METHOD_VZ, METHOD_WZ):
            return z_triple
        # rwz: z~(y) = z(eps*y)/eps on (0, 1/eps)
        def fn(y):
            x = s.epsilon * np.asarray(y, dtype=np.float64)
            z, dz, ddz = z_triple(x)
            return z / s.epsilon, dz, s.epsilon * ddz
        return fn


@dataclass
class TrainedModel:
    """Formulation tag + final parameters + the map back to (u, u')."""

    formulation: Formulation
    params: net.NetworkParams

    def predict(self, x):
        """(u, u') at physical points x in [0, 1].

        The back-transformation exponentials run in double precision; any
        non-finite output is left in place for the metrics layer to flag."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DomainError("prediction point outside [0, 1]")
        s = self.formulation.spec
        m = self.formulation.method
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            if m in (METHOD_V, METHOD_W):
                v, dv, _ = net.forward_batch(self.params, x)
                return np.float64(v), np.float64(dv)
            if m in (METHOD_VZ, METHOD_WZ):
                v, dv, _ = net.forward_batch(self.params, x)
                half_rate = s.drift / (2.0 * s.epsilon)
                fac = np.exp(half_rate * x)
                u = fac * np.float64(v)
                du = fac * (np.float64(dv) + half_rate * np.float64(v))
                return u, du
            # rwz
            y = x / s.epsilon
            v, dv, _ = net.forward_batch(self.params, y)
            fac = np.exp(0.5 * s.drift * y)
            u = s.epsilon * fac * np.float64(v)
            du = fac * (np.float64(dv) + 0.5 * s.drift * np.float64(v))
            return u, du


def reconstruct(model: TrainedModel, x):
    """(u, u') of a trained model at physical x; see TrainedModel.predict."""
    return model.predict(x)


# -- discrete loss over a quadrature rule -------------------------------------

def _validate_rule(form: Formulation, rule: QuadratureRule) -> None:
    if abs(rule.domain_end - form.domain_end) > 1e-12 * max(1.0, form.domain_end):
        raise SamplerMismatch(
            f"rule covers (0, {rule.domain_end}) but formulation works on "
            f"(0, {form.domain_end})")
    if rule.scheme == EXPONENTIAL and form.method != METHOD_WZ:
        raise SamplerMismatch("the exponential sampler is specific to the wz method")


def _rule_points(rule: QuadratureRule):
    xs = [rule.bulk_x]
    if rule.bulk_x2 is not None:
        xs.append(rule.bulk_x2)
    xs.append(rule.boundary_x)
    return np.concatenate(xs)


def _assemble(form: Formulation, rule: QuadratureRule, precision: str,
              v, dv, ddv, want_grad: bool):
    """Weighted loss sums (and per-point cotangents when want_grad)."""
    s = form.spec
    cdt = compute_dtype(precision)
    sdt = storage_dtype(precision)
    k1 = len(rule.bulk_x)
    k2 = len(rule.bulk_x2) if rule.bulk_x2 is not None else 0
    n = len(v)
    of = uf = False

    w0 = np.zeros(n, dtype=cdt) if want_grad else None
    w1 = np.zeros(n, dtype=cdt) if want_grad else None
    w2 = np.zeros(n, dtype=cdt) if want_grad else None

    if rule.scheme == EXPONENTIAL:
        # part 1: quadratic energy terms only (source evaluated on part 2)
        sl = slice(0, k1)
        c2 = cdt.type(s.zpde_coefficient())
        dens1 = 0.5 * (dv[sl] * dv[sl] + c2 * v[sl] * v[sl])
        wts1 = rule.bulk_w.astype(cdt)
        bulk = wts1 @ dens1
        if want_grad:
            w0[sl] = wts1 * (c2 * v[sl])
            w1[sl] = wts1 * dv[sl]
        # part 2: source term with the density factor removed
        sl2 = slice(k1, k1 + k2)
        wts2 = rule.bulk_w2.astype(cdt)
        coeff = cdt.type(s.source / s.epsilon)
        bulk = bulk + wts2 @ (-coeff * v[sl2])
        if want_grad:
            w0[sl2] = wts2 * (-coeff)
    else:
        sl = slice(0, k1)
        dens, parts, (of, uf) = form.bulk_density(
            rule.bulk_x, v[sl], dv[sl], ddv[sl], precision, grad=want_grad)
        wts = rule.bulk_w.astype(cdt)
        bulk = wts @ dens
        if want_grad:
            w0[sl], w1[sl], w2[sl] = (wts * p for p in parts)

    boundary = cdt.type(0.0)
    for side in (0, 1):
        i = k1 + k2 + side
        dens, parts, (of_b, uf_b) = form.boundary_density(
            side, v[i], dv[i], precision, grad=want_grad)
        tau = cdt.type(rule.boundary_w[side])
        boundary = boundary + tau * dens
        of, uf = of or of_b, uf or uf_b
        if want_grad:
            w0[i] = tau * parts[0]
            w1[i] = tau * parts[1]

    bulk_s = sdt.type(bulk)
    boundary_s = sdt.type(boundary)
    breakdown = LossBreakdown(total=float(bulk_s + boundary_s), bulk=float(bulk_s),
                              boundary=float(boundary_s), overflow=of, underflow=uf)
    return breakdown, (w0, w1, w2)


def discrete_loss(form: Formulation, params: net.NetworkParams,
                  rule: QuadratureRule) -> LossBreakdown:
    _validate_rule(form, rule)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        v, dv, ddv = net.forward_batch(params, _rule_points(rule))
        breakdown, _ = _assemble(form, rule, params.precision, v, dv, ddv, False)
    return breakdown


def discrete_loss_grad(form: Formulation, params: net.NetworkParams,
                       rule: QuadratureRule):
    """(LossBreakdown, gradient w.r.t. the flat parameter vector)."""
    _validate_rule(form, rule)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        v, dv, ddv, tape = net.forward_tape(params, _rule_points(rule))
        breakdown, (w0, w1, w2) = _assemble(form, rule, params.precision,
                                            v, dv, ddv, True)
        grad = net.vjp_from_tape(params, tape, w0, w1, w2)
    return breakdown, grad


def loss_of_callable(form: Formulation, fn, rule: QuadratureRule,
                     precision: str = DOUBLE) -> LossBreakdown:
    """Discrete loss of an arbitrary function fn: t -> (v, dv, ddv).

    Used by tests to evaluate the loss at exact solutions and perturbations
    without going through a network.
    """
    _validate_rule(form, rule)
    pts = _rule_points(rule)
    v, dv, ddv = (np.asarray(a, dtype=np.float64) for a in fn(pts))
    breakdown, _ = _assemble(form, rule, precision, v, dv, ddv, False)
    return breakdown
