"""Verification oracles and theory constants.

Everything here exists to check the optimization machinery from the
outside: conservative smoothness/concavity constants with the stepsize
advisories they imply, a finite-difference hypergradient oracle, the
KKT validator for single-link allocations, and a probe measuring the
contraction of the auxiliary v-iteration against the instance-exact rate.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bilevel import lu_solve
from .feedback import query_gradient
from .functions import (FunctionError, barrier_dd, psi_total, surrogate_dadx,
                        surrogate_dx, true_grad)
from .lower import phi_hessian, solve_lower


@dataclass(frozen=True)
class TheoryConstants:
    """Conservative instance constants and the stepsize advisories they
    imply.  mu_phi is the published strong-concavity constant (half the
    proof-level bound mu_phi_proof)."""
    mu_phi: float
    mu_phi_proof: float
    L_grad: float
    L_hess: float
    L_psi: float
    C_v: float
    C_phi: float
    eta_max: float
    beta_max: float


@dataclass(frozen=True)
class DomainBox:
    """Empirical bracket on lower-level solutions: every coordinate stayed
    in (delta_lower, b_upper); the operating box pads it to (delta/2, 2b)."""
    delta_lower: float
    b_upper: float

    def __post_init__(self):
        if not (0 < self.delta_lower < self.b_upper):
            raise ValueError("need 0 < delta_lower < b_upper")

    @property
    def operating(self):
        return (0.5 * self.delta_lower, 2.0 * self.b_upper)


def compute_constants(net, L_u, L_b, mu, eps, eta):
    """Instance constants from the derivative bounds L_u (utilities) and
    L_b (link curvature slope), plus the quadratic-regularizer floor mu."""
    n = net.n_users
    m_min = net.m_min
    mu_proof = eps + mu * m_min
    mu_phi = 0.5 * mu_proof
    route_len_total = sum(len(net.route_of(i)) for i in range(n))
    L_grad = math.sqrt(2.0 * L_u**2 + 2.0 * n * route_len_total * L_b**2)
    overlap = max(
        sum(len(net.shared_links(i, j)) for j in range(n))
        for i in range(n))
    L_hess = math.sqrt(2.0 * L_u**2 + 2.0 * n * L_b**2 * overlap**2)
    rn = math.sqrt(n)
    L_psi = ((L_grad / mu_phi)
             * (rn * L_u**2 / mu_phi
                + rn * L_u**2 * L_hess / mu_phi**2
                + L_u / mu_phi)
             + rn * L_u**2 / mu_phi
             + rn * L_u**3 / mu_phi**2)
    C_v = n * (1.0 + 2.0 / (eta * mu_phi)) * (
        (L_grad / mu_phi) * (L_u * L_hess / mu_phi**2 + L_u / (rn * mu_phi))
        + L_u**2 / mu_phi**2) ** 2
    C_phi = 4.0 * (1.0 + 1.0 / (eta * mu_phi)) * (
        L_hess * L_u / mu_phi**2 + L_u / (rn * mu_phi)) ** 2 * n**2
    beta_max = min(math.sqrt(eta * mu_phi / (256.0 * C_v * L_u**2)),
                   1.0 / (2.0 * L_psi))
    return TheoryConstants(mu_phi=mu_phi, mu_phi_proof=mu_proof,
                           L_grad=L_grad, L_hess=L_hess, L_psi=L_psi,
                           C_v=C_v, C_phi=C_phi,
                           eta_max=1.0 / L_grad, beta_max=beta_max)


def estimate_lipschitz(fs, box, grid=33):
    """Empirical lower bounds on the derivative constants: the largest
    finite-difference slope (and first-derivative magnitude) seen on a
    grid over the operating box and the parameter intervals."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    lo, hi = box.operating
    xs = np.linspace(lo, hi, grid)
    L_u = 0.0
    for i, u in enumerate(fs.surrogates):
        als = np.linspace(u.lo, u.hi, grid)
        if u.family == "alpha_fair":
            als = als[np.abs(als - 1.0) > 1e-9]
        for a in als:
            du = np.asarray(surrogate_dx(u, xs, a), dtype=np.float64)
            dm = np.asarray(surrogate_dadx(u, xs, a), dtype=np.float64)
            L_u = max(L_u, float(np.max(np.abs(du))),
                      float(np.max(np.abs(np.diff(du) / np.diff(xs)))),
                      float(np.max(np.abs(np.diff(dm) / np.diff(xs)))))
        for x in (lo, 0.5 * (lo + hi), hi):
            du_a = np.array([float(surrogate_dx(u, x, a)) for a in als])
            dm_a = np.array([float(surrogate_dadx(u, x, a)) for a in als])
            da = np.diff(als)
            L_u = max(L_u, float(np.max(np.abs(np.diff(du_a) / da))),
                      float(np.max(np.abs(np.diff(dm_a) / da))))
    for t in fs.trues:
        gt = np.asarray(true_grad(t, xs), dtype=np.float64)
        L_u = max(L_u, float(np.max(np.abs(gt))),
                  float(np.max(np.abs(np.diff(gt) / np.diff(xs)))))
    L_b = 0.0
    n = fs.n_users
    ys = np.linspace(lo * n, hi * n, grid)
    for B in fs.regularizers:
        if B.family == "log_barrier":
            ys_b = ys[ys < B.cap - 1e-6]
            if len(ys_b) < 2:
                ys_b = np.linspace(0.0, B.cap * (1 - 1e-3), grid)
            bdd = np.asarray(barrier_dd(B, ys_b), dtype=np.float64)
            L_b = max(L_b, float(np.max(np.abs(np.diff(bdd) / np.diff(ys_b)))))
        # quadratic: constant curvature, zero slope
    return L_u, L_b


def finite_difference_hypergradient(net, fs, alpha, h, lower_cfg):
    """Central-difference probe of the upper objective through the lower
    level: component r = (Psi(x*(alpha+h e_r)) - Psi(x*(alpha-h e_r)))/(2h).
    The lower solves must be much tighter than h (delta_phi <= h^2)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    n = len(alpha)
    base, cert = solve_lower(net, fs, alpha, lower_cfg)
    if not cert.converged:
        raise FunctionError("finite-difference probe: base solve failed")
    out = np.empty(n)
    for r in range(n):
        vals = []
        for sgn in (1.0, -1.0):
            a = alpha.copy()
            a[r] += sgn * h
            x, cert = solve_lower(net, fs, a, lower_cfg, x0=base,
                                  s0=cert.last_step)
            if not cert.converged:
                raise FunctionError(
                    f"finite-difference probe: solve failed at coordinate {r}")
            vals.append(psi_total(fs, x))
        out[r] = (vals[0] - vals[1]) / (2.0 * h)
    return out


@dataclass(frozen=True)
class Theorem2Report:
    """Residuals of the capacity-sharing KKT system: total-rate gap and the
    relative spread of the per-user marginals x_i^(-alpha_i)."""
    sum_residual: float
    kkt_spread: float
    passed: bool


def verify_theorem2(x, alpha_tilde, P, tol_sum=0.5, tol_kkt=1e-2):
    """Check a rate vector against the fixed-alpha fair-allocation optimum:
    rates fill the capacity and all marginals x_i^(-alpha_i) coincide."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(alpha_tilde, dtype=np.float64)
    if np.any(x <= 0) or np.any(a <= 0) or not (P > 0):
        raise ValueError("rates, alphas and capacity must be positive")
    sum_res = abs(float(np.sum(x)) - P)
    marg = x ** (-a)
    spread = float((np.max(marg) - np.min(marg)) / np.min(marg))
    return Theorem2Report(sum_residual=sum_res, kkt_spread=spread,
                          passed=(sum_res <= tol_sum and spread <= tol_kkt))


def contraction_probe(net, fs, alpha, eta, steps, lower_cfg=None, v0=None):
    """Measure how fast the v-iteration closes on the Hessian-inverse
    product with alpha frozen: returns successive error ratios
    ||v_{t+1} - v*|| / ||v_t - v*||, which stay below the instance rate
    1 - eta*|lambda_max(H)| for any stable eta.  Starting exactly at the
    fixed point yields an empty list."""
    from .lower import LowerConfig
    if lower_cfg is None:
        lower_cfg = LowerConfig(stepsize=1.0, max_iters=500000,
                                delta_phi=1e-8)
    alpha = np.asarray(alpha, dtype=np.float64)
    x, cert = solve_lower(net, fs, alpha, lower_cfg)
    if not cert.converged:
        raise FunctionError("contraction probe: lower solve failed")
    H = phi_hessian(net, fs, x, alpha)
    g = np.array([float(query_gradient(t, x[i]))
                  for i, t in enumerate(fs.trues)])
    v_star = lu_solve(H, g)
    v = np.zeros_like(v_star) if v0 is None else np.array(v0, dtype=np.float64)
    ratios = []
    e_prev = float(np.linalg.norm(v - v_star))
    for _ in range(steps):
        v = v + eta * (H @ v) - eta * g
        e = float(np.linalg.norm(v - v_star))
        if e_prev < 1e-300:
            break
        ratios.append(e / e_prev)
        e_prev = e
    return ratios


def estimate_domain_box(rate_rows):
    """Post-hoc box bracket from a trajectory's rate vectors."""
    arr = np.asarray(list(rate_rows), dtype=np.float64)
    return DomainBox(delta_lower=float(np.min(arr)),
                     b_upper=float(np.max(arr)))
