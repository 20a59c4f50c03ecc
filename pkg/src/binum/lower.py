"""Lower-level solver: safeguarded gradient ascent on the regularized
network objective

    Phi(x; alpha) = sum_r (U_r(x_r; alpha_r) - eps*x_r^2/2) - sum_l B_l(y_l)

with y_l the load on link l.  Phi is strongly concave (the eps term plus any
quadratic link regularizers), so a gradient-norm stopping rule certifies a
distance-to-optimum bound.  The hot loop lives in the compiled kernel; this
module holds the reference implementations of Phi and its derivatives, the
certificate logic, and the closed-form single-link oracle.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .functions import (FunctionError, barrier_d, barrier_dd, barrier_value,
                        surrogate_dx, surrogate_dxx, surrogate_value)


@dataclass(frozen=True)
class LowerConfig:
    """Ascent parameters: initial stepsize, iteration cap, and the target
    rate-space accuracy delta_phi (certified via strong concavity)."""
    stepsize: float = 1.0
    max_iters: int = 5000
    delta_phi: float = 1e-6

    def __post_init__(self):
        if not (self.stepsize > 0):
            raise ValueError("stepsize must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.delta_phi > 0):
            raise ValueError("delta_phi must be positive")


@dataclass(frozen=True)
class SolveCertificate:
    """What the solver can prove about its iterate: on success the
    error_bound = grad_norm / mu_phi is <= the requested delta_phi."""
    iterations: int
    grad_norm: float
    error_bound: float
    converged: bool
    last_step: float


def strong_concavity_modulus(net, fs, level="statement"):
    """Lower bound on the concavity of Phi over the feasible region.

    eps always contributes; quadratic link regularizers add mu times the
    minimum per-user count of exclusively-held quadratic links (a link shared
    with others gives no uniform bound).  level="statement" halves the
    constant, matching the published form; "proof" returns the unhalved one.
    """
    mus = [B.mu for B in fs.regularizers if B.family == "quadratic"]
    extra = 0.0
    if mus:
        counts = []
        for i in range(net.n_users):
            c = sum(1 for li in net.route_of(i)
                    if len(net.users_on(li)) == 1
                    and fs.regularizers[li].family == "quadratic")
            counts.append(c)
        extra = min(mus) * min(counts)
    m = fs.epsilon + extra
    return 0.5 * m if level == "statement" else m


def phi_value(net, fs, x, alpha):
    """Reference evaluation of Phi; raises on any domain violation."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    terms = []
    for i, u in enumerate(fs.surrogates):
        terms.append(float(surrogate_value(u, x[i], alpha[i])))
        terms.append(-0.5 * fs.epsilon * float(x[i]) ** 2)
    y = net.link_loads(x)
    for li, B in enumerate(fs.regularizers):
        terms.append(-float(barrier_value(B, y[li])))
    return math.fsum(terms)


def phi_grad(net, fs, x, alpha):
    """Gradient of Phi; component r only touches x on user r's neighborhood."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    y = net.link_loads(x)
    bprime = np.array([float(barrier_d(B, y[li]))
                       for li, B in enumerate(fs.regularizers)])
    g = np.empty(net.n_users)
    for i, u in enumerate(fs.surrogates):
        g[i] = (float(surrogate_dx(u, x[i], alpha[i]))
                - fs.epsilon * x[i]
                - sum(bprime[li] for li in net.route_of(i)))
    return g


def phi_hessian(net, fs, x, alpha):
    """Dense Hessian of Phi: diagonal utility curvature minus eps, link
    curvature spread over every user pair sharing the link."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    n = net.n_users
    y = net.link_loads(x)
    H = np.zeros((n, n))
    for li, B in enumerate(fs.regularizers):
        bdd = float(barrier_dd(B, y[li]))
        us = net.users_on(li)
        for i in us:
            for j in us:
                H[i, j] -= bdd
    for i, u in enumerate(fs.surrogates):
        H[i, i] += float(surrogate_dxx(u, x[i], alpha[i])) - fs.epsilon
    return H


def default_x0(net):
    """Strictly feasible interior start: each user takes its tightest route
    capacity divided by one plus the heaviest sharing count on its route."""
    x0 = np.empty(net.n_users)
    for i in range(net.n_users):
        route = net.route_of(i)
        cmin = min(net.capacities[li] for li in route)
        crowd = max(len(net.users_on(li)) for li in route)
        x0[i] = cmin / (1.0 + crowd)
    return x0


_SUR_CODE = {"alpha_fair": 0, "log": 1}
_REG_CODE = {"log_barrier": 0, "quadratic": 1}


def pack_kernel_args(net, fs):
    """Flatten function-set metadata into the arrays the kernel consumes."""
    sur_kind = np.array([_SUR_CODE[u.family] for u in fs.surrogates],
                        dtype=np.int32)
    reg_kind = np.array([_REG_CODE[B.family] for B in fs.regularizers],
                        dtype=np.int32)
    reg_a = np.array([B.tau if B.family == "log_barrier" else B.mu
                      for B in fs.regularizers])
    reg_cap = np.array([B.cap if B.family == "log_barrier" else np.inf
                        for B in fs.regularizers])
    return sur_kind, reg_kind, reg_a, reg_cap


def solve_lower(net, fs, alpha, cfg, x0=None, s0=0.0):
    """Maximize Phi(.; alpha) to the configured accuracy.

    Returns (x_hat, SolveCertificate).  Warm starts: pass the previous
    solution as x0 and the previous certificate's last_step as s0.  Failure
    to converge within max_iters is reported on the certificate, not raised;
    an infeasible start raises.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if x0 is None:
        x = default_x0(net)
    else:
        x = np.array(x0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise FunctionError("non-finite start for the lower-level solve")
    sur_kind, reg_kind, reg_a, reg_cap = pack_kernel_args(net, fs)
    mu = strong_concavity_modulus(net, fs)
    gtol = mu * cfg.delta_phi
    its, gn, step, conv = _backend.solve_kernel(
        net.route_ptr, net.route_links, net.link_ptr, net.link_users_flat,
        sur_kind, alpha, fs.epsilon, reg_kind, reg_a, reg_cap,
        x, cfg.stepsize, gtol, cfg.max_iters, float(s0))
    if its == 0 and not conv and not np.isfinite(gn):
        raise FunctionError("infeasible start for the lower-level solve")
    cert = SolveCertificate(iterations=int(its), grad_norm=float(gn),
                            error_bound=float(gn) / mu,
                            converged=bool(conv), last_step=float(step))
    return x, cert


def solve_single_link_closed_form(alphas, P, tol=1e-10, max_bisect=500):
    """Rates maximizing sum_r x_r^(1-alpha_r)/(1-alpha_r) subject to
    sum x = P: x_i = c^(-1/alpha_i) with c chosen so the rates fill P.

    The fill level sum_i c^(-1/alpha_i) is strictly decreasing in c, so c is
    bracketed by doubling/halving the log-offset from c=1 and then bisected
    until |sum x - P| <= tol.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if np.any(a <= 0):
        raise FunctionError("closed-form oracle needs positive alphas")
    if not (P > 0):
        raise FunctionError("closed-form oracle needs positive capacity")

    def fill(t):
        # t = log c
        return float(np.sum(np.exp(-t / a)))

    t_lo, t_hi = 0.0, 0.0
    step = 1.0
    if fill(0.0) > P:
        while fill(t_hi) > P:
            t_lo = t_hi
            t_hi += step
            step *= 2.0
    else:
        while fill(t_lo) < P:
            t_hi = t_lo
            t_lo -= step
            step *= 2.0
    for _ in range(max_bisect):
        t = 0.5 * (t_lo + t_hi)
        s = fill(t)
        if abs(s - P) <= tol:
            return np.exp(-t / a)
        if s > P:
            t_lo = t
        else:
            t_hi = t
    raise FunctionError("single-link bisection did not reach tolerance")
