"""Upper level of the bilevel allocation: learn per-user surrogate
parameters alpha so the induced rates maximize the hidden true utilities.

Each round solves the lower level at the current alpha, broadcasts, queries
user feedback, advances the auxiliary vector v (which tracks the inverse
Hessian-vector product of the hypergradient in a distributed way), then
takes a projected step on alpha.  An exact dense hypergradient oracle is
kept alongside for diagnostics on small instances.
"""

from dataclasses import dataclass

import numpy as np

from .broadcast import broadcast_round
from .feedback import FeedbackMode, feedback_vector, query_gradient
from .functions import FunctionError, psi_total, surrogate_dadx, surrogate_dxx
from .lower import phi_hessian, solve_lower


@dataclass(frozen=True)
class UpperConfig:
    """Round budget and the two upper-level stepsizes: eta drives the
    auxiliary v tracking, beta the projected alpha step."""
    eta: float
    beta: float
    rounds: int
    oracle_cap: int = 64

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError("eta must be positive")
        if not (self.beta > 0):
            raise ValueError("beta must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class BilevelState:
    """Mutable per-round state; v starts at zero."""
    round: int
    alpha: np.ndarray
    v: np.ndarray
    x_hat: np.ndarray
    certificate: object


@dataclass(frozen=True)
class MetricsRecord:
    """One row of the run trajectory (state of round k before the alpha
    step): achieved true utility, rates, parameters, projected-gradient
    norm, lower-level effort, and feedback clip events."""
    round: int
    psi: float
    rates: tuple
    alphas: tuple
    gproj_norm: float
    lower_iters: int
    clip_count: int


def lu_solve(A, b):
    """Dense solve by partially pivoted elimination.

    Kept in-house (not LAPACK) so results are bit-reproducible regardless
    of the BLAS build and its thread count.
    """
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0.0:
            raise np.linalg.LinAlgError("singular matrix")
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[k], b[p] = b[p], b[k]
        for i in range(k + 1, n):
            m = A[i, k] / A[k, k]
            if m != 0.0:
                A[i, k + 1:] -= m * A[k, k + 1:]
                b[i] -= m * b[k]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - float(A[i, i + 1:] @ x[i + 1:])) / A[i, i]
    return x


def exact_hypergradient(net, fs, alpha, x_star):
    """Sensitivity of the true total utility to alpha at the lower-level
    optimum: -D H^{-1} g with D the mixed surrogate derivatives, H the
    lower-level Hessian, g the true-utility gradients at x_star."""
    alpha = np.asarray(alpha, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    n = net.n_users
    d = np.array([float(surrogate_dadx(fs.surrogates[i], x_star[i], alpha[i]))
                  for i in range(n)])
    g = np.array([float(query_gradient(fs.trues[i], x_star[i]))
                  for i in range(n)])
    H = phi_hessian(net, fs, x_star, alpha)
    w = lu_solve(H, g)
    return -d * w


def v_update(fs, views, feedback, eta):
    """Advance the auxiliary vector from broadcast views only.

    Per user r:  v'_r = (1 - eta*eps + eta*U''_r) v_r
                        - eta * sum over neighbors i of v_i times the summed
                          curvature of the links r shares with i
                        - eta * feedback_r
    which equals the centralized (I + eta*H)v - eta*g.
    """
    n = len(views)
    out = np.empty(n)
    for r, view in enumerate(views):
        if not np.isfinite(feedback[r]):
            raise FunctionError("non-finite feedback value")
        xr = view.neighbor_rates[view.owner]
        d2u = float(surrogate_dxx(fs.surrogates[r], xr, view.alpha))
        acc = (1.0 - eta * fs.epsilon + eta * d2u) * view.neighbor_v[view.owner]
        coupling = 0.0
        for i, links in view.shared_links.items():
            if links:
                coupling += view.neighbor_v[i] * sum(
                    view.link_curvature[l] for l in links)
        out[r] = acc - eta * coupling - eta * feedback[r]
    return out


def alpha_update(fs, alpha, x_hat, v_next, beta):
    """Projected parameter step using the distributed hypergradient
    estimate -D v': alpha'_r = clamp(alpha_r - beta * dadx_r * v'_r)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    out = np.empty_like(alpha)
    for r, u in enumerate(fs.surrogates):
        d = float(surrogate_dadx(u, x_hat[r], alpha[r]))
        out[r] = min(max(alpha[r] - beta * d * v_next[r], u.lo), u.hi)
    return out


def generalized_projected_gradient(alpha, grad, beta, lo, hi):
    """Projected ascent displacement per unit step: equals grad when the
    step stays interior, shrinks where the box binds."""
    alpha = np.asarray(alpha, dtype=np.float64)
    stepped = np.clip(alpha + beta * np.asarray(grad), lo, hi)
    return (stepped - alpha) / beta


def estimated_hypergradient(fs, alpha, x_hat, v_next):
    """The distributed surrogate for the hypergradient: -D v'."""
    d = np.array([float(surrogate_dadx(fs.surrogates[i], x_hat[i], alpha[i]))
                  for i in range(len(v_next))])
    return -d * v_next


def run_dbinum(net, fs, lower_cfg, upper_cfg, mode=None):
    """Run the full bilevel loop for upper_cfg.rounds rounds.

    Returns (records, aborted) where aborted is None on a clean run or a
    message describing the failure that cut the trajectory short.  The
    projected-gradient column uses the exact oracle when the instance is
    small enough (n <= oracle_cap), else the distributed estimate.
    """
    if mode is None:
        mode = FeedbackMode()
    n = net.n_users
    lo, hi = fs.alpha_lo(), fs.alpha_hi()
    alpha = fs.alpha0()
    v = np.zeros(n)
    x = None
    s0 = 0.0
    records = []
    try:
        for k in range(upper_cfg.rounds):
            x, cert = solve_lower(net, fs, alpha, lower_cfg, x0=x, s0=s0)
            if not cert.converged:
                return records, (f"lower-level solve missed its tolerance at "
                                 f"round {k} (grad norm {cert.grad_norm:.3e})")
            s0 = cert.last_step
            views = broadcast_round(net, fs, x, v, alpha)
            fb, clips = feedback_vector(mode, fs, x, k)
            v = v_update(fs, views, fb, upper_cfg.eta)
            if n <= upper_cfg.oracle_cap:
                hyper = exact_hypergradient(net, fs, alpha, x)
            else:
                hyper = estimated_hypergradient(fs, alpha, x, v)
            gproj = generalized_projected_gradient(alpha, hyper,
                                                   upper_cfg.beta, lo, hi)
            gn = float(np.sqrt(np.sum(gproj * gproj)))
            records.append(MetricsRecord(
                round=k, psi=psi_total(fs, x), rates=tuple(float(t) for t in x),
                alphas=tuple(float(t) for t in alpha), gproj_norm=gn,
                lower_iters=cert.iterations, clip_count=clips))
            alpha = alpha_update(fs, alpha, x, v, upper_cfg.beta)
            if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(v)):
                return records, f"non-finite upper-level state at round {k}"
    except (FunctionError, np.linalg.LinAlgError) as e:
        return records, str(e)
    return records, None
