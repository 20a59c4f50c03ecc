# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loop of the lower-level solve.

The iteration is two-phase safeguarded gradient ascent on the penalized
objective: a backtracking line search with trial-step growth while function
increases are measurable, then a fixed-step polish that ignores function
values (whose differences sit below rounding noise near the optimum) and
monitors the gradient norm instead.

Family codes: surrogate 0 = alpha_fair, 1 = log;
regularizer 0 = log_barrier (param = tau, cap used), 1 = quadratic (param = mu).

Mirrors binum._kernels_py.solve_kernel; keep both in sync.
"""

from libc.math cimport log, sqrt, pow, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF DOMAIN_MARGIN = 1e-9

BACKEND = "cython"


cdef double _phi(double[::1] x, double[::1] y,
                 int[::1] link_ptr, int[::1] link_users,
                 int[::1] sur_kind, double[::1] alpha, double eps,
                 int[::1] reg_kind, double[::1] reg_a, double[::1] reg_cap,
                 int n, int m) nogil:
    """Objective value, or -inf outside the safeguarded domain.

    Side effect: y receives the per-link aggregate loads.
    """
    cdef int i, l, k
    cdef double val = 0.0, acc, room
    for i in range(n):
        acc = x[i]
        if acc < DOMAIN_MARGIN:
            return -INFINITY
        if sur_kind[i] == 0:
            val += pow(acc, 1.0 - alpha[i]) / (1.0 - alpha[i])
        else:
            val += log(acc)
        val -= 0.5 * eps * acc * acc
    for l in range(m):
        acc = 0.0
        for k in range(link_ptr[l], link_ptr[l + 1]):
            acc += x[link_users[k]]
        y[l] = acc
        if reg_kind[l] == 0:
            room = reg_cap[l] - acc
            if room < DOMAIN_MARGIN:
                return -INFINITY
            val += reg_a[l] * log(room)
        else:
            val -= 0.5 * reg_a[l] * acc * acc
    return val


cdef int _in_domain(double[::1] x,
                    int[::1] link_ptr, int[::1] link_users,
                    int[::1] reg_kind, double[::1] reg_cap,
                    int n, int m) nogil:
    cdef int i, l, k
    cdef double acc
    for i in range(n):
        if x[i] < DOMAIN_MARGIN:
            return 0
    for l in range(m):
        if reg_kind[l] != 0:
            continue
        acc = 0.0
        for k in range(link_ptr[l], link_ptr[l + 1]):
            acc += x[link_users[k]]
        if reg_cap[l] - acc < DOMAIN_MARGIN:
            return 0
    return 1


cdef double _grad(double[::1] x, double[::1] y, double[::1] g,
                  int[::1] route_ptr, int[::1] route_links,
                  int[::1] link_ptr, int[::1] link_users,
                  int[::1] sur_kind, double[::1] alpha, double eps,
                  int[::1] reg_kind, double[::1] reg_a, double[::1] reg_cap,
                  double[::1] bprime, int n, int m) nogil:
    """Gradient at x (assumed interior); returns its Euclidean norm.

    Side effects: y gets link loads, bprime gets per-link first derivatives.
    """
    cdef int i, l, k
    cdef double acc, gn2 = 0.0
    for l in range(m):
        acc = 0.0
        for k in range(link_ptr[l], link_ptr[l + 1]):
            acc += x[link_users[k]]
        y[l] = acc
        if reg_kind[l] == 0:
            bprime[l] = reg_a[l] / (reg_cap[l] - acc)
        else:
            bprime[l] = reg_a[l] * acc
    for i in range(n):
        if sur_kind[i] == 0:
            acc = pow(x[i], -alpha[i])
        else:
            acc = 1.0 / x[i]
        acc -= eps * x[i]
        for k in range(route_ptr[i], route_ptr[i + 1]):
            acc -= bprime[route_links[k]]
        g[i] = acc
        gn2 += acc * acc
    return sqrt(gn2)


def solve_kernel(int[::1] route_ptr, int[::1] route_links,
                 int[::1] link_ptr, int[::1] link_users,
                 int[::1] sur_kind, double[::1] alpha, double eps,
                 int[::1] reg_kind, double[::1] reg_a, double[::1] reg_cap,
                 double[::1] x, double lam, double gtol, long maxit,
                 double s0):
    """Run the ascent in place on x.

    Returns (iterations, final_grad_norm, last_step, converged).
    """
    cdef int n = alpha.shape[0]
    cdef int m = reg_kind.shape[0]
    cdef cnp.ndarray[double, ndim=1] xn_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] g_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] y_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] bp_a = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] best_a = np.empty(n)
    cdef double[::1] xn = xn_a, g = g_a, y = y_a, bp = bp_a, best = best_a

    cdef double s_last = lam if s0 <= 0.0 else s0
    cdef double f, fn, gn, gn2, s, slack, best_gn, window_best
    cdef long it = 0, wstart
    cdef int i, stag = 0

    f = _phi(x, y, link_ptr, link_users, sur_kind, alpha, eps,
             reg_kind, reg_a, reg_cap, n, m)
    if f == -INFINITY:
        # caller guarantees a strictly feasible start; treat as failure
        return 0, INFINITY, s_last, 0

    # phase 1: Armijo backtracking with trial-step growth
    while it < maxit:
        gn = _grad(x, y, g, route_ptr, route_links, link_ptr, link_users,
                   sur_kind, alpha, eps, reg_kind, reg_a, reg_cap, bp, n, m)
        gn2 = gn * gn
        if gn <= gtol:
            return it, gn, s_last, 1
        s = 4.0 * s_last
        slack = 3.6e-15 * (1.0 + (f if f >= 0 else -f))
        while True:
            for i in range(n):
                xn[i] = x[i] + s * g[i]
            fn = _phi(xn, y, link_ptr, link_users, sur_kind, alpha, eps,
                      reg_kind, reg_a, reg_cap, n, m)
            if fn >= f + 0.1 * s * gn2 - slack or s < 1e-18:
                break
            s *= 0.5
        it += 1
        if s < 1e-18:
            break
        if fn - f <= slack:
            stag += 1
        else:
            stag = 0
        for i in range(n):
            x[i] = xn[i]
        f = fn
        s_last = s
        if stag >= 3:
            break

    # phase 2: fixed-step polish guided by the gradient norm
    s = s_last
    gn = _grad(x, y, g, route_ptr, route_links, link_ptr, link_users,
               sur_kind, alpha, eps, reg_kind, reg_a, reg_cap, bp, n, m)
    best_gn = gn
    for i in range(n):
        best[i] = x[i]
    window_best = gn
    wstart = it
    while it < maxit and best_gn > gtol:
        it += 1
        for i in range(n):
            xn[i] = x[i] + s * g[i]
        if not _in_domain(xn, link_ptr, link_users, reg_kind, reg_cap, n, m):
            s *= 0.5
            for i in range(n):
                x[i] = best[i]
            gn = _grad(x, y, g, route_ptr, route_links, link_ptr, link_users,
                       sur_kind, alpha, eps, reg_kind, reg_a, reg_cap, bp, n, m)
            wstart = it
            window_best = gn
            continue
        for i in range(n):
            x[i] = xn[i]
        gn = _grad(x, y, g, route_ptr, route_links, link_ptr, link_users,
                   sur_kind, alpha, eps, reg_kind, reg_a, reg_cap, bp, n, m)
        if gn < best_gn:
            best_gn = gn
            for i in range(n):
                best[i] = x[i]
        if gn < window_best:
            window_best = gn
        if it - wstart >= 20:
            # no window progress: step too long for the local curvature
            if window_best > 0.95 * best_gn and gn > best_gn:
                s *= 0.5
                for i in range(n):
                    x[i] = best[i]
                gn = _grad(x, y, g, route_ptr, route_links,
                           link_ptr, link_users, sur_kind, alpha, eps,
                           reg_kind, reg_a, reg_cap, bp, n, m)
            wstart = it
            window_best = gn
    for i in range(n):
        x[i] = best[i]
    return it, best_gn, s, 1 if best_gn <= gtol else 0
