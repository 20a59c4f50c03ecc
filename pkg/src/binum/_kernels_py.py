"""Pure-Python mirror of the compiled ascent kernel.

Same two-phase algorithm as binum._kernels (Armijo backtracking with step
growth, then fixed-step polish watched through the gradient norm), written
with vectorized numpy. Results agree with the compiled kernel to rounding
(summation order differs, so bitwise equality is not guaranteed).
"""

import numpy as np

BACKEND = "python"

_DOMAIN_MARGIN = 1e-9


def _link_loads(x, link_ptr, link_users, m):
    y = np.empty(m)
    for l in range(m):
        y[l] = x[link_users[link_ptr[l]:link_ptr[l + 1]]].sum()
    return y


def _phi(x, link_ptr, link_users, sur_kind, alpha, eps,
         reg_kind, reg_a, reg_cap):
    if (x < _DOMAIN_MARGIN).any():
        return -np.inf, None
    m = len(reg_kind)
    y = _link_loads(x, link_ptr, link_users, m)
    barrier = reg_kind == 0
    room = reg_cap[barrier] - y[barrier]
    if (room < _DOMAIN_MARGIN).any():
        return -np.inf, y
    af = sur_kind == 0
    val = float(np.sum(x[af] ** (1.0 - alpha[af]) / (1.0 - alpha[af])))
    val += float(np.sum(np.log(x[~af])))
    val -= 0.5 * eps * float(np.sum(x * x))
    val += float(np.sum(reg_a[barrier] * np.log(room)))
    quad = ~barrier
    val -= 0.5 * float(np.sum(reg_a[quad] * y[quad] ** 2))
    return val, y


def _grad(x, route_ptr, route_links, link_ptr, link_users,
          sur_kind, alpha, eps, reg_kind, reg_a, reg_cap):
    n = len(x)
    m = len(reg_kind)
    y = _link_loads(x, link_ptr, link_users, m)
    bprime = np.where(reg_kind == 0, reg_a / (reg_cap - y), reg_a * y)
    af = sur_kind == 0
    g = np.empty(n)
    g[af] = x[af] ** (-alpha[af])
    g[~af] = 1.0 / x[~af]
    g -= eps * x
    for i in range(n):
        g[i] -= bprime[route_links[route_ptr[i]:route_ptr[i + 1]]].sum()
    return g, float(np.sqrt(np.sum(g * g)))


def _in_domain(x, link_ptr, link_users, reg_kind, reg_cap):
    if (x < _DOMAIN_MARGIN).any():
        return False
    m = len(reg_kind)
    y = _link_loads(x, link_ptr, link_users, m)
    barrier = reg_kind == 0
    return not (reg_cap[barrier] - y[barrier] < _DOMAIN_MARGIN).any()


def solve_kernel(route_ptr, route_links, link_ptr, link_users,
                 sur_kind, alpha, eps, reg_kind, reg_a, reg_cap,
                 x, lam, gtol, maxit, s0):
    """Run the ascent in place on x.

    Returns (iterations, final_grad_norm, last_step, converged).
    """
    s_last = lam if s0 <= 0.0 else s0
    it = 0
    stag = 0

    f, _ = _phi(x, link_ptr, link_users, sur_kind, alpha, eps,
                reg_kind, reg_a, reg_cap)
    if f == -np.inf:
        return 0, np.inf, s_last, 0

    # phase 1: Armijo backtracking with trial-step growth
    while it < maxit:
        g, gn = _grad(x, route_ptr, route_links, link_ptr, link_users,
                      sur_kind, alpha, eps, reg_kind, reg_a, reg_cap)
        gn2 = gn * gn
        if gn <= gtol:
            return it, gn, s_last, 1
        s = 4.0 * s_last
        slack = 3.6e-15 * (1.0 + abs(f))
        while True:
            xn = x + s * g
            fn, _ = _phi(xn, link_ptr, link_users, sur_kind, alpha, eps,
                         reg_kind, reg_a, reg_cap)
            if fn >= f + 0.1 * s * gn2 - slack or s < 1e-18:
                break
            s *= 0.5
        it += 1
        if s < 1e-18:
            break
        stag = stag + 1 if fn - f <= slack else 0
        x[:] = xn
        f = fn
        s_last = s
        if stag >= 3:
            break

    # phase 2: fixed-step polish guided by the gradient norm
    s = s_last
    g, gn = _grad(x, route_ptr, route_links, link_ptr, link_users,
                  sur_kind, alpha, eps, reg_kind, reg_a, reg_cap)
    best = x.copy()
    best_gn = gn
    window_best = gn
    wstart = it
    while it < maxit and best_gn > gtol:
        it += 1
        xn = x + s * g
        if not _in_domain(xn, link_ptr, link_users, reg_kind, reg_cap):
            s *= 0.5
            x[:] = best
            g, gn = _grad(x, route_ptr, route_links, link_ptr, link_users,
                          sur_kind, alpha, eps, reg_kind, reg_a, reg_cap)
            wstart = it
            window_best = gn
            continue
        x[:] = xn
        g, gn = _grad(x, route_ptr, route_links, link_ptr, link_users,
                      sur_kind, alpha, eps, reg_kind, reg_a, reg_cap)
        if gn < best_gn:
            best_gn = gn
            best = x.copy()
        if gn < window_best:
            window_best = gn
        if it - wstart >= 20:
            # no window progress: step too long for the local curvature
            if window_best > 0.95 * best_gn and gn > best_gn:
                s *= 0.5
                x[:] = best
                g, gn = _grad(x, route_ptr, route_links, link_ptr, link_users,
                              sur_kind, alpha, eps, reg_kind, reg_a, reg_cap)
            wstart = it
            window_best = gn
    x[:] = best
    return it, best_gn, s, 1 if best_gn <= gtol else 0
