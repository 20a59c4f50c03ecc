"""Shared builders for the test suite.

Small canonical topologies (single bottleneck, disjoint, chain) plus a
random-instance generator used by the property and acceptance tests.
"""

import numpy as np
import pytest

from binum.functions import FunctionSet, Regularizer, SurrogateUtility, TrueUtility
from binum.topology import Link, Network, User


def single_link_net(n=3, cap=100.0):
    """n users all sharing one link."""
    links = [Link("l1", cap)]
    users = [User(f"u{i + 1}", ("l1",)) for i in range(n)]
    return Network(links, users)


def disjoint_net(n=2, cap=50.0):
    """n users, each alone on its own link."""
    links = [Link(f"l{i + 1}", cap) for i in range(n)]
    users = [User(f"u{i + 1}", (f"l{i + 1}",)) for i in range(n)]
    return Network(links, users)


def chain_net(cap=60.0):
    """Three users over four links: u1:{l1,l2}, u2:{l2,l3}, u3:{l3,l4}."""
    links = [Link(f"l{i}", cap) for i in (1, 2, 3, 4)]
    users = [User("u1", ("l1", "l2")),
             User("u2", ("l2", "l3")),
             User("u3", ("l3", "l4"))]
    return Network(links, users)


def af_surrogate(lo=0.2, hi=8.0, alpha0=2.0):
    return SurrogateUtility("alpha_fair", lo, hi, alpha0)


def quad_reg(mu=0.5):
    return Regularizer("quadratic", mu=mu)


def barrier_reg(tau=0.01, cap=100.0):
    return Regularizer("log_barrier", tau=tau, cap=cap)


def make_fs(net, surrogates=None, trues=None, regularizers=None, epsilon=1e-3):
    n, m = net.n_users, net.n_links
    if surrogates is None:
        surrogates = tuple(af_surrogate() for _ in range(n))
    if trues is None:
        trues = tuple(TrueUtility("log_form", a=2.0, b=1.0) for _ in range(n))
    if regularizers is None:
        regularizers = tuple(barrier_reg(cap=net.links[li].capacity)
                             for li in range(m))
    return FunctionSet(surrogates=tuple(surrogates), trues=tuple(trues),
                       regularizers=tuple(regularizers), epsilon=epsilon)


_TRUE_POOL = (
    lambda rng: TrueUtility("quadratic", a=float(rng.uniform(0.01, 0.3))),
    lambda rng: TrueUtility("log_form", a=float(rng.uniform(0.5, 5.0)),
                            b=float(rng.uniform(0.2, 2.0))),
    lambda rng: TrueUtility("sqrt_shifted", a=float(rng.uniform(0.5, 5.0)),
                            b=float(rng.uniform(0.1, 1.0))),
    lambda rng: TrueUtility("alpha_fair",
                            a=float(rng.choice([0.4, 0.6, 0.8, 1.3, 1.7]))),
    lambda rng: TrueUtility("s_shape", a=float(rng.uniform(0.5, 0.95)),
                            b=float(rng.uniform(0.2, 2.0))),
)


def random_instance(rng, n, m, epsilon=1e-3, barrier_prob=0.5):
    """A feasible random network + function set.

    Every user routes over a nonempty random link subset and every link
    carries at least one user; capacities are generous enough that the
    interior start is comfortably feasible.
    """
    links = [Link(f"l{j + 1}", float(rng.uniform(40.0, 120.0)))
             for j in range(m)]
    routes = []
    for i in range(n):
        k = int(rng.integers(1, m + 1))
        routes.append(tuple(f"l{j + 1}"
                            for j in sorted(rng.choice(m, size=k, replace=False))))
    # cover any link no route picked, so the load vector touches all of them
    used = {lid for r in routes for lid in r}
    for j in range(m):
        lid = f"l{j + 1}"
        if lid not in used:
            i = int(rng.integers(0, n))
            routes[i] = tuple(sorted(set(routes[i]) | {lid}))
    users = [User(f"u{i + 1}", routes[i]) for i in range(n)]
    net = Network(links, users)

    surrogates = tuple(
        SurrogateUtility("alpha_fair", 0.2, 8.0,
                         float(rng.uniform(1.2, 3.0)))
        for _ in range(n))
    trues = tuple(_TRUE_POOL[int(rng.integers(0, len(_TRUE_POOL)))](rng)
                  for _ in range(n))
    regs = []
    for li in range(m):
        if rng.random() < barrier_prob:
            regs.append(Regularizer("log_barrier",
                                    tau=float(rng.uniform(1e-3, 5e-2)),
                                    cap=links[li].capacity))
        else:
            regs.append(Regularizer("quadratic",
                                    mu=float(rng.uniform(1e-3, 5e-2))))
    return net, FunctionSet(surrogates=surrogates, trues=trues,
                            regularizers=tuple(regs), epsilon=epsilon)


def random_feasible_x(rng, net):
    """A strictly feasible random rate vector: a random shrink of the
    interior default start, so every barrier room stays open."""
    from binum.lower import default_x0
    return default_x0(net) * rng.uniform(0.3, 1.0, size=net.n_users)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
