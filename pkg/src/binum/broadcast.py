"""One synchronous information-broadcast round.

Each user ends the round holding exactly what the protocol permits: rates
and auxiliary values of route-sharing neighbors, and the curvature of its
own links at the current loads.  Consumers of an InfoView cannot reach
non-neighbor state because the view simply does not contain it.
"""

from dataclasses import dataclass

from .functions import barrier_dd


@dataclass(frozen=True)
class InfoView:
    """What one user knows after a broadcast.

    Maps are keyed by user/link id; key sets are exactly the owner's
    neighborhood (which includes the owner) and the owner's links.
    shared_links[i] lists the owner's links also used by neighbor i, so the
    auxiliary update needs no topology lookup beyond the view.
    """
    owner: str
    alpha: float
    neighbor_rates: dict
    neighbor_v: dict
    shared_links: dict
    link_curvature: dict


def broadcast_round(net, fs, x_hat, v, alpha):
    """Build every user's view of (x_hat, v, alpha) in one shot.

    Link curvatures are evaluated once per link at the current loads and
    shared across the views of that link's users.
    """
    y = net.link_loads(x_hat)
    curv = [float(barrier_dd(B, y[li])) for li, B in enumerate(fs.regularizers)]
    views = []
    for r in range(net.n_users):
        uid = net.users[r].id
        nbrs = net.neighbors(r)
        views.append(InfoView(
            owner=uid,
            alpha=float(alpha[r]),
            neighbor_rates={net.users[i].id: float(x_hat[i]) for i in nbrs},
            neighbor_v={net.users[i].id: float(v[i]) for i in nbrs},
            shared_links={net.users[i].id:
                          tuple(net.links[li].id for li in net.shared_links(r, i))
                          for i in nbrs},
            link_curvature={net.links[li].id: curv[li]
                            for li in net.route_of(r)},
        ))
    return views


def message_count(net):
    """Messages one broadcast costs: a packet to every distinct neighbor
    plus one curvature report per link subscription."""
    total = 0
    for r in range(net.n_users):
        total += len(net.neighbors(r)) - 1
        total += len(net.route_of(r))
    return total
