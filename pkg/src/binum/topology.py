"""Network model: links, users, routes, and the neighborhood structure.

A network is a set of capacitated links plus a set of users, each sending
along a fixed route (subset of links). Everything downstream (lower-level
solves, the per-user update rules, the broadcast views) only ever needs the
derived structure computed here: which users share which links, who is a
neighbor of whom, and the flat CSR-style arrays the numeric kernels consume.
"""

from dataclasses import dataclass, field
import numpy as np

__all__ = ["Link", "User", "Network", "TopologyError"]


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    id: str
    capacity: float

    def __post_init__(self):
        if not self.id:
            raise TopologyError("link id must be non-empty")
        if not (self.capacity > 0):
            raise TopologyError(f"link {self.id}: capacity must be positive, got {self.capacity}")


@dataclass(frozen=True)
class User:
    id: str
    route: tuple
    """Link ids traversed by this user's flow, in declaration order."""

    def __post_init__(self):
        if not self.id:
            raise TopologyError("user id must be non-empty")
        if len(self.route) == 0:
            raise TopologyError(f"user {self.id}: route must contain at least one link")
        if len(set(self.route)) != len(self.route):
            raise TopologyError(f"user {self.id}: route repeats a link")


class Network:
    """Immutable topology with derived index structure.

    Users and links keep their declaration order; all vector quantities
    elsewhere in the package are indexed by that order.
    """

    def __init__(self, links, users):
        links = list(links)
        users = list(users)
        if not users:
            raise TopologyError("network has no users")
        if not links:
            raise TopologyError("network has no links")
        seen = set()
        for l in links:
            if l.id in seen:
                raise TopologyError(f"duplicate link id {l.id}")
            seen.add(l.id)
        seen = set()
        for u in users:
            if u.id in seen:
                raise TopologyError(f"duplicate user id {u.id}")
            seen.add(u.id)
        self.links = tuple(links)
        self.users = tuple(users)
        self._link_index = {l.id: i for i, l in enumerate(self.links)}
        self._user_index = {u.id: i for i, u in enumerate(self.users)}
        for u in users:
            for lid in u.route:
                if lid not in self._link_index:
                    raise TopologyError(f"user {u.id}: route references unknown link {lid}")

        n, m = len(self.users), len(self.links)
        self._routes = tuple(
            tuple(self._link_index[lid] for lid in u.route) for u in self.users
        )
        self._link_users = tuple(
            tuple(i for i in range(n) if li in self._routes[i]) for li in range(m)
        )
        # neighbor sets include the user itself
        self._neighbors = tuple(
            tuple(sorted({j for li in self._routes[i] for j in self._link_users[li]}))
            for i in range(n)
        )
        self._build_csr()

    def _build_csr(self):
        n, m = self.n_users, self.n_links
        rp = np.zeros(n + 1, dtype=np.int32)
        for i in range(n):
            rp[i + 1] = rp[i] + len(self._routes[i])
        rl = np.zeros(rp[-1], dtype=np.int32)
        for i in range(n):
            rl[rp[i]:rp[i + 1]] = self._routes[i]
        lp = np.zeros(m + 1, dtype=np.int32)
        for li in range(m):
            lp[li + 1] = lp[li] + len(self._link_users[li])
        lu = np.zeros(lp[-1], dtype=np.int32)
        for li in range(m):
            lu[lp[li]:lp[li + 1]] = self._link_users[li]
        self.route_ptr, self.route_links = rp, rl
        self.link_ptr, self.link_users_flat = lp, lu
        self.capacities = np.array([l.capacity for l in self.links], dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.links == other.links and self.users == other.users

    def __hash__(self):
        return hash((self.links, self.users))

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_links(self):
        return len(self.links)

    def user_index(self, uid):
        return self._user_index[uid]

    def link_index(self, lid):
        return self._link_index[lid]

    def route_of(self, i):
        """Link indices of user i's route."""
        return self._routes[i]

    def users_on(self, li):
        """User indices whose route contains link li, ascending."""
        return self._link_users[li]

    def neighbors(self, i):
        """Users sharing at least one link with user i, including i itself."""
        return self._neighbors[i]

    def shared_links(self, i, j):
        """Link indices on both user i's and user j's routes."""
        ri = set(self._routes[i])
        return tuple(li for li in self._routes[j] if li in ri)

    def link_loads(self, x):
        """Aggregate rate per link for the rate vector x."""
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros(self.n_links)
        for li in range(self.n_links):
            for i in self._link_users[li]:
                y[li] += x[i]
        return y

    def exclusive_link_count(self, i):
        """Number of links used by user i and nobody else."""
        return sum(1 for li in self._routes[i] if len(self._link_users[li]) == 1)

    @property
    def m_min(self):
        """Minimum over users of the exclusively-occupied link count."""
        return min(self.exclusive_link_count(i) for i in range(self.n_users))
