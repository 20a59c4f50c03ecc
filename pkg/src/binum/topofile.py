"""Line-oriented topology file format.

    # comment
    link <id> capacity=<real>
    user <id> route=<id,id,...> true=<family>(<params>) \
        surrogate=<family> bounds=(<lo>,<hi>] alpha0=<real>
    regularizer <link id|all> log_barrier tau=<real>
    regularizer <link id|all> quadratic mu=<real>

Key=value fields after the id may appear in any order.  Barrier capacities
come from the link they guard.  A `regularizer all` line sets a default a
later link-specific line may override.  Parsing is strict: unknown keys,
duplicate definitions, and dangling route references are errors that name
the offending line.
"""

from dataclasses import dataclass

from .functions import (FunctionSet, Regularizer, SurrogateUtility,
                        TrueUtility, TRUE_FAMILIES, SURROGATE_FAMILIES)
from .topology import Link, Network, TopologyError, User

_TRUE_ARITY = {"quadratic": (1,), "sqrt_diff": (2,), "sqrt_shifted": (2,),
               "log_form": (2,), "alpha_fair": (1,), "s_shape": (2,)}


@dataclass(frozen=True)
class TopologySpec:
    """A parsed topology: the network plus per-user/per-link function
    specs.  Regularizer entries may be None (to be supplied by run
    config); epsilon always comes from run config."""
    network: Network
    surrogates: tuple
    trues: tuple
    regularizers: tuple

    def function_set(self, epsilon, tau=None):
        """Materialize the FunctionSet.  tau overrides the width of every
        log barrier (and fills links that had no regularizer line)."""
        regs = []
        for li, r in enumerate(self.regularizers):
            cap = self.network.links[li].capacity
            if r is None:
                if tau is None:
                    raise TopologyError(
                        f"link {self.network.links[li].id!r} has no "
                        f"regularizer and no barrier width was configured")
                regs.append(Regularizer("log_barrier", tau=tau, cap=cap))
            elif r.family == "log_barrier" and tau is not None:
                regs.append(Regularizer("log_barrier", tau=tau, cap=cap))
            else:
                regs.append(r)
        return FunctionSet(surrogates=self.surrogates, trues=self.trues,
                           regularizers=tuple(regs), epsilon=epsilon)


def _fail(lineno, msg):
    raise TopologyError(f"line {lineno}: {msg}")


def _real(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        _fail(lineno, f"bad {what} value {tok!r}")


def _keyvals(tokens, lineno, required, optional=()):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            _fail(lineno, f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in required and k not in optional:
            _fail(lineno, f"unknown key {k!r}")
        if k in out:
            _fail(lineno, f"duplicate key {k!r}")
        out[k] = v
    for k in required:
        if k not in out:
            _fail(lineno, f"missing {k}=")
    return out


def _parse_true(text, lineno):
    if "(" not in text or not text.endswith(")"):
        _fail(lineno, f"true utility must look like family(params): {text!r}")
    fam, body = text[:-1].split("(", 1)
    if fam not in TRUE_FAMILIES:
        _fail(lineno, f"unknown true utility family {fam!r}")
    parts = [p for p in body.split(",") if p != ""]
    if len(parts) not in _TRUE_ARITY[fam]:
        _fail(lineno, f"{fam} takes {_TRUE_ARITY[fam][0]} parameter(s)")
    vals = [_real(p, lineno, "parameter") for p in parts]
    a = vals[0]
    b = vals[1] if len(vals) > 1 else 0.0
    return TrueUtility(fam, a, b)


def _parse_bounds(text, lineno):
    if not (text.startswith("(") and text.endswith("]") and "," in text):
        _fail(lineno, f"bounds must look like (lo,hi]: {text!r}")
    lo_s, hi_s = text[1:-1].split(",", 1)
    return _real(lo_s, lineno, "bound"), _real(hi_s, lineno, "bound")


def parse_topology(text):
    """Parse the format above into a TopologySpec.

    Raises TopologyError naming the line for syntax problems, and for
    semantic ones: unknown links in routes, inverted bounds, alpha-fair
    intervals touching the singular value 1.
    """
    links = []
    link_ids = {}
    users = []
    surrogates = []
    trues = []
    reg_specific = {}
    reg_default = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kind = toks[0]
        if kind == "link":
            if len(toks) != 3:
                _fail(lineno, "link takes: link <id> capacity=<real>")
            lid = toks[1]
            if lid in link_ids:
                _fail(lineno, f"duplicate link {lid!r}")
            kv = _keyvals(toks[2:], lineno, ("capacity",))
            cap = _real(kv["capacity"], lineno, "capacity")
            if not cap > 0:
                _fail(lineno, f"capacity must be positive, got {cap}")
            link_ids[lid] = len(links)
            links.append(Link(lid, cap))
        elif kind == "user":
            if len(toks) < 2:
                _fail(lineno, "user needs an id")
            uid = toks[1]
            kv = _keyvals(toks[2:], lineno,
                          ("route", "true", "surrogate", "bounds", "alpha0"))
            route = tuple(r for r in kv["route"].split(",") if r)
            if not route:
                _fail(lineno, f"user {uid!r} has an empty route")
            for r in route:
                if r not in link_ids:
                    _fail(lineno, f"route of user {uid!r} references "
                                  f"unknown link {r!r}")
            fam = kv["surrogate"]
            if fam not in SURROGATE_FAMILIES:
                _fail(lineno, f"unknown surrogate family {fam!r}")
            lo, hi = _parse_bounds(kv["bounds"], lineno)
            a0 = _real(kv["alpha0"], lineno, "alpha0")
            try:
                surrogates.append(SurrogateUtility(fam, lo, hi, a0))
                trues.append(_parse_true(kv["true"], lineno))
            except ValueError as e:
                _fail(lineno, str(e))
            users.append(User(uid, route))
        elif kind == "regularizer":
            if len(toks) < 3:
                _fail(lineno, "regularizer takes: regularizer <link|all> "
                              "<family> <param>=<real>")
            target, fam = toks[1], toks[2]
            kv = _keyvals(toks[3:], lineno,
                          ("tau",) if fam == "log_barrier" else
                          ("mu",) if fam == "quadratic" else ())
            if fam == "log_barrier":
                spec = ("log_barrier", _real(kv["tau"], lineno, "tau"))
            elif fam == "quadratic":
                spec = ("quadratic", _real(kv["mu"], lineno, "mu"))
            else:
                _fail(lineno, f"unknown regularizer family {fam!r}")
            if target == "all":
                if reg_default is not None:
                    _fail(lineno, "duplicate `regularizer all` line")
                reg_default = spec
            else:
                if target not in link_ids:
                    _fail(lineno, f"regularizer names unknown link {target!r}")
                if target in reg_specific:
                    _fail(lineno, f"duplicate regularizer for link {target!r}")
                reg_specific[target] = spec
        else:
            _fail(lineno, f"unknown directive {kind!r}")
    if not users:
        raise TopologyError("no users defined")
    net = Network(tuple(links), tuple(users))
    regs = []
    for l in links:
        spec = reg_specific.get(l.id, reg_default)
        if spec is None:
            regs.append(None)
        elif spec[0] == "log_barrier":
            regs.append(Regularizer("log_barrier", tau=spec[1],
                                    cap=l.capacity))
        else:
            regs.append(Regularizer("quadratic", mu=spec[1]))
    return TopologySpec(network=net, surrogates=tuple(surrogates),
                        trues=tuple(trues), regularizers=tuple(regs))


def _fmt_true(t):
    if t.family in ("quadratic", "alpha_fair"):
        return f"{t.family}({t.a!r})"
    return f"{t.family}({t.a!r},{t.b!r})"


def serialize_topology(spec):
    """Emit text that parses back to an identical spec."""
    net = spec.network
    out = []
    for l in net.links:
        out.append(f"link {l.id} capacity={l.capacity!r}")
    for i, u in enumerate(net.users):
        s = spec.surrogates[i]
        out.append(
            f"user {u.id} route={','.join(u.route)} "
            f"true={_fmt_true(spec.trues[i])} surrogate={s.family} "
            f"bounds=({s.lo!r},{s.hi!r}] alpha0={s.alpha0!r}")
    for li, r in enumerate(spec.regularizers):
        if r is None:
            continue
        lid = net.links[li].id
        if r.family == "log_barrier":
            out.append(f"regularizer {lid} log_barrier tau={r.tau!r}")
        else:
            out.append(f"regularizer {lid} quadratic mu={r.mu!r}")
    return "\n".join(out) + "\n"
