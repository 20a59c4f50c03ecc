"""Command-line front end.

Subcommands: run (full bilevel loop -> CSV), baseline (fixed-alpha
allocation), constants (theory constants + stepsize advisories),
oracle-check (exact vs finite-difference hypergradient), validate-thm2
(KKT check of final rates), parse-check (topology round-trip).

Exit codes: 0 ok, 2 validation/usage, 3 numerical failure, 4 I/O.
"""

import argparse
import sys

import numpy as np

from .analysis import (DomainBox, compute_constants, estimate_lipschitz,
                       finite_difference_hypergradient, verify_theorem2)
from .bilevel import exact_hypergradient, run_dbinum
from .config import PRESETS, RunConfig, load_config_file, preset
from .functions import FunctionError, psi_total
from .lower import default_x0, solve_lower
from .topofile import parse_topology, serialize_topology
from .topology import TopologyError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _fmt(v):
    """Shortest decimal that round-trips; keeps CSV bytes reproducible."""
    return repr(float(v))


def _load_setup(args, need_epsilon=True):
    """Resolve (topology text, RunConfig) from --preset/--topology/--config
    and per-flag overrides."""
    cfg = None
    topo_text = None
    if args.preset:
        topo_text, cfg = preset(args.preset)
    if getattr(args, "topology", None):
        with open(args.topology) as fh:
            topo_text = fh.read()
    if topo_text is None:
        raise ValueError("need --topology or --preset")
    if getattr(args, "config", None):
        cfg = load_config_file(args.config, base=cfg)
    if cfg is None:
        cfg = RunConfig()
    over = {}
    if getattr(args, "rounds", None) is not None:
        over["rounds"] = args.rounds
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "feedback", None):
        over["feedback"] = args.feedback
    if getattr(args, "out", None):
        over["out"] = args.out
    if over:
        cfg = cfg.replace(**over)
    return topo_text, cfg


def _build(topo_text, cfg):
    spec = parse_topology(topo_text)
    fs = spec.function_set(cfg.epsilon, cfg.tau)
    return spec, fs


def _advisories(net, fs, cfg):
    """Best-effort stepsize advisories; never blocks a run."""
    try:
        x0 = default_x0(net)
        box = DomainBox(delta_lower=0.5 * float(np.min(x0)),
                        b_upper=float(np.max(net.capacities)))
        L_u, L_b = estimate_lipschitz(fs, box, grid=17)
        if L_u <= 0 or L_b < 0:
            return
        mus = [B.mu for B in fs.regularizers if B.family == "quadratic"]
        tc = compute_constants(net, L_u, L_b, min(mus) if mus else 0.0,
                               fs.epsilon, cfg.eta)
        if cfg.eta > tc.eta_max:
            print(f"advisory: eta={_fmt(cfg.eta)} exceeds the conservative "
                  f"bound 1/L_grad={_fmt(tc.eta_max)}", file=sys.stderr)
        if cfg.beta > tc.beta_max:
            print(f"advisory: beta={_fmt(cfg.beta)} exceeds the conservative "
                  f"bound {_fmt(tc.beta_max)}", file=sys.stderr)
    except Exception as e:  # advisory only
        print(f"advisory unavailable: {e}", file=sys.stderr)


def _write_csv(fh, net, records, gproj_label, final_psi, baseline_psi=None,
               aborted=None):
    ids = [u.id for u in net.users]
    fh.write("# binum csv v1\n")
    fh.write(f"# gproj={gproj_label}\n")
    cols = (["round", "Psi"] + [f"x_{u}" for u in ids]
            + [f"alpha_{u}" for u in ids]
            + [f"alpha_norm_{u}" for u in ids]
            + ["grad_norm", "lower_iters", "clip_count"])
    fh.write(",".join(cols) + "\n")
    for rec in records:
        a1 = rec.alphas[0]
        row = ([str(rec.round), _fmt(rec.psi)]
               + [_fmt(v) for v in rec.rates]
               + [_fmt(v) for v in rec.alphas]
               + [_fmt(v / a1) for v in rec.alphas]
               + [_fmt(rec.gproj_norm), str(rec.lower_iters),
                  str(rec.clip_count)])
        fh.write(",".join(row) + "\n")
    fh.write(f"# final_Psi={_fmt(final_psi)}\n")
    if baseline_psi is not None:
        fh.write(f"# baseline_Psi={_fmt(baseline_psi)}\n")
    if aborted:
        fh.write(f"# ABORTED: {aborted}\n")


def _baseline_psi(net, fs, cfg, alpha_value):
    """Solve the lower level once at a fixed common alpha and score it."""
    alpha = np.full(net.n_users, float(alpha_value))
    lo, hi = fs.alpha_lo(), fs.alpha_hi()
    if np.any(alpha <= lo) or np.any(alpha > hi):
        raise FunctionError(
            f"baseline alpha {alpha_value} falls outside the surrogate "
            f"bounds of some user")
    x, cert = solve_lower(net, fs, alpha, cfg.lower_config())
    if not cert.converged:
        raise FunctionError("baseline lower-level solve did not converge")
    return psi_total(fs, x), x


def _cmd_run(args):
    topo_text, cfg = _load_setup(args)
    spec, fs = _build(topo_text, cfg)
    net = spec.network
    _advisories(net, fs, cfg)
    gproj_label = "exact" if net.n_users <= cfg.oracle_cap else "estimate"
    baseline_psi = None
    if args.baseline is not None:
        baseline_psi, _ = _baseline_psi(net, fs, cfg, args.baseline)
    if cfg.rounds == 0:
        records, aborted = [], None
    else:
        records, aborted = run_dbinum(net, fs, cfg.lower_config(),
                                      cfg.upper_config(), cfg.feedback_mode())
    final_psi = records[-1].psi if records else float("nan")
    try:
        if cfg.out:
            with open(cfg.out, "w", newline="\n") as fh:
                _write_csv(fh, net, records, gproj_label, final_psi,
                           baseline_psi, aborted)
        else:
            _write_csv(sys.stdout, net, records, gproj_label, final_psi,
                       baseline_psi, aborted)
    except OSError as e:
        print(f"cannot write output: {e}", file=sys.stderr)
        return EXIT_IO
    if aborted:
        print(f"run aborted: {aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_baseline(args):
    topo_text, cfg = _load_setup(args)
    spec, fs = _build(topo_text, cfg)
    if args.alpha == "true":
        fams = {t.family for t in spec.trues}
        vals = {t.a for t in spec.trues}
        if fams != {"alpha_fair"} or len(vals) != 1:
            print("baseline at the true parameters is undefined: users have "
                  "differing true utilities", file=sys.stderr)
            return EXIT_VALIDATION
        alpha_value = vals.pop()
    else:
        alpha_value = float(args.alpha)
    psi, x = _baseline_psi(spec.network, fs, cfg, alpha_value)
    print(f"baseline_Psi={_fmt(psi)}")
    print("x=" + ",".join(_fmt(v) for v in x))
    return EXIT_OK


def _cmd_constants(args):
    topo_text, cfg = _load_setup(args)
    spec, fs = _build(topo_text, cfg)
    net = spec.network
    if args.L_u is not None and args.L_b is not None:
        L_u, L_b = args.L_u, args.L_b
    else:
        x0 = default_x0(net)
        box = DomainBox(delta_lower=0.5 * float(np.min(x0)),
                        b_upper=float(np.max(net.capacities)))
        L_u, L_b = estimate_lipschitz(fs, box)
        if args.L_u is not None:
            L_u = args.L_u
        if args.L_b is not None:
            L_b = args.L_b
    mus = [B.mu for B in fs.regularizers if B.family == "quadratic"]
    tc = compute_constants(net, L_u, L_b, min(mus) if mus else 0.0,
                           fs.epsilon, cfg.eta)
    print(f"L_u={_fmt(L_u)}")
    print(f"L_b={_fmt(L_b)}")
    print(f"mu_phi={_fmt(tc.mu_phi)}")
    print(f"mu_phi_proof={_fmt(tc.mu_phi_proof)}")
    print(f"L_grad={_fmt(tc.L_grad)}")
    print(f"L_hess={_fmt(tc.L_hess)}")
    print(f"L_psi={_fmt(tc.L_psi)}")
    print(f"C_v={_fmt(tc.C_v)}")
    print(f"C_phi={_fmt(tc.C_phi)}")
    print(f"eta_max={_fmt(tc.eta_max)}")
    print(f"beta_max={_fmt(tc.beta_max)}")
    if cfg.eta > tc.eta_max:
        print(f"advisory: configured eta={_fmt(cfg.eta)} exceeds eta_max",
              file=sys.stderr)
    if cfg.beta > tc.beta_max:
        print(f"advisory: configured beta={_fmt(cfg.beta)} exceeds beta_max",
              file=sys.stderr)
    return EXIT_OK


def _cmd_oracle_check(args):
    topo_text, cfg = _load_setup(args)
    spec, fs = _build(topo_text, cfg)
    net = spec.network
    alpha = fs.alpha0()
    lower_cfg = cfg.lower_config()
    tight = min(lower_cfg.delta_phi, args.h ** 2)
    from .lower import LowerConfig
    lower_cfg = LowerConfig(stepsize=lower_cfg.stepsize,
                            max_iters=lower_cfg.max_iters, delta_phi=tight)
    x, cert = solve_lower(net, fs, alpha, lower_cfg)
    if not cert.converged:
        print("lower solve failed", file=sys.stderr)
        return EXIT_NUMERIC
    exact = exact_hypergradient(net, fs, alpha, x)
    fd = finite_difference_hypergradient(net, fs, alpha, args.h, lower_cfg)
    denom = max(float(np.linalg.norm(fd)), 1e-30)
    rel = float(np.linalg.norm(exact - fd)) / denom
    print("exact=" + ",".join(_fmt(v) for v in exact))
    print("fd=" + ",".join(_fmt(v) for v in fd))
    print(f"rel_err={_fmt(rel)}")
    if rel > args.tol:
        print(f"oracle mismatch: rel_err {rel:.3e} > tol {args.tol:.3e}",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _final_rates_from_csv(path, n):
    last = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("round,"):
                continue
            last = line
    if last is None:
        raise ValueError(f"{path} holds no data rows")
    parts = last.split(",")
    return [float(p) for p in parts[2:2 + n]]


def _cmd_validate_thm2(args):
    topo_text, cfg = _load_setup(args)
    spec, fs = _build(topo_text, cfg)
    net = spec.network
    if net.n_links != 1:
        print("theorem-2 validation applies to single-link topologies",
              file=sys.stderr)
        return EXIT_VALIDATION
    fams = {t.family for t in spec.trues}
    if fams != {"alpha_fair"}:
        print("theorem-2 validation needs fairness-type true utilities",
              file=sys.stderr)
        return EXIT_VALIDATION
    if args.x:
        x = [float(p) for p in args.x.split(",")]
        if len(x) != net.n_users:
            print(f"expected {net.n_users} rates", file=sys.stderr)
            return EXIT_VALIDATION
    elif args.csv:
        x = _final_rates_from_csv(args.csv, net.n_users)
    else:
        print("need --x or --csv", file=sys.stderr)
        return EXIT_VALIDATION
    a_tilde = [t.a for t in spec.trues]
    P = net.capacities[0]
    rep = verify_theorem2(x, a_tilde, P, tol_sum=args.tol_sum,
                          tol_kkt=args.tol_kkt)
    print(f"sum_residual={_fmt(rep.sum_residual)}")
    print(f"kkt_spread={_fmt(rep.kkt_spread)}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def _cmd_parse_check(args):
    with open(args.topology) as fh:
        text = fh.read()
    spec = parse_topology(text)
    again = parse_topology(serialize_topology(spec))
    if again != spec:
        print("round-trip mismatch", file=sys.stderr)
        return EXIT_NUMERIC
    net = spec.network
    print(f"ok users={net.n_users} links={net.n_links}")
    return EXIT_OK


def _add_common(p, topology=True):
    if topology:
        p.add_argument("--topology", help="topology file")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="shipped experiment preset")
    p.add_argument("--config", help="JSON file overriding config fields")
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--feedback", choices=("gradient", "two_point",
                                          "one_point"))
    p.add_argument("--out", help="output CSV path (default stdout)")


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="binum",
        description="distributed bilevel network utility maximization")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the bilevel loop, emit CSV")
    _add_common(p)
    p.add_argument("--baseline", type=float, default=None,
                   help="also record the utility of a fixed-alpha allocation")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("baseline", help="fixed-alpha allocation utility")
    _add_common(p)
    p.add_argument("--alpha", default="2.0",
                   help="common surrogate alpha (or 'true')")
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("constants", help="theory constants and advisories")
    _add_common(p)
    p.add_argument("--L-u", dest="L_u", type=float, default=None)
    p.add_argument("--L-b", dest="L_b", type=float, default=None)
    p.set_defaults(fn=_cmd_constants)

    p = sub.add_parser("oracle-check",
                       help="exact vs finite-difference hypergradient")
    _add_common(p)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(fn=_cmd_oracle_check)

    p = sub.add_parser("validate-thm2", help="KKT check of final rates")
    _add_common(p)
    p.add_argument("--csv", help="run CSV to read final rates from")
    p.add_argument("--x", help="comma-separated rates")
    p.add_argument("--tol-sum", dest="tol_sum", type=float, default=0.5)
    p.add_argument("--tol-kkt", dest="tol_kkt", type=float, default=1e-2)
    p.set_defaults(fn=_cmd_validate_thm2)

    p = sub.add_parser("parse-check", help="topology parse + round-trip")
    p.add_argument("--topology", required=True)
    p.set_defaults(fn=_cmd_parse_check)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (TopologyError, FunctionError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
