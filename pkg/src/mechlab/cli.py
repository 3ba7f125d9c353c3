"""Command-line entry point: ``mechlab <command> <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error (bad input data, infeasible problem,
malformed JSON), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from . import discrete, det_border, io, piecewise, priors, reduced_form, svg, transform
from .errors import MechlabError

MIN_GRID = 8


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _threads(args) -> int:
    env = os.environ.get("MECHLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise MechlabError(f"MECHLAB_THREADS={env!r} is not an integer") from None
    return args.threads or os.cpu_count() or 1


def _grid_size(text: str) -> int:
    v = int(float(text))
    if v < MIN_GRID:
        raise argparse.ArgumentTypeError(f"grid size must be >= {MIN_GRID}")
    return v


def _count(text: str) -> int:
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _echo(args, *drop) -> dict:
    """Run configuration echoed into reports; runtime knobs are left out."""
    skip = {"func", "threads", "out", "svg", "report", "witnesses"} | set(drop)
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, text: str, path=None):
    path = path if path is not None else getattr(args, "out", None)
    if path:
        io.write_text(path, text)
    else:
        sys.stdout.write(text)


def _load_model(path):
    return priors.model_from_config(io.load_json(path))


def _load_pa(path, n=None):
    cfg = io.load_json(path)
    if n is not None and "n" not in cfg:
        cfg = dict(cfg, n=n)
    try:
        return piecewise.PiecewiseAuction.from_dict(cfg)
    except KeyError as e:
        raise MechlabError(f"{path}: missing field {e.args[0]!r}") from None


def _report(args, result, name):
    return io.dumps(io.report(name, _echo(args), result))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_discrete_pareto(args):
    exact = args.mode == "rational"
    prior = priors.prior_from_config(io.load_json(args.prior, exact=exact), exact=exact)
    pts = discrete.enumerate_pareto(prior, args.n, args.klass, cap=args.cap, threads=_threads(args))
    rows = [(p.wel, p.rev, len(p.witnesses)) for p in pts]
    _emit(args, io.csv_text(["wel", "rev", "witness_count"], rows))
    if args.witnesses:
        res = [{"wel": p.wel, "rev": p.rev, "witnesses": p.witnesses} for p in pts]
        io.write_text(args.witnesses, _report(args, res, "discrete pareto"))
    if args.svg:
        io.write_text(args.svg, svg.chart([(args.klass.upper(), [float(p.wel) for p in pts],
                                            [float(p.rev) for p in pts], "scatter")],
                                          "WEL", "REV", "Pareto frontier"))
    return 0


def cmd_discrete_classify(args):
    exact = args.mode == "rational"
    prior = priors.prior_from_config(io.load_json(args.prior, exact=exact), exact=exact)
    table = discrete.AllocationTable.from_index(args.index, args.n, prior.m)
    mech = discrete.classify(prior, table)
    res = {"index": args.index, "grid": [list(r) for r in table.grid()] if args.n == 2 else list(table.winner),
           "interim": mech.interim_alloc, "payments": mech.payments, "rev": mech.rev, "wel": mech.wel,
           "bic": mech.bic, "dsic": mech.dsic}
    _emit(args, _report(args, res, "discrete classify"))
    return 0


def cmd_border_check(args):
    curves = io.curves_from_config(io.load_json(args.curves))
    if len(curves) == 1:
        rep = reduced_form.border_check_symmetric(curves[0], args.n)
    else:
        model = _load_model(args.model) if args.model else None
        rep = reduced_form.border_check_asymmetric(
            [model] * len(curves) if model else None, curves, args.grid)
    _emit(args, _report(args, rep.to_dict(), "border check"))
    return 0


def cmd_border_det2(args):
    curves = io.curves_from_config(io.load_json(args.curves))
    if len(curves) == 1:
        curves = curves * 2
    if len(curves) != 2:
        raise MechlabError(f"{args.curves}: det2 needs one or two curves, got {len(curves)}")
    rep = det_border.check_two_buyer(curves[0], curves[1], always_sold=args.always_sold)
    res = rep.to_dict()
    if rep.implementable and args.resolution:
        rule = det_border.TwoBuyerRule(*curves)
        grid = rule.color_grid(args.resolution)
        centers = (np.arange(args.resolution) + 0.5) / args.resolution
        m1, m2 = grid.interim()
        res["coloring"] = {"resolution": args.resolution, "monotone": grid.is_monotone(),
                           "sup_error": max(float(np.max(np.abs(m1 - curves[0](centers)))),
                                            float(np.max(np.abs(m2 - curves[1](centers))))),
                           "seller_measure": grid.seller_measure()}
    _emit(args, _report(args, res, "border det2"))
    return 0


def cmd_border_det3(args):
    c1, c2, c3 = args.c
    chk = det_border.three_buyer_check(c1, c2, c3)
    res = {"implementable": chk.implementable, "slack": chk.slack}
    if chk.implementable:
        tri = det_border.three_buyer_construct(c1, c2, c3)
        res.update(tri.to_dict())
        if args.simulate:
            sim = reduced_form.simulate_expost(tri, 3, args.simulate, args.seed, n_bins=args.bins,
                                               threads=_threads(args))
            res["simulation"] = _const_agreement(sim, tri.interim())
    _emit(args, _report(args, res, "border det3"))
    return 0


def _const_agreement(sim, targets, sigmas=3.0):
    """Overall win frequency per buyer against a constant interim allocation."""
    out = []
    for i, t in enumerate(targets):
        wins = int(sim.wins[i].sum())
        p_hat = wins / sim.samples
        se = float(np.sqrt(max(p_hat * (1 - p_hat), 1e-300) / sim.samples))
        z = abs(p_hat - t) / se
        out.append({"buyer": i + 1, "estimate": p_hat, "stderr": se, "z": z, "ok": bool(z <= sigmas)})
    return {"samples": sim.samples, "seed": sim.seed, "buyers": out, "ok": all(b["ok"] for b in out)}


def cmd_sequence_corollary(args):
    res = det_border.corollary_sequence(Fraction(args.p), args.max_n)
    _emit(args, _report(args, res.to_dict(), "sequence corollary"))
    return 0


def cmd_piecewise_region(args):
    model = _load_model(args.model)
    wmax = piecewise.reserve_welfare(model, 0.0, args.n)
    cs = [float(c) for c in np.linspace(0.0, wmax, args.grid)]
    rows = piecewise.pair_region(model, args.n, cs, args.grid_n, threads=_threads(args))
    header = ["wel", "rev_min", "rev_max", "status",
              "min_family", "min_r1", "min_r2", "min_k", "min_fit_error",
              "max_family", "max_r1", "max_r2", "max_k", "max_fit_error"]
    out = []
    for r in rows:
        line = [r.c, r.rev_min, r.rev_max, r.status]
        for fit in (r.fit_min, r.fit_max):
            line += ([fit.pa.family, fit.pa.r1, fit.pa.r2, fit.pa.k, fit.sup_error] if fit else [""] * 5)
        out.append(line)
    _emit(args, io.csv_text(header, out))
    if args.svg:
        ok = [r for r in rows if r.rev_min is not None]
        io.write_text(args.svg, svg.chart(
            [("min REV", [r.c for r in ok], [r.rev_min for r in ok], "line"),
             ("max REV", [r.c for r in ok], [r.rev_max for r in ok], "line")],
            "WEL", "REV", "Revenue band at fixed welfare"))
    return 0


def cmd_piecewise_implement(args):
    pa = _load_pa(args.params, args.n)
    rule = piecewise.deterministic_implement(pa)
    grid = (np.arange(args.check_grid) + 0.5) / args.check_grid
    err = float(np.max(np.abs(rule.total_interim(grid) - pa.n * pa.xhat(grid))))
    res = {"rule": rule.to_dict(), "check_grid": args.check_grid, "total_interim_error": err}
    if args.simulate:
        sim = reduced_form.simulate_expost(rule, pa.n, args.simulate, args.seed, n_bins=args.bins,
                                           threads=_threads(args))
        expected = pa.n * reduced_form.bin_average_from_tail(pa.tail, args.bins)
        agr = reduced_form.total_agreement(sim, expected)
        res["simulation"] = {"samples": sim.samples, "seed": sim.seed, "bins": args.bins,
                             "total": sim.curves.sum(axis=0), "expected": expected,
                             "max_z": agr.max_z, "worst_bin": agr.worst_bin, "ok": agr.ok}
    _emit(args, _report(args, res, "piecewise implement"))
    return 0


def cmd_transfer(args):
    model = _load_model(args.model)
    a, b = _load_pa(args.start, args.n), _load_pa(args.end, args.n)
    path = piecewise.transfer_path(model, a, b, args.steps)
    header = ["step", "family", "r1", "r2", "k", "wel"]
    rows = [(i, s.family, s.r1, s.r2, s.k, w) for i, (s, w) in enumerate(zip(path.steps, path.welfare))]
    _emit(args, io.csv_text(header, rows))
    if args.report:
        io.write_text(args.report, _report(args, {"c": path.c, "rho_star": path.rho_star,
                                                  "max_welfare_dev": path.max_welfare_dev,
                                                  "steps": len(path.steps)}, "transfer"))
    return 0


def cmd_transform_pareto(args):
    model = _load_model(args.model)
    curves = io.curves_from_config(io.load_json(args.curves))
    res = transform.transform_all(model, curves)
    _emit(args, io.dumps(io.curves_to_config(res.new_curves)))
    summary = {"wel_delta": res.wel_delta, "rev_delta": res.rev_delta, "s_star": res.s_star,
               "mass_before": [c.mass() for c in curves], "mass_after": [c.mass() for c in res.new_curves],
               "feasible_before": res.feasible_before, "feasible_after": res.feasible_after}
    text = _report(args, summary, "transform pareto")
    if args.report:
        io.write_text(args.report, text)
    elif args.out:
        sys.stdout.write(text)
    return 0


RULES = {"highest": reduced_form.highest_quantile_rule, "seller-keeps": reduced_form.seller_keeps_rule}


def cmd_simulate(args):
    model = _load_model(args.model) if args.model else None
    if args.params:
        pa = _load_pa(args.params, args.n)
        rule, n = piecewise.deterministic_implement(pa), pa.n
    else:
        rule, n = RULES[args.rule], args.n
    sim = reduced_form.simulate_expost(rule, n, args.samples, args.seed, model=model, n_bins=args.bins,
                                       threads=_threads(args))
    _emit(args, _report(args, sim.to_dict(), "simulate"))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mechlab", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=_count, default=None,
                   help="worker threads (default: all cores; MECHLAB_THREADS overrides)")
    top = p.add_subparsers(dest="command", required=True)

    def group(name, help_):
        g = top.add_parser(name, help=help_)
        return g.add_subparsers(dest="sub", required=True)

    def leaf(sp, name, func, help_):
        c = sp.add_parser(name, help=help_)
        c.set_defaults(func=func)
        c.add_argument("--threads", type=_count, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        return c

    d = group("discrete", "finite-type mechanisms")
    c = leaf(d, "pareto", cmd_discrete_pareto, "enumerate the (WEL, REV) frontier")
    c.add_argument("--prior", required=True)
    c.add_argument("--class", dest="klass", choices=["bic", "dsic"], default="bic")
    c.add_argument("-n", type=_count, default=2)
    c.add_argument("--mode", choices=["rational", "float"], default="rational")
    c.add_argument("--cap", type=_count, default=discrete.DEFAULT_CAP)
    c.add_argument("--out")
    c.add_argument("--witnesses")
    c.add_argument("--svg")
    c = leaf(d, "classify", cmd_discrete_classify, "interim allocation, payments and IC class of one table")
    c.add_argument("--prior", required=True)
    c.add_argument("--index", type=int, required=True)
    c.add_argument("-n", type=_count, default=2)
    c.add_argument("--mode", choices=["rational", "float"], default="rational")
    c.add_argument("--out")

    b = group("border", "reduced-form feasibility")
    c = leaf(b, "check", cmd_border_check, "randomized (Border) feasibility")
    c.add_argument("--curves", required=True)
    c.add_argument("--model")
    c.add_argument("-n", type=_count, default=2)
    c.add_argument("--grid", type=_grid_size, default=64)
    c.add_argument("--out")
    c = leaf(b, "det2", cmd_border_det2, "deterministic implementability, two buyers")
    c.add_argument("--curves", required=True)
    c.add_argument("--always-sold", action="store_true")
    c.add_argument("--resolution", type=_grid_size, default=512)
    c.add_argument("--out")
    c = leaf(b, "det3", cmd_border_det3, "deterministic implementability, three constant curves")
    c.add_argument("--c", type=float, nargs=3, required=True, metavar=("C1", "C2", "C3"))
    c.add_argument("--simulate", type=_count, default=0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bins", type=_grid_size, default=64)
    c.add_argument("--out")

    pw = group("piecewise", "piecewise auctions")
    c = leaf(pw, "region", cmd_piecewise_region, "revenue band over a welfare grid")
    c.add_argument("--model", required=True)
    c.add_argument("-n", type=_count, default=2)
    c.add_argument("--grid", type=_grid_size, default=41)
    c.add_argument("--grid-n", type=_grid_size, default=200)
    c.add_argument("--out")
    c.add_argument("--svg")
    c = leaf(pw, "implement", cmd_piecewise_implement, "deterministic DSIC rule for a piecewise auction")
    c.add_argument("--params", required=True)
    c.add_argument("-n", type=_count, default=None)
    c.add_argument("--check-grid", type=_grid_size, default=256)
    c.add_argument("--simulate", type=_count, default=0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bins", type=_grid_size, default=64)
    c.add_argument("--out")

    c = top.add_parser("transfer", help="fixed-welfare path between two piecewise auctions")
    c.set_defaults(func=cmd_transfer)
    c.add_argument("--model", required=True)
    c.add_argument("--from", dest="start", required=True)
    c.add_argument("--to", dest="end", required=True)
    c.add_argument("-n", type=_count, default=None)
    c.add_argument("--steps", type=_count, default=50)
    c.add_argument("--out")
    c.add_argument("--report")

    t = group("transform", "envelope reshaping")
    c = leaf(t, "pareto", cmd_transform_pareto, "per-buyer envelope transform")
    c.add_argument("--model", required=True)
    c.add_argument("--curves", required=True)
    c.add_argument("--out")
    c.add_argument("--report")

    s = group("sequence", "recurrences")
    c = leaf(s, "corollary", cmd_sequence_corollary, "always-sold recurrence")
    c.add_argument("--p", required=True, help="decimal or p/q")
    c.add_argument("--max-n", type=_count, default=20)
    c.add_argument("--out")

    c = top.add_parser("simulate", help="Monte-Carlo interim allocations of an ex-post rule")
    c.set_defaults(func=cmd_simulate)
    c.add_argument("--rule", choices=sorted(RULES), default="highest")
    c.add_argument("--params", help="piecewise auction JSON; overrides --rule")
    c.add_argument("--model")
    c.add_argument("-n", type=_count, default=2)
    c.add_argument("--samples", type=_count, default=10**6)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bins", type=_grid_size, default=64)
    c.add_argument("--out")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (MechlabError, ValueError, ZeroDivisionError) as e:
        print(f"mechlab: error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
