"""Command-line interface.

Exit codes: 0 success, 1 a certificate failed re-verification (or a check
ended Undecided), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import catalog
from .certificates import UNDECIDED
from .experiments import (
    CertificateSink,
    ExperimentError,
    degeneration_trace,
    denominator_search,
    lambda_scan,
    parse_rational,
    resolve_form,
    run_report,
    triangle_grid,
)
from .forms import FormError, format_form
from .polya import polya_report
from .sos import SosOptions, check_sos


def _fmt(q) -> str:
    return "-" if q is None else str(q)


def _float(q) -> str:
    return "-" if q is None else f"{float(q):.6g}"


def cmd_check_sos(args) -> int:
    p = resolve_form(args.form, args.vars)
    opts = SosOptions(basis=args.basis)
    if args.form in ("stengle",) or args.stengle_arcs:
        opts = SosOptions(basis=args.basis, arcs=catalog.stengle_arcs())
    verdict = check_sos(p, opts)
    sink = CertificateSink(args.save)
    rec = sink.record(f"check_{args.form}" if args.save else "check", p, verdict)
    if args.json:
        print(json.dumps({"form": format_form(p), "status": verdict.status, "verified": rec["verified"],
                          "diagnostics": json.loads(json.dumps(verdict.diagnostics, default=str))}, indent=1))
    else:
        print(f"{verdict.status}  (certificate re-check: {rec.get('check', 'none')})")
    if rec["verified"] is False:
        return 1
    return 1 if verdict.status == UNDECIDED else 0


def cmd_lambda_scan(args) -> int:
    p = catalog.get(args.form).form
    mult = resolve_form(args.multiplier, 3)
    sink = CertificateSink(args.save)
    res = lambda_scan(p, mult, (parse_rational(args.lo), parse_rational(args.hi)), parse_rational(args.tol),
                      sink=sink, form_key=args.form)
    if args.json:
        print(json.dumps(res.as_dict(), indent=1))
    else:
        for lam, status in res.history:
            print(f"lambda={lam}  {status}")
        lo, hi = res.boundary_bracket
        print(f"bracket [{lo}, {hi}]  width {hi - lo}  honest={res.honest}")
    return 0 if sink.ok and res.honest else 1


def cmd_triangle_grid(args) -> int:
    sink = CertificateSink(args.save)
    res = triangle_grid(args.family, args.grid, margin=parse_rational(args.margin), sink=sink, workers=args.workers)
    if args.json:
        print(json.dumps(res.as_dict(), indent=1))
    else:
        for c in res.cells:
            tag = "boundary" if c.boundary else ("agree" if c.agree else "DISAGREE")
            print(f"({c.a},{c.b},{c.c})  {c.status}  sign={c.quartic_sign:+d}  {tag}")
        print(f"interior cells {len(res.interior)}  agreement {res.agreement():.4f}")
    return 0 if sink.ok and res.agreement() == 1.0 else 1


def cmd_denominator_search(args) -> int:
    p = resolve_form(args.form, args.vars)
    sink = CertificateSink(args.save)
    res = denominator_search(p, args.nmax, sink=sink, form_key=args.form)
    if args.json:
        print(json.dumps(res.as_dict(), indent=1))
    else:
        for n, status in res.tried:
            print(f"N={n}  {status}")
        print(f"minimal N: {res.N if res.N is not None else f'none up to {args.nmax}'}")
    return 0 if sink.ok else 1


def cmd_degeneration(args) -> int:
    h = resolve_form(args.h, args.vars)
    p = resolve_form(args.p, args.vars or h.n_vars)
    rs = [parse_rational(r) for r in args.r.split(",") if r.strip()]
    sink = CertificateSink(args.save)
    res = degeneration_trace(h, p, rs, sink=sink)
    if args.json:
        print(json.dumps(res.as_dict(), indent=1))
    else:
        for r, status in res.entries:
            print(f"r={r}  {status}")
    return 0 if sink.ok else 1


def cmd_polya(args) -> int:
    p = resolve_form(args.form, args.vars)
    rep = polya_report(p, args.form, args.mode, args.depth, args.nmax)
    if args.json:
        print(json.dumps(rep.as_dict(), indent=1))
        return 0
    e = rep.estimate
    rows = [("form", args.form), ("mode", rep.positivity_mode),
            ("inf on sphere", f"[{_float(e.inf_lower)}, {_float(e.inf_upper)}]"),
            ("sup on sphere", f"[{_float(e.sup_lower)}, {_float(e.sup_upper)}]"),
            ("epsilon", f"[{_float(e.epsilon_lower)}, {_float(e.epsilon_upper)}]"),
            ("method", e.method), ("N bound", _fmt(rep.N_bound)), ("N measured", _fmt(rep.N_measured))]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return 0


def cmd_catalog(args) -> int:
    for key, entry in catalog.CATALOG.items():
        print(f"{key:<10} {entry.known_status:<12} {entry.provenance}")
        if args.show_forms:
            print(f"           {format_form(entry.form)}")
    return 0


def cmd_report(args) -> int:
    report, code = run_report(args.config, args.out)
    n = report["certificates"]["count"]
    print(f"{len(report['experiments'])} experiments, {n} certificates, "
          f"{len(report['certificates']['failures'])} failed re-verification")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="soscert", description="Exact sum-of-squares certificates and experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, vars_=True):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--save", metavar="DIR", help="write certificate JSON files here")
        if vars_:
            sp.add_argument("--vars", type=int, help="number of variables when reading form text")

    sp = sub.add_parser("check-sos", help="decide whether a form is a sum of squares")
    sp.add_argument("form", help="catalog key, file path, or form text such as 'x^2*y^2 + z^4'")
    sp.add_argument("--basis", choices=("newton", "full"), default="newton")
    sp.add_argument("--stengle-arcs", action="store_true", help="offer the Stengle cubic branches to facial reduction")
    common(sp)
    sp.set_defaults(func=cmd_check_sos)

    sp = sub.add_parser("lambda-scan", help="bisect the SOS boundary of mult * p(x, lam y, lam z)")
    sp.add_argument("--form", required=True, choices=("M", "R", "S"))
    sp.add_argument("--tol", default="1/64")
    sp.add_argument("--lo", default="1")
    sp.add_argument("--hi", default="4")
    sp.add_argument("--multiplier", default="x^2+y^2+z^2")
    common(sp, vars_=False)
    sp.set_defaults(func=cmd_lambda_scan)

    sp = sub.add_parser("triangle-grid", help="compare SOS status with the triangle condition")
    sp.add_argument("--family", required=True, choices=("M", "R", "S"))
    sp.add_argument("--grid", default="1:7", help="start:stop[:step] or a comma list, rationals allowed")
    sp.add_argument("--margin", default="1/100")
    sp.add_argument("--workers", type=int, default=1)
    common(sp, vars_=False)
    sp.set_defaults(func=cmd_triangle_grid)

    sp = sub.add_parser("denominator-search", help="minimal N with (sum x_i^2)^N p a sum of squares")
    sp.add_argument("--form", required=True)
    sp.add_argument("--nmax", type=int, default=2)
    common(sp)
    sp.set_defaults(func=cmd_denominator_search)

    sp = sub.add_parser("degeneration", help="statuses of h(x1, x2/r, ..., xn/r) * p over r")
    sp.add_argument("--h", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--r", default="1,2,4,8", help="comma separated rationals")
    common(sp)
    sp.set_defaults(func=cmd_degeneration)

    sp = sub.add_parser("polya", help="Polya exponent bound versus the measured exponent")
    sp.add_argument("--form", required=True)
    sp.add_argument("--mode", choices=("simplex", "even"), default="even")
    sp.add_argument("--depth", type=int, default=8)
    sp.add_argument("--nmax", type=int, default=200)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--vars", type=int)
    sp.set_defaults(func=cmd_polya)

    sp = sub.add_parser("catalog", help="named forms")
    sp.add_argument("action", choices=("list",))
    sp.add_argument("--show-forms", action="store_true", help="print the forms too")
    sp.set_defaults(func=cmd_catalog)

    sp = sub.add_parser("report", help="run the experiments listed in a TOML config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", help="output directory (default: the config's settings.output)")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExperimentError, FormError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
