"""Command-line front end.

Exit codes: 0 ok, 1 audit failure, 2 formula parse error, 3 invalid model,
4 cap exceeded, 5 undefined conditional, 6 I/O or data error,
7 query precondition not met.
"""

import argparse
import json
import random
import sys
import time
from fractions import Fraction

from . import counterfactual as cf
from . import functional, semantics
from .data import read_csv, write_csv
from .errors import CbnError, DataError, QueryError
from .formula import (L, L_PLUS, And, parse, pretty, simplify_disjunct,
                      to_canonical_dnf, DEFAULT_LITERAL_CAP)
from .generate import random_formula
from .model import load_cbn

EXIT_AUDIT = 1
EXIT_IO = 6


def _decimal(p):
    return "%.10g" % float(p)


class Output:
    """Human lines or one JSON record per result."""

    def __init__(self, mode, stream=None):
        self.mode = mode
        self.stream = stream or sys.stdout

    def human(self, text=""):
        if self.mode == "human":
            print(text, file=self.stream)

    def record(self, rec):
        if self.mode == "records":
            print(json.dumps(rec, sort_keys=True), file=self.stream)


def _load(args):
    try:
        cbn = load_cbn(args.model)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (args.model, exc.strerror)) from None
    return cbn.require_valid()


def _exact(p):
    return {"exact": str(p), "decimal": float(p)}


# -- eval ----------------------------------------------------------------------

def cmd_eval(args, out: Output):
    cbn = _load(args)
    lang = L if args.language == "L" else L_PLUS
    f = parse(args.formula, cbn, lang)
    given = parse(args.given, cbn, lang) if args.given else None
    start = time.perf_counter()
    if given is None:
        value = semantics.probability(cbn, f, prune=not args.no_prune, cap=args.cap)
        counted = f
    else:
        value = semantics.conditional_probability(cbn, f, given, prune=not args.no_prune, cap=args.cap)
        counted = And((f, given))
    elapsed = time.perf_counter() - start
    kind = "ccces" if semantics.uses_exogenous(cbn, counted) else "fccces"
    try:
        hits = list(semantics.entailing(cbn, counted, cap=args.cap))
    except CbnError:
        hits = None
    query = pretty(f) if given is None else "%s | %s" % (pretty(f), pretty(given))
    rec = {"command": "eval", "query": query, **_exact(value),
           "entailing": None if hits is None else len(hits), "selection_kind": kind}
    comparisons = {}
    if args.compare:
        fm = functional.compile(cbn, cap=args.cap)
        if given is None:
            comparisons["oracle"] = functional.oracle_probability(fm, f, cap=args.cap)
            comparisons["observational"] = cf.evaluate_observational(cbn, f)
        else:
            comparisons["oracle"] = functional.oracle_conditional(fm, f, given, cap=args.cap)
            num = cf.evaluate_observational(cbn, And((f, given)))
            comparisons["observational"] = num / cf.evaluate_observational(cbn, given)
        rec["compare"] = {k: str(v) for k, v in comparisons.items()}
        rec["agree"] = all(v == value for v in comparisons.values())
    out.record(rec)
    out.human("query:       Pr(%s)" % query)
    out.human("probability: %s  (%s)" % (value, _decimal(value)))
    if hits is None:
        out.human("entailing %s: not enumerated (over cap)" % kind)
    else:
        out.human("entailing %s: %d" % (kind, len(hits)))
    for name, v in comparisons.items():
        out.human("%-12s %s  %s" % (name + ":", v, "agrees" if v == value else "DIFFERS"))
    out.human("time:        %.3f s" % elapsed)
    if args.trace and hits:
        for sel, p in hits:
            out.human("  %s  [%s]" % (semantics.format_selection(sel, cbn), p))
    return 0


# -- counterfactual --------------------------------------------------------------

def cmd_counterfactual(args, out: Output):
    cbn = _load(args)
    query = cf.CounterfactualQuery(args.query, args.cause, args.effect)
    exact = cf.query_value(cbn, query)
    rec = {"command": "counterfactual", "query": str(query), **_exact(exact.value),
           "n_terms": exact.n_terms, "skipped_terms": exact.skipped_terms,
           "mediated": cf.mediated(cbn, args.cause, args.effect)}
    out.human("%s exact: %s  (%s)" % (query, exact.value, _decimal(exact.value)))
    if rec["mediated"]:
        out.human("  another parent of %s lies downstream of %s: evaluated by the general expansion"
                  % (args.effect, args.cause))
    if query.kind == cf.PNS:
        x, y = args.cause, args.effect
        table = cf.exact_table(cbn)
        p00 = table.prob({x: "0", y: "0"})
        p11 = table.prob({x: "1", y: "1"})
        ps = cf.ps_exact(cbn, x, y, table) if p00 else Fraction(0)
        pn = cf.pn_exact(cbn, x, y, table) if p11 else Fraction(0)
        combined = ps * p00 + pn * p11
        rec["identity"] = {"ps": str(ps), "pn": str(pn), "p00": str(p00), "p11": str(p11),
                           "holds": combined == exact.value}
        out.human("  identity: PS*Pr(%s=0 & %s=0) + PN*Pr(%s=1 & %s=1) = %s*%s + %s*%s = %s  [%s]"
                  % (x, y, x, y, ps, p00, pn, p11, combined,
                     "holds" if combined == exact.value else "FAILS"))
    if args.data:
        data = read_csv(args.data, cbn)
        est = cf.estimate_observational(data, cbn, query, n_boot=args.n_boot, seed=args.seed)
        _estimate_fields(rec, est)
        _estimate_lines(out, est)
    out.record(rec)
    return 0


def _estimate_fields(rec, est):
    rec["estimate"] = None if est.estimate is None else float(est.estimate)
    rec["stderr"] = est.stderr
    rec["replicates"] = est.replicates
    rec["failed_replicates"] = est.failed_replicates
    rec["estimate_terms"] = est.n_terms
    rec["estimate_skipped_terms"] = est.skipped_terms


def _estimate_lines(out, est):
    value = "n/a" if est.estimate is None else _decimal(est.estimate)
    se = "n/a" if est.stderr is None else "%.4g" % est.stderr
    out.human("estimate: %s  stderr %s  (%d bootstrap replicates)" % (value, se, est.replicates))
    for s in est.skipped_terms:
        out.human("  insufficient data: %s" % s)


# -- estimate -------------------------------------------------------------------

def cmd_estimate(args, out: Output):
    cbn = _load(args)
    if not args.data:
        raise DataError("estimate needs --data")
    data = read_csv(args.data, cbn)
    if args.query:
        target = cf.CounterfactualQuery(args.query, args.cause, args.effect)
        given = None
    elif args.formula:
        target = parse(args.formula, cbn, L_PLUS)
        given = parse(args.given, cbn, L_PLUS) if args.given else None
    else:
        raise QueryError("estimate needs --formula or --query")
    est = cf.estimate_observational(data, cbn, target, given, n_boot=args.n_boot, seed=args.seed)
    rec = {"command": "estimate", "query": est.query, "n_terms": est.n_terms,
           "skipped_terms": est.skipped_terms}
    _estimate_fields(rec, est)
    out.record(rec)
    out.human("query: %s  (%d rows)" % (est.query, len(data)))
    _estimate_lines(out, est)
    return 0


# -- compile / sample --------------------------------------------------------------

def cmd_compile(args, out: Output):
    cbn = _load(args)
    fm = functional.compile(cbn, cap=args.cap)
    if args.out:
        functional.dump_fcm(fm, args.out)
        rec = {"command": "compile", "positive_contexts": fm.measure.size,
               "response_variables": {v: len(t) for v, t in fm.measure.functions}}
        out.record(rec)
        out.human("%d positive-measure contexts" % fm.measure.size)
        for var, table in fm.measure.functions:
            out.human("  %s: %d response functions" % (fm.response_variable(var), len(table)))
        out.human("wrote %s" % args.out)
    else:
        functional.dump_fcm(fm, sys.stdout)
    return 0


def cmd_sample(args, out: Output):
    cbn = _load(args)
    fm = functional.compile(cbn, cap=args.cap)
    data = functional.sample(fm, args.n, args.seed)
    write_csv(data, args.out or sys.stdout)
    return 0


# -- check --------------------------------------------------------------------

def cmd_check(args, out: Output):
    cbn = load_cbn(args.model)
    results = []
    report = cbn.report
    results.append(("validation", report.ok, str(report)))
    if report.ok:
        fm = functional.compile(cbn, cap=args.cap)
        bad = [(e, got) for e, got in functional.compatibility_audit(fm) if got != e.prob]
        results.append(("compatibility", not bad,
                        "; ".join("%s: %s != %s" % (pretty(e.formula), got, e.prob) for e, got in bad[:5])
                        or "every cpt entry reproduced"))
        pairs = functional.independence_audit(fm)
        bad = [p for p in pairs if p[2] != p[3]]
        results.append(("independence", not bad, "%d pairs checked, %d mismatches" % (len(pairs), len(bad))))
        rng = random.Random(args.seed)
        mismatches = 0
        for _ in range(args.formulas):
            f = random_formula(rng, cbn)
            a = semantics.probability(cbn, f, cap=args.cap)
            b = functional.oracle_probability(fm, f, cap=args.cap)
            c = cf.evaluate_observational(cbn, f)
            if not a == b == c:
                mismatches += 1
                out.human("  mismatch on %s: %s / %s / %s" % (pretty(f), a, b, c))
        results.append(("oracle-equivalence", mismatches == 0,
                        "%d formulas, %d mismatches" % (args.formulas, mismatches)))
    for name, ok, detail in results:
        out.record({"command": "check", "audit": name, "pass": ok, "detail": detail})
        out.human("%-20s %s  %s" % (name, "PASS" if ok else "FAIL", detail))
    return 0 if all(ok for _, ok, _ in results) else EXIT_AUDIT


# -- canon ----------------------------------------------------------------------

def cmd_canon(args, out: Output):
    cbn = load_cbn(args.model).require_valid() if args.model else None
    f = parse(args.formula, cbn, L_PLUS)
    dnf = to_canonical_dnf(f, cbn, max_literals=args.max_literals)
    out.human("formula: %s" % pretty(f))
    out.human("%d disjunct(s)" % len(dnf))
    rows = []
    for i, d in enumerate(dnf, 1):
        simplified = None
        if cbn is not None:
            s = simplify_disjunct(d, cbn)
            simplified = "infeasible" if s is None else str(s)
        rows.append({"disjunct": str(d), "simplified": simplified})
        out.human("%3d. %s" % (i, d))
        if simplified is not None:
            out.human("     -> %s" % simplified)
    out.record({"command": "canon", "formula": pretty(f), "disjuncts": rows})
    return 0


# -- wiring ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="cbnquery", description="Exact causal and counterfactual queries on CBNs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="CBN JSON file (format cbn/1)")
    common.add_argument("--cap", type=int, default=semantics.DEFAULT_CAP, help="enumeration cap")
    common.add_argument("--output", choices=("human", "records"), default="human")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="exact probability of a formula")
    e.add_argument("--formula", required=True)
    e.add_argument("--given")
    e.add_argument("--language", choices=("L", "L+"), default="L+")
    e.add_argument("--no-prune", action="store_true", help="enumerate selections explicitly")
    e.add_argument("--compare", action="store_true", help="also run the oracle and the observational expansion")
    e.add_argument("--trace", action="store_true", help="list the entailing selections")

    c = sub.add_parser("counterfactual", parents=[common], help="PN / PS / PNS")
    _query_args(c, required=True)
    c.add_argument("--data")
    c.add_argument("--n-boot", type=int, default=200)
    c.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("estimate", parents=[common], help="plug-in estimate from data")
    s.add_argument("--data")
    s.add_argument("--formula")
    s.add_argument("--given")
    _query_args(s, required=False)
    s.add_argument("--n-boot", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)

    k = sub.add_parser("compile", parents=[common], help="export the functional model (fcm/1)")
    k.add_argument("--out")

    m = sub.add_parser("sample", parents=[common], help="draw a dataset from the functional model")
    m.add_argument("--n", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")

    h = sub.add_parser("check", parents=[common], help="run model audits")
    h.add_argument("--formulas", type=int, default=50)
    h.add_argument("--seed", type=int, default=0)

    n = sub.add_parser("canon", parents=[common], help="show the canonical DNF")
    n.add_argument("--formula", required=True)
    n.add_argument("--max-literals", type=int, default=DEFAULT_LITERAL_CAP)
    return p


def _query_args(p, required):
    p.add_argument("--query", choices=("pn", "ps", "pns"), required=required)
    p.add_argument("--cause", required=required)
    p.add_argument("--effect", required=required)


COMMANDS = {
    "eval": cmd_eval, "counterfactual": cmd_counterfactual, "estimate": cmd_estimate,
    "compile": cmd_compile, "sample": cmd_sample, "check": cmd_check, "canon": cmd_canon,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Output(args.output)
    if args.command != "canon" and not args.model:
        print("error: --model is required for %s" % args.command, file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, out)
    except CbnError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
