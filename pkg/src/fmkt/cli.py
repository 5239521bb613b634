"""Command-line front end: JSON in, JSON out, deterministic exit codes.

Exit 0 means the computation ran (including "no arbitrage found"); exit 1
is an input or validation problem; exit 2 an internal solver failure.  All
numeric output is printed with 12 significant digits and keys are sorted,
so identical inputs produce byte-identical output.  FMKT_TOL overrides the
default 1e-9 verification tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import __version__
from .arbitrage import (
    certificate_to_doc,
    check_no_arbitrage,
    check_efficient_friction,
    find_risk_neutral_measure,
    measure_from_doc,
    measure_to_doc,
    verify_risk_neutral,
)
from .cds import load_cds_spec, make_cds_market
from .cone import build_cone, dump_cone
from .cps import build_cps_from_rn, cps_from_doc, cps_to_doc, verify_cps
from .errors import SolverError, ValidationError
from .hedging import (
    dual_price_bound,
    extended_cone_check,
    load_derivative,
    price_bounds,
    subhedge_bid,
    superhedge_ask,
)
from .market import load_market, market_to_doc
from .portfolio import strategy_to_doc


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    payload: dict
    summary: str = ""


def _fmt(obj):
    """Round every float to 12 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _fmt(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt(v) for v in obj]
    return obj


def render(payload: dict) -> str:
    return json.dumps(_fmt(payload), indent=2, sort_keys=True)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _tol() -> float:
    raw = os.environ.get("FMKT_TOL")
    if raw is None:
        return 1e-9
    try:
        tol = float(raw)
    except ValueError:
        raise ValidationError(f"FMKT_TOL is not a number: {raw!r}") from None
    if not tol > 0.0:
        raise ValidationError("FMKT_TOL must be positive")
    return tol


def _maybe_dump(args, m, t) -> None:
    if getattr(args, "dump_cone", None):
        with open(args.dump_cone, "w") as fh:
            fh.write(dump_cone(build_cone(m, t), m.tree.ids))


def _cmd_validate(args) -> CommandResult:
    load_market(_read_json(args.market))
    return CommandResult(0, {"ok": True}, "market document is valid")


def _cmd_arb(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    _maybe_dump(args, m, args.t)
    cert = check_no_arbitrage(m, args.t, tol=_tol())
    if cert is None:
        return CommandResult(0, {"arbitrage": False}, "no arbitrage found")
    payload = {"arbitrage": True, "certificate": certificate_to_doc(m, cert)}
    return CommandResult(0, payload, f"arbitrage found, margin {cert.margin:.6g}")


def _cmd_rn(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    _maybe_dump(args, m, args.t)
    r = find_risk_neutral_measure(m, args.t)
    if r is None:
        return CommandResult(0, {"exists": False}, "no risk-neutral measure")
    payload = {"exists": True, **measure_to_doc(m, r)}
    return CommandResult(0, payload, f"measure found, min mass {r.epsilon:.6g}")


def _cmd_ef(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    _maybe_dump(args, m, 0)
    ok, psi = check_efficient_friction(m, tol=_tol())
    if ok:
        return CommandResult(0, {"ef": True}, "efficient friction holds")
    tree = m.tree
    violation = {
        "psi": {
            tree.ids[n]: [float(v) for v in psi[n]]
            for n in range(tree.n_nodes)
            if tree.times[n] <= tree.horizon - 1
        }
    }
    return CommandResult(0, {"ef": False, "violation": violation}, "EF violated")


def _cmd_cps_verify(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    c = cps_from_doc(m, _read_json(args.cps))
    report = verify_cps(m, c, tol=_tol())
    checks = {
        name: {
            "pass": chk.passed,
            "node": chk.node,
            **({"detail": chk.detail} if chk.detail else {}),
        }
        for name, chk in report.checks.items()
    }
    word = "consistent" if report.passed else "inconsistent"
    return CommandResult(0, {"ok": report.passed, "checks": checks}, word)


def _cmd_cps_build(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    if args.q:
        q = measure_from_doc(m, _read_json(args.q))
        ok, why = verify_risk_neutral(m, q, tol=_tol())
        if not ok:
            raise ValidationError(f"supplied measure is not risk-neutral: {why}")
    else:
        r = find_risk_neutral_measure(m)
        if r is None:
            raise ValidationError(
                "market admits no risk-neutral measure; nothing to build from"
            )
        q = r.q
    out = build_cps_from_rn(m, q)
    return CommandResult(0, cps_to_doc(m, out.cps), "consistent pricing system built")


def _cmd_price(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    d = load_derivative(_read_json(args.derivative), m.tree)
    tree = m.tree
    if args.report:
        pb = price_bounds(m, d, args.t)
        report = {}
        for n, ha in pb.ask.items():
            hb = pb.bid[n]
            cone_leaves = _subtree_leaf_ids(m, n)
            report[tree.ids[n]] = {
                "piAsk": float(ha.price),
                "piBid": float(hb.price),
                "dualMeasure": {
                    "ask": dict(zip(cone_leaves, map(float, ha.measure))),
                    "bid": dict(zip(cone_leaves, map(float, hb.measure))),
                },
                "strategy": {
                    "ask": strategy_to_doc(m, ha.strategy)["strategy"],
                    "bid": strategy_to_doc(m, hb.strategy)["strategy"],
                },
            }
        return CommandResult(0, {"report": report, "t": args.t}, "price report")
    hedges = (
        superhedge_ask(m, d, args.t)
        if args.side == "ask"
        else subhedge_bid(m, d, args.t)
    )
    payload: dict = {
        "prices": {tree.ids[n]: float(h.price) for n, h in hedges.items()}
    }
    if args.dual:
        duals = dual_price_bound(m, d, args.t, args.side, family=args.family)
        payload["dual"] = {
            tree.ids[n]: {
                "value": float(v),
                "q": dict(zip(_subtree_leaf_ids(m, n), map(float, q))),
            }
            for n, (v, q) in duals.items()
        }
    return CommandResult(0, payload, f"{args.side} prices at t={args.t}")


def _subtree_leaf_ids(m, node: int) -> list[str]:
    lo, hi = m.tree.leaf_range[node]
    return [m.tree.ids[int(n)] for n in m.tree.leaves[lo:hi]]


def _cmd_cds_gen(args) -> CommandResult:
    spec = load_cds_spec(_read_json(args.spec))
    market = make_cds_market(spec)
    doc = market_to_doc(market)
    text = render(doc)
    try:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise ValidationError(f"cannot write {args.out}: {exc}") from exc
    return CommandResult(
        0, {"ok": True, "out": args.out}, f"market written to {args.out}"
    )


def _cmd_extended_arb(args) -> CommandResult:
    m = load_market(_read_json(args.market))
    d = load_derivative(_read_json(args.derivative), m.tree)
    cert = extended_cone_check(m, d, args.t, args.w, args.side, tol=_tol())
    if cert is None:
        return CommandResult(
            0, {"arbitrage": False}, "extended market is arbitrage-free"
        )
    payload = {"arbitrage": True, "certificate": certificate_to_doc(m, cert)}
    return CommandResult(0, payload, f"arbitrage found, margin {cert.margin:.6g}")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fmkt",
        description="scenario-tree markets with bid-ask spreads: arbitrage, "
        "risk-neutral measures, consistent pricing systems, hedging bounds",
    )
    ap.add_argument("--version", action="version", version=f"fmkt {__version__}")
    ap.add_argument("--verbose", action="store_true", help="summary on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        return p

    p = add("validate", _cmd_validate, help="validate a market document")
    p.add_argument("market")

    p = add("arb", _cmd_arb, help="search for an arbitrage certificate")
    p.add_argument("market")
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--dump-cone", metavar="PATH", help="write the cone matrices")

    p = add("rn", _cmd_rn, help="search for a risk-neutral measure")
    p.add_argument("market")
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--dump-cone", metavar="PATH")

    p = add("ef", _cmd_ef, help="check the efficient friction condition")
    p.add_argument("market")
    p.add_argument("--dump-cone", metavar="PATH")

    p = add("cps-verify", _cmd_cps_verify, help="verify a consistent pricing system")
    p.add_argument("market")
    p.add_argument("cps")

    p = add("cps-build", _cmd_cps_build, help="build a CPS from a risk-neutral measure")
    p.add_argument("market")
    p.add_argument("--q", metavar="FILE", help="measure document (default: search)")

    p = add("price", _cmd_price, help="superhedging/subhedging prices")
    p.add_argument("market")
    p.add_argument("derivative")
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--side", choices=["ask", "bid"], default="ask")
    p.add_argument("--dual", action="store_true", help="include the dual bound")
    p.add_argument(
        "--family",
        choices=["rt", "r"],
        default="rt",
        help="dual measure family: trades from t (rt) or global (r)",
    )
    p.add_argument("--report", action="store_true", help="full two-sided report")

    p = add("cds-gen", _cmd_cds_gen, help="generate a CDS market document")
    p.add_argument("spec")
    p.add_argument("--out", required=True)

    p = add("extended-arb", _cmd_extended_arb, help="arbitrage check with the claim held at a price")
    p.add_argument("market")
    p.add_argument("derivative")
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--w", type=float, required=True, help="candidate price")
    p.add_argument("--side", choices=["a", "b"], required=True)
    return ap


def run_command(argv) -> CommandResult:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:  # --help / --version
            raise
        # argparse exits 2 on usage errors; that code is reserved for
        # solver failures here, so remap to the input-error code
        return CommandResult(1, {"error": "invalid arguments"}, "invalid arguments")
    try:
        return args.fn(args)
    except ValidationError as exc:
        return CommandResult(1, {"error": str(exc)}, f"error: {exc}")
    except SolverError as exc:
        return CommandResult(
            2, {"error": f"solver failure: {exc}"}, f"solver failure: {exc}"
        )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    result = run_command(argv)
    print(render(result.payload))
    if result.summary and "--verbose" in argv:
        print(result.summary, file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
