"""Consistent pricing systems: verification, Snell envelopes, construction.

A consistent pricing system is an auxiliary frictionless market hiding
inside the quoted one: a strictly positive measure, a price process lying
inside the bid-ask bracket, a dividend process lying inside the dividend
bracket, and the requirement that price plus cumulative dividends is a
martingale.  Whenever one exists the market is arbitrage-free, which makes
CPSs the practical device for certifying models.

When dividends are frictionless the converse holds and is realized here
constructively: backward-induction Snell envelopes of the buyer's and
seller's stopping problems bracket the candidate price, and a per-node
interpolation weight chosen from conditional expectations turns the pair
into an exact martingale.  The weight stays in [0, 1], which is what keeps
the interpolated price inside the bracket.  Stopping problems are solved by
backward recursion only; stopping times are never enumerated.

With a genuine dividend spread no construction is attempted: whether a CPS
must exist in that case is unresolved, so the tool reports the construction
as unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .market import MarketModel, discounted_quotes
from .tree import leaf_measure_to_conditionals, path_cumsum

CPS_TOL = 1e-9
LAMBDA_DEN_TOL = 1e-12
DIV_SPREAD_TOL = 1e-12

CHECKS = ("measure", "price_bracket", "dividend_bracket", "martingale", "consistency")


@dataclass(frozen=True)
class ConsistentPricingSystem:
    """Quadruplet (q, P, A, M); all processes discounted, node-indexed.

    ``price`` and ``cum_value`` have shape (n_nodes, N); ``dividend`` rows
    at time 0 are zero by convention.  ``cum_value`` must equal price plus
    the path-cumulative dividends, and be a martingale under ``q``.
    """

    q: np.ndarray
    price: np.ndarray
    dividend: np.ndarray
    cum_value: np.ndarray


@dataclass(frozen=True)
class SnellEnvelopes:
    """Buyer/seller stopping values ya, yb and their cumulative lifts xa, xb."""

    ya: np.ndarray
    yb: np.ndarray
    xa: np.ndarray
    xb: np.ndarray


@dataclass(frozen=True)
class CpsCheck:
    passed: bool
    node: str | None = None
    detail: str | None = None


@dataclass(frozen=True)
class CpsReport:
    checks: dict[str, CpsCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def first_failure(self) -> tuple[str, CpsCheck] | None:
        for name in CHECKS:
            if not self.checks[name].passed:
                return name, self.checks[name]
        return None


@dataclass(frozen=True)
class CpsConstruction:
    cps: ConsistentPricingSystem
    lam: np.ndarray  # interpolation weight per decision node and security


def cps_to_doc(m: MarketModel, c: ConsistentPricingSystem) -> dict:
    tree = m.tree
    def table(arr, from_time=0):
        return {
            tree.ids[n]: [float(v) for v in arr[n]]
            for n in range(tree.n_nodes)
            if tree.times[n] >= from_time
        }
    return {
        "q": {tree.ids[n]: float(c.q[k]) for k, n in enumerate(tree.leaves)},
        "P": table(c.price),
        "A": table(c.dividend, from_time=1),
        "M": table(c.cum_value),
    }


def cps_from_doc(m: MarketModel, doc: dict) -> ConsistentPricingSystem:
    from .arbitrage import measure_from_doc

    tree = m.tree
    N = m.n_securities
    q = measure_from_doc(m, doc)

    def table(key, required_from=0):
        arr = np.zeros((tree.n_nodes, N))
        entries = doc.get(key)
        if not isinstance(entries, dict):
            raise ValidationError(f"CPS document must carry a {key!r} mapping")
        seen = np.zeros(tree.n_nodes, dtype=bool)
        for nid, row in entries.items():
            n = tree.node(str(nid))
            vals = [float(v) for v in row]
            if len(vals) != N:
                raise ValidationError(
                    f"{key} entry at node {nid} has {len(vals)} components, "
                    f"market has {N}"
                )
            arr[n] = vals
            seen[n] = True
        missing = ~seen & (tree.times >= required_from)
        if np.any(missing):
            bad = int(np.flatnonzero(missing)[0])
            raise ValidationError(f"{key} entry missing at node {tree.ids[bad]}")
        return arr

    return ConsistentPricingSystem(
        q=q,
        price=table("P"),
        dividend=table("A", required_from=1),
        cum_value=table("M"),
    )


def verify_cps(
    m: MarketModel, c: ConsistentPricingSystem, tol: float = CPS_TOL
) -> CpsReport:
    """Per-condition pass/fail with the first offending node for each."""
    tree = m.tree
    dq = discounted_quotes(m)
    checks: dict[str, CpsCheck] = {}

    q = np.asarray(c.q, dtype=float)
    if q.shape != (tree.leaves.size,):
        raise ValidationError("measure leaf count does not match the tree")
    if np.any(q <= 0.0):
        bad = int(np.flatnonzero(q <= 0.0)[0])
        checks["measure"] = CpsCheck(False, tree.ids[tree.leaves[bad]], "nonpositive mass")
    elif abs(q.sum() - 1.0) > tol:
        checks["measure"] = CpsCheck(False, None, f"total mass {q.sum():.12g}")
    else:
        checks["measure"] = CpsCheck(True)

    def bracket(lower, proc, upper, label):
        low_bad = proc < lower - tol
        up_bad = proc > upper + tol
        bad = np.flatnonzero(np.any(low_bad | up_bad, axis=1))
        if bad.size:
            n = int(bad[0])
            return CpsCheck(False, tree.ids[n], f"{label} leaves the bracket")
        return CpsCheck(True)

    checks["price_bracket"] = bracket(dq.bid, c.price, dq.ask, "price")
    div_ok = bracket(dq.d_ask, c.dividend, dq.d_bid, "dividend")
    if div_ok.passed and np.any(np.abs(c.dividend[tree.times == 0]) > 0.0):
        div_ok = CpsCheck(False, tree.ids[0], "nonzero dividend at time 0")
    checks["dividend_bracket"] = div_ok

    mart = CpsCheck(True)
    if checks["measure"].passed:
        qc = leaf_measure_to_conditionals(tree, q)
        for n in range(tree.n_nodes):
            kids = tree.children[n]
            if not kids:
                continue
            cont = sum(qc[k] * c.cum_value[k] for k in kids)
            if np.any(np.abs(cont - c.cum_value[n]) > tol):
                mart = CpsCheck(False, tree.ids[n], "conditional expectation drifts")
                break
    else:
        mart = CpsCheck(False, None, "measure invalid")
    checks["martingale"] = mart

    resid = np.abs(c.cum_value - c.price - path_cumsum(tree, c.dividend))
    bad = np.flatnonzero(np.any(resid > tol, axis=1))
    checks["consistency"] = (
        CpsCheck(False, tree.ids[int(bad[0])], "M != P + cumulative A")
        if bad.size
        else CpsCheck(True)
    )
    return CpsReport(checks=checks)


def snell_envelopes(m: MarketModel, q: np.ndarray) -> SnellEnvelopes:
    """Backward-induction stopping envelopes under a candidate measure.

    yb is the seller's problem (stop to earn the bid, continue to collect
    the ask dividend, take the max); ya is the buyer's mirror with min.
    xa/xb add back each problem's own cumulative dividends, which makes
    them the sub/supermartingale forms with the ordering xb <= xa under any
    risk-neutral measure.
    """
    tree = m.tree
    dq = discounted_quotes(m)
    qc = leaf_measure_to_conditionals(tree, q)
    yb = dq.bid.copy()
    ya = dq.ask.copy()
    order = np.argsort(tree.times, kind="stable")[::-1]
    for n in order:
        kids = tree.children[int(n)]
        if not kids:
            continue
        cont_b = sum(qc[k] * (dq.d_ask[k] + yb[k]) for k in kids)
        cont_a = sum(qc[k] * (dq.d_bid[k] + ya[k]) for k in kids)
        yb[n] = np.maximum(dq.bid[n], cont_b)
        ya[n] = np.minimum(dq.ask[n], cont_a)
    xb = yb + path_cumsum(tree, dq.d_ask)
    xa = ya + path_cumsum(tree, dq.d_bid)
    return SnellEnvelopes(ya=ya, yb=yb, xa=xa, xb=xb)


def build_cps_from_rn(m: MarketModel, q: np.ndarray) -> CpsConstruction:
    """Interpolate a CPS out of a risk-neutral measure (frictionless dividends).

    The candidate price starts at the buyer's envelope and moves forward one
    period at a time: the interpolation weight solving the one-step
    martingale equation is computed from conditional envelope expectations
    (1/2 when the envelopes collapse within 1e-12), the child prices blend
    the two envelopes with that weight, and the cumulative process follows.
    The weight lands in [0, 1] at every node whenever the measure is
    genuinely risk-neutral, which keeps the price inside the bracket; both
    facts are re-checked on the output.
    """
    from .arbitrage import verify_risk_neutral  # local import to avoid a cycle

    tree = m.tree
    dq = discounted_quotes(m)
    spread = np.abs(m.d_ask - m.d_bid)
    if float(spread.max(initial=0.0)) > DIV_SPREAD_TOL:
        bad = int(np.flatnonzero(np.any(spread > DIV_SPREAD_TOL, axis=1))[0])
        raise ValidationError(
            "construction unavailable: dividend spread is nonzero at node "
            f"{tree.ids[bad]} (whether a CPS exists there is an open problem)"
        )
    ok, why = verify_risk_neutral(m, q)
    if not ok:
        raise ValidationError(f"measure is not risk-neutral: {why}")

    env = snell_envelopes(m, q)
    qc = leaf_measure_to_conditionals(tree, q)
    N = m.n_securities
    div = dq.d_ask  # common discounted dividend increments
    cum_div = path_cumsum(tree, div)

    price = np.zeros((tree.n_nodes, N))
    cumv = np.zeros((tree.n_nodes, N))
    lam = np.full((tree.n_nodes, N), 0.5)
    price[0] = env.ya[0]
    cumv[0] = env.ya[0]
    for n in range(tree.n_nodes):
        kids = tree.children[n]
        if not kids:
            continue
        exp_xb = sum(qc[k] * env.xb[k] for k in kids)
        exp_xa = sum(qc[k] * env.xa[k] for k in kids)
        for j in range(N):
            den = exp_xa[j] - exp_xb[j]
            lam[n, j] = (
                (cumv[n, j] - exp_xb[j]) / den if den > LAMBDA_DEN_TOL else 0.5
            )
        for k in kids:
            price[k] = lam[n] * env.ya[k] + (1.0 - lam[n]) * env.yb[k]
            cumv[k] = price[k] + cum_div[k]

    cps = ConsistentPricingSystem(
        q=np.asarray(q, dtype=float), price=price, dividend=div.copy(), cum_value=cumv
    )
    report = verify_cps(m, cps)
    if not report.passed:
        name, chk = report.first_failure()
        raise ValidationError(
            f"constructed system fails its own {name} check at {chk.node}"
        )
    if np.any(lam < -CPS_TOL) or np.any(lam > 1.0 + CPS_TOL):
        raise ValidationError("interpolation weight left [0, 1]")
    return CpsConstruction(cps=cps, lam=lam)


def stopping_brackets_hold(
    m: MarketModel, q: np.ndarray, tol: float = CPS_TOL
) -> tuple[bool, str | None]:
    """Deterministic-window bracket inequalities under a candidate measure.

    For nodes n at time t and horizons s > t: the bid is at most the
    expected ask plus bid dividends collected on the way, and the ask is at
    least the expected bid plus ask dividends.  Direct evaluation over all
    (node, s) pairs; used by tests and diagnostics.
    """
    from .tree import conditional_expectation

    tree = m.tree
    dq = discounted_quotes(m)
    qc = leaf_measure_to_conditionals(tree, q)
    cum_da = path_cumsum(tree, dq.d_ask)
    cum_db = path_cumsum(tree, dq.d_bid)
    for n in range(tree.n_nodes):
        t = int(tree.times[n])
        for s in range(t + 1, tree.horizon + 1):
            up = conditional_expectation(
                tree, qc, dq.ask + (cum_db - cum_db[n]), n, s
            )
            lo = conditional_expectation(
                tree, qc, dq.bid + (cum_da - cum_da[n]), n, s
            )
            if np.any(dq.bid[n] > up + tol):
                return False, f"bid bracket fails at node {tree.ids[n]} horizon {s}"
            if np.any(dq.ask[n] < lo - tol):
                return False, f"ask bracket fails at node {tree.ids[n]} horizon {s}"
    return True, None
