"""Vanilla credit default swap market generation and its explicit CPS.

The protection buyer pays a periodic spread while the reference entity is
alive and receives the loss-given-default amount at the default date.
Dealer quotes carry two spreads: kappa_ask to buy protection, kappa_bid to
sell it, so the long and short dividend streams differ by the spread paid.
Default is a node indicator on the supplied tree, absorbing along paths;
post-default nodes pay nothing.

Ex-dividend quotes are generated from a pricing measure carried by the
contract record: the discounted ask quote is the expected remaining
short-leg dividends and the bid quote the expected remaining long-leg
dividends, which lands the bid-ask ordering automatically.  For any premium level inside the quoted
spread interval, expecting the corresponding one-leg dividend stream yields
a price process inside the brackets whose cumulative value is a Doob
martingale: the market carries an explicit consistent pricing system per
premium level and is therefore arbitrage-free by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cps import ConsistentPricingSystem
from .errors import ValidationError
from .market import MarketModel, Security, load_market, market_to_doc, validate_market
from .tree import (
    ScenarioTree,
    build_tree,
    conditionals_to_leaf_measure,
    path_cumsum,
)


@dataclass(frozen=True)
class CdsSpec:
    tree: ScenarioTree
    default_node: np.ndarray  # bool per node; absorbing along paths
    loss_given_default: float
    kappa_ask: float
    kappa_bid: float
    rates: np.ndarray
    pricing_probs: np.ndarray  # conditional child probabilities


def load_cds_spec(doc: dict) -> CdsSpec:
    try:
        tree = build_tree(doc["tree"])
        delta = float(doc["delta"])
        kappa_ask = float(doc["kappaAsk"])
        kappa_bid = float(doc["kappaBid"])
        default_ids = list(doc.get("defaultNodes", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed CDS spec document: {exc}") from exc
    rates = np.array(
        [float(r) for r in doc.get("rates", [0.0] * (tree.horizon + 1))], dtype=float
    )
    flags = np.zeros(tree.n_nodes, dtype=bool)
    for nid in default_ids:
        flags[tree.node(str(nid))] = True
    probs = tree.probs.copy()
    for nid, p in (doc.get("pricingProbs") or {}).items():
        probs[tree.node(str(nid))] = float(p)
    spec = CdsSpec(
        tree=tree,
        default_node=flags,
        loss_given_default=delta,
        kappa_ask=kappa_ask,
        kappa_bid=kappa_bid,
        rates=rates,
        pricing_probs=probs,
    )
    _validate_spec(spec)
    return spec


def _validate_spec(spec: CdsSpec) -> None:
    if spec.loss_given_default < 0.0:
        raise ValidationError("loss-given-default must be nonnegative")
    if spec.kappa_ask < 0.0 or spec.kappa_bid < 0.0:
        raise ValidationError("CDS spreads must be nonnegative")
    if spec.kappa_bid > spec.kappa_ask:
        raise ValidationError("kappaBid must not exceed kappaAsk")
    tree = spec.tree
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        if p >= 0 and spec.default_node[p] and not spec.default_node[n]:
            raise ValidationError(
                f"default is not absorbing: node {tree.ids[n]} recovers from "
                f"defaulted parent {tree.ids[p]}"
            )
    for n in range(tree.n_nodes):
        kids = tree.children[n]
        if kids:
            tot = sum(spec.pricing_probs[c] for c in kids)
            if abs(tot - 1.0) > 1e-9 or any(spec.pricing_probs[c] <= 0 for c in kids):
                raise ValidationError(
                    f"pricing probabilities invalid at node {tree.ids[n]}"
                )


def _indicators(spec: CdsSpec) -> tuple[np.ndarray, np.ndarray]:
    """(default occurs at this node, still alive at this node)."""
    tree = spec.tree
    at = np.zeros(tree.n_nodes)
    alive = np.zeros(tree.n_nodes)
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        parent_defaulted = p >= 0 and spec.default_node[p]
        at[n] = 1.0 if (spec.default_node[n] and not parent_defaulted) else 0.0
        alive[n] = 0.0 if spec.default_node[n] else 1.0
    return at, alive


def dividend_increments(spec: CdsSpec, kappa: float) -> np.ndarray:
    """Undiscounted increment at each node: delta on first default, minus
    kappa while strictly pre-default, zero after; zero at time 0."""
    at, alive = _indicators(spec)
    incr = spec.loss_given_default * at - kappa * alive
    incr[spec.tree.times == 0] = 0.0
    return incr


def make_cds_market(spec: CdsSpec) -> MarketModel:
    """One-security market with the quoted CDS and generated dealer quotes.

    The long leg pays kappa_ask and the short leg kappa_bid; discounted
    quotes are conditional expectations of the opposite leg's remaining
    dividends under the pricing measure, evaluated by backward induction.
    The output re-runs full market validation.
    """
    tree = spec.tree
    savings = np.cumprod(1.0 + spec.rates)
    disc = 1.0 / savings[tree.times]
    d_ask = dividend_increments(spec, spec.kappa_ask)
    d_bid = dividend_increments(spec, spec.kappa_bid)
    ask_star = _expected_remaining(tree, spec.pricing_probs, d_bid * disc)
    bid_star = _expected_remaining(tree, spec.pricing_probs, d_ask * disc)
    sec = Security(
        name="CDS",
        ask=ask_star / disc,
        bid=bid_star / disc,
        d_ask=d_ask,
        d_bid=d_bid,
    )
    m = MarketModel(tree=tree, rates=spec.rates.copy(), securities=(sec,))
    validate_market(m)
    # Round-trip through the document loader: the generated market must be
    # exactly what `validate` accepts.
    return load_market(market_to_doc(m))


def _expected_remaining(
    tree: ScenarioTree, q: np.ndarray, incr: np.ndarray
) -> np.ndarray:
    """V_t = E_q[sum_{u>t} incr_u | node], by backward induction."""
    out = np.zeros(tree.n_nodes)
    order = np.argsort(tree.times, kind="stable")[::-1]
    for n in order:
        kids = tree.children[int(n)]
        if kids:
            out[n] = sum(q[k] * (incr[k] + out[k]) for k in kids)
    return out


def make_cds_cps(spec: CdsSpec, kappa: float) -> ConsistentPricingSystem:
    """The explicit one-parameter CPS family of the generated CDS market."""
    if not spec.kappa_bid <= kappa <= spec.kappa_ask:
        raise ValidationError(
            f"kappa {kappa} outside the quoted interval "
            f"[{spec.kappa_bid}, {spec.kappa_ask}]"
        )
    tree = spec.tree
    savings = np.cumprod(1.0 + spec.rates)
    disc = 1.0 / savings[tree.times]
    a = dividend_increments(spec, kappa) * disc
    p = _expected_remaining(tree, spec.pricing_probs, a)
    mval = p + path_cumsum(tree, a)
    return ConsistentPricingSystem(
        q=conditionals_to_leaf_measure(tree, spec.pricing_probs),
        price=p[:, None],
        dividend=a[:, None],
        cum_value=mval[:, None],
    )


def cds_spec_to_doc(spec: CdsSpec) -> dict:
    from .tree import tree_to_doc

    tree = spec.tree
    return {
        "delta": spec.loss_given_default,
        "kappaAsk": spec.kappa_ask,
        "kappaBid": spec.kappa_bid,
        "tree": tree_to_doc(tree),
        "defaultNodes": [tree.ids[n] for n in np.flatnonzero(spec.default_node)],
        "pricingProbs": {
            tree.ids[n]: float(spec.pricing_probs[n]) for n in range(tree.n_nodes)
        },
        "rates": [float(r) for r in spec.rates],
    }
