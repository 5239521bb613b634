"""Superhedging ask and subhedging bid prices for dividend-paying claims.

The ask price at a time-t node is the least cash W such that the claim's
remaining discounted cash flows can be dominated by W plus some zero-cost
trade on that subtree; the bid price is the mirror image, computed exactly
as minus the ask price of the negated claim.  Each node's price is one
small LP whose optimal vertex also delivers the hedge, and whose row duals
renormalize into a measure achieving the dual bound: the supremum (infimum)
of the claim's conditional expected cash flows over measures that price
every admissible trade nonpositively.  Strong LP duality realizes the
representation theorem at finite scale, and the equality of primal and dual
values is asserted in tests rather than assumed.

Extended cones bolt a buy-and-hold (side "a") or sell-and-hold (side "b")
position in the claim at a candidate price onto the trade cone; running the
ordinary no-arbitrage search on the augmented cone brackets the fair price
interval: selling strictly above the ask price (or buying strictly below
the bid) creates an explicit arbitrage certificate.

Claims are ingested as spot cash-flow processes and discounted internally;
flows at or before the pricing time never enter either price.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arbitrage import ArbitrageCertificate, check_no_arbitrage
from .cone import build_cone, net_position, with_claim_columns
from .errors import SolverError, ValidationError
from .lp import LinearProgram, solve_lp
from .market import MarketModel
from .portfolio import TradingStrategy, complete_cash_leg, payoff_F
from .tree import ScenarioTree, path_cumsum

PRICE_TOL = 1e-9


@dataclass(frozen=True)
class DerivativeContract:
    """Spot (not cumulative) cash flow per node; finite everywhere."""

    name: str
    cashflows: np.ndarray

    def __neg__(self) -> "DerivativeContract":
        return DerivativeContract(name=f"-{self.name}", cashflows=-self.cashflows)


@dataclass(frozen=True)
class NodeHedge:
    """One node's price, hedge, and the measure achieving the dual bound."""

    node: int
    price: float
    strategy: TradingStrategy
    risky: np.ndarray
    measure: np.ndarray  # over the node's subtree leaves (cone order)
    dual_value: float


@dataclass(frozen=True)
class PriceBounds:
    t: int
    ask: dict[int, NodeHedge]
    bid: dict[int, NodeHedge]


def load_derivative(doc: dict, tree: ScenarioTree) -> DerivativeContract:
    name = str(doc.get("name", "claim"))
    flows = np.zeros(tree.n_nodes)
    for nid, v in (doc.get("cashflows") or {}).items():
        flows[tree.node(nid)] = float(v)
    if not np.all(np.isfinite(flows)):
        raise ValidationError(f"claim {name}: non-finite cash flow")
    return DerivativeContract(name=name, cashflows=flows)


def derivative_to_doc(d: DerivativeContract, tree: ScenarioTree) -> dict:
    flows = {
        tree.ids[n]: float(d.cashflows[n])
        for n in range(tree.n_nodes)
        if d.cashflows[n] != 0.0
    }
    return {"name": d.name, "cashflows": flows}


def _future_flow_sums(m: MarketModel, d: DerivativeContract, t: int) -> np.ndarray:
    """Per-leaf discounted claim flows collected strictly after time t."""
    tree = m.tree
    disc = d.cashflows * m.node_discount
    disc = np.where(tree.times <= t, 0.0, disc)
    return path_cumsum(tree, disc)[tree.leaves]


def superhedge_ask(
    m: MarketModel, d: DerivativeContract, t: int = 0, check_na: bool = True
) -> dict[int, NodeHedge]:
    """Least-cash domination price and hedge per time-t node.

    Minimizes W subject to (remaining discounted flows) - W <= G x on the
    node's subtree.  The LP always has an optimal vertex: W large enough is
    feasible because claims are bounded, and unboundedness below would mean
    the subtree itself admits arbitrage, which is reported as such.
    """
    if check_na and check_no_arbitrage(m, t) is not None:
        raise ValidationError("market admits arbitrage; hedging prices undefined")
    return {
        int(n): _solve_node(m, d, t, int(n)) for n in m.tree.nodes_at(t)
    }


def _solve_node(m: MarketModel, d: DerivativeContract, t: int, node: int) -> NodeHedge:
    tree = m.tree
    cone = build_cone(m, t, root=node)
    cum_all = _future_flow_sums(m, d, t)
    pos = tree.leaf_pos
    cum = np.array([cum_all[pos[n]] for n in cone.leaf_nodes])
    nL = cum.size
    nv = cone.n_vars
    # variables: [x (cone), W free]; rows: leaf domination then balance.
    c = np.zeros(nv + 1)
    c[nv] = 1.0
    a_ub = np.hstack([-cone.G, -np.ones((nL, 1))])
    b_ub = -cum
    a_eq = np.hstack([cone.E, np.zeros((cone.E.shape[0], 1))])
    b_eq = np.zeros(cone.E.shape[0])
    free = np.zeros(nv + 1, dtype=bool)
    free[nv] = True
    sol = solve_lp(LinearProgram("min", c, a_eq, b_eq, a_ub, b_ub, free=free))
    if sol.status == "unbounded":
        raise ValidationError(
            f"superhedging price unbounded below at node {tree.ids[node]}: "
            "the subtree admits arbitrage"
        )
    if sol.status != "optimal":
        raise SolverError(f"hedging LP ended {sol.status} at node {tree.ids[node]}")
    W = float(sol.objective)
    psi = net_position(cone, sol.x[:nv], tree.n_nodes)
    strategy = complete_cash_leg(m, psi, 0.0)
    _verify_attainment(m, cone, psi, cum, W, t)
    duals = sol.duals_ub  # <= 0 under the min convention
    q = -duals
    total = q.sum()
    if total <= 0.0:
        raise SolverError("hedging LP duals do not form a measure")
    q = q / total
    return NodeHedge(
        node=node,
        price=W,
        strategy=strategy,
        risky=psi,
        measure=q,
        dual_value=float(q @ cum),
    )


def _verify_attainment(m, cone, psi, cum, W, t) -> None:
    pay = payoff_F(m, psi, start=t)
    pos = m.tree.leaf_pos
    pay = np.array([pay[pos[n]] for n in cone.leaf_nodes])
    slack = pay + W - cum
    if float(slack.min()) < -PRICE_TOL * (1.0 + float(np.abs(cum).max(initial=0.0))):
        raise SolverError("returned hedge fails to dominate the claim")


def subhedge_bid(
    m: MarketModel, d: DerivativeContract, t: int = 0, check_na: bool = True
) -> dict[int, NodeHedge]:
    """Greatest cash receivable against the claim: -ask price of -D."""
    hedges = superhedge_ask(m, -d, t, check_na=check_na)
    return {
        n: NodeHedge(
            node=h.node,
            price=-h.price,
            strategy=h.strategy,
            risky=h.risky,
            measure=h.measure,
            dual_value=-h.dual_value,
        )
        for n, h in hedges.items()
    }


def price_bounds(m: MarketModel, d: DerivativeContract, t: int = 0) -> PriceBounds:
    ask = superhedge_ask(m, d, t)
    bid = subhedge_bid(m, d, t, check_na=False)
    for n in ask:
        if bid[n].price > ask[n].price + PRICE_TOL:
            raise SolverError(
                f"bid exceeds ask at node {m.tree.ids[n]} in a no-arbitrage market"
            )
    return PriceBounds(t=t, ask=ask, bid=bid)


def dual_price_bound(
    m: MarketModel,
    d: DerivativeContract,
    t: int = 0,
    side: str = "ask",
    family: str = "rt",
) -> dict[int, tuple[float, np.ndarray]]:
    """Extremal conditional expectation of remaining flows, with its measure.

    family "rt" prices against measures feasible for trades started at t
    (the proved representation, read off the hedging LP duals); family "r"
    prices against globally risk-neutral measures conditioned on the node,
    exposed for experimentation.  The two are not asserted equal anywhere:
    whether they coincide is left open.
    """
    if side not in ("ask", "bid"):
        raise ValidationError(f"side must be 'ask' or 'bid', got {side!r}")
    if family == "rt":
        hedges = (
            superhedge_ask(m, d, t, check_na=False)
            if side == "ask"
            else subhedge_bid(m, d, t, check_na=False)
        )
        return {n: (h.dual_value, h.measure) for n, h in hedges.items()}
    if family != "r":
        raise ValidationError(f"family must be 'rt' or 'r', got {family!r}")
    cone = build_cone(m, 0)
    cum = _future_flow_sums(m, d, t)
    out: dict[int, tuple[float, np.ndarray]] = {}
    for node in m.tree.nodes_at(t):
        out[int(node)] = _global_family_bound(m, cone, cum, int(node), side)
    return out


def _global_family_bound(m, cone, cum, node, side):
    """sup/inf of subtree-conditional expectation over global measures.

    The conditional expectation is linear after scaling the measure so the
    subtree carries unit mass; the cone feasibility rows are homogeneous, so
    the scaling is free.
    """
    tree = m.tree
    nL = len(cone.leaf_nodes)
    nE = cone.E.shape[0]
    lo, hi = tree.leaf_range[node]
    sub = np.zeros(nL)
    sub[lo:hi] = 1.0
    c = np.zeros(nL + nE)
    c[:nL] = sub * cum
    a_ub = np.hstack([cone.G.T, cone.E.T])
    b_ub = np.zeros(cone.n_vars)
    a_eq = np.zeros((1, nL + nE))
    a_eq[0, :nL] = sub
    b_eq = np.array([1.0])
    free = np.zeros(nL + nE, dtype=bool)
    free[nL:] = True
    sense = "max" if side == "ask" else "min"
    sol = solve_lp(LinearProgram(sense, c, a_eq, b_eq, a_ub, b_ub, free=free))
    if sol.status != "optimal":
        raise SolverError(f"global-family bound LP ended {sol.status}")
    q = sol.x[:nL]
    mass = q[lo:hi].sum()
    return float(sol.objective), q[lo:hi] / mass


def extended_cone_check(
    m: MarketModel,
    d: DerivativeContract,
    t: int,
    w,
    side: str,
    tol: float = PRICE_TOL,
) -> ArbitrageCertificate | None:
    """No-arbitrage check with the claim held at candidate price w.

    Side "a" augments with buy-and-hold columns paying (-w + remaining
    flows); side "b" with sell-and-hold columns paying (w - remaining
    flows); ``w`` may be a scalar or a mapping over time-t node ids.  With a
    zero claim and zero w the augmentation degenerates and this reduces
    exactly to the plain no-arbitrage check.
    """
    if side not in ("a", "b"):
        raise ValidationError(f"side must be 'a' or 'b', got {side!r}")
    tree = m.tree
    cone = build_cone(m, t)
    cum = _future_flow_sums(m, d, t)
    pos = {n: k for k, n in enumerate(cone.leaf_nodes)}
    sign = -1.0 if side == "a" else 1.0
    payoffs: dict[int, np.ndarray] = {}
    for node in cone.roots:
        wn = _w_at(w, tree, node)
        vec = np.zeros(len(cone.leaf_nodes))
        lo, hi = tree.leaf_range[node]
        for leaf in tree.leaves[lo:hi]:
            k = pos[int(leaf)]
            vec[k] = sign * (wn - cum[tree.leaf_pos[int(leaf)]])
        payoffs[node] = vec
    augmented = with_claim_columns(cone, payoffs)
    return check_no_arbitrage(m, t, tol, cone=augmented)


def _w_at(w, tree: ScenarioTree, node: int) -> float:
    if isinstance(w, dict):
        key = tree.ids[node]
        if key not in w:
            raise ValidationError(f"candidate price missing for node {key}")
        return float(w[key])
    return float(w)
