"""Polyhedral representation of the values superhedgeable at zero cost.

Holdings are linearized through separate nonnegative long and short
accounts, each with its own flows: the long account buys at ask, sells at
bid, accrues the ask dividend, and liquidates at bid; the short account
opens at bid, closes at ask, pays the bid dividend, and liquidates at ask.
On canonical points (at most one account active per node) the payoff map
reproduces the signed payoff functional exactly; mixtures holding both
accounts pay the spread twice and are therefore dominated, so together with
free disposal the image cone is exactly the superhedgeable set.  That
identity is the load-bearing claim of this module and is property-tested
rather than assumed.

Cash never appears as a variable: every trade, dividend, and liquidation is
discounted at the rate path and accumulated straight into the affected leaf
rows, which keeps the programs small and exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .market import MarketModel, discounted_quotes

FLOW_KINDS = ("longBuy", "longSell", "shortOpen", "shortClose")
STATE_KINDS = ("longPos", "shortPos")
VAR_KINDS = FLOW_KINDS + STATE_KINDS


@dataclass(frozen=True)
class ConeLP:
    """Matrices (G, E) with {G x : x >= 0, E x = 0} - R^leaves_+ = K(t) - L0+.

    ``columns`` names every variable as (kind, node, security); extra
    columns appended by the hedging module carry kind "claim" with the
    time-t node they attach to.  Rows of G follow ``leaf_nodes`` order; rows
    of E are the long/short balance equations per (decision node, security).
    """

    start: int
    roots: tuple[int, ...]
    decision_nodes: tuple[int, ...]
    leaf_nodes: tuple[int, ...]
    n_securities: int
    columns: tuple[tuple[str, int, int], ...]
    G: np.ndarray
    E: np.ndarray

    @cached_property
    def col_index(self) -> dict[tuple[str, int, int], int]:
        return {key: i for i, key in enumerate(self.columns)}

    @property
    def n_vars(self) -> int:
        return len(self.columns)


def build_cone(m: MarketModel, t: int, root: int | None = None) -> ConeLP:
    """Assemble the discounted payoff and balance matrices for time t.

    With ``root`` given (a time-t node) the cone covers that subtree alone;
    otherwise it covers all time-t subtrees at once, block-diagonally.
    Positions are zero at and before t, so the represented strategies trade
    from t+1-entering decisions onward.
    """
    tree = m.tree
    if not 0 <= t <= tree.horizon - 1:
        raise ValidationError(f"start time {t} outside 0..{tree.horizon - 1}")
    if root is None:
        roots = tuple(int(n) for n in tree.nodes_at(t))
        in_scope = tree.times >= t
    else:
        if tree.times[root] != t:
            raise ValidationError(
                f"node {tree.ids[root]} is not at time {t}"
            )
        roots = (int(root),)
        lo, hi = tree.leaf_range[root]
        in_scope = np.zeros(tree.n_nodes, dtype=bool)
        for n in range(tree.n_nodes):
            llo, lhi = tree.leaf_range[n]
            in_scope[n] = lo <= llo and lhi <= hi
    N = m.n_securities
    dq = discounted_quotes(m)

    decision = [
        n
        for n in range(tree.n_nodes)
        if in_scope[n] and t <= tree.times[n] <= tree.horizon - 1
    ]
    leaf_nodes = [int(n) for n in tree.leaves if in_scope[n]]
    leaf_row = {n: k for k, n in enumerate(leaf_nodes)}

    columns: list[tuple[str, int, int]] = [
        (kind, n, j) for n in decision for j in range(N) for kind in VAR_KINDS
    ]
    col = {key: i for i, key in enumerate(columns)}

    nL = len(leaf_nodes)
    G = np.zeros((nL, len(columns)))
    E = np.zeros((2 * len(decision) * N, len(columns)))

    def leaf_slice(n: int) -> slice:
        lo, hi = tree.leaf_range[n]
        return slice(leaf_row[int(tree.leaves[lo])], leaf_row[int(tree.leaves[hi - 1])] + 1)

    row = 0
    for n in decision:
        par = int(tree.parents[n])
        has_parent_state = tree.times[n] > t
        sl = leaf_slice(n)
        for j in range(N):
            bl = col[("longBuy", n, j)]
            s_ = col[("longSell", n, j)]
            so = col[("shortOpen", n, j)]
            sc = col[("shortClose", n, j)]
            lp = col[("longPos", n, j)]
            sp = col[("shortPos", n, j)]

            # Balance: position = inherited position + opening - closing flows.
            E[row, lp] = 1.0
            E[row, bl] = -1.0
            E[row, s_] = 1.0
            E[row + 1, sp] = 1.0
            E[row + 1, so] = -1.0
            E[row + 1, sc] = 1.0
            if has_parent_state:
                E[row, col[("longPos", par, j)]] = -1.0
                E[row + 1, col[("shortPos", par, j)]] = -1.0
            row += 2

            # Trades at node n hit every leaf below it.
            G[sl, bl] += -dq.ask[n, j]
            G[sl, s_] += dq.bid[n, j]
            G[sl, so] += dq.bid[n, j]
            G[sl, sc] += -dq.ask[n, j]

            # The position carried out of n earns dividends at each child
            # and is force-liquidated wherever the child is terminal.
            for c in tree.children[n]:
                cs = leaf_slice(c)
                G[cs, lp] += dq.d_ask[c, j]
                G[cs, sp] += -dq.d_bid[c, j]
                if tree.times[c] == tree.horizon:
                    G[cs, lp] += dq.bid[c, j]
                    G[cs, sp] += -dq.ask[c, j]

    return ConeLP(
        start=t,
        roots=roots,
        decision_nodes=tuple(decision),
        leaf_nodes=tuple(leaf_nodes),
        n_securities=N,
        columns=tuple(columns),
        G=G,
        E=E,
    )


def build_subtree_cones(m: MarketModel, t: int) -> dict[int, ConeLP]:
    """Independent cones, one per time-t subtree root."""
    return {int(n): build_cone(m, t, root=int(n)) for n in m.tree.nodes_at(t)}


def with_claim_columns(cone: ConeLP, payoffs: dict[int, np.ndarray]) -> ConeLP:
    """Append one nonnegative hold-the-claim column per time-t root.

    ``payoffs[root]`` is the column's discounted payoff over all cone leaves
    (zero outside the root's subtree).  Balance rows are unaffected, so the
    claim position is a genuinely free nonnegative scale.
    """
    cols = list(cone.columns)
    G = cone.G
    E = cone.E
    for root in sorted(payoffs):
        if root not in cone.roots:
            raise ValidationError("claim column attached to a non-root node")
        vec = np.asarray(payoffs[root], dtype=float)
        if vec.shape != (G.shape[0],):
            raise ValidationError("claim payoff has wrong leaf count")
        G = np.hstack([G, vec[:, None]])
        E = np.hstack([E, np.zeros((E.shape[0], 1))])
        cols.append(("claim", root, -1))
    return replace(cone, columns=tuple(cols), G=G, E=E)


def canonical_decomposition(cone: ConeLP, m: MarketModel, psi: np.ndarray) -> np.ndarray:
    """Exact nonnegative preimage of a signed strategy.

    The long account holds the positive part, the short account the negative
    part, and each flow splits the position change by sign, so Ex = 0 and
    G x reproduces the strategy's discounted terminal payoff exactly.
    """
    tree = m.tree
    psi = np.asarray(psi, dtype=float)
    x = np.zeros(cone.n_vars)
    idx = cone.col_index
    for n in cone.decision_nodes:
        par = int(tree.parents[n])
        inherited = psi[par] if tree.times[n] > cone.start else np.zeros(psi.shape[1])
        for j in range(cone.n_securities):
            lpos = max(psi[n, j], 0.0)
            spos = max(-psi[n, j], 0.0)
            lprev = max(inherited[j], 0.0)
            sprev = max(-inherited[j], 0.0)
            x[idx[("longPos", n, j)]] = lpos
            x[idx[("shortPos", n, j)]] = spos
            x[idx[("longBuy", n, j)]] = max(lpos - lprev, 0.0)
            x[idx[("longSell", n, j)]] = max(lprev - lpos, 0.0)
            x[idx[("shortOpen", n, j)]] = max(spos - sprev, 0.0)
            x[idx[("shortClose", n, j)]] = max(sprev - spos, 0.0)
    return x


def net_position(cone: ConeLP, x: np.ndarray, n_nodes: int) -> np.ndarray:
    """Long minus short state per node, as a full-tree strategy array."""
    psi = np.zeros((n_nodes, cone.n_securities))
    idx = cone.col_index
    for n in cone.decision_nodes:
        for j in range(cone.n_securities):
            psi[n, j] = x[idx[("longPos", n, j)]] - x[idx[("shortPos", n, j)]]
    return psi


def claim_positions(cone: ConeLP, x: np.ndarray, tol: float = 1e-9) -> dict[int, float]:
    """Nonnegligible claim-column entries, keyed by their time-t node."""
    return {
        node: float(x[i])
        for i, (kind, node, _) in enumerate(cone.columns)
        if kind == "claim" and abs(x[i]) > tol
    }


def dump_cone(cone: ConeLP, tree_ids: tuple[str, ...]) -> str:
    """Plain-text MPS-like dump of the matrices, for debugging."""
    lines = [f"* cone start={cone.start} vars={cone.n_vars} leaves={len(cone.leaf_nodes)}"]
    lines.append("COLUMNS")
    for i, (kind, node, j) in enumerate(cone.columns):
        sec = "" if j < 0 else f" sec={j}"
        lines.append(f"  x{i}: {kind} node={tree_ids[node]}{sec}")
    lines.append("BALANCE (E x = 0)")
    for r in range(cone.E.shape[0]):
        terms = " ".join(
            f"{cone.E[r, i]:+g}*x{i}" for i in np.flatnonzero(cone.E[r])
        )
        lines.append(f"  {terms} = 0")
    lines.append("PAYOFF (rows of G)")
    for r, leaf in enumerate(cone.leaf_nodes):
        terms = " ".join(
            f"{cone.G[r, i]:+.12g}*x{i}" for i in np.flatnonzero(cone.G[r])
        )
        lines.append(f"  {tree_ids[leaf]}: {terms}")
    return "\n".join(lines) + "\n"
