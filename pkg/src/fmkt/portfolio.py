"""Trading strategies: valuation, self-financing checks, and combination.

Sign conventions, applied uniformly (zero holdings take the ">= 0" branch):

* setting up a position trades at the quote hurting the trader: buys at ask,
  sells at bid;
* a held long position is marked at bid and accrues the ask dividend; a held
  short position is marked at ask and pays the bid dividend;
* at the horizon every position is liquidated at terminal quotes, so the
  terminal value is the liquidation value plus the final dividend.

Rebalancing is self-financing when the cash-account move plus the cost of
the securities trades is funded exactly by the dividends the previous
position just earned; no money flows in or out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .market import MarketModel, discounted_quotes

SF_TOL = 1e-9


@dataclass(frozen=True)
class TradingStrategy:
    """Predictable holdings stored one step ahead.

    ``cash[n]`` and ``risky[n, j]`` are the savings-account units and the
    security-j units carried from time(n) into time(n)+1.  Rows at terminal
    nodes are ignored.  The pre-initial position is the zero portfolio.
    """

    cash: np.ndarray
    risky: np.ndarray

    @staticmethod
    def zeros(n_nodes: int, n_securities: int) -> "TradingStrategy":
        return TradingStrategy(
            cash=np.zeros(n_nodes), risky=np.zeros((n_nodes, n_securities))
        )


def _trade_value(qty: np.ndarray, on_nonneg: np.ndarray, on_neg: np.ndarray) -> float:
    return float(np.sum(qty * np.where(qty >= 0.0, on_nonneg, on_neg)))


def strategy_to_doc(m: MarketModel, phi: TradingStrategy) -> dict:
    """Strategy document: holdings per decision node."""
    tree = m.tree
    return {
        "strategy": {
            tree.ids[n]: {
                "cash": float(phi.cash[n]),
                "risky": [float(v) for v in phi.risky[n]],
            }
            for n in range(tree.n_nodes)
            if tree.times[n] <= tree.horizon - 1
        }
    }


def strategy_from_doc(m: MarketModel, doc: dict) -> TradingStrategy:
    tree = m.tree
    phi = TradingStrategy.zeros(tree.n_nodes, m.n_securities)
    entries = doc.get("strategy")
    if not isinstance(entries, dict):
        raise ValidationError("strategy document must carry a 'strategy' mapping")
    for nid, rec in entries.items():
        n = tree.node(str(nid))
        if tree.times[n] > tree.horizon - 1:
            raise ValidationError(f"strategy assigns holdings at terminal node {nid}")
        try:
            phi.cash[n] = float(rec["cash"])
            risky = [float(v) for v in rec["risky"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed strategy entry at node {nid}: {exc}") from exc
        if len(risky) != m.n_securities:
            raise ValidationError(
                f"strategy entry at node {nid} has {len(risky)} risky legs, "
                f"market has {m.n_securities}"
            )
        phi.risky[n] = risky
    return phi


def value_process(m: MarketModel, phi: TradingStrategy) -> np.ndarray:
    """Cost of the portfolio at time 0; liquidation value afterwards.

    At a node of time t >= 1 the value marks the incoming position at its
    liquidation quote and adds the dividend just accrued; no time-t trades
    are included.
    """
    tree = m.tree
    B = m.savings
    out = np.zeros(tree.n_nodes)
    out[0] = phi.cash[0] + _trade_value(phi.risky[0], m.ask[0], m.bid[0])
    for n in range(1, tree.n_nodes):
        p = int(tree.parents[n])
        held = phi.risky[p]
        out[n] = (
            phi.cash[p] * B[tree.times[n]]
            + _trade_value(held, m.bid[n], m.ask[n])
            + _trade_value(held, m.d_ask[n], m.d_bid[n])
        )
    return out


def discounted_value_process(m: MarketModel, phi: TradingStrategy) -> np.ndarray:
    out = value_process(m, phi)
    out[1:] = out[1:] / m.savings[m.tree.times[1:]]
    return out


def is_self_financing(
    m: MarketModel, phi: TradingStrategy, tol: float = SF_TOL
) -> tuple[bool, int | None]:
    """Check the rebalancing identity at every node of time 1..T-1.

    Returns (ok, first violating node index).  On a one-period market the
    condition ranges over an empty time set and is vacuously true.
    """
    tree = m.tree
    B = m.savings
    for n in range(tree.n_nodes):
        t = int(tree.times[n])
        if t < 1 or t > tree.horizon - 1:
            continue
        p = int(tree.parents[n])
        delta = phi.risky[n] - phi.risky[p]
        lhs = B[t] * (phi.cash[n] - phi.cash[p]) + _trade_value(
            delta, m.ask[n], m.bid[n]
        )
        rhs = _trade_value(phi.risky[p], m.d_ask[n], m.d_bid[n])
        if abs(lhs - rhs) > tol:
            return False, n
    return True, None


def complete_cash_leg(
    m: MarketModel, psi: np.ndarray, v0: float
) -> TradingStrategy:
    """The unique self-financing strategy with risky legs ``psi`` and V_0 = v0.

    The cash leg is obtained by solving the self-financing equality forward:
    each rebalance is funded by the incoming dividends and the signed cost of
    the securities trades, scaled by the savings account.
    """
    tree = m.tree
    B = m.savings
    psi = np.asarray(psi, dtype=float)
    cash = np.zeros(tree.n_nodes)
    cash[0] = v0 - _trade_value(psi[0], m.ask[0], m.bid[0])
    for n in range(1, tree.n_nodes):
        t = int(tree.times[n])
        if t > tree.horizon - 1:
            continue
        p = int(tree.parents[n])
        delta = psi[n] - psi[p]
        funded = _trade_value(psi[p], m.d_ask[n], m.d_bid[n])
        cost = _trade_value(delta, m.ask[n], m.bid[n])
        cash[n] = cash[p] + (funded - cost) / B[t]
    return TradingStrategy(cash=cash, risky=psi.copy())


def combine(
    m: MarketModel, phi: TradingStrategy, psi: TradingStrategy, tol: float = SF_TOL
) -> TradingStrategy:
    """Merge two zero-cost self-financing strategies into one.

    The risky legs add; the cash leg starts from the sum of both initial
    trades and is rolled forward with explicit spread and dividend-spread
    make-up terms, so netting of opposite orders is never charged twice.
    The result dominates: theta_cash >= phi_cash + psi_cash node-wise and
    the terminal value dominates the sum of terminal values.
    """
    tree = m.tree
    B = m.savings
    for name, s in (("first", phi), ("second", psi)):
        ok, bad = is_self_financing(m, s, tol)
        if not ok:
            raise ValidationError(
                f"{name} strategy is not self-financing at node {tree.ids[bad]}"
            )
        v0 = value_process(m, s)[0]
        if abs(v0) > tol:
            raise ValidationError(f"{name} strategy has nonzero initial value {v0}")

    risky = phi.risky + psi.risky
    cash = np.zeros(tree.n_nodes)
    # Both initial trades are charged separately: no netting at time 0.
    pos0 = np.maximum(phi.risky[0], 0.0) + np.maximum(psi.risky[0], 0.0)
    neg0 = np.minimum(phi.risky[0], 0.0) + np.minimum(psi.risky[0], 0.0)
    cash[0] = -float(pos0 @ m.ask[0]) - float(neg0 @ m.bid[0])
    for n in range(1, tree.n_nodes):
        t = int(tree.times[n])
        if t > tree.horizon - 1:
            continue
        p = int(tree.parents[n])
        prev = risky[p]
        delta = risky[n] - prev
        spread = m.ask[n] - m.bid[n]
        dspread = m.d_bid[n] - m.d_ask[n]
        adj = (
            -float(np.sum(delta * m.ask[n]))
            + float(np.sum(prev * m.d_ask[n]))
            + float(np.sum(np.where(delta < 0.0, delta, 0.0) * spread))
            + float(np.sum(np.where(prev < 0.0, prev, 0.0) * dspread))
        )
        cash[n] = cash[p] + adj / B[t]
    return TradingStrategy(cash=cash, risky=risky)


def payoff_F(m: MarketModel, psi: np.ndarray, start: int = 0) -> np.ndarray:
    """Discounted terminal value of the cash-completed strategy, per leaf.

    ``psi`` holds risky legs only; the cash leg is implicit (completed so the
    initial value is zero).  When ``start`` = t the strategy must be zero on
    nodes before time t, i.e. trading begins with the period entered at t.
    Positively homogeneous in ``psi``.
    """
    tree = m.tree
    psi = np.asarray(psi, dtype=float)
    if np.any(psi[tree.times < start] != 0.0):
        bad = int(np.flatnonzero(np.any(psi != 0.0, axis=1))[0])
        raise ValidationError(
            f"strategy trades at node {tree.ids[bad]} before start time {start}"
        )
    dq = discounted_quotes(m)
    out = np.zeros(tree.leaves.size)
    rng = tree.leaf_range
    for n in range(tree.n_nodes):
        t = int(tree.times[n])
        lo, hi = rng[n]
        contrib = 0.0
        if t <= tree.horizon - 1:
            prev = psi[int(tree.parents[n])] if t >= 1 else np.zeros(psi.shape[1])
            delta = psi[n] - prev
            contrib -= _trade_value(delta, dq.ask[n], dq.bid[n])
        if t >= 1:
            held = psi[int(tree.parents[n])]
            contrib += _trade_value(held, dq.d_ask[n], dq.d_bid[n])
            if t == tree.horizon:
                contrib += _trade_value(held, dq.bid[n], dq.ask[n])
        out[lo:hi] += contrib
    return out
