"""Market data: savings account, bid/ask quotes, bid/ask dividend increments.

The standing modelling assumption is that buying is never cheaper than
selling: ask prices dominate bid prices node-wise, while dividend increments
order the other way (a long position accrues the ask dividend, a short pays
the bid dividend, and long-minus-short must not be a free lunch).  Markets
violating the assumption admit arbitrage by simultaneously buying and
selling, so the loader rejects them outright instead of flagging them.

Quote conventions
-----------------
* ``rates`` is a deterministic path r_0..r_T; the savings account compounds
  as B_t = prod_{s<=t}(1 + r_s), so B_0 = 1 + r_0 (the CLI convention is
  r_0 = 0, giving B_0 = 1).
* Ex-dividend quotes are sign-free reals (a swap's mark-to-market may be
  negative).
* Dividend increments exist for times >= 1 only; the time-0 entries are
  fixed at zero by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .tree import ScenarioTree, build_tree, tree_to_doc


@dataclass(frozen=True)
class Security:
    name: str
    ask: np.ndarray
    bid: np.ndarray
    d_ask: np.ndarray
    d_bid: np.ndarray


@dataclass(frozen=True)
class MarketModel:
    tree: ScenarioTree
    rates: np.ndarray
    securities: tuple[Security, ...]

    @property
    def n_securities(self) -> int:
        return len(self.securities)

    @cached_property
    def savings(self) -> np.ndarray:
        """B_t = prod_{s=0}^{t} (1 + r_s); positive and nondecreasing."""
        return np.cumprod(1.0 + self.rates)

    @cached_property
    def ask(self) -> np.ndarray:
        """(n_nodes, N) ask quotes; empty second axis when N = 0."""
        return _stack(self.tree, [s.ask for s in self.securities])

    @cached_property
    def bid(self) -> np.ndarray:
        return _stack(self.tree, [s.bid for s in self.securities])

    @cached_property
    def d_ask(self) -> np.ndarray:
        return _stack(self.tree, [s.d_ask for s in self.securities])

    @cached_property
    def d_bid(self) -> np.ndarray:
        return _stack(self.tree, [s.d_bid for s in self.securities])

    @cached_property
    def node_discount(self) -> np.ndarray:
        """1/B at each node's time."""
        return 1.0 / self.savings[self.tree.times]


@dataclass(frozen=True)
class DiscountedQuotes:
    """Quotes divided by the savings account at their node's time.

    ``d_ask``/``d_bid`` are discounted dividend increments, not cumulative
    dividends.
    """

    ask: np.ndarray
    bid: np.ndarray
    d_ask: np.ndarray
    d_bid: np.ndarray


def _stack(tree: ScenarioTree, cols: list[np.ndarray]) -> np.ndarray:
    if not cols:
        return np.zeros((tree.n_nodes, 0))
    return np.stack(cols, axis=1)


def validate_market(m: MarketModel) -> None:
    tree = m.tree
    if m.rates.shape != (tree.horizon + 1,):
        raise ValidationError(
            f"rate path must have length {tree.horizon + 1}, got {m.rates.size}"
        )
    if np.any(m.rates < 0.0):
        t = int(np.flatnonzero(m.rates < 0.0)[0])
        raise ValidationError(f"negative rate at time {t}")
    root_mask = tree.times == 0
    for s in m.securities:
        for arr, what in ((s.ask, "ask"), (s.bid, "bid"), (s.d_ask, "dAsk"), (s.d_bid, "dBid")):
            if arr.shape != (tree.n_nodes,):
                raise ValidationError(f"security {s.name}: {what} has wrong shape")
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise ValidationError(
                    f"security {s.name}: non-finite {what} at node {tree.ids[bad]}"
                )
        if np.any(s.d_ask[root_mask] != 0.0) or np.any(s.d_bid[root_mask] != 0.0):
            raise ValidationError(
                f"security {s.name}: dividends are forbidden at time 0"
            )
        bad = np.flatnonzero(s.ask < s.bid)
        if bad.size:
            raise ValidationError(
                f"bid exceeds ask at node {tree.ids[int(bad[0])]}"
                f" (security {s.name})"
            )
        bad = np.flatnonzero(s.d_ask > s.d_bid)
        if bad.size:
            raise ValidationError(
                f"ask dividend exceeds bid dividend at node "
                f"{tree.ids[int(bad[0])]} (security {s.name})"
            )


def _expand_quotes(tree: ScenarioTree, sec: dict) -> dict[str, dict]:
    """Per-node quote table, expanding deterministic-in-time shorthand."""
    name = sec.get("name", "?")
    table: dict[str, dict] = {}
    for tkey, rec in (sec.get("quotesByTime") or {}).items():
        try:
            t = int(tkey)
        except ValueError:
            raise ValidationError(
                f"security {name}: bad time key {tkey!r} in quotesByTime"
            ) from None
        for n in tree.nodes_at(t):
            table[tree.ids[n]] = rec
    for nid, rec in (sec.get("quotes") or {}).items():
        if nid not in tree.index:
            raise ValidationError(f"security {name}: quote for unknown node {nid}")
        table[nid] = rec
    return table


def load_market(doc: dict) -> MarketModel:
    """Build and fully validate a MarketModel from a market document."""
    tree = build_tree(doc)
    try:
        rates = np.array([float(r) for r in doc["rates"]], dtype=float)
        raw_secs = list(doc.get("securities", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed market document: {exc}") from exc

    securities = []
    for sec in raw_secs:
        name = str(sec.get("name", f"S{len(securities) + 1}"))
        table = _expand_quotes(tree, sec)
        ask = np.zeros(tree.n_nodes)
        bid = np.zeros(tree.n_nodes)
        d_ask = np.zeros(tree.n_nodes)
        d_bid = np.zeros(tree.n_nodes)
        for i, nid in enumerate(tree.ids):
            rec = table.get(nid)
            if rec is None:
                raise ValidationError(
                    f"missing quote for security {name} at node {nid}"
                )
            try:
                ask[i] = float(rec["ask"])
                bid[i] = float(rec["bid"])
            except (KeyError, TypeError, ValueError):
                raise ValidationError(
                    f"missing quote for security {name} at node {nid}"
                ) from None
            has_div = "dAsk" in rec or "dBid" in rec
            if tree.times[i] == 0:
                if has_div:
                    raise ValidationError(
                        f"security {name}: dividends are forbidden at time 0 "
                        f"(node {nid})"
                    )
            else:
                if "dAsk" not in rec or "dBid" not in rec:
                    raise ValidationError(
                        f"security {name}: missing dividend increment at node {nid}"
                    )
                d_ask[i] = float(rec["dAsk"])
                d_bid[i] = float(rec["dBid"])
        securities.append(
            Security(name=name, ask=ask, bid=bid, d_ask=d_ask, d_bid=d_bid)
        )

    m = MarketModel(tree=tree, rates=rates, securities=tuple(securities))
    validate_market(m)
    return m


def market_to_doc(m: MarketModel) -> dict:
    tree = m.tree
    doc = tree_to_doc(tree)
    doc["rates"] = [float(r) for r in m.rates]
    doc["securities"] = []
    for s in m.securities:
        quotes = {}
        for i, nid in enumerate(tree.ids):
            rec = {"ask": float(s.ask[i]), "bid": float(s.bid[i])}
            if tree.times[i] >= 1:
                rec["dAsk"] = float(s.d_ask[i])
                rec["dBid"] = float(s.d_bid[i])
            quotes[nid] = rec
        doc["securities"].append({"name": s.name, "quotes": quotes})
    return doc


def discounted_quotes(m: MarketModel) -> DiscountedQuotes:
    """Divide every quote by the savings account at its node's time.

    B is strictly positive, so the bracket orderings survive discounting.
    """
    disc = m.node_discount[:, None]
    return DiscountedQuotes(
        ask=m.ask * disc,
        bid=m.bid * disc,
        d_ask=m.d_ask * disc,
        d_bid=m.d_bid * disc,
    )
