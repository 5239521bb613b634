"""No-arbitrage certification and risk-neutral measure search.

At desk scale the fundamental theorem is a pair of complementary linear
programs over the zero-cost cone: either some nonnegative combination of
trades yields a nonnegative, somewhere-positive discounted payoff (an
arbitrage, returned with an explicit strategy that is independently
re-verified through the portfolio module), or a strictly positive measure
prices every such combination at nonpositive expectation (a risk-neutral
measure, found by maximizing its minimum leaf probability).  Polyhedral
duality makes the two outcomes mutually exclusive and exhaustive; the test
suite enforces that equivalence on randomized markets instead of trusting
it.

The efficient-friction search runs only under no-arbitrage, where the
payoff-nonnegativity constraint collapses to payoff equality with zero and
the search for a nonzero strategy with vanishing payoff becomes convex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import ConeLP, build_cone, claim_positions, net_position
from .errors import SolverError, ValidationError
from .lp import LinearProgram, solve_lp
from .market import MarketModel
from .portfolio import (
    TradingStrategy,
    complete_cash_leg,
    discounted_value_process,
    is_self_financing,
    payoff_F,
)
from .tree import leaf_measure_to_conditionals

NA_TOL = 1e-9
RN_EPS = 1e-10


@dataclass(frozen=True)
class ArbitrageCertificate:
    """Zero-cost self-financing strategy with V*_T >= 0 and margin > 0.

    ``leaf_values`` is the discounted terminal value per leaf (cone order);
    ``claim_units`` is nonempty only for extended-cone certificates, giving
    the held derivative units per time-t node.
    """

    strategy: TradingStrategy
    leaf_values: np.ndarray
    margin: float
    start: int = 0
    claim_units: dict[int, float] | None = None


@dataclass(frozen=True)
class RiskNeutralMeasure:
    """Strictly positive leaf probabilities with max-min mass epsilon."""

    q: np.ndarray
    epsilon: float


def measure_to_doc(m: MarketModel, r: RiskNeutralMeasure) -> dict:
    tree = m.tree
    return {
        "q": {tree.ids[n]: float(r.q[k]) for k, n in enumerate(tree.leaves)},
        "epsilon": float(r.epsilon),
    }


def measure_from_doc(m: MarketModel, doc: dict) -> np.ndarray:
    tree = m.tree
    table = doc.get("q")
    if not isinstance(table, dict):
        raise ValidationError("measure document must carry a 'q' mapping")
    q = np.zeros(tree.leaves.size)
    for nid, p in table.items():
        n = tree.node(str(nid))
        if n not in tree.leaf_pos:
            raise ValidationError(f"measure assigns mass to non-leaf node {nid}")
        q[tree.leaf_pos[n]] = float(p)
    if np.any(q <= 0.0):
        k = int(np.flatnonzero(q <= 0.0)[0])
        raise ValidationError(
            f"measure missing or nonpositive at leaf {tree.ids[tree.leaves[k]]}"
        )
    return q


def certificate_to_doc(m: MarketModel, cert: ArbitrageCertificate, cone_leaves=None) -> dict:
    from .portfolio import strategy_to_doc

    tree = m.tree
    leaves = cone_leaves if cone_leaves is not None else [int(n) for n in tree.leaves]
    doc = strategy_to_doc(m, cert.strategy)
    doc["leafValues"] = {
        tree.ids[n]: float(cert.leaf_values[k]) for k, n in enumerate(leaves)
    }
    doc["margin"] = float(cert.margin)
    if cert.claim_units:
        doc["claimUnits"] = {
            tree.ids[n]: float(u) for n, u in cert.claim_units.items()
        }
    return doc


def _na_lp(cone: ConeLP) -> LinearProgram:
    total = cone.G.sum(axis=0)
    return LinearProgram(
        sense="max",
        c=total,
        a_eq=cone.E,
        b_eq=np.zeros(cone.E.shape[0]),
        a_ub=np.vstack([-cone.G, total[None, :]]),
        b_ub=np.concatenate([np.zeros(cone.G.shape[0]), [1.0]]),
    )


def check_no_arbitrage(
    m: MarketModel, t: int = 0, tol: float = NA_TOL, cone: ConeLP | None = None
) -> ArbitrageCertificate | None:
    """None iff no admissible trade dominates zero; certificate otherwise.

    Maximizes the total payoff over {Gx >= 0, Ex = 0, x >= 0} normalized by
    total payoff <= 1, so the optimum is 0 exactly when the market is
    arbitrage-free.  A returned certificate has been rebuilt as a trading
    strategy and re-verified through the portfolio module, not trusted from
    LP residuals.
    """
    cone = build_cone(m, t) if cone is None else cone
    if cone.n_vars == 0:
        return None  # no instruments: the cone is pure free disposal
    sol = solve_lp(_na_lp(cone))
    if sol.status != "optimal":
        raise SolverError(f"arbitrage search LP ended {sol.status}")
    if sol.objective <= tol:
        return None
    # Certificates are rays; rescale to a unit maximum position for output.
    x = sol.x
    psi = net_position(cone, x, m.tree.n_nodes)
    claims = claim_positions(cone, x)
    scale = float(np.abs(psi).max(initial=0.0))
    if claims:
        scale = max(scale, max(claims.values()))
    if scale > tol:
        x = x / scale
        psi = psi / scale
        claims = {k: v / scale for k, v in claims.items()}
    strategy = complete_cash_leg(m, psi, 0.0)
    market_leg = _restrict_leaves(m, cone, payoff_F(m, psi, start=t))
    claim_leg = _claim_payoff_total(cone, x)
    leaf_values = market_leg + claim_leg
    _verify_certificate(m, cone, strategy, market_leg, leaf_values, tol)
    return ArbitrageCertificate(
        strategy=strategy,
        leaf_values=leaf_values,
        margin=float(leaf_values.max()),
        start=t,
        claim_units=claims or None,
    )


def _restrict_leaves(m: MarketModel, cone: ConeLP, values: np.ndarray) -> np.ndarray:
    pos = m.tree.leaf_pos
    return np.array([values[pos[n]] for n in cone.leaf_nodes])


def _claim_payoff_total(cone: ConeLP, x: np.ndarray) -> np.ndarray:
    out = np.zeros(len(cone.leaf_nodes))
    for i, (kind, _, _) in enumerate(cone.columns):
        if kind == "claim" and x[i] != 0.0:
            out += x[i] * cone.G[:, i]
    return out


def _verify_certificate(m, cone, strategy, market_leg, leaf_values, tol) -> None:
    scale = 1.0 + float(np.abs(leaf_values).max())
    v = discounted_value_process(m, strategy)
    if abs(v[0]) > tol:
        raise SolverError("certificate has nonzero initial value")
    ok, bad = is_self_financing(m, strategy, tol)
    if not ok:
        raise SolverError(f"certificate not self-financing at {m.tree.ids[bad]}")
    from_value = _restrict_leaves(m, cone, v[m.tree.leaves])
    if float(np.abs(from_value - market_leg).max()) > tol * scale:
        raise SolverError("certificate leaf values disagree with value process")
    if float(leaf_values.min()) < -tol * scale or float(leaf_values.max()) <= tol:
        raise SolverError("certificate payoff is not a nonnegative nonzero vector")


def find_risk_neutral_measure(
    m: MarketModel, t: int = 0, cone: ConeLP | None = None
) -> RiskNeutralMeasure | None:
    """Measure with maximal minimum leaf probability, or None.

    Solves max eps subject to G'q + E'mu <= 0, q >= eps, sum q = 1 with mu
    free; the constraint rows say every admissible trade has nonpositive
    q-expectation, i.e. every zero-cost self-financing strategy started at t
    has nonpositive expected discounted terminal value.
    """
    cone = build_cone(m, t) if cone is None else cone
    nL = len(cone.leaf_nodes)
    nE = cone.E.shape[0]
    nv = cone.n_vars
    # variables: [s (nL, q = eps + s), eps, mu (nE, free)]
    c = np.zeros(nL + 1 + nE)
    c[nL] = 1.0
    a_ub = np.zeros((nv, nL + 1 + nE))
    a_ub[:, :nL] = cone.G.T
    a_ub[:, nL] = cone.G.sum(axis=0)
    a_ub[:, nL + 1 :] = cone.E.T
    b_ub = np.zeros(nv)
    a_eq = np.zeros((1, nL + 1 + nE))
    a_eq[0, :nL] = 1.0
    a_eq[0, nL] = nL
    b_eq = np.array([1.0])
    free = np.zeros(nL + 1 + nE, dtype=bool)
    free[nL + 1 :] = True
    sol = solve_lp(
        LinearProgram("max", c, a_eq, b_eq, a_ub, b_ub, free=free)
    )
    if sol.status == "infeasible":
        return None
    if sol.status != "optimal":
        raise SolverError(f"risk-neutral search LP ended {sol.status}")
    eps = float(sol.objective)
    if eps <= RN_EPS:
        return None
    q = sol.x[:nL] + eps
    q = q / q.sum()
    _spot_check_generators(m, cone, q)
    return RiskNeutralMeasure(q=q, epsilon=float(q.min()))


def _spot_check_generators(m: MarketModel, cone: ConeLP, q: np.ndarray) -> None:
    """Buy-and-hold / sell-and-hold generators must price nonpositive."""
    scale = 1.0 + float(np.abs(m.ask).max(initial=0.0))
    for node in cone.decision_nodes[: min(len(cone.decision_nodes), 8)]:
        for j in range(cone.n_securities):
            for sign in (1.0, -1.0):
                val = _hold_expectation(m, cone, q, node, j, sign)
                if val > 1e-9 * scale:
                    raise SolverError(
                        f"measure fails generator spot check at node "
                        f"{m.tree.ids[node]}"
                    )


def _hold_expectation(
    m: MarketModel, cone: ConeLP, q: np.ndarray, node: int, j: int, sign: float
) -> float:
    psi = np.zeros((m.tree.n_nodes, m.n_securities))
    lo, hi = m.tree.leaf_range[node]
    for n in range(m.tree.n_nodes):
        nlo, nhi = m.tree.leaf_range[n]
        if lo <= nlo and nhi <= hi and m.tree.times[n] <= m.tree.horizon - 1:
            psi[n, j] = sign
    pay = _restrict_leaves(m, cone, payoff_F(m, psi, start=cone.start))
    return float(q @ pay)


def verify_risk_neutral(
    m: MarketModel, q: np.ndarray, t: int = 0, tol: float = NA_TOL
) -> tuple[bool, str | None]:
    """Check a candidate measure against the cone and the Snell envelopes.

    Feasibility of G'q + E'mu <= 0 in mu is one LP.  On failure the
    violation is named: a readable buy/sell-and-hold generator when one
    already prices positive, otherwise the LP's own most-violating trade.
    The envelope processes are then checked for the supermartingale /
    submartingale / ordering properties the measure must imply.
    """
    from .cps import snell_envelopes  # local import to avoid a cycle

    tree = m.tree
    q = np.asarray(q, dtype=float)
    if q.shape != (tree.leaves.size,) or np.any(q <= 0.0):
        raise ValidationError("measure must be strictly positive on every leaf")
    if abs(q.sum() - 1.0) > 1e-9:
        raise ValidationError("measure does not sum to 1")
    cone = build_cone(m, t)
    nE = cone.E.shape[0]
    rhs = -(cone.G.T @ q)
    if nE:
        sol = solve_lp(
            LinearProgram(
                "min",
                c=np.zeros(nE),
                a_ub=cone.E.T,
                b_ub=rhs,
                free=np.ones(nE, dtype=bool),
            )
        )
        feasible = sol.status == "optimal"
    else:
        feasible = bool(np.all(rhs >= -tol))
    if not feasible:
        return False, _name_violation(m, cone, q, tol)

    env = snell_envelopes(m, q)
    qc = leaf_measure_to_conditionals(tree, q)
    for label, X, sgn in (("X^b supermartingale", env.xb, 1.0), ("X^a submartingale", env.xa, -1.0)):
        for n in range(tree.n_nodes):
            kids = tree.children[n]
            if not kids:
                continue
            cont = sum(qc[c] * X[c] for c in kids)
            gap = sgn * (cont - X[n])
            if np.any(gap > tol):
                return False, f"{label} fails at node {tree.ids[n]}"
    if np.any(env.xb > env.xa + tol):
        bad = int(np.flatnonzero(np.any(env.xb > env.xa + tol, axis=1))[0])
        return False, f"X^b <= X^a fails at node {tree.ids[bad]}"
    return True, None


def _name_violation(m: MarketModel, cone: ConeLP, q: np.ndarray, tol: float) -> str:
    best = (tol, None)
    for node in cone.decision_nodes:
        for j in range(cone.n_securities):
            for sign, word in ((1.0, "buy"), (-1.0, "sell")):
                val = _hold_expectation(m, cone, q, node, j, sign)
                if val > best[0]:
                    best = (val, (node, j, word))
    if best[1] is not None:
        node, j, word = best[1]
        name = m.securities[j].name
        return (
            f"{word}-and-hold security {name} from {m.tree.ids[node]} "
            f"has positive expectation {best[0]:.12g}"
        )
    sol = solve_lp(
        LinearProgram(
            "max",
            c=cone.G.T @ q,
            a_eq=cone.E,
            b_eq=np.zeros(cone.E.shape[0]),
            a_ub=np.ones((1, cone.n_vars)),
            b_ub=np.array([1.0]),
        )
    )
    if sol.status == "optimal" and sol.objective > tol:
        psi = net_position(cone, sol.x, m.tree.n_nodes)
        nodes = [m.tree.ids[n] for n in np.flatnonzero(np.any(psi != 0.0, axis=1))]
        return (
            f"admissible trade through nodes {', '.join(nodes)} has positive "
            f"expectation {sol.objective:.12g}"
        )
    return "cone feasibility LP infeasible but no violating trade found"


def check_efficient_friction(
    m: MarketModel, tol: float = NA_TOL, cone: ConeLP | None = None
) -> tuple[bool, np.ndarray | None]:
    """Does a nonzero strategy replicate the zero payoff?

    Sound only under no-arbitrage (checked first): then Gx >= 0 collapses to
    Gx = 0, and for each decision node, security, and sign one LP maximizes
    the signed net position over zero-payoff trades.  All optima zero means
    efficient friction holds; otherwise the netted nonzero strategy with
    vanishing payoff is returned.
    """
    cone = build_cone(m, 0) if cone is None else cone
    if check_no_arbitrage(m, cone.start, tol, cone=cone) is not None:
        raise ValidationError(
            "efficient-friction search requires a no-arbitrage market"
        )
    nv = cone.n_vars
    a_eq = np.vstack([cone.E, cone.G])
    b_eq = np.zeros(a_eq.shape[0])
    a_ub = np.ones((1, nv))
    b_ub = np.array([1.0])
    idx = cone.col_index
    targets: list[np.ndarray] = []
    for n in cone.decision_nodes:
        for j in range(cone.n_securities):
            for s in (1.0, -1.0):
                c = np.zeros(nv)
                c[idx[("longPos", n, j)]] = s
                c[idx[("shortPos", n, j)]] = -s
                targets.append(c)
    for i, (kind, _, _) in enumerate(cone.columns):
        if kind == "claim":
            c = np.zeros(nv)
            c[i] = 1.0
            targets.append(c)
    for c in targets:
        sol = solve_lp(LinearProgram("max", c, a_eq, b_eq, a_ub, b_ub))
        if sol.status != "optimal":
            raise SolverError(f"efficient-friction LP ended {sol.status}")
        if sol.objective > tol:
            psi = net_position(cone, sol.x, m.tree.n_nodes)
            x = sol.x
            top = float(np.abs(psi).max())
            if top > tol:
                psi = psi / top
                x = x / top
            # the witness replicates zero including any claim leg
            total = _restrict_leaves(
                m, cone, payoff_F(m, psi, start=cone.start)
            ) + _claim_payoff_total(cone, x)
            if float(np.abs(total).max()) > 1e-7:
                raise SolverError("EF witness fails the zero-payoff recheck")
            return False, psi
    return True, None
