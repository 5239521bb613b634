"""Arbitrage certificates, risk-neutral measures, consistent pricing systems,
and superhedging bounds for finite scenario-tree markets whose security
prices and dividends both carry bid-ask spreads."""

from .arbitrage import (
    ArbitrageCertificate,
    RiskNeutralMeasure,
    check_efficient_friction,
    check_no_arbitrage,
    find_risk_neutral_measure,
    verify_risk_neutral,
)
from .cds import CdsSpec, load_cds_spec, make_cds_cps, make_cds_market
from .cone import ConeLP, build_cone, build_subtree_cones, canonical_decomposition
from .cps import (
    ConsistentPricingSystem,
    SnellEnvelopes,
    build_cps_from_rn,
    snell_envelopes,
    verify_cps,
)
from .errors import FmktError, SolverError, ValidationError
from .hedging import (
    DerivativeContract,
    PriceBounds,
    dual_price_bound,
    extended_cone_check,
    load_derivative,
    price_bounds,
    subhedge_bid,
    superhedge_ask,
)
from .market import DiscountedQuotes, MarketModel, discounted_quotes, load_market
from .portfolio import (
    TradingStrategy,
    combine,
    complete_cash_leg,
    is_self_financing,
    payoff_F,
    value_process,
)
from .tree import AdaptedProcess, PredictableProcess, ScenarioTree, build_tree

__version__ = "0.1.0"

__all__ = [
    "AdaptedProcess",
    "ArbitrageCertificate",
    "CdsSpec",
    "ConeLP",
    "ConsistentPricingSystem",
    "DerivativeContract",
    "DiscountedQuotes",
    "FmktError",
    "MarketModel",
    "PredictableProcess",
    "PriceBounds",
    "RiskNeutralMeasure",
    "ScenarioTree",
    "SnellEnvelopes",
    "SolverError",
    "TradingStrategy",
    "ValidationError",
    "build_cone",
    "build_cps_from_rn",
    "build_subtree_cones",
    "build_tree",
    "canonical_decomposition",
    "check_efficient_friction",
    "check_no_arbitrage",
    "combine",
    "complete_cash_leg",
    "discounted_quotes",
    "dual_price_bound",
    "extended_cone_check",
    "find_risk_neutral_measure",
    "is_self_financing",
    "load_cds_spec",
    "load_derivative",
    "load_market",
    "make_cds_cps",
    "make_cds_market",
    "payoff_F",
    "price_bounds",
    "snell_envelopes",
    "subhedge_bid",
    "superhedge_ask",
    "value_process",
    "verify_cps",
    "verify_risk_neutral",
]
