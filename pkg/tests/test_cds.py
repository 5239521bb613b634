import numpy as np
import pytest

from fmkt.arbitrage import check_no_arbitrage
from fmkt.cds import (
    cds_spec_to_doc,
    dividend_increments,
    load_cds_spec,
    make_cds_cps,
    make_cds_market,
)
from fmkt.cps import verify_cps
from fmkt.errors import ValidationError
from fmkt.market import load_market, market_to_doc
from fmkt.tree import path_cumsum


@pytest.fixture()
def spec(cds1_spec_doc):
    return load_cds_spec(cds1_spec_doc)


def test_cds1_quote_values(spec):
    m = make_cds_market(spec)
    i = m.tree.index
    s = m.securities[0]
    assert s.ask[i["n0"]] == pytest.approx(0.0456, abs=1e-12)
    assert s.bid[i["n0"]] == pytest.approx(0.0114, abs=1e-12)
    assert s.ask[i["n_s"]] == pytest.approx(0.024, abs=1e-12)
    assert s.bid[i["n_s"]] == pytest.approx(0.006, abs=1e-12)


def test_cds1_dividend_values(spec):
    m = make_cds_market(spec)
    i = m.tree.index
    s = m.securities[0]
    assert s.d_ask[i["n_s"]] == pytest.approx(-0.06, abs=1e-15)
    assert s.d_ask[i["n_d"]] == pytest.approx(0.6, abs=1e-15)
    assert s.d_ask[i["n_dd"]] == 0.0  # absorbed default pays nothing further
    assert s.d_ask[i["n_sd"]] == pytest.approx(0.6, abs=1e-15)
    assert s.d_bid[i["n_s"]] == pytest.approx(-0.04, abs=1e-15)


def test_frictionless_cds_collapses(spec, cds1_spec_doc):
    doc = dict(cds1_spec_doc)
    doc["kappaAsk"] = doc["kappaBid"] = 0.05
    m = make_cds_market(load_cds_spec(doc))
    s = m.securities[0]
    assert np.allclose(s.ask, s.bid, atol=1e-15)
    assert np.allclose(s.d_ask, s.d_bid, atol=1e-15)


def test_degenerate_cds_is_all_zero(cds1_spec_doc):
    doc = dict(cds1_spec_doc)
    doc["delta"] = 0.0
    doc["kappaAsk"] = doc["kappaBid"] = 0.0
    m = make_cds_market(load_cds_spec(doc))
    s = m.securities[0]
    for arr in (s.ask, s.bid, s.d_ask, s.d_bid):
        assert np.all(arr == 0.0)


def test_generated_market_loads_and_is_arbitrage_free(spec):
    m = make_cds_market(spec)
    again = load_market(market_to_doc(m))
    assert np.array_equal(again.ask, m.ask)
    assert check_no_arbitrage(m) is None


def test_cps_values_at_mid_kappa(spec):
    cps = make_cds_cps(spec, 0.05)
    m = make_cds_market(spec)
    i = m.tree.index
    assert cps.price[i["n_s"], 0] == pytest.approx(0.015, abs=1e-12)
    assert cps.price[i["n0"], 0] == pytest.approx(0.0285, abs=1e-12)
    assert verify_cps(m, cps, tol=1e-9).passed


def test_cps_boundary_kappas_hit_the_quotes(spec):
    m = make_cds_market(spec)
    at_bid = make_cds_cps(spec, spec.kappa_bid)
    at_ask = make_cds_cps(spec, spec.kappa_ask)
    assert np.allclose(at_bid.price[:, 0], m.securities[0].ask, atol=1e-15)
    assert np.allclose(at_ask.price[:, 0], m.securities[0].bid, atol=1e-15)


def test_cps_family_grid(spec):
    m = make_cds_market(spec)
    for kappa in np.linspace(spec.kappa_bid, spec.kappa_ask, 11):
        cps = make_cds_cps(spec, float(kappa))
        assert verify_cps(m, cps, tol=1e-9).passed
    assert check_no_arbitrage(m) is None


def test_kappa_outside_interval_rejected(spec):
    with pytest.raises(ValidationError, match="outside the quoted interval"):
        make_cds_cps(spec, 0.061)


def test_kappa_ordering_enforced(cds1_spec_doc):
    doc = dict(cds1_spec_doc)
    doc["kappaAsk"] = 0.03  # below kappaBid = 0.04
    with pytest.raises(ValidationError, match="kappaBid must not exceed kappaAsk"):
        load_cds_spec(doc)


def test_non_absorbing_default_rejected(cds1_spec_doc):
    doc = dict(cds1_spec_doc)
    doc["defaultNodes"] = ["n_d", "n_sd"]  # n_dd recovers
    with pytest.raises(ValidationError, match="default is not absorbing"):
        load_cds_spec(doc)


def test_dividend_telescoping(spec):
    """Cumulative increments rebuild the closed form exactly."""
    m = make_cds_market(spec)
    t = m.tree
    for kappa, incr in (
        (spec.kappa_ask, m.securities[0].d_ask),
        (spec.kappa_bid, m.securities[0].d_bid),
    ):
        cum = path_cumsum(t, incr)
        for n in range(t.n_nodes):
            # walk the path to evaluate the closed form
            path, k = [], n
            while k >= 0:
                path.append(k)
                k = int(t.parents[k])
            path = path[::-1]
            tau = None
            for step, node in enumerate(path):
                if spec.default_node[node] and tau is None:
                    tau = step
            tt = int(t.times[n])
            defaulted = tau is not None and tau <= tt
            alive_periods = sum(
                1 for u in range(1, tt + 1) if tau is None or u < tau
            )
            closed = (spec.loss_given_default if defaulted else 0.0) - kappa * alive_periods
            assert cum[n] == pytest.approx(closed, abs=1e-12)


def test_pricing_measure_can_differ_from_physical(cds1_spec_doc):
    doc = dict(cds1_spec_doc)
    doc["pricingProbs"] = {
        "n0": 1.0, "n_d": 0.2, "n_s": 0.8, "n_dd": 1.0, "n_sd": 0.2, "n_ss": 0.8,
    }
    spec2 = load_cds_spec(doc)
    m = make_cds_market(spec2)
    # quotes now price a 0.2 default probability
    i = m.tree.index
    assert m.securities[0].ask[i["n_s"]] == pytest.approx(
        0.2 * 0.6 + 0.8 * -0.04, abs=1e-12
    )
    assert check_no_arbitrage(m) is None


def test_spec_document_roundtrip(spec):
    doc = cds_spec_to_doc(spec)
    again = load_cds_spec(doc)
    assert np.array_equal(again.default_node, spec.default_node)
    assert np.allclose(again.pricing_probs, spec.pricing_probs)
    assert again.kappa_ask == spec.kappa_ask


def test_increments_zero_at_root(spec):
    incr = dividend_increments(spec, 0.05)
    assert incr[0] == 0.0
