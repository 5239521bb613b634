import numpy as np
import pytest

from fmkt.arbitrage import (
    check_efficient_friction,
    check_no_arbitrage,
    find_risk_neutral_measure,
    measure_from_doc,
    measure_to_doc,
    verify_risk_neutral,
)
from fmkt.errors import ValidationError
from fmkt.market import MarketModel, Security, load_market
from fmkt.portfolio import discounted_value_process, is_self_financing, payoff_F

from conftest import load_fixture
from _markets import random_market


def test_tree1_has_no_arbitrage(tree1):
    assert check_no_arbitrage(tree1) is None


def test_treearb_certificate(treearb):
    cert = check_no_arbitrage(treearb)
    assert cert is not None
    i = treearb.tree.index
    assert cert.strategy.risky[i["n0"], 0] == pytest.approx(1.0, abs=1e-12)
    assert cert.strategy.cash[i["n0"]] == pytest.approx(-10.0, abs=1e-9)
    assert np.allclose(cert.leaf_values, [1.0, 0.5], atol=1e-9)
    assert cert.margin == pytest.approx(1.0, abs=1e-9)


def test_certificate_reverifies_independently(treearb):
    cert = check_no_arbitrage(treearb)
    v = discounted_value_process(treearb, cert.strategy)
    assert abs(v[0]) < 1e-9
    assert is_self_financing(treearb, cert.strategy, 1e-9)[0]
    assert np.allclose(
        v[treearb.tree.leaves], payoff_F(treearb, cert.strategy.risky), atol=1e-9
    )
    assert np.all(v[treearb.tree.leaves] >= -1e-9)
    assert v[treearb.tree.leaves].max() > 1e-6


def test_zero_security_market_has_no_arbitrage():
    doc = load_fixture("tree1.json")
    doc["securities"] = []
    m = load_market(doc)
    assert check_no_arbitrage(m) is None
    r = find_risk_neutral_measure(m)
    assert r is not None and r.epsilon == pytest.approx(0.5, abs=1e-9)


def test_tree1_risk_neutral_measure(tree1):
    r = find_risk_neutral_measure(tree1)
    assert r is not None
    q_up = r.q[tree1.tree.leaf_pos[tree1.tree.node("nu")]]
    assert 0.25 - 1e-9 <= q_up <= 0.75 + 1e-9
    assert verify_risk_neutral(tree1, r.q)[0]


def test_treearb_has_no_risk_neutral_measure(treearb):
    assert find_risk_neutral_measure(treearb) is None


def test_deterministic_single_path_measure():
    doc = {
        "horizon": 1,
        "rates": [0.0, 0.0],
        "nodes": [
            {"id": "n0", "time": 0, "parent": None, "prob": 1.0},
            {"id": "n1", "time": 1, "parent": "n0", "prob": 1.0},
        ],
        "securities": [
            {
                "name": "S",
                "quotes": {
                    "n0": {"ask": 10.0, "bid": 10.0},
                    "n1": {"ask": 10.0, "bid": 10.0, "dAsk": 0.0, "dBid": 0.0},
                },
            }
        ],
    }
    m = load_market(doc)
    r = find_risk_neutral_measure(m)
    assert r is not None
    assert r.q[0] == pytest.approx(1.0, abs=1e-12)


def test_verify_risk_neutral_tree1(tree1):
    assert verify_risk_neutral(tree1, np.array([0.5, 0.5])) == (True, None)
    ok, why = verify_risk_neutral(tree1, np.array([0.9, 0.1]))
    assert not ok
    assert "buy-and-hold security S from n0" in why
    assert "0.6" in why


def test_verify_risk_neutral_frictionless_binomial():
    doc = load_fixture("tree1.json")
    for nid, rec in doc["securities"][0]["quotes"].items():
        rec["bid"] = rec["ask"]
    m = load_market(doc)
    assert verify_risk_neutral(m, np.array([0.5, 0.5]))[0]
    assert not verify_risk_neutral(m, np.array([0.6, 0.4]))[0]


def test_verify_rejects_bad_measures(tree1):
    with pytest.raises(ValidationError, match="strictly positive"):
        verify_risk_neutral(tree1, np.array([1.0, 0.0]))
    with pytest.raises(ValidationError, match="sum to 1"):
        verify_risk_neutral(tree1, np.array([0.7, 0.7]))


def test_efficient_friction_tree1(tree1):
    ok, psi = check_efficient_friction(tree1)
    assert ok and psi is None
    # one-period closed-form oracle: a zero-payoff nonzero position needs
    # bid_1 + dAsk_1 = ask_0 at every leaf (long) or ask_1 + dBid_1 = bid_0 (short)
    s = tree1.securities[0]
    i = tree1.tree.index
    long_flat = all(
        s.bid[i[n]] + s.d_ask[i[n]] == s.ask[i["n0"]] for n in ("nu", "nd")
    )
    short_flat = all(
        s.ask[i[n]] + s.d_bid[i[n]] == s.bid[i["n0"]] for n in ("nu", "nd")
    )
    assert not long_flat and not short_flat


def test_efficient_friction_fails_for_redundant_security():
    doc = load_fixture("tree1.json")
    doc["securities"][0]["quotes"] = {
        "n0": {"ask": 10.0, "bid": 10.0},
        "nu": {"ask": 10.0, "bid": 10.0, "dAsk": 0.0, "dBid": 0.0},
        "nd": {"ask": 10.0, "bid": 10.0, "dAsk": 0.0, "dBid": 0.0},
    }
    m = load_market(doc)
    ok, psi = check_efficient_friction(m)
    assert not ok
    assert abs(psi[0, 0]) == pytest.approx(1.0, abs=1e-9)
    assert float(np.abs(payoff_F(m, psi)).max()) < 1e-9
    # oracle agrees: the long round trip is exactly flat
    s = m.securities[0]
    i = m.tree.index
    assert all(s.bid[i[n]] + s.d_ask[i[n]] == s.ask[i["n0"]] for n in ("nu", "nd"))


def test_efficient_friction_zero_securities():
    doc = load_fixture("tree1.json")
    doc["securities"] = []
    m = load_market(doc)
    assert check_efficient_friction(m) == (True, None)


def test_efficient_friction_requires_no_arbitrage(treearb):
    with pytest.raises(ValidationError, match="no-arbitrage"):
        check_efficient_friction(treearb)


def test_scaling_invariance_of_verdict():
    rng = np.random.default_rng(99)
    for _ in range(25):
        m = random_market(rng)
        verdict = check_no_arbitrage(m) is None
        scale = float(rng.uniform(0.3, 6.0))
        s0 = m.securities[0]
        scaled = (
            Security(
                name=s0.name,
                ask=s0.ask * scale,
                bid=s0.bid * scale,
                d_ask=s0.d_ask * scale,
                d_bid=s0.d_bid * scale,
            ),
        ) + m.securities[1:]
        m2 = MarketModel(tree=m.tree, rates=m.rates, securities=scaled)
        assert (check_no_arbitrage(m2) is None) == verdict


def test_fftap_mini_sweep():
    """Exactly one of (certificate, measure) on each randomized market."""
    rng = np.random.default_rng(20240817)
    n_arb = n_free = 0
    for k in range(150):
        m = random_market(rng, force_na=bool(k % 2), allow_empty=True)
        cert = check_no_arbitrage(m)
        meas = find_risk_neutral_measure(m)
        assert (cert is None) != (meas is None), f"market {k} disagrees"
        if cert is None:
            n_free += 1
            ok, why = verify_risk_neutral(m, meas.q)
            assert ok, why
        else:
            n_arb += 1
    assert n_arb >= 10 and n_free >= 60  # both branches genuinely exercised


def test_anchored_markets_are_arbitrage_free():
    rng = np.random.default_rng(4321)
    for _ in range(40):
        m = random_market(rng, force_na=True)
        assert check_no_arbitrage(m) is None


def test_measure_document_roundtrip(tree1):
    r = find_risk_neutral_measure(tree1)
    doc = measure_to_doc(tree1, r)
    q = measure_from_doc(tree1, doc)
    assert np.allclose(q, r.q)
    assert set(doc["q"]) == {"nu", "nd"}


def test_arbitrage_at_later_start_time(cds1):
    assert check_no_arbitrage(cds1, t=1) is None
    r = find_risk_neutral_measure(cds1, t=1)
    assert r is not None
