import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skurec.core import (
    ConfigError,
    DEFAULT_CATALOG,
    GENERAL_PURPOSE,
    single_dim_candidates,
)
from skurec.personalizer import (
    LambdaStore,
    PropagationConfig,
    SatisfactionSignal,
    TicketRecord,
    adjust,
    classify_ticket,
)

GP = DEFAULT_CATALOG[GENERAL_PURPOSE]
STRATS = ("G", "B", "M")

# Fig.-7 style exaggerated parameters
FIG7 = PropagationConfig(
    learning_rate=2.0,
    decay_stratification=0.5,
    decay_resource_group=0.5,
    decay_subscription=0.25,
)


def fig7_store():
    store = LambdaStore(stratifications=STRATS)
    for sub in ("S1", "S2"):
        for rg in ("R1", "R2"):
            store.register("A", sub, rg)
    store.register("Z", "S1", "R1")  # an unrelated customer
    return store


def sig(strength=1.0, customer="A", sub="S1", rg="R1", strat="G"):
    return SatisfactionSignal(
        customer=customer,
        subscription=sub,
        resource_group=rg,
        stratification=strat,
        strength=strength,
        source="Synthetic",
    )


class TestClassifyTicket:
    def test_throttle_match(self):
        t = TicketRecord(symptoms="high cpu usage", resolution="scaled up the server")
        assert classify_ticket(t) == 1

    def test_empty_ticket(self):
        assert classify_ticket(TicketRecord()) == 0

    def test_cost_match(self):
        t = TicketRecord(subject="reduce cost", resolution="scale down")
        assert classify_ticket(t) == -1

    def test_throttle_precedence(self):
        t = TicketRecord(
            symptoms="high cpu utilization",
            subject="reduce cost",
            resolution="scaled up, then asked to scale down",
        )
        assert classify_ticket(t) == 1

    def test_case_insensitive(self):
        t = TicketRecord(symptoms="HIGH CPU", resolution="Scaled Up")
        assert classify_ticket(t) == 1

    def test_needs_both_intent_and_resolution(self):
        assert classify_ticket(TicketRecord(symptoms="high cpu usage")) == 0
        assert classify_ticket(TicketRecord(resolution="scaled up")) == 0


class TestPropagation:
    def test_fig7_deltas_exact(self):
        store = fig7_store()
        store.propagate(sig(1.0), FIG7)
        expect = {}
        # target RG
        expect[("A", "S1", "R1", "G")] = 2.0
        expect[("A", "S1", "R1", "B")] = 1.0
        expect[("A", "S1", "R1", "M")] = 1.0
        # sibling RG, same subscription
        expect[("A", "S1", "R2", "G")] = 1.0
        expect[("A", "S1", "R2", "B")] = 0.5
        expect[("A", "S1", "R2", "M")] = 0.5
        # other subscription, both RGs
        for rg in ("R1", "R2"):
            expect[("A", "S2", rg, "G")] = 0.5
            expect[("A", "S2", rg, "B")] = 0.25
            expect[("A", "S2", rg, "M")] = 0.25
        for key, v in expect.items():
            assert store.lookup(*key) == pytest.approx(v, abs=1e-12), key
        # everything else is exactly zero
        for key in store.values:
            assert key in expect or store.lookup(*key) == 0.0

    def test_zero_signal_noop(self):
        store = fig7_store()
        store.propagate(sig(0.0), FIG7)
        assert all(v == 0.0 for v in store.values.values())

    def test_rg_isolated_learning(self):
        cfg = PropagationConfig(
            learning_rate=2.0,
            decay_stratification=0.5,
            decay_resource_group=0.0,
            decay_subscription=0.0,
        )
        store = fig7_store()
        store.propagate(sig(1.0), cfg)
        touched = {k for k, v in store.values.items() if v != 0.0}
        assert touched == {("A", "S1", "R1", s) for s in STRATS}

    def test_opposite_signals_cancel(self):
        store = fig7_store()
        store.propagate(sig(1.0), FIG7)
        store.propagate(sig(-1.0), FIG7)
        for key in store.values:
            assert store.lookup(*key) == pytest.approx(0.0, abs=1e-15)

    def test_linearity(self):
        a = fig7_store()
        a.propagate(sig(0.3), FIG7)
        a.propagate(sig(0.5), FIG7)
        b = fig7_store()
        b.propagate(sig(0.8), FIG7)
        for key in set(a.values) | set(b.values):
            assert a.lookup(*key) == pytest.approx(b.lookup(*key), abs=1e-12)

    def test_customer_isolation(self):
        store = fig7_store()
        store.propagate(sig(1.0), FIG7)
        for key in store.values:
            assert key[0] != "Z" or store.lookup(*key) == 0.0

    @given(st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=100)
    def test_isolation_randomized(self, g1, g2):
        store = fig7_store()
        store.propagate(sig(g1), FIG7)
        store.propagate(sig(g2, sub="S2", rg="R2", strat="B"), FIG7)
        assert store.lookup("Z", "S1", "R1", "G") == 0.0

    def test_accumulation_doubles(self):
        store = fig7_store()
        store.propagate(sig(1.0), FIG7)
        once = store.lookup("A", "S1", "R1", "G")
        store.propagate(sig(1.0), FIG7)
        assert store.lookup("A", "S1", "R1", "G") == pytest.approx(2 * once)

    def test_fresh_store_reads_zero(self):
        assert LambdaStore().lookup("c", "s", "r", "g") == 0.0

    def test_version_counter(self):
        store = fig7_store()
        v0 = store.version
        store.propagate(sig(1.0), FIG7)
        assert store.version == v0 + 1

    def test_json_round_trip(self):
        store = fig7_store()
        store.propagate(sig(0.7), FIG7)
        clone = LambdaStore.from_json(store.to_json())
        assert clone.values == store.values
        assert clone.version == store.version
        assert {c: {s: set(r) for s, r in subs.items()} for c, subs in clone.topology.items()} == {
            c: {s: set(r) for s, r in subs.items()} for c, subs in store.topology.items()
        }


class TestAdjust:
    def test_identity(self):
        assert adjust(4.0, 0.0, GP) == 4.0

    def test_shift_and_tie_up(self):
        # 4 * 2^1.5 = 11.31... which is the exact log midpoint of 8 and 16
        assert adjust(4.0, 1.5, GP) == 16.0

    def test_exact_candidate(self):
        assert adjust(8.0, -1.0, GP) == 4.0

    def test_domain(self):
        with pytest.raises(ConfigError):
            adjust(0.0, 1.0, GP)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([2.0, 5.0, 30.0, 100.0]))
    @settings(max_examples=120)
    def test_monotone_in_lambda(self, l1, l2, c):
        lo, hi = sorted((l1, l2))
        assert adjust(c, lo, GP) <= adjust(c, hi, GP)

    @given(st.sampled_from(GP.dim(0)))
    def test_identity_on_candidates(self, c):
        assert adjust(float(c), 0.0, GP) == c


class TestValidation:
    def test_signal_strength_bounds(self):
        with pytest.raises(ConfigError):
            sig(1.5)

    def test_propagation_config(self):
        with pytest.raises(ConfigError):
            PropagationConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            PropagationConfig(decay_subscription=1.5)
