import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_percentile
from skurec.core import (
    DEFAULT_CATALOG,
    MISSING,
    GENERAL_PURPOSE,
    LogTransform,
    NotFittedError,
    single_dim_candidates,
)
from skurec.hierarchy import HierarchyModel, ProfileRecord, learn_hierarchy
from skurec.provisioners import (
    HierarchicalProvisioner,
    PredictionStore,
    StratifiedProvisioner,
    TargetEncodingProvisioner,
    nearest_rank_percentile,
)

GP = DEFAULT_CATALOG[GENERAL_PURPOSE]


def two_level_hierarchy():
    # feature 0 coarse (2 values), feature 1 fine (8 values)
    rng = np.random.default_rng(0)
    fine = rng.integers(0, 8, 200)
    rows = [ProfileRecord(values=(f"c{v // 4}", f"f{v}"), offering=GENERAL_PURPOSE) for v in fine]
    hier = learn_hierarchy([r.values for r in rows], ["coarse", "fine"])
    assert hier.chain_names == ("coarse", "fine")
    return rows, hier


class TestNearestRankPercentile:
    def test_odd_median(self):
        assert nearest_rank_percentile([1, 2, 3, 4, 5], 50) == 3

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=30), st.floats(1, 100))
    @settings(max_examples=120)
    def test_against_sort_oracle(self, vals, p):
        assert nearest_rank_percentile(sorted(vals), p) == oracle_percentile(vals, p)

    def test_empty(self):
        with pytest.raises(ValueError):
            nearest_rank_percentile([], 50)


class TestHierarchicalProvisioner:
    def test_bucket_grouping(self):
        rows, hier = two_level_hierarchy()
        labels = [4.0] * len(rows)
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP).fit(rows, labels)
        # sizes at every level sum to the training-set size
        for level in prov.buckets.values():
            assert sum(len(b) for b in level.values()) == len(rows)

    def test_most_granular_wins(self):
        rows, hier = two_level_hierarchy()
        # fine bucket f0 gets label 32, everything else 4
        labels = [32.0 if r.values[1] == "f0" else 4.0 for r in rows]
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=5).fit(rows, labels)
        rec = prov.predict(ProfileRecord(values=("c0", "f0"), offering=GENERAL_PURPOSE))
        assert rec.capacity == 32.0
        assert rec.level_name == "fine"
        assert rec.matched_value == "f0"
        assert rec.support >= 5

    def test_fallback_to_coarser_level(self):
        rows, hier = two_level_hierarchy()
        labels = [8.0] * len(rows)
        # fine buckets hold ~25 rows, coarse ~100: force the coarse level
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=50).fit(rows, labels)
        rec = prov.predict(ProfileRecord(values=("c0", "f0"), offering=GENERAL_PURPOSE))
        assert rec.level_name == "coarse"
        assert rec.capacity == 8.0

    def test_default_fallback_unseen(self):
        rows, hier = two_level_hierarchy()
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP).fit(rows, [4.0] * len(rows))
        rec = prov.predict(ProfileRecord(values=("zz", "zz"), offering=GENERAL_PURPOSE))
        assert rec.default_fallback
        assert rec.capacity == GP.dim(0)[0]

    def test_monotone_fallback_in_min_bucket(self):
        rows, hier = two_level_hierarchy()
        labels = [8.0] * len(rows)
        x = ProfileRecord(values=("c1", "f7"), offering=GENERAL_PURPOSE)
        prev_level = None
        for n in (500, 100, 20, 5, 1):
            prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=n).fit(rows, labels)
            rec = prov.predict(x)
            level = -1 if rec.level is None else rec.level
            if prev_level is not None:
                assert level >= prev_level  # lowering N never gets less granular
            prev_level = level

    def test_percentile_example(self):
        # bucket of 40 capacities: 20 x 2, 15 x 4, 5 x 8; nearest-rank p=50
        # is the 20th sorted element
        rows = [
            ProfileRecord(values=("Insurance",), offering=GENERAL_PURPOSE)
            for _ in range(40)
        ]
        labels = [2.0] * 20 + [4.0] * 15 + [8.0] * 5
        hier = HierarchyModel(
            feature_names=("VerticalName",), chain=(0,), intensity=np.zeros((1, 1))
        )
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=10).fit(rows, labels)
        rec = prov.predict(rows[0])
        assert rec.capacity == 2.0
        assert rec.support == 40

    def test_output_in_candidate_set(self):
        rows, hier = two_level_hierarchy()
        rng = np.random.default_rng(4)
        labels = [float(rng.choice([2, 5, 9, 100])) for _ in rows]
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=1).fit(rows, labels)
        for r in rows[:50]:
            assert prov.predict(r).capacity in GP.dim(0)

    def test_not_fitted(self):
        _, hier = two_level_hierarchy()
        with pytest.raises(NotFittedError):
            HierarchicalProvisioner(hierarchy=hier, candidates=GP).predict(
                ProfileRecord(values=("a", "b"))
            )

    def test_export_rows(self):
        rows, hier = two_level_hierarchy()
        prov = HierarchicalProvisioner(hierarchy=hier, candidates=GP, min_bucket=10).fit(
            rows, [4.0] * len(rows)
        )
        out = prov.export_rows()
        assert all(r["support_count"] >= 10 for r in out)
        assert all(r["offering"] == GENERAL_PURPOSE for r in out)
        assert {r["hierarchy_level"] for r in out} <= {"coarse", "fine"}


class TestTargetEncoding:
    def test_mean_encoding(self):
        tr = LogTransform()
        rows = [ProfileRecord(values=("Beverage",), offering=GENERAL_PURPOSE) for _ in range(3)]
        labels = [tr.inverse(1.0), tr.inverse(2.0), tr.inverse(3.0)]
        prov = TargetEncodingProvisioner(candidates=GP, seed=0).fit(rows, labels)
        assert prov.encodings[0]["Beverage"] == pytest.approx(2.0)

    def test_missing_maps_to_global_mean(self):
        rows = [
            ProfileRecord(values=("a",), offering=GENERAL_PURPOSE),
            ProfileRecord(values=(MISSING,), offering=GENERAL_PURPOSE),
        ]
        prov = TargetEncodingProvisioner(candidates=GP, seed=0).fit(rows, [4.0, 16.0])
        X = prov._encode([ProfileRecord(values=(MISSING,)), ProfileRecord(values=("unseen",))])
        assert X[0, 0] == prov.global_mean
        assert X[1, 0] == prov.global_mean
        assert MISSING not in prov.encodings[0]

    def test_perfect_partition(self):
        rows = [ProfileRecord(values=(f"g{i % 2}",), offering=GENERAL_PURPOSE) for i in range(40)]
        labels = [2.0 if i % 2 == 0 else 8.0 for i in range(40)]
        prov = TargetEncodingProvisioner(candidates=GP, seed=0).fit(rows, labels)
        assert prov.predict(ProfileRecord(values=("g0",))).capacity == 2.0
        assert prov.predict(ProfileRecord(values=("g1",))).capacity == 8.0

    def test_determinism(self):
        rng = np.random.default_rng(1)
        rows = [ProfileRecord(values=(f"v{rng.integers(0, 5)}", f"w{rng.integers(0, 3)}")) for _ in range(60)]
        labels = [float(rng.choice([2, 4, 8, 16])) for _ in range(60)]
        a = TargetEncodingProvisioner(candidates=GP, seed=7).fit(rows, labels)
        b = TargetEncodingProvisioner(candidates=GP, seed=7).fit(rows, labels)
        xs = rows[:20]
        assert [r.capacity for r in a.predict_batch(xs)] == [
            r.capacity for r in b.predict_batch(xs)
        ]

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            TargetEncodingProvisioner(candidates=GP).predict(ProfileRecord(values=("a",)))

    def test_output_in_candidate_set(self):
        rng = np.random.default_rng(2)
        rows = [ProfileRecord(values=(f"v{rng.integers(0, 4)}",)) for _ in range(50)]
        labels = [float(rng.uniform(1, 100)) for _ in range(50)]
        prov = TargetEncodingProvisioner(candidates=GP, seed=0).fit(rows, labels)
        for r in rows[:20]:
            assert prov.predict(r).capacity in GP.dim(0)


class TestStratified:
    def make(self, n_gp=30, n_b=3):
        rows = [ProfileRecord(values=("x",), offering=GENERAL_PURPOSE) for _ in range(n_gp)]
        rows += [ProfileRecord(values=("x",), offering="Burstable") for _ in range(n_b)]
        labels = [8.0] * n_gp + [2.0] * n_b
        hier = HierarchyModel(feature_names=("f",), chain=(0,), intensity=np.zeros((1, 1)))
        factory = lambda c: HierarchicalProvisioner(hierarchy=hier, candidates=c, min_bucket=1)
        return StratifiedProvisioner(factory=factory, catalog=dict(DEFAULT_CATALOG)).fit(rows, labels)

    def test_small_offering_default_only(self):
        prov = self.make()
        assert "Burstable" in prov.default_only
        rec = prov.predict(ProfileRecord(values=("x",), offering="Burstable"))
        assert rec.default_fallback
        assert rec.capacity == DEFAULT_CATALOG["Burstable"].dim(0)[0]

    def test_isolation_between_offerings(self):
        prov = self.make(n_gp=30, n_b=0)
        rec = prov.predict(ProfileRecord(values=("x",), offering=GENERAL_PURPOSE))
        assert rec.capacity == 8.0
        # unknown offering falls back without consulting the GP model
        rec2 = prov.predict(ProfileRecord(values=("x",), offering="Custom"))
        assert rec2.default_fallback


class TestPredictionStore:
    def make_store(self):
        return PredictionStore(
            chain_names_by_offering={GENERAL_PURPOSE: ("coarse", "fine")},
            entries={
                (GENERAL_PURPOSE, "coarse", "c0"): (4.0, 100),
                (GENERAL_PURPOSE, "fine", "f0"): (32.0, 12),
            },
            defaults={GENERAL_PURPOSE: 2.0},
            feature_names=("coarse", "fine"),
        )

    def test_most_granular_wins(self):
        store = self.make_store()
        rec = store.lookup(ProfileRecord(values=("c0", "f0"), offering=GENERAL_PURPOSE))
        assert rec.capacity == 32.0
        assert rec.level_name == "fine"

    def test_fallback_next_level(self):
        store = self.make_store()
        rec = store.lookup(ProfileRecord(values=("c0", "f9"), offering=GENERAL_PURPOSE))
        assert rec.capacity == 4.0
        assert rec.level_name == "coarse"

    def test_removing_granular_key_falls_back(self):
        store = self.make_store()
        del store.entries[(GENERAL_PURPOSE, "fine", "f0")]
        rec = store.lookup(ProfileRecord(values=("c0", "f0"), offering=GENERAL_PURPOSE))
        assert rec.capacity == 4.0

    def test_default(self):
        store = self.make_store()
        rec = store.lookup(ProfileRecord(values=("zz", "zz"), offering=GENERAL_PURPOSE))
        assert rec.default_fallback
        assert rec.capacity == 2.0
