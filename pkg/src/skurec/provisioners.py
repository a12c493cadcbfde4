"""Stage 2: recommend a capacity for a brand-new resource from categorical
profile data alone.

Two provisioners are provided.  The hierarchical provisioner groups training
labels into per-feature-value buckets along the learned hierarchy and answers
with a percentile of the most granular sufficiently-large bucket.  The target
encoding provisioner replaces each categorical value with a label aggregate
and regresses with a tree ensemble.

Models are trained per server offering; an offering's model never sees other
offerings' rows.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    MISSING,
    CandidateSet,
    LogTransform,
    NotFittedError,
)
from .hierarchy import HierarchyModel, ProfileRecord


def nearest_rank_percentile(sorted_values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: element at 1-based index ceil(p/100 * n)."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty multiset")
    idx = max(1, math.ceil(p / 100.0 * n))
    return sorted_values[min(idx, n) - 1]


@dataclass
class Recommendation:
    capacity: float
    level: int | None = None  # chain position answering the query, None = fallback
    level_name: str | None = None
    matched_value: str | None = None
    support: int = 0
    default_fallback: bool = False


@dataclass
class HierarchicalProvisioner:
    """Bucket index over the hierarchy chain plus percentile inference."""

    hierarchy: HierarchyModel
    candidates: CandidateSet
    min_bucket: int = 10
    percentile: float = 50.0
    transform: LogTransform = field(default_factory=LogTransform)
    default_capacity: float | None = None
    # buckets[j][value] = sorted list of transformed labels, j indexes the chain
    buckets: dict[int, dict[str, list[float]]] | None = None

    def __post_init__(self):
        if self.default_capacity is None:
            self.default_capacity = self.candidates.dim(0)[0]

    def fit(self, rows: Sequence[ProfileRecord], labels: Sequence[float]) -> "HierarchicalProvisioner":
        if not rows:
            raise ValueError("empty training set")
        xi = [self.transform.transform(float(c)) for c in labels]
        buckets: dict[int, dict[str, list[float]]] = {}
        for j, feat in enumerate(self.hierarchy.chain):
            level: dict[str, list[float]] = {}
            for row, y in zip(rows, xi):
                level.setdefault(row.values[feat], []).append(y)
            for vals in level.values():
                vals.sort()
            buckets[j] = level
        self.buckets = buckets
        return self

    def predict(self, x: ProfileRecord) -> Recommendation:
        if self.buckets is None:
            raise NotFittedError("hierarchical provisioner not fitted")
        chain = self.hierarchy.chain
        # scan from the most granular level (chain tail) up
        for j in range(len(chain) - 1, -1, -1):
            value = x.values[chain[j]]
            bucket = self.buckets[j].get(value)
            if bucket is not None and len(bucket) >= self.min_bucket:
                y = nearest_rank_percentile(bucket, self.percentile)
                cap = discretized(self.transform.inverse(y), self.candidates, self.transform)
                return Recommendation(
                    capacity=cap,
                    level=j,
                    level_name=self.hierarchy.feature_names[chain[j]],
                    matched_value=value,
                    support=len(bucket),
                )
        return Recommendation(capacity=self.default_capacity, default_fallback=True)

    def export_rows(self) -> list[dict]:
        """One prediction-store row per qualifying [level, value] key."""
        if self.buckets is None:
            raise NotFittedError("hierarchical provisioner not fitted")
        rows = []
        for j in sorted(self.buckets):
            name = self.hierarchy.feature_names[self.hierarchy.chain[j]]
            for value, bucket in sorted(self.buckets[j].items()):
                if len(bucket) < self.min_bucket:
                    continue
                y = nearest_rank_percentile(bucket, self.percentile)
                cap = discretized(self.transform.inverse(y), self.candidates, self.transform)
                rows.append(
                    {
                        "offering": self.candidates.offering,
                        "hierarchy_level": name,
                        "feature_value": value,
                        "recommended_capacity": cap,
                        "support_count": len(bucket),
                    }
                )
        return rows


def discretized(value: float, candidates: CandidateSet, transform: LogTransform) -> float:
    from .core import discretize

    return discretize(value, candidates.dim(0), transform)


def default_tree_ensemble(seed: int | None = None):
    """Bagged regression trees behind a plain fit/predict contract."""
    from sklearn.ensemble import RandomForestRegressor

    return RandomForestRegressor(
        n_estimators=100,
        max_depth=8,
        min_samples_leaf=5,
        bootstrap=True,
        random_state=seed,
    )


@dataclass
class TargetEncodingProvisioner:
    """Target-encoded features feeding a pluggable regression ensemble.

    Each categorical value is replaced by the mean transformed label of the
    training rows sharing that value; MISSING and unseen values map to the
    global mean of transformed labels.
    """

    candidates: CandidateSet
    transform: LogTransform = field(default_factory=LogTransform)
    aggregator: Callable[[np.ndarray], float] = np.mean
    regressor_factory: Callable[[int | None], object] = default_tree_ensemble
    seed: int | None = None
    encodings: list[dict[str, float]] | None = None
    global_mean: float | None = None
    regressor: object | None = None

    def fit(self, rows: Sequence[ProfileRecord], labels: Sequence[float]) -> "TargetEncodingProvisioner":
        if not rows:
            raise ValueError("empty training set")
        y = np.array([self.transform.transform(float(c)) for c in labels])
        self.global_mean = float(np.mean(y))
        n_feat = len(rows[0].values)
        self.encodings = []
        for h in range(n_feat):
            groups: dict[str, list[float]] = {}
            for row, yi in zip(rows, y):
                if row.values[h] == MISSING:
                    continue
                groups.setdefault(row.values[h], []).append(yi)
            self.encodings.append(
                {v: float(self.aggregator(np.array(g))) for v, g in groups.items()}
            )
        X = self._encode(rows)
        self.regressor = self.regressor_factory(self.seed)
        self.regressor.fit(X, y)
        return self

    def _encode(self, rows: Sequence[ProfileRecord]) -> np.ndarray:
        out = np.empty((len(rows), len(self.encodings)))
        for i, row in enumerate(rows):
            for h, enc in enumerate(self.encodings):
                out[i, h] = enc.get(row.values[h], self.global_mean)
        return out

    def predict(self, x: ProfileRecord) -> Recommendation:
        return self.predict_batch([x])[0]

    def predict_batch(self, rows: Sequence[ProfileRecord]) -> list[Recommendation]:
        if self.regressor is None:
            raise NotFittedError("target encoding provisioner not fitted")
        X = self._encode(rows)
        ys = self.regressor.predict(X)
        recs = []
        for y in ys:
            cap = discretized(self.transform.inverse(float(y)), self.candidates, self.transform)
            recs.append(Recommendation(capacity=cap))
        return recs


@dataclass
class StratifiedProvisioner:
    """Independent provisioner per server offering, with a default-only
    fallback for offerings lacking enough training rows."""

    factory: Callable[[CandidateSet], object]
    catalog: dict[str, CandidateSet]
    min_rows: int = 10
    models: dict[str, object] = field(default_factory=dict)
    default_only: set[str] = field(default_factory=set)

    def fit(self, rows: Sequence[ProfileRecord], labels: Sequence[float]) -> "StratifiedProvisioner":
        by_offering: dict[str, tuple[list[ProfileRecord], list[float]]] = {}
        for row, lab in zip(rows, labels):
            by_offering.setdefault(row.offering, ([], []))
            by_offering[row.offering][0].append(row)
            by_offering[row.offering][1].append(lab)
        for offering, (r, l) in by_offering.items():
            if offering not in self.catalog:
                continue
            if len(r) < self.min_rows:
                self.default_only.add(offering)
                continue
            model = self.factory(self.catalog[offering])
            model.fit(r, l)
            self.models[offering] = model
        return self

    def predict(self, x: ProfileRecord) -> Recommendation:
        model = self.models.get(x.offering)
        if model is None:
            cat = self.catalog.get(x.offering)
            cap = cat.dim(0)[0] if cat is not None else min(
                c.dim(0)[0] for c in self.catalog.values()
            )
            return Recommendation(capacity=cap, default_fallback=True)
        return model.predict(x)


@dataclass
class PredictionStore:
    """Flat keyed lookup of precomputed recommendations, mirroring the batch
    publish step: key = (offering, hierarchy level, feature value)."""

    chain_names_by_offering: dict[str, tuple[str, ...]]
    entries: dict[tuple[str, str, str], tuple[float, int]]
    defaults: dict[str, float]
    feature_names: tuple[str, ...] = ()

    def lookup(self, x: ProfileRecord) -> Recommendation:
        """Most granular matching hierarchy level wins; no match returns the
        offering default."""
        chain = self.chain_names_by_offering.get(x.offering, ())
        name_to_idx = {n: i for i, n in enumerate(self.feature_names)}
        for j in range(len(chain) - 1, -1, -1):
            level = chain[j]
            idx = name_to_idx.get(level)
            if idx is None:
                continue
            value = x.values[idx]
            hit = self.entries.get((x.offering, level, value))
            if hit is not None:
                cap, support = hit
                return Recommendation(
                    capacity=cap,
                    level=j,
                    level_name=level,
                    matched_value=value,
                    support=support,
                )
        return Recommendation(
            capacity=self.defaults.get(x.offering, min(self.defaults.values())),
            default_fallback=True,
        )
