"""Synthetic datasets: profile-correlated workloads plus the label-upscaling
procedure used to diversify rightsized capacities.

Everything is generated from a single seed and is bit-reproducible.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    BURSTABLE,
    CandidateSet,
    ConfigError,
    DEFAULT_CATALOG,
    GENERAL_PURPOSE,
    MEMORY_OPTIMIZED,
    LogTransform,
    WorkloadTrace,
    discretize,
    resample,
)
from .hierarchy import ProfileRecord
from .rightsizer import RightsizerConfig, rightsize

#: Feature schema of the synthetic profile data (coarsest to finest).
FEATURE_NAMES = (
    "SegmentName",
    "IndustryName",
    "VerticalName",
    "CloudCustomerGuid",
    "SubscriptionId",
    "ResourceGroup",
)


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    n_customers: int = 30
    subscriptions_per_customer: int = 2
    resource_groups_per_subscription: int = 3
    resources_per_group: int = 4
    duration_minutes: float = 24 * 60
    sample_period_minutes: float = 1.0
    missing_rate: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class UpscaleSpec:
    """Per-feature global scale factors; each unique feature value draws
    either the factor or 0 with equal likelihood (seeded by value hash)."""

    factors: dict = field(
        default_factory=lambda: {
            "ResourceGroup": 1.0,
            "CloudCustomerGuid": 1.0,
            "VerticalName": 3.0,
        }
    )
    seed: int = 0


@dataclass
class SyntheticDataset:
    feature_names: tuple[str, ...]
    resource_ids: list[str]
    profiles: list[ProfileRecord]
    traces: dict[str, WorkloadTrace]
    user_capacities: dict[str, float]
    catalog: dict[str, CandidateSet]
    manifest: dict = field(default_factory=dict)


def _hash_unit(seed: int, *parts: str) -> float:
    """Deterministic uniform(0,1) from a seed and string parts."""
    h = hashlib.sha256(("%d:%s" % (seed, ":".join(parts))).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64


def generate_synthetic(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    """Resources with a strict profile hierarchy by construction; demand is
    driven by the vertical and resource group so profile features are
    informative of capacity."""
    rng = np.random.default_rng(spec.seed)
    catalog = dict(DEFAULT_CATALOG)
    offerings = [BURSTABLE, GENERAL_PURPOSE, MEMORY_OPTIMIZED]
    offering_p = [0.05, 0.49, 0.46]

    n_segments = 3
    industries_per_segment = 2
    verticals_per_industry = 2

    resource_ids: list[str] = []
    profiles: list[ProfileRecord] = []
    traces: dict[str, WorkloadTrace] = {}
    user_caps: dict[str, float] = {}

    n_samples = int(spec.duration_minutes / spec.sample_period_minutes)
    times = np.arange(n_samples, dtype=float) * spec.sample_period_minutes

    n_verticals = n_segments * industries_per_segment * verticals_per_industry
    vertical_scale = 2.0 ** rng.integers(0, 4, size=n_verticals)

    for ci in range(spec.n_customers):
        vertical = ci % n_verticals
        industry = vertical // verticals_per_industry
        segment = industry // industries_per_segment
        customer = f"cust{ci:04d}"
        for si in range(spec.subscriptions_per_customer):
            sub = f"{customer}-sub{si}"
            for gi in range(spec.resource_groups_per_subscription):
                rg = f"{sub}-rg{gi}"
                rg_scale = 2.0 ** rng.integers(0, 2)
                for ri in range(spec.resources_per_group):
                    rid = f"{rg}-res{ri}"
                    offering = rng.choice(offerings, p=offering_p)
                    base = (
                        vertical_scale[vertical]
                        * rg_scale
                        * 2.0 ** rng.normal(0.0, 0.15)
                    )
                    usage = base * rng.uniform(0.3, 1.0, size=n_samples)
                    # imperfect user selection, mimicking over/under mix
                    guess = base * 2.0 ** rng.normal(0.5, 1.0)
                    c0 = discretize(max(guess, 1e-9), catalog[offering].dim(0))
                    usage = np.minimum(usage, c0)
                    values = (
                        f"seg{segment}",
                        f"ind{industry}",
                        f"vert{vertical}",
                        customer,
                        sub,
                        rg,
                    )
                    if spec.missing_rate > 0:
                        values = tuple(
                            "MISSING" if rng.random() < spec.missing_rate else v
                            for v in values
                        )
                    resource_ids.append(rid)
                    profiles.append(ProfileRecord(values=values, offering=offering))
                    traces[rid] = WorkloadTrace(resource_id=rid, times=times, values=usage)
                    user_caps[rid] = c0

    return SyntheticDataset(
        feature_names=FEATURE_NAMES,
        resource_ids=resource_ids,
        profiles=profiles,
        traces=traces,
        user_capacities=user_caps,
        catalog=catalog,
        manifest={"spec": "synthetic", "seed": spec.seed},
    )


def assigned_factor(spec: UpscaleSpec, feature: str, value: str) -> float:
    """The value's drawn factor: the feature's global factor or 0, equal odds."""
    factor = spec.factors[feature]
    return factor if _hash_unit(spec.seed, feature, value) < 0.5 else 0.0


def workload_scale_exponent(
    spec: UpscaleSpec, feature_names: tuple[str, ...], profile: ProfileRecord
) -> float:
    for feat in spec.factors:
        if feat not in feature_names:
            raise ConfigError(f"unknown feature in upscale spec: {feat}")
    chi = 0.0
    for feat, _ in spec.factors.items():
        idx = feature_names.index(feat)
        chi += assigned_factor(spec, feat, profile.values[idx])
    return chi


def upscale(dataset: SyntheticDataset, spec: UpscaleSpec) -> SyntheticDataset:
    """Scale each workload by 2^chi_w; user capacities are scaled by the same
    factor then discretized so censoring semantics are preserved.

    Note: scaling the user capacity alongside the trace is a deliberate
    departure from scaling traces alone, which would mark nearly every scaled
    workload as censored; the manifest records the deviation.
    """
    traces: dict[str, WorkloadTrace] = {}
    user_caps: dict[str, float] = {}
    for rid, profile in zip(dataset.resource_ids, dataset.profiles):
        chi = workload_scale_exponent(spec, dataset.feature_names, profile)
        scale = 2.0 ** chi
        trace = dataset.traces[rid]
        cands = dataset.catalog[profile.offering].dim(0)
        c0 = discretize(dataset.user_capacities[rid] * scale, cands)
        values = np.minimum(trace.values * scale, c0)
        traces[rid] = WorkloadTrace(resource_id=rid, times=trace.times, values=values)
        user_caps[rid] = c0
    manifest = dict(dataset.manifest)
    manifest["upscaled"] = {
        "factors": dict(spec.factors),
        "seed": spec.seed,
        "deviation": "user capacities rescaled with traces",
    }
    return SyntheticDataset(
        feature_names=dataset.feature_names,
        resource_ids=list(dataset.resource_ids),
        profiles=list(dataset.profiles),
        traces=traces,
        user_capacities=user_caps,
        catalog=dict(dataset.catalog),
        manifest=manifest,
    )


def rightsize_dataset(
    dataset: SyntheticDataset, cfg: RightsizerConfig = RightsizerConfig()
) -> dict[str, float]:
    """Rightsized capacity label per resource (single dimension)."""
    labels: dict[str, float] = {}
    for rid, profile in zip(dataset.resource_ids, dataset.profiles):
        w = resample(dataset.traces[rid], cfg.bin_width)
        res = rightsize(
            w, [dataset.user_capacities[rid]], dataset.catalog[profile.offering], cfg
        )
        labels[rid] = res.capacity[0]
    return labels


def make_strict_hierarchy_profiles(
    n_rows: int = 500,
    chain_sizes: tuple[int, ...] = (3, 9, 27, 81),
    n_noise: int = 2,
    noise_cardinality: int = 8,
    seed: int = 0,
) -> tuple[list[list[str]], list[str], list[str]]:
    """Rows with an exact feature chain plus independent noise features.

    Returns (rows, shuffled feature names, ground-truth chain names).
    Feature columns are shuffled so learners cannot rely on schema order.
    """
    rng = np.random.default_rng(seed)
    finest = chain_sizes[-1]
    fine_vals = rng.integers(0, finest, size=n_rows)
    columns = []
    names = []
    for level, size in enumerate(chain_sizes):
        ratio = finest // size
        columns.append([f"L{level}_{v // ratio}" for v in fine_vals])
        names.append(f"chain{level}")
    for k in range(n_noise):
        vals = rng.integers(0, noise_cardinality, size=n_rows)
        columns.append([f"N{k}_{v}" for v in vals])
        names.append(f"noise{k}")
    order = rng.permutation(len(columns))
    shuffled_names = [names[i] for i in order]
    rows = [[columns[i][r] for i in order] for r in range(n_rows)]
    truth = [f"chain{level}" for level in range(len(chain_sizes))]
    return rows, shuffled_names, truth
