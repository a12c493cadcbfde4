"""Dataset-level evaluation: absolute slack, workload throttling ratio,
Pareto frontiers under power-of-two scaling of predictions, and the
default-value baseline.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .core import (
    CandidateSet,
    EmptyDatasetError,
    EmptyWorkloadError,
    LogTransform,
    ResampledWorkload,
    discretize,
)
from .rightsizer import slack_ratio, throttling_probability


@dataclass(frozen=True)
class EvalPoint:
    label: str
    exponent: float | None
    mean_abs_slack: float
    throttling_ratio: float
    dominated: bool = False


@dataclass(frozen=True)
class WorkloadSummary:
    """Per-workload statistics sufficient for fast single-dimension slack and
    throttling evaluation at any capacity."""

    sorted_bins: np.ndarray
    mean: float

    @classmethod
    def from_workload(cls, w: ResampledWorkload, dim: int = 0) -> "WorkloadSummary":
        vals = w.values[:, dim]
        return cls(sorted_bins=np.sort(vals), mean=float(np.mean(vals)))

    def throttling(self, c: float, eta: float) -> float:
        n = self.sorted_bins.size
        k = np.searchsorted(self.sorted_bins, eta * c, side="right")
        return float(n - k) / n

    def abs_slack(self, c: float) -> float:
        return c - self.mean


def absolute_slack(w: ResampledWorkload, c: Sequence[float]) -> np.ndarray:
    """Slack ratio scaled back to capacity units, per dimension."""
    return slack_ratio(w, c) * np.asarray(c, dtype=float)


def throttling_ratio(
    workloads: Sequence[ResampledWorkload],
    capacities: Sequence[Sequence[float]],
    tau: float = 0.0,
    eta: float = 0.95,
) -> float:
    """Fraction of workloads whose throttling probability exceeds tau."""
    if not workloads:
        raise EmptyDatasetError("no workloads")
    hits = sum(
        1
        for w, c in zip(workloads, capacities)
        if throttling_probability(w, c, eta) > tau
    )
    return hits / len(workloads)


def evaluate_assignment(
    summaries: Sequence[WorkloadSummary],
    capacities: Sequence[float],
    tau: float = 0.0,
    eta: float = 0.95,
) -> tuple[float, float]:
    """(mean absolute slack, workload throttling ratio) for one capacity per
    workload, single dimension."""
    if not summaries:
        raise EmptyDatasetError("no workloads")
    slack = 0.0
    throttled = 0
    for s, c in zip(summaries, capacities):
        slack += s.abs_slack(c)
        if s.throttling(c, eta) > tau:
            throttled += 1
    return slack / len(summaries), throttled / len(summaries)


def mark_dominated(points: list[EvalPoint]) -> list[EvalPoint]:
    out = []
    for p in points:
        dominated = any(
            (q.mean_abs_slack <= p.mean_abs_slack)
            and (q.throttling_ratio <= p.throttling_ratio)
            and (
                q.mean_abs_slack < p.mean_abs_slack
                or q.throttling_ratio < p.throttling_ratio
            )
            for q in points
        )
        out.append(
            EvalPoint(p.label, p.exponent, p.mean_abs_slack, p.throttling_ratio, dominated)
        )
    return out


def pareto_filter(points: list[EvalPoint]) -> list[EvalPoint]:
    """Non-dominated subset, sorted by throttling ratio (slack decreasing)."""
    marked = mark_dominated(points)
    front = [p for p in marked if not p.dominated]
    front.sort(key=lambda p: (p.throttling_ratio, p.mean_abs_slack))
    # drop duplicate metric pairs so slack is strictly decreasing along the list
    dedup: list[EvalPoint] = []
    for p in front:
        if dedup and (
            p.mean_abs_slack >= dedup[-1].mean_abs_slack
            or p.throttling_ratio == dedup[-1].throttling_ratio
        ):
            continue
        dedup.append(p)
    return dedup


DEFAULT_EXPONENT_GRID = tuple(np.arange(-3.0, 3.01, 0.5))


def pareto_curve(
    summaries: Sequence[WorkloadSummary],
    predictions: Sequence[float],
    candidates_per_workload: Sequence[CandidateSet],
    label: str = "model",
    exponents: Sequence[float] = DEFAULT_EXPONENT_GRID,
    tau: float = 0.0,
    eta: float = 0.95,
    transform: LogTransform = LogTransform(),
) -> list[EvalPoint]:
    """Scale all predictions by 2^e for each grid exponent, snap onto each
    workload's candidate set, and keep the non-dominated (slack, throttling)
    points."""
    points = []
    for e in exponents:
        caps = [
            discretize(p * 2.0 ** e, cs.dim(0), transform)
            for p, cs in zip(predictions, candidates_per_workload)
        ]
        slack, ratio = evaluate_assignment(summaries, caps, tau, eta)
        points.append(EvalPoint(label, float(e), slack, ratio))
    return pareto_filter(points)


def _candidate_subsample(values: tuple[float, ...], cap: int = 10) -> tuple[float, ...]:
    if len(values) <= cap:
        return values
    idx = np.unique(np.linspace(0, len(values) - 1, cap).round().astype(int))
    return tuple(values[i] for i in idx)


def default_baseline(
    summaries: Sequence[WorkloadSummary],
    offerings: Sequence[str],
    catalog: dict[str, CandidateSet],
    label: str = "default",
    tau: float = 0.0,
    eta: float = 0.95,
) -> list[EvalPoint]:
    """Enumerate one default capacity per offering (cross product, capped at
    10 candidates per offering) and keep the non-dominated combinations."""
    present = sorted(set(offerings))
    per_offering = [_candidate_subsample(catalog[o].dim(0)) for o in present]
    points = []
    for combo in product(*per_offering):
        chosen = dict(zip(present, combo))
        caps = [chosen[o] for o in offerings]
        slack, ratio = evaluate_assignment(summaries, caps, tau, eta)
        points.append(EvalPoint(label, None, slack, ratio))
    return pareto_filter(points)


def best_point_below(
    points: Sequence[EvalPoint], throttling_bound: float = 0.10
) -> EvalPoint | None:
    """Curve point minimizing slack subject to throttling ratio below the
    bound."""
    eligible = [p for p in points if p.throttling_ratio < throttling_bound]
    if not eligible:
        return None
    return min(eligible, key=lambda p: p.mean_abs_slack)


def cost_extrapolation(
    mean_capacity_per_server: float,
    mean_throttled_hours_per_server: float,
    population: int,
) -> tuple[float, float]:
    """Linear extrapolation of per-server means to a population count."""
    return (
        mean_capacity_per_server * population,
        mean_throttled_hours_per_server * population,
    )
