"""Stage 1: rightsize the capacity of an existing workload from its
resampled utilization signal.

The optimizer balances two opposing statistics -- average slack ratio and
throttling probability -- and handles censored observations, where the
trace was truncated at the user-selected capacity and the true demand is
unknown.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    CandidateSet,
    ConfigError,
    EmptyWorkloadError,
    ResampledWorkload,
)


@dataclass(frozen=True)
class RightsizerConfig:
    bin_width: float = 5.0
    utilization_threshold: float | tuple[float, ...] = 0.95
    slack_target: float | tuple[float, ...] = 0.5
    throttling_bound: float = 0.0
    censoring_exponent: int = 1

    def __post_init__(self):
        for eta in np.atleast_1d(np.asarray(self.utilization_threshold, dtype=float)):
            if not 0 < eta < 1:
                raise ConfigError(f"utilization threshold must be in (0,1): {eta}")
        for s in np.atleast_1d(np.asarray(self.slack_target, dtype=float)):
            if not 0 <= s < 1:
                raise ConfigError(f"slack target must be in [0,1): {s}")
        if not 0 <= self.throttling_bound <= 1:
            raise ConfigError("throttling bound must be in [0,1]")
        if self.censoring_exponent < 1:
            raise ConfigError("censoring exponent must be >= 1")

    def eta(self, n_dims: int) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.utilization_threshold, dtype=float), (n_dims,)
        ).copy()

    def s_star(self, n_dims: int) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.slack_target, dtype=float), (n_dims,)
        ).copy()


@dataclass(frozen=True)
class CandidateDiagnostic:
    dimension: int
    candidate: float
    slack: tuple[float, ...]
    throttling: float
    feasible: bool


@dataclass(frozen=True)
class RightsizeResult:
    capacity: tuple[float, ...]
    censored: bool
    diagnostics: tuple[CandidateDiagnostic, ...]
    flags: tuple[str, ...] = ()


def throttling_probability(
    w: ResampledWorkload, c: Sequence[float], eta: Sequence[float] | float = 0.95
) -> float:
    """Fraction of bins where any dimension's usage exceeds eta_r * c_r."""
    if w.n_bins == 0:
        raise EmptyWorkloadError("workload has no bins")
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ConfigError("capacities must be positive")
    eta = np.broadcast_to(np.asarray(eta, dtype=float), c.shape)
    throttled = np.any(w.values > eta * c, axis=1)
    return float(np.mean(throttled))


def slack_ratio(w: ResampledWorkload, c: Sequence[float]) -> np.ndarray:
    """Per-dimension average of (c_r - w_r[n]) / c_r over observed bins."""
    if w.n_bins == 0:
        raise EmptyWorkloadError("workload has no bins")
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ConfigError("capacities must be positive")
    return np.mean((c - w.values) / c, axis=0)


def rightsize(
    w: ResampledWorkload,
    user_capacity: Sequence[float],
    candidates: CandidateSet,
    cfg: RightsizerConfig = RightsizerConfig(),
) -> RightsizeResult:
    """Select, per dimension, the candidate whose slack ratio is closest to
    the target.

    Uncensored workloads (no throttling at the user capacity) are constrained
    to candidates that keep the throttling probability within the bound;
    censored workloads are constrained to at least 2^K times the user
    capacity.  Ties prefer the smaller capacity; infeasible constraint sets
    fall back to the maximum candidate and are flagged.
    """
    c0 = np.asarray(user_capacity, dtype=float)
    n_dims = w.n_dims
    if candidates.n_dims != n_dims or c0.shape[0] != n_dims:
        raise ConfigError("dimension mismatch between workload, capacity and candidates")
    eta = cfg.eta(n_dims)
    s_star = cfg.s_star(n_dims)

    flags: list[str] = []
    for r in range(n_dims):
        if c0[r] not in candidates.dim(r):
            flags.append(f"user_capacity_not_candidate:dim{r}")

    censored = throttling_probability(w, c0, eta) > 0
    slack_cols = {}  # per-dimension slack for each candidate value
    result = np.empty(n_dims)
    diagnostics: list[CandidateDiagnostic] = []

    for r in range(n_dims):
        cands = candidates.dim(r)
        best = None
        best_key = None
        any_feasible = False
        for cand in cands:
            vec = c0.copy()
            vec[r] = cand
            s_vec = slack_ratio(w, vec)
            t = throttling_probability(w, vec, eta)
            if censored:
                feasible = cand >= 2 ** cfg.censoring_exponent * c0[r]
            else:
                feasible = t <= cfg.throttling_bound
            diagnostics.append(
                CandidateDiagnostic(
                    dimension=r,
                    candidate=cand,
                    slack=tuple(float(x) for x in s_vec),
                    throttling=t,
                    feasible=feasible,
                )
            )
            if not feasible:
                continue
            any_feasible = True
            key = (abs(s_vec[r] - s_star[r]), cand)
            if best_key is None or key < best_key:
                best_key = key
                best = cand
        if not any_feasible:
            best = cands[-1]
            flags.append(
                f"censored_clamped:dim{r}" if censored else f"constraint_infeasible:dim{r}"
            )
        result[r] = best

    return RightsizeResult(
        capacity=tuple(float(x) for x in result),
        censored=bool(censored),
        diagnostics=tuple(diagnostics),
        flags=tuple(flags),
    )
