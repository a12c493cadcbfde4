"""Shared domain types: workload traces, candidate SKU sets, log-space
transforms, and discretization onto candidate capacities.

All types are immutable after construction and all operations are pure
functions, so everything here is safe to call concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MISSING = "MISSING"

# Standard server offerings; anything else is treated as a custom offering.
BURSTABLE = "Burstable"
GENERAL_PURPOSE = "GeneralPurpose"
MEMORY_OPTIMIZED = "MemoryOptimized"

STANDARD_OFFERINGS = (BURSTABLE, GENERAL_PURPOSE, MEMORY_OPTIMIZED)


class EmptyTraceError(ValueError):
    """Raised when an operation needs at least one raw telemetry sample."""


class EmptyWorkloadError(ValueError):
    """Raised when an operation needs at least one resampled bin."""


class DomainError(ValueError):
    """Raised for arguments outside an operation's mathematical domain."""


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration."""


class NotFittedError(RuntimeError):
    """Raised when predicting with a model that has not been fitted."""


class NoHierarchyError(RuntimeError):
    """Raised when no feature pair survives the hierarchy threshold."""


class EmptyDatasetError(ValueError):
    """Raised when a dataset-level metric receives no workloads."""


class EmptyHistoryError(ValueError):
    """Raised when a metric history has no recorded iterations."""


@dataclass(frozen=True)
class ResourceDim:
    """One resource dimension (e.g. vCores, memoryGB) with a dense index."""

    index: int
    name: str


@dataclass(frozen=True)
class CandidateSet:
    """Per-offering candidate capacities, one strictly ascending tuple per
    resource dimension."""

    offering: str
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigError("candidate set needs at least one dimension")
        for dim_vals in self.values:
            if not dim_vals:
                raise ConfigError("candidate set dimension is empty")
            if any(v <= 0 for v in dim_vals):
                raise ConfigError("candidate capacities must be positive")
            if any(b <= a for a, b in zip(dim_vals, dim_vals[1:])):
                raise ConfigError("candidate capacities must be strictly ascending")

    @property
    def n_dims(self) -> int:
        return len(self.values)

    def dim(self, r: int) -> tuple[float, ...]:
        return self.values[r]


def single_dim_candidates(offering: str, values: Sequence[float]) -> CandidateSet:
    return CandidateSet(offering=offering, values=(tuple(float(v) for v in values),))


#: Candidate vCore capacities per standard offering.
DEFAULT_CATALOG = {
    BURSTABLE: single_dim_candidates(BURSTABLE, [1, 2, 4, 8, 20]),
    GENERAL_PURPOSE: single_dim_candidates(
        GENERAL_PURPOSE, [2, 4, 8, 16, 32, 48, 64, 96, 128]
    ),
    MEMORY_OPTIMIZED: single_dim_candidates(
        MEMORY_OPTIMIZED, [2, 4, 8, 16, 20, 32, 48, 64, 96, 128]
    ),
}


@dataclass(frozen=True)
class WorkloadTrace:
    """Irregularly sampled raw utilization: timestamps in minutes plus a
    (n_samples, n_dims) usage matrix."""

    resource_id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.shape[0] != values.shape[0]:
            raise ConfigError("times and values length mismatch")
        if times.size and np.any(np.diff(times) < 0):
            raise ConfigError("timestamps must be non-decreasing")

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ResampledWorkload:
    """Regular max-aggregated usage signal: retained bin indices plus a
    (n_bins, n_dims) matrix.  Bins without any raw sample are absent."""

    bin_width: float
    bin_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.bin_indices, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "bin_indices", idx)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LogTransform:
    """log_b transform used to fit models in a scale where the candidate
    capacities are (roughly) linear."""

    base: float = 2.0

    def __post_init__(self):
        if self.base <= 0 or self.base == 1:
            raise ConfigError("log base must be positive and != 1")

    def transform(self, v: float) -> float:
        if v <= 0:
            raise DomainError(f"transform requires v > 0, got {v}")
        return math.log(v, self.base)

    def inverse(self, y: float) -> float:
        return self.base ** y

    def transform_array(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0):
            raise DomainError("transform requires all values > 0")
        return np.log(v) / math.log(self.base)

    def inverse_array(self, y: np.ndarray) -> np.ndarray:
        return np.power(self.base, np.asarray(y, dtype=float))


def resample(trace: WorkloadTrace, bin_width: float) -> ResampledWorkload:
    """Bin raw samples into bin_width-minute bins, taking the per-dimension
    max within each bin.  Bins containing no samples are omitted rather than
    zero-filled, so downstream averages only see observed periods."""
    if bin_width <= 0:
        raise ConfigError("bin width must be positive")
    if trace.times.size == 0:
        raise EmptyTraceError(f"trace {trace.resource_id!r} has no samples")
    bins = np.floor(trace.times / bin_width).astype(int)
    uniq, inverse = np.unique(bins, return_inverse=True)
    out = np.full((uniq.size, trace.n_dims), -np.inf)
    np.maximum.at(out, inverse, trace.values)
    return ResampledWorkload(bin_width=bin_width, bin_indices=uniq, values=out)


def discretize(
    value: float,
    candidates: Sequence[float],
    transform: LogTransform = LogTransform(),
) -> float:
    """Snap a positive value to the nearest candidate in log space.

    Exact midpoints round up (throttling is costlier than slack); values
    outside the candidate range clamp to the nearest endpoint.
    """
    cands = list(candidates)
    if not cands:
        raise ConfigError("empty candidate list")
    if value <= 0:
        raise DomainError(f"discretize requires value > 0, got {value}")
    if value <= cands[0]:
        return cands[0]
    if value >= cands[-1]:
        return cands[-1]
    x = transform.transform(value)
    logs = [transform.transform(c) for c in cands]
    hi = int(np.searchsorted(logs, x, side="left"))
    lo = hi - 1
    if logs[hi] - x <= x - logs[lo]:
        return cands[hi]
    return cands[lo]
