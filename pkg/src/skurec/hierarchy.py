"""Learn the coarse-to-fine chain of categorical profile features from
pairwise entropy statistics.

A feature pair gets a directed edge coarse -> fine when knowing the fine
feature removes at least a threshold fraction of the coarse feature's
uncertainty (and the coarse feature has strictly lower entropy).  The chain
starts at the node with the highest out-degree and repeatedly steps to the
out-neighbor with the highest out-degree.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MISSING, NoHierarchyError

HIERARCHY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ProfileRecord:
    """Ordered categorical feature values plus the pre-selected server
    offering.  Missing entries use the MISSING token."""

    values: tuple[str, ...]
    offering: str = ""


@dataclass(frozen=True)
class HierarchyModel:
    feature_names: tuple[str, ...]
    chain: tuple[int, ...]  # feature indices, coarsest first
    intensity: np.ndarray  # intensity[fine, coarse] = UR(coarse | fine)
    threshold: float = 0.6

    @property
    def chain_names(self) -> tuple[str, ...]:
        return tuple(self.feature_names[i] for i in self.chain)

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": HIERARCHY_FORMAT_VERSION,
                "feature_names": list(self.feature_names),
                "chain": list(self.chain),
                "threshold": self.threshold,
                "intensity": self.intensity.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "HierarchyModel":
        d = json.loads(text)
        return cls(
            feature_names=tuple(d["feature_names"]),
            chain=tuple(d["chain"]),
            intensity=np.asarray(d["intensity"], dtype=float),
            threshold=float(d["threshold"]),
        )


def _column(X: Sequence[Sequence[str]], m: int) -> list[str]:
    return [row[m] for row in X]


def feature_entropy(X: Sequence[Sequence[str]], m: int) -> float:
    """Empirical entropy H(m) in bits.  MISSING counts as a category."""
    col = _column(X, m)
    n = len(col)
    counts = Counter(col)
    return -sum((k / n) * math.log2(k / n) for k in counts.values())


def conditional_entropy(X: Sequence[Sequence[str]], m1: int, m2: int) -> float:
    """Empirical conditional entropy H(m1 | m2) in bits."""
    col1 = _column(X, m1)
    col2 = _column(X, m2)
    n = len(col1)
    joint = Counter(zip(col1, col2))
    marg2 = Counter(col2)
    h = 0.0
    for (u, v), k in joint.items():
        p_uv = k / n
        p_v = marg2[v] / n
        h -= p_uv * math.log2(p_uv / p_v)
    # clip tiny negative float error
    return max(h, 0.0)


def uncertainty_reduction(X: Sequence[Sequence[str]], m1: int, m2: int) -> float:
    """Fraction of m1's entropy removed by knowing m2, in [0, 1].

    A constant (zero-entropy) m1 is degenerate and yields 0.
    """
    h1 = feature_entropy(X, m1)
    if h1 == 0.0:
        return 0.0
    ur = 1.0 - conditional_entropy(X, m1, m2) / h1
    return min(max(ur, 0.0), 1.0)


def learn_hierarchy(
    X: Sequence[Sequence[str]],
    feature_names: Sequence[str] | None = None,
    threshold: float = 0.6,
) -> HierarchyModel:
    """Build the thresholded intensity matrix and extract the greedy chain.

    Raises NoHierarchyError when no pair survives the threshold; callers
    typically fall back to schema order.
    """
    if len(X) < 2:
        raise ValueError("need at least 2 rows")
    n_feat = len(X[0])
    if n_feat < 2:
        raise ValueError("need at least 2 features")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(n_feat))
    feature_names = tuple(feature_names)

    entropies = [feature_entropy(X, m) for m in range(n_feat)]
    intensity = np.zeros((n_feat, n_feat))
    # intensity[fine, coarse]: how well the fine feature determines the coarse
    for fine in range(n_feat):
        for coarse in range(n_feat):
            if fine == coarse or not entropies[coarse] < entropies[fine]:
                continue
            ur = uncertainty_reduction(X, coarse, fine)
            if ur >= threshold:
                intensity[fine, coarse] = ur

    # adjacency: edge coarse -> fine for each nonzero intensity entry
    out_neighbors: dict[int, list[int]] = {m: [] for m in range(n_feat)}
    for fine in range(n_feat):
        for coarse in range(n_feat):
            if intensity[fine, coarse] > 0:
                out_neighbors[coarse].append(fine)
    out_degree = {m: len(v) for m, v in out_neighbors.items()}
    if all(d == 0 for d in out_degree.values()):
        raise NoHierarchyError("no feature pair survives the threshold")

    root = min(
        range(n_feat), key=lambda m: (-out_degree[m], entropies[m], m)
    )
    chain = [root]
    current = root
    visited = {root}
    while out_neighbors[current]:
        candidates = [m for m in out_neighbors[current] if m not in visited]
        if not candidates:
            break
        nxt = min(
            candidates,
            key=lambda m: (-out_degree[m], -intensity[m, current], m),
        )
        chain.append(nxt)
        visited.add(nxt)
        current = nxt

    return HierarchyModel(
        feature_names=feature_names,
        chain=tuple(chain),
        intensity=intensity,
        threshold=threshold,
    )
