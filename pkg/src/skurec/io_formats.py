"""File formats for the command-line pipeline.

CSV layouts (all with a header row):

* telemetry: ``resource_id,timestamp_min,dimension,value`` -- raw
  utilization samples, one row per sample and dimension.
* profiles: ``resource_id,offering,user_capacity,<feature columns...>`` --
  categorical profile per resource; the feature column names define the
  feature schema.
* catalog: ``offering,dimension,candidates`` with candidates ``|``-separated.
* rightsize output: ``resource_id,dimension,user_capacity,
  rightsized_capacity,censored,slack_at_rightsized,throttle_at_rightsized``.
* prediction rows: ``offering,hierarchy_level,feature_value,
  recommended_capacity,support_count``.
* curve: ``model,exponent,mean_abs_slack,throttling_ratio,dominated``.
* simulation metrics: ``iteration,rmse,p80_error,n_signals``.
* signals: ``customer,subscription,resource_group,stratification,strength,
  source``.

Loaders tolerate malformed rows: they skip them and report the skip count so
callers can enforce a corruption budget.  Writers are atomic (write to a
temp file in the same directory, then rename).
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import CandidateSet, ConfigError, WorkloadTrace, single_dim_candidates
from .hierarchy import ProfileRecord
from .personalizer import SIGNAL_SOURCES, LambdaStore, SatisfactionSignal
from .rightsizer import RightsizeResult
from .simulator import IterationMetrics


@dataclass
class LoadReport:
    """Row accounting for a tolerant loader."""

    n_rows: int = 0
    n_skipped: int = 0
    bad_lines: list = None  # 1-based file line numbers, capped

    MAX_RECORDED = 50

    def skip(self, line_num: int) -> None:
        self.n_skipped += 1
        if self.bad_lines is None:
            self.bad_lines = []
        if len(self.bad_lines) < self.MAX_RECORDED:
            self.bad_lines.append(line_num)

    @property
    def skip_ratio(self) -> float:
        return self.n_skipped / self.n_rows if self.n_rows else 0.0


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and rename, so a
    concurrent reader never observes a partial file."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class FileLock:
    """Minimal advisory lock: exclusive creation of ``<path>.lock``.

    Good enough to serialize score-store updates between cooperating
    processes on one host.
    """

    def __init__(self, path: str):
        self.lock_path = path + ".lock"
        self._fd: int | None = None

    def __enter__(self) -> "FileLock":
        try:
            self._fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"lock file exists: {self.lock_path} (another update in progress?)"
            )
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc) -> None:
        if self._fd is not None:
            os.close(self._fd)
            os.unlink(self.lock_path)


# ---------------------------------------------------------------------------
# telemetry


def load_telemetry_csv(path: str) -> tuple[dict[str, WorkloadTrace], LoadReport]:
    # samples[rid][t][dim] = value; a timestamp is kept only when every
    # dimension the resource uses is present at it
    samples: dict[str, dict[float, dict[int, float]]] = {}
    report = LoadReport()
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"resource_id", "timestamp_min", "dimension", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ConfigError(f"telemetry csv needs columns {sorted(required)}")
        for row in reader:
            report.n_rows += 1
            try:
                rid = row["resource_id"]
                t = float(row["timestamp_min"])
                dim = int(row["dimension"])
                v = float(row["value"])
                if (
                    not rid
                    or dim < 0
                    or not np.isfinite(t)
                    or not np.isfinite(v)
                    or v < 0
                ):
                    raise ValueError
            except (TypeError, ValueError):
                report.skip(reader.line_num)
                continue
            samples.setdefault(rid, {}).setdefault(t, {})[dim] = v
    traces = {}
    for rid, by_t in samples.items():
        dims = sorted({d for row in by_t.values() for d in row})
        times, values = [], []
        for t in sorted(by_t):
            row = by_t[t]
            if len(row) != len(dims):
                continue
            times.append(t)
            values.append([row[d] for d in dims])
        if times:
            traces[rid] = WorkloadTrace(
                resource_id=rid,
                times=np.asarray(times, dtype=float),
                values=np.asarray(values, dtype=float),
            )
    return traces, report


def save_telemetry_csv(path: str, traces: dict[str, WorkloadTrace]) -> None:
    rows = ["resource_id,timestamp_min,dimension,value"]
    for rid in sorted(traces):
        tr = traces[rid]
        for i, t in enumerate(tr.times):
            for dim in range(tr.n_dims):
                rows.append(f"{rid},{t:.6g},{dim},{tr.values[i, dim]:.8g}")
    atomic_write_text(path, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# profiles


def load_profiles_csv(
    path: str,
) -> tuple[tuple[str, ...], list[str], list[ProfileRecord], dict[str, float], LoadReport]:
    """Returns (feature_names, resource_ids, profiles, user_capacities, report)."""
    report = LoadReport()
    resource_ids: list[str] = []
    profiles: list[ProfileRecord] = []
    user_caps: dict[str, float] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[:3] != ["resource_id", "offering", "user_capacity"]:
            raise ConfigError(
                "profiles csv must start with resource_id,offering,user_capacity"
            )
        feature_names = tuple(header[3:])
        if not feature_names:
            raise ConfigError("profiles csv has no feature columns")
        for row in reader:
            report.n_rows += 1
            try:
                if len(row) != len(header):
                    raise ValueError
                rid, offering, cap_s = row[0], row[1], row[2]
                cap = float(cap_s)
                if not rid or not offering or cap <= 0:
                    raise ValueError
            except (TypeError, ValueError):
                report.skip(reader.line_num)
                continue
            resource_ids.append(rid)
            profiles.append(ProfileRecord(values=tuple(row[3:]), offering=offering))
            user_caps[rid] = cap
    return feature_names, resource_ids, profiles, user_caps, report


def save_profiles_csv(
    path: str,
    feature_names: Sequence[str],
    resource_ids: Sequence[str],
    profiles: Sequence[ProfileRecord],
    user_caps: dict[str, float],
) -> None:
    out = [",".join(["resource_id", "offering", "user_capacity", *feature_names])]
    for rid, p in zip(resource_ids, profiles):
        out.append(",".join([rid, p.offering, f"{user_caps[rid]:.8g}", *p.values]))
    atomic_write_text(path, "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# catalog


def load_catalog_csv(path: str) -> dict[str, CandidateSet]:
    per_offering: dict[str, dict[int, tuple[float, ...]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"offering", "dimension", "candidates"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ConfigError(f"catalog csv needs columns {sorted(required)}")
        for row in reader:
            vals = tuple(float(x) for x in row["candidates"].split("|"))
            per_offering.setdefault(row["offering"], {})[int(row["dimension"])] = vals
    if not per_offering:
        raise ConfigError("catalog csv is empty")
    catalog: dict[str, CandidateSet] = {}
    for offering, dims in per_offering.items():
        if sorted(dims) != list(range(len(dims))):
            raise ConfigError(f"catalog dimensions for {offering!r} are not dense")
        catalog[offering] = CandidateSet(
            offering=offering, values=tuple(dims[d] for d in sorted(dims))
        )
    return catalog


def save_catalog_csv(path: str, catalog: dict[str, CandidateSet]) -> None:
    rows = ["offering,dimension,candidates"]
    for offering in sorted(catalog):
        for dim in range(catalog[offering].n_dims):
            vals = "|".join(f"{v:g}" for v in catalog[offering].dim(dim))
            rows.append(f"{offering},{dim},{vals}")
    atomic_write_text(path, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# rightsize output


def save_rightsize_csv(
    path: str,
    results: dict[str, RightsizeResult],
    user_caps: dict[str, Sequence[float]],
) -> None:
    rows = [
        "resource_id,dimension,user_capacity,rightsized_capacity,censored,"
        "slack_at_rightsized,throttle_at_rightsized,flags"
    ]
    for rid in sorted(results):
        res = results[rid]
        caps = np.atleast_1d(np.asarray(user_caps[rid], dtype=float))
        for dim, cap in enumerate(res.capacity):
            slack = throttle = ""
            for d in res.diagnostics:
                if d.dimension == dim and d.candidate == cap:
                    slack = f"{d.slack[dim]:.6g}"
                    throttle = f"{d.throttling:.6g}"
            rows.append(
                f"{rid},{dim},{caps[dim]:g},{cap:g},{int(res.censored)},"
                f"{slack},{throttle}," + "|".join(res.flags)
            )
    atomic_write_text(path, "\n".join(rows) + "\n")


def load_labels_csv(path: str) -> tuple[dict[str, float], LoadReport]:
    """Dimension-0 capacity label per resource; accepts the rightsize output
    format (``rightsized_capacity`` column) or any csv with a plain
    ``capacity`` column."""
    labels: dict[str, float] = {}
    report = LoadReport()
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        fields = set(reader.fieldnames or ())
        if "resource_id" not in fields or not fields & {"capacity", "rightsized_capacity"}:
            raise ConfigError(
                "labels csv needs resource_id plus capacity or rightsized_capacity"
            )
        col = "rightsized_capacity" if "rightsized_capacity" in fields else "capacity"
        for row in reader:
            report.n_rows += 1
            try:
                if row.get("dimension") not in (None, "", "0"):
                    continue  # labels are single-dimension, keep dim 0
                cap = float(row[col])
                if not row["resource_id"] or cap <= 0:
                    raise ValueError
            except (TypeError, ValueError):
                report.skip(reader.line_num)
                continue
            labels[row["resource_id"]] = cap
    return labels, report


# ---------------------------------------------------------------------------
# prediction rows / curve / simulation


def save_prediction_rows_csv(path: str, rows: Iterable[dict]) -> None:
    out = ["offering,hierarchy_level,feature_value,recommended_capacity,support_count"]
    for r in rows:
        out.append(
            f"{r['offering']},{r['hierarchy_level']},{r['feature_value']},"
            f"{r['recommended_capacity']:g},{r['support_count']}"
        )
    atomic_write_text(path, "\n".join(out) + "\n")


def save_curve_csv(path: str, points) -> None:
    out = ["model,exponent,mean_abs_slack,throttling_ratio,dominated"]
    for p in points:
        e = "" if p.exponent is None else f"{p.exponent:g}"
        out.append(
            f"{p.label},{e},{p.mean_abs_slack:.8g},{p.throttling_ratio:.8g},"
            f"{int(p.dominated)}"
        )
    atomic_write_text(path, "\n".join(out) + "\n")


def save_sim_metrics_csv(path: str, history: Sequence[IterationMetrics]) -> None:
    out = ["iteration,rmse,p80_error,n_signals"]
    for m in history:
        out.append(f"{m.iteration},{m.rmse:.8g},{m.p80_error:.8g},{m.n_signals}")
    atomic_write_text(path, "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# satisfaction signals


def load_signals_csv(path: str) -> tuple[list[SatisfactionSignal], LoadReport]:
    signals: list[SatisfactionSignal] = []
    report = LoadReport()
    required = {
        "customer",
        "subscription",
        "resource_group",
        "stratification",
        "strength",
        "source",
    }
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ConfigError(f"signals csv needs columns {sorted(required)}")
        for row in reader:
            report.n_rows += 1
            try:
                strength = float(row["strength"])
                source = row["source"]
                if source not in SIGNAL_SOURCES:
                    raise ValueError
                sig = SatisfactionSignal(
                    customer=row["customer"],
                    subscription=row["subscription"],
                    resource_group=row["resource_group"],
                    stratification=row["stratification"],
                    strength=strength,
                    source=source,
                )
                if not sig.customer or not sig.subscription:
                    raise ValueError
            except (TypeError, ValueError):
                report.skip(reader.line_num)
                continue
            signals.append(sig)
    return signals, report


def save_signals_csv(path: str, signals: Sequence[SatisfactionSignal]) -> None:
    out = ["customer,subscription,resource_group,stratification,strength,source"]
    for s in signals:
        out.append(
            f"{s.customer},{s.subscription},{s.resource_group},"
            f"{s.stratification},{s.strength:g},{s.source}"
        )
    atomic_write_text(path, "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# score store


def load_lambda_store(path: str) -> LambdaStore:
    with open(path) as f:
        return LambdaStore.from_json(f.read())


def save_lambda_store(path: str, store: LambdaStore) -> None:
    atomic_write_text(path, store.to_json())


def load_json_config(path: str) -> dict:
    with open(path) as f:
        d = json.load(f)
    if not isinstance(d, dict):
        raise ConfigError("config file must contain a JSON object")
    return d
