"""Command line entry points for the recommendation pipeline.

Subcommands:

* ``gen-synthetic``   write a synthetic telemetry + profiles + catalog bundle
* ``rightsize``       capacity labels for existing workloads from telemetry
* ``learn-hierarchy`` learn the coarse-to-fine feature chain from profiles
* ``train``           fit a cold-start provisioner and publish predictions
* ``predict``         serve recommendations from a published prediction store
* ``evaluate``        slack/throttling curves for predictions vs the default
* ``simulate``        sensitivity-score convergence simulation
* ``update-profiles`` fold satisfaction signals into the score store

Exit codes: 0 success, 1 quality gate or model failure, 2 bad input data or
configuration.  Loaders skip malformed rows; a skip ratio above 1% is
treated as corrupt input (exit 2).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io_formats as iof
from .core import (
    ConfigError,
    DEFAULT_CATALOG,
    LogTransform,
    NoHierarchyError,
    resample,
)
from .datagen import (
    SyntheticDatasetSpec,
    UpscaleSpec,
    generate_synthetic,
    rightsize_dataset,
    upscale,
)
from .evaluator import (
    WorkloadSummary,
    best_point_below,
    default_baseline,
    pareto_curve,
)
from .hierarchy import HierarchyModel, learn_hierarchy
from .personalizer import LambdaStore, PropagationConfig
from .provisioners import (
    HierarchicalProvisioner,
    PredictionStore,
    StratifiedProvisioner,
    TargetEncodingProvisioner,
)
from .rightsizer import RightsizerConfig, rightsize
from .simulator import SimConfig, convergence_iteration, run

log = logging.getLogger("skurec")

MAX_SKIP_RATIO = 0.01

PREDICTION_STORE_FORMAT_VERSION = 1


class DataError(Exception):
    """Input data problem; maps to exit code 2."""


class GateError(Exception):
    """Quality gate failure; maps to exit code 1."""


def _check_report(report: iof.LoadReport, what: str) -> None:
    if report.n_skipped:
        log.warning(
            "%s: skipped %d of %d rows (lines %s)",
            what,
            report.n_skipped,
            report.n_rows,
            ", ".join(str(n) for n in (report.bad_lines or [])),
        )
    if report.skip_ratio > MAX_SKIP_RATIO:
        raise DataError(
            f"{what}: {report.n_skipped}/{report.n_rows} malformed rows "
            f"(> {MAX_SKIP_RATIO:.0%} budget)"
        )


def _load_catalog(path: str | None):
    if path is None:
        return dict(DEFAULT_CATALOG)
    return iof.load_catalog_csv(path)


def _config_overrides(args: argparse.Namespace) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    return iof.load_json_config(args.config)


def _get(args: argparse.Namespace, cfg: dict, name: str, default):
    """CLI flag wins over config file wins over built-in default."""
    v = getattr(args, name.replace("-", "_"), None)
    if v is not None:
        return v
    if name in cfg:
        return cfg[name]
    return default


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    spec = SyntheticDatasetSpec(
        n_customers=int(_get(args, cfg, "customers", 30)),
        subscriptions_per_customer=int(_get(args, cfg, "subscriptions", 2)),
        resource_groups_per_subscription=int(_get(args, cfg, "resource-groups", 3)),
        resources_per_group=int(_get(args, cfg, "resources", 4)),
        duration_minutes=float(_get(args, cfg, "duration-minutes", 24 * 60)),
        missing_rate=float(_get(args, cfg, "missing-rate", 0.0)),
        seed=int(_get(args, cfg, "seed", 0)),
    )
    ds = generate_synthetic(spec)
    if args.upscale:
        ds = upscale(ds, UpscaleSpec(seed=spec.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    iof.save_telemetry_csv(os.path.join(args.out_dir, "telemetry.csv"), ds.traces)
    iof.save_profiles_csv(
        os.path.join(args.out_dir, "profiles.csv"),
        ds.feature_names,
        ds.resource_ids,
        ds.profiles,
        ds.user_capacities,
    )
    iof.save_catalog_csv(os.path.join(args.out_dir, "catalog.csv"), ds.catalog)
    iof.atomic_write_text(
        os.path.join(args.out_dir, "manifest.json"), json.dumps(ds.manifest, indent=2)
    )
    print(f"wrote {len(ds.resource_ids)} resources to {args.out_dir}")
    return 0


def cmd_rightsize(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    rcfg = RightsizerConfig(
        bin_width=float(_get(args, cfg, "bin-width", 5.0)),
        utilization_threshold=float(_get(args, cfg, "utilization-threshold", 0.95)),
        slack_target=float(_get(args, cfg, "slack-target", 0.5)),
        throttling_bound=float(_get(args, cfg, "throttling-bound", 0.0)),
        censoring_exponent=int(_get(args, cfg, "censoring-exponent", 1)),
    )
    traces, rep = iof.load_telemetry_csv(args.telemetry)
    _check_report(rep, "telemetry")
    feature_names, rids, profiles, user_caps, prep = iof.load_profiles_csv(args.profiles)
    _check_report(prep, "profiles")
    catalog = _load_catalog(args.catalog)

    results = {}
    missing = 0
    for rid, prof in zip(rids, profiles):
        trace = traces.get(rid)
        if trace is None:
            missing += 1
            continue
        if prof.offering not in catalog:
            raise DataError(f"offering {prof.offering!r} not in catalog")
        w = resample(trace, rcfg.bin_width)
        results[rid] = rightsize(w, [user_caps[rid]], catalog[prof.offering], rcfg)
    if missing:
        log.warning("no telemetry for %d profiled resources", missing)
    if not results:
        raise DataError("no resources had both telemetry and a profile")
    iof.save_rightsize_csv(args.out, results, {rid: [user_caps[rid]] for rid in results})
    n_cens = sum(r.censored for r in results.values())
    n = len(results)
    over = sum(1 for rid, r in results.items() if r.capacity[0] < user_caps[rid])
    under = sum(1 for rid, r in results.items() if r.capacity[0] > user_caps[rid])
    print(f"rightsized {n} resources ({n_cens} censored) -> {args.out}")
    print(
        f"over-provisioned {over / n:.1%}  under-provisioned {under / n:.1%}  "
        f"right-sized {(n - over - under) / n:.1%}"
    )
    return 0


def cmd_learn_hierarchy(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    threshold = float(_get(args, cfg, "threshold", 0.6))
    feature_names, _, profiles, _, rep = iof.load_profiles_csv(args.profiles)
    _check_report(rep, "profiles")
    X = [p.values for p in profiles]
    try:
        model = learn_hierarchy(X, feature_names, threshold)
    except NoHierarchyError as e:
        print(f"no hierarchy: {e}", file=sys.stderr)
        return 1
    iof.atomic_write_text(args.out, model.to_json())
    print("chain:", " > ".join(model.chain_names))
    return 0


def _split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded 80/10/10 train/validation/test split."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_tr = int(round(0.8 * n))
    n_va = int(round(0.1 * n))
    return perm[:n_tr], perm[n_tr : n_tr + n_va], perm[n_tr + n_va :]


def _log_mae(provisioner, rows, labels, transform=LogTransform()) -> float:
    """Mean |log2 predicted - log2 label| over a holdout."""
    errs = [
        abs(
            transform.transform(provisioner.predict(row).capacity)
            - transform.transform(lab)
        )
        for row, lab in zip(rows, labels)
    ]
    return float(np.mean(errs)) if errs else 0.0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    model_kind = _get(args, cfg, "model", "hierarchical")
    min_bucket = int(_get(args, cfg, "min-bucket", 10))
    percentile = float(_get(args, cfg, "percentile", 50.0))
    seed = int(_get(args, cfg, "seed", 0))
    max_val_error = float(_get(args, cfg, "max-val-error", 1.0))

    feature_names, rids, profiles, _, prep = iof.load_profiles_csv(args.profiles)
    _check_report(prep, "profiles")
    labels_by_rid, lrep = iof.load_labels_csv(args.labels)
    _check_report(lrep, "labels")
    catalog = _load_catalog(args.catalog)

    rows, labels = [], []
    for rid, prof in zip(rids, profiles):
        lab = labels_by_rid.get(rid)
        if lab is not None:
            rows.append(prof)
            labels.append(lab)
    if not rows:
        raise DataError("no resources have both a profile and a label")

    if args.hierarchy:
        with open(args.hierarchy) as f:
            hier = HierarchyModel.from_json(f.read())
    else:
        hier = learn_hierarchy([p.values for p in rows], feature_names)

    tr, va, te = _split_indices(len(rows), seed)
    rows_tr = [rows[i] for i in tr]
    labs_tr = [labels[i] for i in tr]

    if model_kind == "hierarchical":
        factory = lambda cands: HierarchicalProvisioner(
            hierarchy=hier,
            candidates=cands,
            min_bucket=min_bucket,
            percentile=percentile,
        )
    elif model_kind == "target-encoding":
        factory = lambda cands: TargetEncodingProvisioner(candidates=cands, seed=seed)
    else:
        raise DataError(f"unknown model kind {model_kind!r}")
    prov = StratifiedProvisioner(factory=factory, catalog=catalog)
    prov.fit(rows_tr, labs_tr)

    val_err = _log_mae(prov, [rows[i] for i in va], [labels[i] for i in va])
    test_err = _log_mae(prov, [rows[i] for i in te], [labels[i] for i in te])
    print(
        f"train={len(tr)} val={len(va)} test={len(te)} "
        f"val_log_mae={val_err:.4f} test_log_mae={test_err:.4f}"
    )
    if val_err > max_val_error:
        print(
            f"validation gate failed: {val_err:.4f} > {max_val_error}",
            file=sys.stderr,
        )
        return 1

    if model_kind == "hierarchical":
        _save_prediction_store(args.out, feature_names, hier, prov, catalog)
        if args.rows_out:
            all_rows = []
            for model in prov.models.values():
                all_rows.extend(model.export_rows())
            iof.save_prediction_rows_csv(args.rows_out, all_rows)
        print(f"prediction store -> {args.out}")
    else:
        # tree ensembles are served in-process; publish only the metrics
        if args.out:
            iof.atomic_write_text(
                args.out,
                json.dumps(
                    {
                        "model": model_kind,
                        "val_log_mae": val_err,
                        "test_log_mae": test_err,
                    },
                    indent=2,
                ),
            )
    return 0


def _save_prediction_store(path, feature_names, hier, prov, catalog) -> None:
    entries = []
    chains = {}
    defaults = {}
    for offering, model in prov.models.items():
        chains[offering] = list(hier.chain_names)
        defaults[offering] = model.default_capacity
        entries.extend(model.export_rows())
    for offering in prov.default_only:
        defaults[offering] = catalog[offering].dim(0)[0]
    iof.atomic_write_text(
        path,
        json.dumps(
            {
                "version": PREDICTION_STORE_FORMAT_VERSION,
                "feature_names": list(feature_names),
                "chains": chains,
                "defaults": defaults,
                "entries": entries,
            },
            indent=2,
        ),
    )


def load_prediction_store(path: str) -> PredictionStore:
    with open(path) as f:
        d = json.load(f)
    entries = {
        (e["offering"], e["hierarchy_level"], e["feature_value"]): (
            float(e["recommended_capacity"]),
            int(e["support_count"]),
        )
        for e in d["entries"]
    }
    return PredictionStore(
        chain_names_by_offering={o: tuple(c) for o, c in d["chains"].items()},
        entries=entries,
        defaults={o: float(v) for o, v in d["defaults"].items()},
        feature_names=tuple(d["feature_names"]),
    )


def cmd_predict(args: argparse.Namespace) -> int:
    store = load_prediction_store(args.store)
    feature_names, rids, profiles, _, rep = iof.load_profiles_csv(args.profiles)
    _check_report(rep, "profiles")
    if feature_names != store.feature_names:
        raise DataError(
            f"profile schema {feature_names} does not match store "
            f"schema {store.feature_names}"
        )
    lam_store = None
    if args.lambda_store:
        lam_store = iof.load_lambda_store(args.lambda_store)
    catalog = _load_catalog(args.catalog)

    out = [
        "resource_id,capacity,matched_level,matched_value,support,default_fallback"
    ]
    for rid, prof in zip(rids, profiles):
        rec = store.lookup(prof)
        cap = rec.capacity
        if lam_store is not None and prof.offering in catalog:
            # personalize: profile features carry the customer topology
            cu, su, rg = _topology_from_profile(feature_names, prof)
            lam = lam_store.lookup(cu, su, rg, prof.offering)
            if lam:
                from .personalizer import adjust

                cap = adjust(cap, lam, catalog[prof.offering])
        out.append(
            f"{rid},{cap:g},{rec.level_name or ''},{rec.matched_value or ''},"
            f"{rec.support},{int(rec.default_fallback)}"
        )
    iof.atomic_write_text(args.out, "\n".join(out) + "\n")
    print(f"predicted {len(rids)} resources -> {args.out}")
    return 0


def _topology_from_profile(feature_names, prof) -> tuple[str, str, str]:
    def get(name: str) -> str:
        return prof.values[feature_names.index(name)] if name in feature_names else ""

    return get("CloudCustomerGuid"), get("SubscriptionId"), get("ResourceGroup")


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    tau = float(_get(args, cfg, "throttling-bound", 0.0))
    eta = float(_get(args, cfg, "utilization-threshold", 0.95))
    bin_width = float(_get(args, cfg, "bin-width", 5.0))
    bound = float(_get(args, cfg, "curve-bound", 0.10))

    traces, trep = iof.load_telemetry_csv(args.telemetry)
    _check_report(trep, "telemetry")
    feature_names, rids, profiles, _, prep = iof.load_profiles_csv(args.profiles)
    _check_report(prep, "profiles")
    preds, vrep = iof.load_labels_csv(args.predictions)
    _check_report(vrep, "predictions")
    catalog = _load_catalog(args.catalog)

    summaries, predictions, cand_sets, offerings = [], [], [], []
    for rid, prof in zip(rids, profiles):
        if rid not in traces or rid not in preds:
            continue
        w = resample(traces[rid], bin_width)
        summaries.append(WorkloadSummary.from_workload(w))
        predictions.append(preds[rid])
        cand_sets.append(catalog[prof.offering])
        offerings.append(prof.offering)
    if not summaries:
        raise DataError("no resources have telemetry, a profile and a prediction")

    model_pts = pareto_curve(
        summaries, predictions, cand_sets, label="model", tau=tau, eta=eta
    )
    base_pts = default_baseline(
        summaries, offerings, catalog, label="default", tau=tau, eta=eta
    )
    iof.save_curve_csv(args.out, list(model_pts) + list(base_pts))

    mb = best_point_below(model_pts, bound)
    bb = best_point_below(base_pts, bound)
    for name, p in (("model", mb), ("default", bb)):
        if p is None:
            print(f"{name}: no point with throttling ratio < {bound:g}")
        else:
            print(
                f"{name}: slack={p.mean_abs_slack:.4f} "
                f"throttling={p.throttling_ratio:.4f}"
            )
    print(f"curves -> {args.out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    sim = SimConfig(
        sigma=float(_get(args, cfg, "sigma", 0.1)),
        signal_rate=float(_get(args, cfg, "signal-rate", 0.4)),
        signal_noise=float(_get(args, cfg, "signal-noise", 0.13)),
        epsilon_mode=str(_get(args, cfg, "epsilon-mode", "multiplicative")),
        seed=int(_get(args, cfg, "seed", 0)),
    )
    iters = int(_get(args, cfg, "iterations", 50))
    state = run(sim, iters)
    if args.out:
        iof.save_sim_metrics_csv(args.out, state.history)
    conv = convergence_iteration(state)
    final = state.history[-1]
    print(
        f"iterations={iters} final_rmse={final.rmse:.4f} "
        f"final_p80={final.p80_error:.4f} "
        f"converged_at={'never' if conv is None else conv}"
    )
    return 0


def cmd_update_profiles(args: argparse.Namespace) -> int:
    cfg = _config_overrides(args)
    pcfg = PropagationConfig(
        learning_rate=float(_get(args, cfg, "learning-rate", 0.3)),
        decay_stratification=float(_get(args, cfg, "decay-stratification", 0.25)),
        decay_resource_group=float(_get(args, cfg, "decay-resource-group", 0.25)),
        decay_subscription=float(_get(args, cfg, "decay-subscription", 0.25)),
    )
    signals, rep = iof.load_signals_csv(args.signals)
    _check_report(rep, "signals")
    with iof.FileLock(args.store):
        if os.path.exists(args.store):
            store = iof.load_lambda_store(args.store)
        else:
            store = LambdaStore()
        for sig in signals:
            store.propagate(sig, pcfg)
        store.version += 1  # one bump per applied batch, even an empty one
        iof.save_lambda_store(args.store, store)
    print(f"applied {len(signals)} signals -> {args.store}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skurec", description="capacity/SKU recommendation pipeline"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON file with option defaults")
        return p

    p = add(name="gen-synthetic", fn=cmd_gen_synthetic, help="synthetic data bundle")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--customers", type=int)
    p.add_argument("--subscriptions", type=int)
    p.add_argument("--resources", type=int)
    p.add_argument("--missing-rate", type=float)
    p.add_argument("--upscale", action="store_true", help="apply label upscaling")

    p = add(name="rightsize", fn=cmd_rightsize, help="capacity labels from telemetry")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)
    p.add_argument("--bin-width", type=float)
    p.add_argument("--slack-target", type=float)
    p.add_argument("--throttling-bound", type=float)

    p = add(name="learn-hierarchy", fn=cmd_learn_hierarchy, help="feature chain")
    p.add_argument("--profiles", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)

    p = add(name="train", fn=cmd_train, help="fit a cold-start provisioner")
    p.add_argument("--profiles", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--hierarchy", help="hierarchy model JSON (learned if omitted)")
    p.add_argument("--catalog")
    p.add_argument("--model", choices=["hierarchical", "target-encoding"])
    p.add_argument("--min-bucket", type=int)
    p.add_argument("--percentile", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-val-error", type=float)
    p.add_argument("--out", required=True, help="prediction store JSON")
    p.add_argument("--rows-out", help="also export prediction rows CSV")

    p = add(name="predict", fn=cmd_predict, help="serve from a prediction store")
    p.add_argument("--store", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--lambda-store", help="personalization score store JSON")
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)

    p = add(name="evaluate", fn=cmd_evaluate, help="slack/throttling curves")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--predictions", required=True, help="csv resource_id,capacity")
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)

    p = add(name="simulate", fn=cmd_simulate, help="score convergence simulation")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--signal-rate", type=float)
    p.add_argument("--signal-noise", type=float)
    p.add_argument("--epsilon-mode", choices=["multiplicative", "additive"])
    p.add_argument("--out")

    p = add(name="update-profiles", fn=cmd_update_profiles, help="apply signals")
    p.add_argument("--store", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--learning-rate", type=float)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (DataError, ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GateError as e:
        print(f"gate failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
