import numpy as np
import pytest

from skurec.core import (
    DEFAULT_CATALOG,
    EmptyDatasetError,
    GENERAL_PURPOSE,
    ResampledWorkload,
    single_dim_candidates,
)
from skurec.evaluator import (
    DEFAULT_EXPONENT_GRID,
    EvalPoint,
    WorkloadSummary,
    absolute_slack,
    best_point_below,
    cost_extrapolation,
    default_baseline,
    evaluate_assignment,
    mark_dominated,
    pareto_curve,
    pareto_filter,
    throttling_ratio,
)

GP = DEFAULT_CATALOG[GENERAL_PURPOSE]


def wl(values):
    values = np.asarray(values, float)
    if values.ndim == 1:
        values = values[:, None]
    return ResampledWorkload(bin_width=5, bin_indices=np.arange(len(values)), values=values)


class TestAbsoluteSlack:
    def test_hand_example(self):
        assert absolute_slack(wl([1, 3]), [4])[0] == pytest.approx(2.0)

    def test_full_utilization(self):
        assert absolute_slack(wl([4, 4]), [4])[0] == 0.0

    def test_idle_linearity(self):
        idle = wl([0, 0])
        assert absolute_slack(idle, [16])[0] == 2 * absolute_slack(idle, [8])[0]


class TestThrottlingRatio:
    def test_half(self):
        ws = [wl([1]), wl([10])]
        assert throttling_ratio(ws, [[4], [4]]) == 0.5

    def test_strict_inequality(self):
        w = wl([1] * 99 + [100])  # T = 0.01 > tau = 0
        assert throttling_ratio([w], [[4]]) == 1.0

    def test_empty(self):
        with pytest.raises(EmptyDatasetError):
            throttling_ratio([], [])


class TestWorkloadSummary:
    def test_matches_direct_metrics(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            vals = rng.uniform(0, 20, rng.integers(1, 30))
            w = wl(vals)
            s = WorkloadSummary.from_workload(w)
            c = float(rng.uniform(1, 30))
            from skurec.rightsizer import slack_ratio, throttling_probability

            assert s.throttling(c, 0.95) == pytest.approx(throttling_probability(w, [c]))
            assert s.abs_slack(c) == pytest.approx(absolute_slack(w, [c])[0])


class TestPareto:
    def test_mark_dominated(self):
        pts = [
            EvalPoint("m", 0.0, 10.0, 0.1),
            EvalPoint("m", 1.0, 5.0, 0.05),  # dominates the first
            EvalPoint("m", 2.0, 20.0, 0.01),
        ]
        marked = mark_dominated(pts)
        assert [p.dominated for p in marked] == [True, False, False]

    def test_filter_sorted_strictly_decreasing_slack(self):
        pts = [
            EvalPoint("m", 0.0, 10.0, 0.1),
            EvalPoint("m", 1.0, 5.0, 0.05),
            EvalPoint("m", 2.0, 20.0, 0.01),
            EvalPoint("m", 3.0, 20.0, 0.01),  # duplicate metrics
        ]
        front = pareto_filter(pts)
        ratios = [p.throttling_ratio for p in front]
        slacks = [p.mean_abs_slack for p in front]
        assert ratios == sorted(ratios)
        assert all(a > b for a, b in zip(slacks, slacks[1:]))

    def test_curve_no_dominated_points(self):
        rng = np.random.default_rng(1)
        summaries = [WorkloadSummary.from_workload(wl(rng.uniform(0, 30, 20))) for _ in range(40)]
        preds = [float(rng.uniform(1, 40)) for _ in range(40)]
        pts = pareto_curve(summaries, preds, [GP] * 40)
        for p in pts:
            assert not p.dominated
            for q in pts:
                if p is q:
                    continue
                assert not (
                    q.mean_abs_slack <= p.mean_abs_slack
                    and q.throttling_ratio <= p.throttling_ratio
                    and (q.mean_abs_slack < p.mean_abs_slack or q.throttling_ratio < p.throttling_ratio)
                )

    def test_low_exponent_low_slack_high_throttle(self):
        rng = np.random.default_rng(2)
        summaries = [WorkloadSummary.from_workload(wl(rng.uniform(1, 30, 20))) for _ in range(30)]
        preds = [30.0] * 30
        lo = []
        for e in (-2.5, 2.5):
            from skurec.core import discretize

            caps = [discretize(30.0 * 2 ** e, GP.dim(0)) for _ in range(30)]
            lo.append(evaluate_assignment(summaries, caps))
        slack_lo, thr_lo = lo[0]
        slack_hi, thr_hi = lo[1]
        assert slack_lo < slack_hi and thr_lo > thr_hi

    def test_ordering_invariance(self):
        rng = np.random.default_rng(3)
        summaries = [WorkloadSummary.from_workload(wl(rng.uniform(0, 30, 10))) for _ in range(20)]
        caps = [float(rng.choice(GP.dim(0))) for _ in range(20)]
        a = evaluate_assignment(summaries, caps)
        order = rng.permutation(20)
        b = evaluate_assignment([summaries[i] for i in order], [caps[i] for i in order])
        assert a[0] == pytest.approx(b[0])
        assert a[1] == pytest.approx(b[1])


class TestDefaultBaseline:
    def test_single_offering_sweep(self):
        rng = np.random.default_rng(4)
        summaries = [WorkloadSummary.from_workload(wl(rng.uniform(0, 20, 10))) for _ in range(25)]
        pts = default_baseline(summaries, [GENERAL_PURPOSE] * 25, DEFAULT_CATALOG)
        # each point corresponds to one candidate; front is a subset of the sweep
        assert 1 <= len(pts) <= len(GP.dim(0))

    def test_candidate_cap(self):
        big = {"X": single_dim_candidates("X", list(range(1, 40)))}
        summaries = [WorkloadSummary.from_workload(wl([1.0, 2.0]))]
        pts = default_baseline(summaries, ["X"], big)
        assert len(pts) <= 10


class TestOperatingPoint:
    def test_best_point_below(self):
        pts = [
            EvalPoint("m", 0.0, 10.0, 0.05),
            EvalPoint("m", 1.0, 8.0, 0.09),
            EvalPoint("m", 2.0, 5.0, 0.2),
        ]
        assert best_point_below(pts, 0.10).mean_abs_slack == 8.0
        assert best_point_below(pts, 0.01) is None


class TestCostExtrapolation:
    def test_identity(self):
        assert cost_extrapolation(4.0, 0.5, 1) == (4.0, 0.5)

    def test_linearity(self):
        a = cost_extrapolation(4.0, 0.5, 100)
        b = cost_extrapolation(4.0, 0.5, 200)
        assert b == (2 * a[0], 2 * a[1])


class TestCrossModule:
    def test_rightsized_uncensored_zero_throttling(self):
        from skurec.rightsizer import RightsizerConfig, rightsize

        rng = np.random.default_rng(5)
        cands = single_dim_candidates("X", [1, 2, 4, 8, 16, 32, 64, 128])
        ws, caps = [], []
        for _ in range(60):
            vals = rng.uniform(0, 80, rng.integers(2, 30))
            w = wl(vals)
            res = rightsize(w, [128.0], cands, RightsizerConfig())
            assert not res.censored
            ws.append(w)
            caps.append(list(res.capacity))
        assert throttling_ratio(ws, caps) == 0.0

    def test_grid_default(self):
        assert DEFAULT_EXPONENT_GRID[0] == -3.0
        assert DEFAULT_EXPONENT_GRID[-1] == 3.0
        assert len(DEFAULT_EXPONENT_GRID) == 13
