import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import make_modes, make_panel, random_modes, random_panel
from cvarwind.evaluation import (
    cross_validate,
    cross_validate_design,
    cv_residuals,
    error_distribution,
    improvement,
    make_folds,
    rmse,
    site_average,
)
from cvarwind.evaluation.reports import HEADERS, site_filename
from cvarwind.exceptions import DomainError
from cvarwind.models import ModelSpec, build_design
from cvarwind.models.ols import ols_solve
from cvarwind.synth import SynthSpec, simulate


def records(forecast, actual, site="a", horizon=1):
    forecast = np.asarray(forecast, dtype=float)
    return pd.DataFrame({
        "horizon": horizon, "site": site, "forecast": forecast,
        "error": forecast - np.asarray(actual, dtype=float),
    })


class TestRMSE:
    def test_hand_example(self):
        out = rmse(records([1, 2], [2, 4]))
        assert out["rmse"].iloc[0] == pytest.approx(np.sqrt(2.5))
        assert out["count"].iloc[0] == 2

    def test_perfect(self):
        assert rmse(records([3, 4, 5], [3, 4, 5]))["rmse"].iloc[0] == 0.0

    def test_against_panel(self):
        panel = make_panel([[1.0, 2.0], [2.0, 4.0], [3.0, 1.0]], sites=["a", "b"])
        fc = pd.DataFrame({
            "issue_time": [panel.timestamps[0]] * 2 + [panel.timestamps[1]] * 2,
            "horizon": 1, "site": ["a", "b", "a", "b"], "forecast": [1.0, 4.0, 3.0, 3.0],
        })
        out = rmse(fc, panel, by=("site",))
        assert out.set_index("site")["rmse"].to_dict() == pytest.approx({"a": np.sqrt(0.5), "b": np.sqrt(2.0)})

    def test_missing_actual_excluded(self):
        panel = make_panel([[1.0], [np.nan], [3.0]], sites=["a"])
        fc = pd.DataFrame({"issue_index": [0, 1, 2], "horizon": 1, "site": "a", "forecast": [1.0, 1.0, 1.0]})
        out = rmse(fc, panel)
        assert out["count"].iloc[0] == 1 and out["rmse"].iloc[0] == pytest.approx(2.0)

    def test_grouped_by_site_matches_recomputation(self):
        rng = np.random.default_rng(0)
        df = pd.concat([records(rng.normal(size=20), rng.normal(size=20), site=s) for s in "abc"])
        out = rmse(df, by=("site",)).set_index("site")
        for s, grp in df.groupby("site"):
            assert out.loc[s, "rmse"] == pytest.approx(np.sqrt(np.mean(grp["error"] ** 2)), rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from("abcd"), st.floats(-50, 50)), min_size=1, max_size=60))
    def test_recombination(self, rows):
        df = pd.DataFrame(rows, columns=["site", "error"]).assign(horizon=1)
        by_site = rmse(df, by=("site",))
        pooled = rmse(df, by=())["rmse"].iloc[0]
        recombined = np.sqrt(np.average(by_site["mse"], weights=by_site["count"]))
        assert recombined == pytest.approx(pooled, abs=1e-10)
        assert (by_site["rmse"] >= 0).all() and (by_site["count"] > 0).all()

    def test_site_average(self):
        df = pd.concat([records([0.0] * 4, [1.0] * 4, site="a"), records([0.0] * 1, [3.0], site="b")])
        out = site_average(rmse(df, by=("horizon", "site")))
        assert out["rmse"].iloc[0] == pytest.approx(2.0)
        assert out["rmse_pooled"].iloc[0] == pytest.approx(np.sqrt(13 / 5))
        assert out["count"].iloc[0] == 5


class TestImprovement:
    def table(self, ref, other):
        return pd.DataFrame({"model": ["Persistence", "CVAR"], "horizon": [1, 1], "rmse": [ref, other]})

    def test_table1_six_hour(self):
        out = improvement(self.table(2.35, 1.82), "Persistence")
        assert out.loc[out.model == "CVAR", "improvement_pct"].iloc[0] == pytest.approx(22.55, abs=0.005)

    def test_table1_one_hour(self):
        out = improvement(self.table(1.01, 0.93), "Persistence")
        assert out.loc[out.model == "CVAR", "improvement_pct"].iloc[0] == pytest.approx(7.92, abs=0.005)

    def test_equal_is_zero(self):
        out = improvement(self.table(1.5, 1.5), "Persistence")
        assert (out["improvement_pct"] == 0).all()

    def test_missing_reference(self):
        with pytest.raises(KeyError):
            improvement(self.table(1.0, 0.9), "VAR")
        partial = pd.concat([self.table(1.0, 0.9), pd.DataFrame({"model": ["CVAR"], "horizon": [2], "rmse": [1.0]})])
        with pytest.raises(KeyError):
            improvement(partial, "Persistence")


class TestFolds:
    def test_even(self):
        plan = make_folds(100, 10)
        assert [len(plan.test_points(f)) for f in range(10)] == [10] * 10

    def test_remainder(self):
        plan = make_folds(101, 10)
        assert [len(plan.test_points(f)) for f in range(10)] == [11] + [10] * 9

    @given(st.integers(2, 500), st.integers(2, 20))
    def test_partition(self, n, k):
        if n < k:
            with pytest.raises(DomainError):
                make_folds(n, k)
            return
        plan = make_folds(n, k)
        tests = [plan.test_points(f) for f in range(k)]
        np.testing.assert_array_equal(np.concatenate(tests), np.arange(n))
        for f, t in enumerate(tests):
            assert np.all(np.diff(t) == 1)  # contiguous
            assert set(plan.train_points(f)) == set(range(n)) - set(t)
            np.testing.assert_array_equal(plan.fold_of(t), f)
        sizes = [len(t) for t in tests]
        assert max(sizes) - min(sizes) <= 1

    def test_errors(self):
        with pytest.raises(DomainError):
            make_folds(5, 10)
        with pytest.raises(DomainError):
            make_folds(50, 1)


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(5)
    panel = random_panel(rng, T=800, N=3)
    modes = random_modes(rng, 800, 2, min_run=10)
    return panel, modes


class TestCrossValidate:
    def test_duplicate_cells_identical(self, small):
        panel, modes = small
        s = ModelSpec("VAR", 1, (1, 2))
        res = cross_validate(panel, modes, [s, s], k=5)
        assert len(res.summary) == 1
        dup = cross_validate(panel, modes, [s], k=5)
        pd.testing.assert_frame_equal(res.scores, dup.scores)

    def test_fold_order_invariance(self, small):
        panel, modes = small
        s = ModelSpec("CVAR", 2, (1, 3), n_modes=2)
        plan = make_folds(len(panel), 10)
        a = cv_residuals(panel, modes, s, plan)
        b = cv_residuals(panel, modes, s, plan, fold_order=list(range(9, -1, -1)))
        key = ["horizon", "issue_index", "site"]
        a = a.sort_values(key).reset_index(drop=True)
        b = b.sort_values(key).reset_index(drop=True)
        pd.testing.assert_frame_equal(a, b)

    def test_oracle_fold_fits(self, small):
        panel, _ = small
        s = ModelSpec("VAR_Diurnal", 2, (2,))
        plan = make_folds(len(panel), 4)
        design = build_design(panel, None, s, 2)
        coefs, pred = cross_validate_design(design, plan)
        for f in range(4):
            test = plan.fold_of(design.issue_index) == f
            B, _ = ols_solve(design.X[~test], design.Y[~test])
            np.testing.assert_allclose(coefs[f], B, atol=1e-10)
            np.testing.assert_allclose(pred[test], design.X[test] @ B.T, atol=1e-10)

    def test_shifted_test_targets_leave_coefficients(self, small):
        panel, modes = small
        s = ModelSpec("CVAR", 2, (1,), n_modes=2)
        plan = make_folds(len(panel), 10)
        design = build_design(panel, modes, s, 1, mode=1)
        coefs, pred = cross_validate_design(design, plan)
        folds = plan.fold_of(design.issue_index)
        for f in range(10):
            Y = design.Y.copy()
            Y[folds == f] += 1000.0
            shifted = type(design)(design.X, Y, design.issue_index, 1, 1, None, design.feature_names, 0)
            c2, p2 = cross_validate_design(shifted, plan, fold_order=[f])
            assert c2[f].tobytes() == coefs[f].tobytes()
            np.testing.assert_array_equal(p2[folds == f], pred[folds == f])
            err = np.abs(Y[folds == f] - p2[folds == f]).mean()
            assert err > 900

    def test_pooled_score(self, small):
        panel, _ = small
        s = ModelSpec("VAR", 1, (1,))
        res = cross_validate(panel, None, [s], k=5)
        resid = cv_residuals(panel, None, s, make_folds(len(panel), 5))
        assert res.scores["rmse_pooled"].iloc[0] == pytest.approx(np.sqrt(np.mean(resid["error"] ** 2)))
        per_site = resid.groupby("site")["error"].apply(lambda e: np.sqrt(np.mean(e**2)))
        assert res.scores["rmse"].iloc[0] == pytest.approx(per_site.mean())

    def test_failures_reported(self, small):
        panel, _ = small
        modes = make_modes(np.ones(len(panel), dtype=int), n_modes=2)
        good = ModelSpec("VAR", 1, (1,))
        bad = ModelSpec("CVAR", 1, (1,), n_modes=2)
        res = cross_validate(panel, modes, [good, bad], k=5)
        assert list(res.failures) == ["CVAR(p=1,M=2)"]
        assert res.winner == good

    def test_empty_grid(self, small):
        with pytest.raises(DomainError):
            cross_validate(small[0], None, [], k=5)

    def test_jobs_do_not_change_results(self, small):
        panel, modes = small
        grid = [ModelSpec("VAR", 1, (1,)), ModelSpec("CVAR", 1, (1,), n_modes=2), ModelSpec("Persistence", 1, (1,))]
        a = cross_validate(panel, modes, grid, k=5, n_jobs=1)
        b = cross_validate(panel, modes, grid, k=5, n_jobs=3)
        pd.testing.assert_frame_equal(a.scores, b.scores)

    def test_three_regimes_selected(self):
        spec = SynthSpec.default(n_sites=3, n_modes=3, p=1, n_steps=12_000, seed=3)
        data = simulate(spec, with_fields=False)
        # mode series with 1, 2 and 3 modes: the truth and two coarsenings
        truth = data.modes.labels
        modes = {
            1: make_modes(np.ones_like(truth), n_modes=1),
            2: make_modes(np.where(truth == 3, 2, truth), n_modes=2),
            3: data.modes,
        }
        grid = [ModelSpec("CVAR", 1, (1, 2), n_modes=m) for m in (1, 2, 3)]
        res = cross_validate(data.panel, modes, grid, k=10)
        assert res.winner.n_modes == 3


class TestErrorDistribution:
    def test_symmetric(self):
        df = records([0.0, 2.0], [1.0, 1.0]).assign(issue_index=[0, 1])
        hist, moments = error_distribution(df, None, make_modes([1, 1]))
        m = moments.iloc[0]
        assert m["mean"] == 0 and m["skew"] == 0 and m["n"] == 2
        assert hist["count"].sum() == 2

    def test_moment_oracle(self):
        rng = np.random.default_rng(0)
        n = 400
        df = records(rng.gamma(2.0, size=n), np.zeros(n), site="a").assign(issue_index=np.arange(n))
        df.loc[::2, "site"] = "b"
        modes = make_modes(rng.integers(1, 4, size=n), n_modes=3)
        hist, moments = error_distribution(df, None, modes, bin_width=0.5)
        assert hist["count"].sum() == n
        assert np.allclose(hist["bin_right"] - hist["bin_left"], 0.5)
        df["mode"] = modes.labels
        for (site, mode), grp in df.groupby(["site", "mode"]):
            row = moments[(moments.site == site) & (moments["mode"] == mode)].iloc[0]
            e = grp["error"].to_numpy()
            assert row["n"] == e.size
            assert row["mean"] == pytest.approx(e.mean(), rel=1e-12)
            assert row["sd"] == pytest.approx(e.std(), rel=1e-12)
            assert row["skew"] == pytest.approx(stats.skew(e), rel=1e-9)
            h = hist[(hist.site == site) & (hist["mode"] == mode)]
            assert h["count"].sum() == e.size
            for _, b in h.iterrows():
                assert b["count"] == np.sum((e >= b["bin_left"]) & (e < b["bin_right"]))


class TestReports:
    def test_headers_documented(self):
        assert HEADERS["table1.csv"] == ["model", "horizon", "rmse", "rmse_pooled", "count"]
        assert HEADERS["fig9_site.csv"] == ["mode", "bin_left", "bin_right", "count"]

    def test_site_filename(self):
        assert site_filename("site_1") == "fig9_site_1.csv"
        assert site_filename("St Mary's/2") == "fig9_St_Mary_s_2.csv"
