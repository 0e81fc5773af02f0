import math

import numpy as np
import pytest

from lrcvt.stats import (
    MomentAggregate,
    accumulate,
    comoment,
    fit_gmm,
    histogram1d,
    histogram2d,
    kde_density,
    kde_model,
    mean_xy,
    merge,
    moments_latex,
    moments_report,
    plot_data,
)

from oracles import two_pass_comoment


class TestAccumulate:
    def test_two_points(self):
        agg = accumulate([(0, 0), (1, 1)])
        assert mean_xy(agg) == (0.5, 0.5)
        assert comoment(agg, 1, 1) == pytest.approx(0.25)

    def test_empty(self):
        agg = accumulate([])
        assert agg.n == 0
        assert np.all(agg.sums == 0)

    def test_cokurtosis_of_independent_normals(self):
        rng = np.random.default_rng(42)
        s = rng.standard_normal((10_000, 2))
        agg = accumulate(s)
        assert abs(comoment(agg, 2, 2) - 1.0) < 0.1

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            accumulate([(0.0, np.inf)])


class TestMerge:
    def test_concatenation_equivalence(self):
        rng = np.random.default_rng(1)
        s = rng.normal(3, 2, size=(100, 2))
        whole = accumulate(s)
        m = merge(accumulate(s[:37]), accumulate(s[37:]))
        assert m.n == whole.n
        assert np.allclose(m.sums, whole.sums, rtol=1e-12)
        assert (m.min_x, m.max_x) == (whole.min_x, whole.max_x)

    def test_identity(self):
        s = [(1.0, 2.0), (3.0, 4.0)]
        agg = accumulate(s)
        merged = merge(agg, accumulate([]))
        assert merged.n == agg.n
        assert np.array_equal(merged.sums, agg.sums)

    def test_variable_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            merge(accumulate([(0, 0)], "a", "b"), accumulate([(0, 0)], "a", "c"))

    @pytest.mark.parametrize("seed", range(5))
    def test_random_merge_tree_equals_flat(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 4), size=(512, 2))
        flat = accumulate(s)
        parts = [accumulate(s[i::64]) for i in range(64)]
        while len(parts) > 1:
            i = int(rng.integers(len(parts) - 1))
            parts[i] = merge(parts.pop(i + 1), parts[i])
        tree = parts[0]
        for p, q in [(2, 0), (1, 1), (0, 2), (2, 2), (3, 1)]:
            a, b = comoment(flat, p, q), comoment(tree, p, q)
            assert abs(a - b) <= 1e-9 * max(abs(a), 1e-12)

    def test_roundtrip_serialization(self):
        agg = accumulate([(1, 2), (3, 4), (5, 6)], "T", "P")
        back = MomentAggregate.from_dict(agg.to_dict())
        assert back.n == agg.n
        assert np.allclose(back.sums, agg.sums)
        assert back.variable_pair() == ("T", "P")


class TestComoment:
    def test_population_variance(self):
        agg = accumulate([(0, 0), (2, 0)])
        assert comoment(agg, 2, 0) == pytest.approx(1.0)

    def test_perfect_correlation(self):
        x = np.linspace(-2, 3, 50)
        agg = accumulate(np.stack([x, x], axis=1))
        assert comoment(agg, 1, 1) == pytest.approx(comoment(agg, 2, 0))

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(7)
        s = rng.normal(100, 5, size=(2000, 2))  # offset mean stresses expansion
        agg = accumulate(s)
        for p, q in [(2, 0), (1, 1), (2, 1), (2, 2), (0, 4)]:
            want = two_pass_comoment(s, p, q)
            got = comoment(agg, p, q)
            assert abs(got - want) <= 1e-8 * max(abs(want), 1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            comoment(accumulate([]), 2, 0)

    def test_order_cap(self):
        with pytest.raises(ValueError):
            comoment(accumulate([(0, 0)]), 3, 2)


class TestHistograms:
    def test_conservation(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=500)
        h = histogram1d(v, bins=16, lo=-1, hi=1)
        assert h.n == 500
        assert h.counts.sum() + h.underflow + h.overflow == 500

    def test_merge_conserves(self):
        rng = np.random.default_rng(1)
        a = histogram1d(rng.normal(size=300), bins=8, lo=-2, hi=2)
        b = histogram1d(rng.normal(size=200), bins=8, lo=-2, hi=2)
        assert a.merge(b).n == 500

    def test_merge_requires_same_axes(self):
        a = histogram1d([0.5], bins=8, lo=0, hi=1)
        b = histogram1d([0.5], bins=8, lo=0, hi=2)
        with pytest.raises(ValueError):
            a.merge(b)

    def test_2d_conservation(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=(400, 2))
        h = histogram2d(s, bins=(8, 8), x_range=(-1, 1), y_range=(-1, 1))
        assert h.counts.sum() + h.out_of_range == 400


class TestGmm:
    def test_k1_matches_sample_moments(self):
        rng = np.random.default_rng(3)
        s = rng.normal((2, -1), (1.5, 0.5), size=(500, 2))
        model = fit_gmm(s, 1, seed=0)
        assert np.allclose(model.means[0], s.mean(axis=0), rtol=1e-9)
        assert np.allclose(model.covs[0], np.cov(s.T, bias=True), rtol=1e-9)

    def test_two_cluster_recovery(self):
        rng = np.random.default_rng(9)
        s = np.concatenate(
            [rng.normal((-5, 0), 1, (500, 2)), rng.normal((5, 0), 1, (500, 2))]
        )
        model = fit_gmm(s, 2, seed=4)
        got = np.sort(model.means[:, 0])
        assert abs(got[0] + 5) < 0.2 and abs(got[1] - 5) < 0.2

    def test_loglik_monotone(self):
        rng = np.random.default_rng(12)
        s = np.concatenate(
            [rng.normal((-2, 1), 0.7, (300, 2)), rng.normal((3, -2), 1.3, (300, 2))]
        )
        model = fit_gmm(s, 3, seed=1)
        t = model.log_likelihood_trace
        assert len(t) >= 2
        assert all(b >= a - 1e-12 * max(abs(a), 1.0) for a, b in zip(t, t[1:]))

    def test_degenerate_single_point(self):
        with pytest.warns(UserWarning, match="identical"):
            model = fit_gmm(np.tile([(2.0, 3.0)], (10, 1)), 2, seed=0)
        assert model.k == 1
        assert np.allclose(model.means[0], (2.0, 3.0))
        assert np.linalg.eigvalsh(model.covs[0]).min() > 0

    def test_too_few_distinct(self):
        with pytest.raises(ValueError, match="distinct"):
            fit_gmm([(0, 0), (0, 0), (1, 1)], 3, seed=0)

    def test_seeded_determinism(self):
        rng = np.random.default_rng(5)
        s = rng.normal(size=(200, 2))
        a = fit_gmm(s, 2, seed=8)
        b = fit_gmm(s, 2, seed=8)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.covs, b.covs)


class TestKde:
    def test_single_sample_bump(self):
        payload = kde_density(np.array([[2.0, 3.0]]), "fixed", bandwidth=0.5)
        d = np.array(payload["density"])
        ax = [np.array(g) for g in payload["axes"]]
        i, j = np.unravel_index(d.argmax(), d.shape)
        assert ax[0][i] == pytest.approx(2.0, abs=0.2)
        assert ax[1][j] == pytest.approx(3.0, abs=0.2)

    def test_mirror_symmetry(self):
        s = np.array([[-1.0, 0.0], [1.0, 0.0]])
        payload = kde_density(s, "fixed", bandwidth=0.7, grid_size=41)
        d = np.array(payload["density"])
        assert np.allclose(d, d[::-1, :], atol=1e-12)

    @pytest.mark.parametrize("rule", ["scott", "silverman"])
    def test_integral_near_one(self, rule):
        rng = np.random.default_rng(4)
        s = rng.normal(size=(300, 2))
        payload = kde_density(s, rule, grid_size=96)
        d = np.array(payload["density"])
        ax = [np.array(g) for g in payload["axes"]]
        integral = np.trapezoid(np.trapezoid(d, ax[1], axis=1), ax[0])
        assert 0.98 <= integral <= 1.0001

    def test_zero_variance_fallback(self):
        s = np.tile([(1.0, 1.0)], (20, 1))
        with pytest.warns(UserWarning, match="bandwidth"):
            model = kde_model(s, "scott")
        assert np.all(model.bandwidth > 0)

    def test_1d_density(self):
        rng = np.random.default_rng(6)
        payload = kde_density(rng.normal(size=500), "scott", grid_size=128)
        d = np.array(payload["density"])
        ax = np.array(payload["axes"][0])
        assert np.trapezoid(d, ax) == pytest.approx(1.0, abs=0.02)


class TestPlotData:
    def test_conditional1d_on_exact_line(self):
        # one x value per bin (the bin centers), so y = 2x is constant per bin
        centers = (np.arange(10) + 0.5) / 10
        x = np.repeat(centers, 20)
        samples = np.stack([x, 2 * x], axis=1)
        payload = plot_data(samples, "conditional1d", bins=10, x_range=(0, 1))
        for c, m, s in zip(centers, payload["means"], payload["stds"]):
            assert m == pytest.approx(2 * c)
            assert s == pytest.approx(0.0, abs=1e-12)

    def test_cdf_reaches_one(self):
        rng = np.random.default_rng(8)
        payload = plot_data(rng.normal(size=(400, 2)), "cdf", bins=12)
        assert payload["cdf"][-1][-1] == pytest.approx(1.0)
        col = [row[-1] for row in payload["cdf"]]
        assert all(b >= a - 1e-12 for a, b in zip(col, col[1:]))

    def test_conditional2d_plane(self):
        rng = np.random.default_rng(10)
        xy = rng.uniform(0, 1, size=(5000, 2))
        z = xy[:, 0] + xy[:, 1]
        payload = plot_data(np.column_stack([xy, z]), "conditional2d", bins=8,
                            x_range=(0, 1), y_range=(0, 1))
        grid = payload["z_mean"]
        half_diag = math.hypot(1 / 8, 1 / 8) / 2
        for i in range(8):
            for j in range(8):
                if grid[i][j] is None:
                    continue
                want = (i + 0.5) / 8 + (j + 0.5) / 8
                assert abs(grid[i][j] - want) <= half_diag

    def test_empty_bins_are_missing(self):
        samples = np.array([[0.1, 0.0], [0.9, 1.0]])
        payload = plot_data(samples, "conditional1d", bins=8, x_range=(0, 1))
        assert payload["means"].count(None) == 6

    def test_hist1d_payload(self):
        payload = plot_data(np.array([[0.5, 1.0]] * 7), "hist1d", bins=4)
        assert sum(payload["counts"]) + payload["underflow"] + payload["overflow"] == 7

    def test_scatter_echoes_points(self):
        s = np.array([[1.0, 2.0], [3.0, 4.0]])
        payload = plot_data(s, "scatter")
        assert payload["points"] == s.tolist()

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            plot_data(np.zeros((3, 2)), "pie")

    def test_conditional2d_needs_three_columns(self):
        with pytest.raises(ValueError, match="columns"):
            plot_data(np.zeros((3, 2)), "conditional2d")


class TestMomentsReport:
    def test_gmm_k1_mean_cov_exact(self):
        rng = np.random.default_rng(11)
        s = rng.normal((1, 2), (2, 0.5), size=(400, 2))
        model = fit_gmm(s, 1, seed=0)
        rows = {r["moment"]: r for r in moments_report(model, accumulate(s))}
        for key in ("mu_10", "mu_01", "mu_20", "mu_11", "mu_02"):
            assert rows[key]["relative_error"] < 1e-6

    def test_identical_model_and_raw_zero_error(self):
        # samples exactly at bin centers: bin-mass moments equal raw moments
        centers_x = (np.arange(4) + 0.5) / 4
        centers_y = (np.arange(4) + 0.5) / 4
        pts = np.array([(x, y) for x in centers_x for y in centers_y])
        h = histogram2d(pts, bins=(4, 4), x_range=(0, 1), y_range=(0, 1))
        rows = moments_report(h, accumulate(pts))
        for r in rows:
            assert r["relative_error"] < 1e-12 or r["raw"] == r["model"] == 0

    def test_histogram_mean_error_bounded(self):
        rng = np.random.default_rng(13)
        s = rng.uniform(0, 1, size=(5000, 2))
        h = histogram2d(s, bins=(64, 64), x_range=(0, 1), y_range=(0, 1))
        rows = {r["moment"]: r for r in moments_report(h, accumulate(s))}
        half_bin = 0.5 / 64
        assert abs(rows["mu_10"]["model"] - rows["mu_10"]["raw"]) <= half_bin
        assert abs(rows["mu_01"]["model"] - rows["mu_01"]["raw"]) <= half_bin

    def test_kde_moment_rows(self):
        rng = np.random.default_rng(14)
        s = rng.normal(size=(200, 2))
        model = kde_model(s, "scott")
        rows = {r["moment"]: r for r in moments_report(model, accumulate(s))}
        # KDE convolves with the kernel: means exact, variance inflated by h^2
        assert rows["mu_10"]["relative_error"] < 1e-9
        hx = model.bandwidth[0]
        want = rows["mu_20"]["raw"] + hx**2
        assert rows["mu_20"]["model"] == pytest.approx(want, rel=1e-9)

    def test_latex_renders(self):
        s = np.random.default_rng(15).normal(size=(50, 2))
        rows = moments_report(fit_gmm(s, 1, seed=0), accumulate(s))
        tex = moments_latex(rows, "T", "P")
        assert tex.startswith(r"\begin{tabular}")
        assert r"\mu_{22}" in tex
        assert tex.count(r"\\") == len(rows) + 1
