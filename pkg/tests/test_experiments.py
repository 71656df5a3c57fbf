import csv

import numpy as np
import pytest
from scipy import stats

from spikeslab import experiments as ex
from spikeslab import svg
from spikeslab.stable import StableParams
from spikeslab.urn import StableUrn, chain_n0_distribution


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_seed_required(self):
        with pytest.raises(ValueError):
            ex.functional_interval_study({"reps": 10})

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ex.prior_n0_study({"seed": 1, "repz": 10})

    def test_quantile_interval(self):
        x = np.arange(101, dtype=float)
        np.testing.assert_allclose(ex.quantile_interval(x), (2.5, 97.5))


class TestBands:
    def test_invariants_and_csv(self, tmp_path):
        reps = ex.prior_band_study({"seed": 3, "reps": 2000, "sigmas": [0.25], "zetas": [0.0, 0.75]})
        assert len(reps) == 4
        for r in reps:
            assert np.all(r.lower <= r.upper)
            assert r.lower.min() >= 0 and r.upper.max() <= 1
            assert np.all(np.diff(r.mean_curve) >= 0)
            np.testing.assert_allclose(r.mc_mean, r.mean_curve, atol=0.03)
        r = reps[2]
        i = int(np.argmin(np.abs(r.grid - 0.5)))
        inner, outer = reps[2], reps[3]
        assert inner.width()[i] > outer.width()[i]
        path = tmp_path / "band.csv"
        ex.write_band_csv(path, r)
        rows = read_csv(path)
        assert rows[0] == ["x", "lower", "upper", "mean"]
        assert len(rows) == 1 + len(r.grid)
        svg.band_svg(tmp_path / "band.svg", r)
        assert (tmp_path / "band.svg").read_text().startswith("<svg")

    def test_mean_curve(self):
        (r, _) = ex.prior_band_study({"seed": 1, "reps": 50, "sigmas": [0.5], "zetas": [0.25]})
        np.testing.assert_allclose(r.mean_curve, 0.25 * (r.grid >= 0) + 0.75 * stats.norm.cdf(r.grid))


class TestIntervals:
    def test_outer_median_degenerate(self, tmp_path):
        reps = ex.functional_interval_study({"seed": 2, "reps": 3000, "sigmas": [0.5], "zetas": [0.75]})
        by = {(r.model_tag, r.functional): r for r in reps}
        assert by[("outer", "median")].interval_length == 0.0
        assert by[("inner", "median")].interval_length > 1.0
        for r in reps:
            assert r.interval_length >= 0
            assert r.interval_length == pytest.approx(r.endpoints[1] - r.endpoints[0])
        path = tmp_path / "t1.csv"
        ex.write_interval_csv(path, reps)
        assert read_csv(path)[0] == ["model", "functional", "sigma", "zeta", "length", "lo", "hi", "se"]


class TestN0:
    def test_prior(self, tmp_path):
        reps = ex.prior_n0_study({"seed": 4, "reps": 20000, "m": 20})
        for r in reps:
            np.testing.assert_allclose(r.histogram.sum(), 1.0)
            assert r.tv < 0.03
        outer = [r for r in reps if r.model_tag == "outer"][0]
        np.testing.assert_allclose(outer.table.probs, stats.binom.pmf(np.arange(21), 20, 0.5))
        path = tmp_path / "n0.csv"
        ex.write_n0_csv(path, reps[0])
        rows = read_csv(path)
        assert rows[0] == ["j", "exact_p", "mc_p"] and len(rows) == 22
        svg.n0_svg(tmp_path / "n0.svg", reps[0])

    def test_posterior_samples(self):
        for sid, total in (("x1", 10), ("x2", 25), ("x3", 40)):
            s = ex.posterior_sample(sid, seed=1)
            assert s.n == 50 and s.clusters.spike_size == total
        a = ex.posterior_sample("x1", seed=1).atoms
        assert a == ex.posterior_sample("x1", seed=1).atoms
        with pytest.raises(ValueError):
            ex.posterior_sample("x4", seed=1)

    def test_posterior(self, tmp_path):
        reps = ex.posterior_n0_study({"seed": 5, "reps": 4000, "sigmas": [0.25], "zetas": [0.5],
                                      "samples": ["x1"]})
        by = {r.model_tag: r for r in reps}
        # outer: (10 + zeta * 50) / 100
        assert by["outer"].exact_proportion == pytest.approx(0.35)
        for r in reps:
            assert abs(r.expected_proportion - r.exact_proportion) < 4 * r.se
        path = tmp_path / "t2.csv"
        ex.write_posterior_csv(path, reps)
        assert read_csv(path)[0] == ["sample_id", "sigma", "zeta", "model", "expected_proportion", "se"]

    def test_outer_chain_is_shifted_binomial(self):
        p = StableParams(0.5, 0.3)
        law = chain_n0_distribution(StableUrn(p), 30, 20, 3, 5, outer=True)
        ref = np.zeros(51)
        ref[5:36] = stats.binom.pmf(np.arange(31), 30, 0.3)
        np.testing.assert_allclose(law.probs, ref, atol=1e-13)

    def test_chain_rejects_bad_start(self):
        with pytest.raises(ValueError):
            chain_n0_distribution(StableUrn(StableParams(0.5, 0.3)), 5, 4, 0, 2)


class TestVarianceGap:
    def test_pair(self, tmp_path):
        reps = ex.variance_gap_study({"seed": 6, "reps": 200_000, "sigmas": [0.25], "zetas": [0.5]})
        (r,) = reps
        np.testing.assert_allclose(r.p_quadrature, 0.75, rtol=1e-10)
        assert abs(r.z_score) < 3
        path = tmp_path / "vg.csv"
        ex.write_variance_gap_csv(path, reps)
        assert len(read_csv(path)) == 2

    def test_trajectory(self):
        (r,) = ex.variance_gap_study({"seed": 7, "reps": 300, "sigmas": [0.75], "zetas": [0.25],
                                      "method": "trajectory", "L": 400})
        assert abs(r.z_score) < 3
        assert "trajectory" in r.note

    def test_rejects_other_method(self):
        with pytest.raises(ValueError):
            ex.variance_gap_study({"seed": 1, "method": "bootstrap"})


class TestDeterminism:
    def test_report_bytes_independent_of_workers(self, tmp_path):
        cfg = {"seed": 9, "reps": 3000, "sigmas": [0.5], "zetas": [0.5]}
        ex.write_interval_csv(tmp_path / "a.csv", ex.functional_interval_study(dict(cfg, workers=1)))
        ex.write_interval_csv(tmp_path / "b.csv", ex.functional_interval_study(dict(cfg, workers=3)))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
