import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from spikeslab._backend import HAVE_NUMBA
from spikeslab.core import ClusterState
from spikeslab.nig import NigParams, nig_predictive
from spikeslab.sampler import (SampleSpec, ValuedState, outer_sample, sample_trajectory, simulate,
                               urn_step, write_trajectories_tsv)
from spikeslab.special import partition_multiplicity
from spikeslab.stable import StableParams, stable_eppf, stable_model, stable_predictive
from spikeslab.urn import chain_n0_distribution, make_urn

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")


def labels_of(blocks):
    return np.concatenate([b.labels for b in blocks])


class TestBackends:
    @needs_numba
    @pytest.mark.parametrize("params", [StableParams(0.3, 0.4), StableParams(0.8, 0.1),
                                        NigParams(1.0, 1.0, 0.5), NigParams(3.0, 0.5, 0.2)])
    @pytest.mark.parametrize("outer", [False, True])
    def test_identical_labels(self, params, outer):
        init = ValuedState.from_counts((4, 2, 1), (0.1, 0.2, 0.3), 3, 0.0)
        for initial in (None, init):
            a = simulate(params, 30, 700, seed=5, initial=initial, outer=outer, backend="numba")
            b = simulate(params, 30, 700, seed=5, initial=initial, outer=outer, backend="numpy")
            np.testing.assert_array_equal(labels_of(a), labels_of(b))

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            simulate(StableParams(0.5, 0.2), 3, 4, seed=1, backend="fortran")

    def test_env_flag_selects_numpy(self):
        code = "from spikeslab._backend import BACKEND, HAVE_NUMBA; print(BACKEND, HAVE_NUMBA)"
        env = dict(os.environ, SPIKESLAB_BACKEND="numpy")
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert out.stdout.split() == ["numpy", "False"]
        env["SPIKESLAB_BACKEND"] = "cuda"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert out.returncode != 0 and "SPIKESLAB_BACKEND" in out.stderr


class TestDeterminism:
    def test_workers_do_not_matter(self):
        p = StableParams(0.5, 0.3)
        a = simulate(p, 20, 1000, seed=11, values=True, block_size=128, workers=1)
        b = simulate(p, 20, 1000, seed=11, values=True, block_size=128, workers=4)
        np.testing.assert_array_equal(labels_of(a), labels_of(b))
        np.testing.assert_array_equal(np.concatenate([x.values for x in a]),
                                      np.concatenate([x.values for x in b]))

    def test_seed_changes_output(self):
        p = StableParams(0.5, 0.3)
        a = labels_of(simulate(p, 20, 200, seed=1))
        b = labels_of(simulate(p, 20, 200, seed=2))
        assert not np.array_equal(a, b)

    def test_tsv_bytes(self, tmp_path):
        p = NigParams(1.0, 1.0, 0.4)
        digests = []
        for name in ("a.tsv", "b.tsv"):
            path = tmp_path / name
            write_trajectories_tsv(path, simulate(p, 8, 5, seed=3, values=True))
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
        assert digests[0] == digests[1]
        lines = (tmp_path / "a.tsv").read_text().splitlines()
        assert lines[0].split("\t") == ["replicate_id", "step", "value", "is_spike", "cluster_id"]
        assert len(lines) == 1 + 5 * 8

    def test_seed_required(self):
        with pytest.raises(ValueError):
            simulate(StableParams(0.5, 0.3), 5, 5, seed=None)
        with pytest.raises(ValueError):
            SampleSpec("stable", StableParams(0.5), 5, None)


class TestValues:
    def test_labels_and_values_consistent(self):
        p = StableParams(0.4, 0.3, x0=2.5)
        init = ValuedState.from_counts((3, 1), (-1.0, 0.7), 2, 2.5)
        (blk,) = simulate(p, 40, 300, seed=9, initial=init, values=True)
        assert np.all(blk.values[blk.labels == -1] == 2.5)
        for r in range(blk.labels.shape[0]):
            seen = {0: -1.0, 1: 0.7}
            for lab, val in zip(blk.labels[r], blk.values[r]):
                if lab >= 0:
                    assert seen.setdefault(lab, val) == val
            # new clusters get consecutive ids
            ids = sorted(seen)
            assert ids == list(range(len(ids)))

    def test_trajectory_final_state(self):
        spec = SampleSpec("stable", StableParams(0.5, 0.5), 25, seed=4)
        tr = sample_trajectory(spec)
        assert tr.final_state.n == 25
        assert tr.final_state.clusters.spike_size == int(tr.is_spike.sum())

    def test_generic_trajectory(self):
        model = stable_model(StableParams(0.5, 0.4))
        tr = sample_trajectory(SampleSpec("generic", model, 6, seed=2))
        assert tr.final_state.n == 6
        assert len(tr.drawn_values) == 6

    def test_outer_sample_zero_zeta(self):
        vals = outer_sample(200, StableParams(0.5, 0.0), seed=1)
        assert np.all(vals != 0.0)

    def test_urn_step_from_empty(self):
        rng = np.random.default_rng(0)
        x, st_ = urn_step(ValuedState.empty(), StableParams(0.5, 0.5), rng)
        assert st_.n == 1


class TestDistribution:
    def test_partition_types_n3(self):
        p = StableParams(0.5, 0.25)
        reps = 100_000
        lab = labels_of(simulate(p, 3, reps, seed=21))
        # label -1 draws share the spike value, so distinct values = distinct labels
        counts = {}
        for row in lab:
            _, inv = np.unique(row, return_inverse=True)
            key = tuple(sorted(np.bincount(inv), reverse=True))
            counts[key] = counts.get(key, 0) + 1
        for key in [(3,), (2, 1), (1, 1, 1)]:
            exact = stable_eppf(ClusterState(key), p) * partition_multiplicity(key)
            freq = counts.get(key, 0) / reps
            se = np.sqrt(exact * (1 - exact) / reps)
            assert abs(freq - exact) < 3 * se

    @pytest.mark.parametrize("params, pred", [(StableParams(0.4, 0.3), stable_predictive),
                                              (NigParams(1.0, 1.0, 0.3), nig_predictive)])
    def test_first_draw_matches_predictive(self, params, pred):
        init = ValuedState.from_counts((5, 2, 1), (0.1, 0.2, 0.3), 4, 0.0)
        reps = 100_000
        lab = labels_of(simulate(params, 1, reps, seed=17, initial=init))[:, 0]
        w = pred(init.clusters, params)
        # as_vector: [new, spike, cluster 1..3, spike cluster entry (0)]
        probs = {"new": w.w_new, "spike": w.w_spike}
        probs.update({l: w.w_existing[l] for l in range(3)})
        freq = {"new": np.mean(lab == 3), "spike": np.mean(lab == -1)}
        freq.update({l: np.mean(lab == l) for l in range(3)})
        for key, pk in probs.items():
            se = np.sqrt(pk * (1 - pk) / reps)
            assert abs(freq[key] - pk) < 3 * se, key

    def test_spike_count_against_chain(self):
        p = NigParams(1.0, 1.0, 0.5)
        init = ValuedState.from_counts((6, 2), (0.5, -0.5), 2, 0.0)
        ns = np.concatenate([b.n_spike for b in simulate(p, 15, 40_000, seed=8, initial=init)])
        exact = chain_n0_distribution(make_urn(p), 15, init.n, 2, 2)
        hist = np.bincount(ns, minlength=len(exact)) / ns.size
        assert exact.tv(hist) < 0.02

    def test_outer_is_binomial(self):
        p = StableParams(0.5, 0.5)
        reps = 100_000
        ns = np.concatenate([b.n_spike for b in simulate(p, 50, reps, seed=3, outer=True)])
        se = np.sqrt(50 * 0.25 / reps)
        assert abs(ns.mean() - 25) < 3 * se
        hist = np.bincount(ns, minlength=51) / reps
        assert 0.5 * np.abs(hist - stats.binom.pmf(np.arange(51), 50, 0.5)).sum() < 0.01

    def test_zero_zeta_never_spikes(self):
        lab = labels_of(simulate(StableParams(0.5, 0.0), 30, 500, seed=1))
        assert not np.any(lab == -1)

    def test_spike_start_needs_mass(self):
        init = ValuedState.from_counts((2,), (0.3,), 1, 0.0)
        with pytest.raises(ValueError):
            simulate(StableParams(0.5, 0.0), 5, 5, seed=1, initial=init)
