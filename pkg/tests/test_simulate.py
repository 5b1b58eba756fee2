import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import random_standardized_cov
from sklearn.cluster import AgglomerativeClustering

from blockggm import (
    InputError,
    Partition,
    adjusted_rand_index,
    sample_covariance,
    score_path,
    select_shdj,
    select_shrr,
    standardize,
    threshold_path,
)
from blockggm.simulate import (
    SimConfig,
    benchmark_csv,
    block_sizes,
    edge_metrics,
    hac_average,
    hac_single,
    make_block_cov,
    make_generator,
    run_benchmark,
    sample_mvn,
    summarize,
    unscaled_block,
)


class TestGroundTruth:
    def test_singleton_blocks_give_identity(self):
        truth = make_block_cov(SimConfig(p=4, n=10, k=4, seed=3))
        np.testing.assert_array_equal(truth.sigma, np.eye(4))
        assert truth.edges == frozenset()
        assert truth.partition == Partition.singletons(4)

    @given(st.integers(1, 12), st.integers(0, 10_000), st.floats(0.01, 2.0))
    def test_eigen_floor(self, size, seed, floor):
        block = unscaled_block(size, floor, make_generator(seed))
        assert np.linalg.eigvalsh(block)[0] >= floor - 1e-10

    def test_edges_inside_two_blocks(self):
        truth = make_block_cov(SimConfig(p=6, n=10, k=2, seed=11))
        assert truth.partition == Partition(((0, 1, 2), (3, 4, 5)))
        theta = np.linalg.inv(truth.sigma)
        support = {(i, j) for i in range(6) for j in range(i + 1, 6) if abs(theta[i, j]) > 1e-10}
        assert truth.edges == support
        assert all((i < 3) == (j < 3) for i, j in truth.edges)

    @given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 10_000))
    def test_structure_invariants(self, p, k, seed):
        if k > p:
            k, p = p, k
        truth = make_block_cov(SimConfig(p=p, n=10, k=k, seed=seed))
        sizes = truth.partition.sizes
        assert truth.partition.k == k and max(sizes) - min(sizes) <= 1
        np.testing.assert_allclose(np.diag(truth.sigma), 1.0, atol=1e-12)
        np.linalg.cholesky(truth.sigma)
        labels = truth.partition.labels()
        assert all(labels[i] == labels[j] for i, j in truth.edges)

    def test_default_configuration_block_sizes(self):
        truth = make_block_cov(SimConfig(p=100, n=70, k=15))
        assert truth.sigma.shape == (100, 100)
        assert sorted(set(truth.partition.sizes)) == [6, 7]
        assert block_sizes(100, 15).count(7) == 10

    def test_equicorrelated_design(self):
        truth = make_block_cov(SimConfig(p=6, n=10, k=2, design="equicorrelated", within=0.4))
        assert truth.sigma[0, 1] == 0.4 and truth.sigma[0, 3] == 0.0

    @pytest.mark.parametrize("kwargs", [dict(p=3, k=4), dict(n=1), dict(eigen_floor=0.0), dict(design="x")])
    def test_invalid_config(self, kwargs):
        with pytest.raises(InputError):
            SimConfig(**kwargs)


class TestSampling:
    def test_identity_covariance(self):
        truth = make_block_cov(SimConfig(p=5, n=10, k=5))
        x = sample_mvn(truth, 10_000, seed=1)
        s = sample_covariance(x).values
        assert np.max(np.abs(s[~np.eye(5, dtype=bool)])) <= 4 / np.sqrt(10_000)

    def test_deterministic(self):
        truth = make_block_cov(SimConfig(p=8, n=10, k=2, seed=4))
        a = sample_mvn(truth, 30, seed=9).values
        b = sample_mvn(truth, 30, seed=9).values
        np.testing.assert_array_equal(a, b)

    def test_single_row(self):
        truth = make_block_cov(SimConfig(p=8, n=10, k=2, seed=4))
        assert sample_mvn(truth, 1, seed=0).values.shape == (1, 8)

    def test_population_covariance(self):
        truth = make_block_cov(SimConfig(p=6, n=10, k=2, seed=5))
        s = sample_covariance(sample_mvn(truth, 200_000, seed=2)).values
        np.testing.assert_allclose(s, truth.sigma, atol=0.02)


class TestHAC:
    def test_k_equals_p(self, rng):
        s = random_standardized_cov(rng, 7)
        assert hac_average(s, 7) == Partition.singletons(7)

    def test_k_equals_one(self, rng):
        s = random_standardized_cov(rng, 7)
        assert hac_average(s, 1) == Partition.one_block(7)

    def test_separated_groups(self):
        groups = [(0, 2, 4), (1, 3, 5, 6)]
        s = np.eye(7)
        for g in groups:
            for i in g:
                for j in g:
                    if i != j:
                        s[i, j] = 0.8
        part = hac_average(s, 2)
        assert part == Partition(tuple(groups))
        ref = AgglomerativeClustering(n_clusters=2, metric="precomputed", linkage="average")
        assert part == Partition.from_labels(ref.fit_predict(1 - np.abs(s)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_reference_agglomerative(self, seed):
        rng = np.random.default_rng(seed)
        s = random_standardized_cov(rng, 12)
        for k in (2, 4, 7):
            ref = AgglomerativeClustering(n_clusters=k, metric="precomputed", linkage="average")
            assert hac_average(s, k) == Partition.from_labels(ref.fit_predict(1 - np.abs(s)))

    @given(st.integers(0, 10_000), st.integers(2, 14))
    def test_single_linkage_reproduces_threshold_path(self, seed, p):
        s = random_standardized_cov(np.random.default_rng(seed), p)
        for step in threshold_path(s):
            assert hac_single(s, step.partition.k) == step.partition

    def test_invalid_k(self, rng):
        with pytest.raises(InputError):
            hac_average(random_standardized_cov(rng, 4), 5)


class TestEdgeMetrics:
    def test_perfect(self):
        m = edge_metrics({(0, 1), (2, 3)}, {(0, 1), (2, 3)}, 4)
        assert (m.sensitivity, m.specificity, m.fdr) == (1.0, 1.0, 0.0)

    def test_empty_estimate(self):
        m = edge_metrics(set(), {(0, 1)}, 4)
        assert m.sensitivity == 0.0
        assert m.fdr is None

    def test_hand_example(self):
        m = edge_metrics({(0, 1), (0, 2)}, {(0, 1), (2, 3)}, 4)
        assert (m.tp, m.fp, m.fn, m.tn) == (1, 1, 1, 3)
        assert (m.sensitivity, m.specificity, m.fdr) == (0.5, 0.75, 0.5)

    def test_orientation_ignored(self):
        assert edge_metrics({(1, 0)}, {(0, 1)}, 3).tp == 1

    def test_empty_truth_sensitivity_undefined(self):
        assert edge_metrics(set(), set(), 3).sensitivity is None


class TestBenchmark:
    def test_true_partition_beats_glasso_sensitivity(self):
        rows = run_benchmark(SimConfig(p=20, n=200, k=4, seed=1), 10, strategies=("glasso", "truepart"))
        summary = summarize(rows)
        assert summary["truepart"]["sensitivity"]["mean"] >= summary["glasso"]["sensitivity"]["mean"]

    def test_deterministic(self):
        cfg = SimConfig(p=12, n=30, k=3, seed=5)
        assert benchmark_csv(run_benchmark(cfg, 1)) == benchmark_csv(run_benchmark(cfg, 1))

    def test_threads_do_not_change_results(self):
        cfg = SimConfig(p=12, n=30, k=3, seed=6)
        assert benchmark_csv(run_benchmark(cfg, 3, threads=1)) == benchmark_csv(run_benchmark(cfg, 3, threads=3))

    def test_single_true_block(self):
        rows = run_benchmark(SimConfig(p=8, n=40, k=1, seed=2), 3)
        for row in rows:
            if "error" in row:
                continue
            assert (row["ari"] == 1.0) == (row["k_selected"] == 1)

    def test_strategy_filter_and_columns(self):
        rows = run_benchmark(SimConfig(p=10, n=30, k=2, seed=0), 2, strategies=("shdj", "cgl"))
        assert [r["strategy"] for r in rows] == ["shdj", "cgl"] * 2
        header = benchmark_csv(rows).splitlines()[0]
        assert header == "replicate,strategy,ari,sensitivity,specificity,fdr,k_selected,d_selected,seconds"

    def test_unknown_strategy(self):
        with pytest.raises(InputError):
            run_benchmark(SimConfig(p=10, n=30, k=2), 1, strategies=("bic",))

    def test_timing_column(self):
        rows = run_benchmark(SimConfig(p=10, n=30, k=2), 1, strategies=("truepart",), timing=True)
        assert rows[0]["seconds"] > 0

    def test_separated_groups_recovered_by_both_calibrations(self):
        cfg = SimConfig(p=20, n=400, k=4, design="equicorrelated", within=0.5)
        truth = make_block_cov(cfg)
        successes = 0
        for seed in range(10):
            x = standardize(sample_mvn(truth, cfg.n, seed=seed))
            s = sample_covariance(x)
            path = threshold_path(s)
            points = score_path(x, path, s)
            on_path = any(st.partition == truth.partition for st in path)
            shdj = select_shdj(points).selected.partition
            shrr = select_shrr(points).selected.partition
            successes += on_path and shdj == truth.partition and shrr == truth.partition
        assert successes >= 9
        assert adjusted_rand_index(shdj, truth.partition) > 0.5
