import numpy as np
import pytest

from resque.graphs import Dag, topological_layers
from resque.simulate import (
    Dataset,
    SemSpec,
    gen_random_dag,
    gen_scale_free_dag,
    gen_tree_dag,
    sample_data,
    sample_sem_params,
)


def test_random_dag_extremes():
    rng = np.random.default_rng(0)
    assert gen_random_dag(6, 0.0, rng).num_edges == 0
    assert gen_random_dag(6, 1.0, rng).num_edges == 6 * 5 // 2


def test_random_dag_expected_count():
    p = 20
    counts = [
        gen_random_dag(p, 1.0 / p, np.random.default_rng(s)).num_edges
        for s in range(400)
    ]
    assert abs(np.mean(counts) - (p - 1) / 2) < 0.5


def test_tree_dag_small():
    g = gen_tree_dag(3, 2, np.random.default_rng(0))
    assert g.num_edges == 2
    root = [j for j in range(3) if not g.parents(j)]
    assert len(root) == 1
    assert len(g.children(root[0])) == 2


def test_tree_dag_perfect_binary():
    g = gen_tree_dag(7, 2, np.random.default_rng(1))
    layers = topological_layers(g).layers
    # leaves first: sizes 4, 2, 1
    assert [len(l) for l in layers] == [4, 2, 1]


def test_tree_dag_edges_and_root():
    for seed in range(20):
        p = int(np.random.default_rng(seed).integers(2, 30))
        g = gen_tree_dag(p, 3, np.random.default_rng(seed))
        assert g.num_edges == p - 1
        roots = [j for j in range(p) if not g.parents(j)]
        assert len(roots) == 1


def test_scale_free_small():
    g = gen_scale_free_dag(2, 1, np.random.default_rng(0))
    assert g.edges == {(0, 1)}
    for seed in range(20):
        g = gen_scale_free_dag(12, 1, np.random.default_rng(seed))
        assert g.num_edges == 11


def test_scale_free_heavy_tail():
    def mean_max_degree(p):
        out = []
        for seed in range(100):
            g = gen_scale_free_dag(p, 1, np.random.default_rng(seed))
            out.append(max(len(g.children(j)) for j in range(p)))
        return np.mean(out)

    assert mean_max_degree(100) > mean_max_degree(25)


def test_generators_always_acyclic():
    # Dag construction validates acyclicity, so survival is the check
    for p in (5, 20, 100):
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            gen_random_dag(p, 1.0 / p, rng)
            gen_tree_dag(p, 2 if p <= 20 else 3, rng)
            gen_scale_free_dag(p, 1, rng)


def test_sem_params_supports():
    dag = Dag(3, [(0, 2), (1, 2)])
    spec = sample_sem_params(dag, np.random.default_rng(0))
    assert spec.beta[0].size == 0 and spec.gamma[0].size == 0
    assert spec.beta[2].size == 2
    mags = np.abs(spec.gamma[2])
    assert np.all((mags >= 1 / 6) & (mags <= 1 / 4))


def test_sem_params_beta_moments():
    # hub node with 100 parents; 1000 draws gives 1e5 coefficient samples
    dag = Dag(101, [(i, 100) for i in range(100)])
    rng = np.random.default_rng(3)
    draws = np.abs(
        np.concatenate([sample_sem_params(dag, rng).beta[100] for _ in range(1000)])
    )
    assert draws.size == 100_000
    assert abs(draws.mean() - 0.75) < 0.01


def test_sample_data_root_moments():
    dag = Dag(1)
    spec = sample_sem_params(dag, np.random.default_rng(0), errors="gaussian")
    data = sample_data(spec, 100_000, np.random.default_rng(1))
    assert abs(data.values[:, 0].var() - 1.0) < 0.02


def test_sample_data_uniform_support():
    dag = Dag(2, [(0, 1)])
    spec = sample_sem_params(dag, np.random.default_rng(0), errors="uniform")
    data = sample_data(spec, 5000, np.random.default_rng(1))
    assert np.all(np.abs(data.values[:, 0]) <= 1.0)


def test_conditional_variance_profile():
    # x0 -> x1 with beta=1, gamma=0.25: Var(x1 | x0=x) = exp(0.5 x) Var(eps)
    dag = Dag(2, [(0, 1)])
    spec = SemSpec(
        dag=dag,
        beta=(np.array([]), np.array([1.0])),
        gamma=(np.array([]), np.array([0.25])),
        errors="uniform",
    )
    data = sample_data(spec, 200_000, np.random.default_rng(5))
    x0, x1 = data.values[:, 0], data.values[:, 1]
    var_eps = 1.0 / 3.0
    for lo, hi in [(-0.9, -0.7), (-0.1, 0.1), (0.7, 0.9)]:
        sel = (x0 >= lo) & (x0 < hi)
        resid = x1[sel] - x0[sel]
        center = 0.5 * (lo + hi)
        expected = np.exp(0.5 * center) * var_eps
        assert abs(resid.var() / expected - 1.0) < 0.08


def test_linear_gaussian_reduction():
    rng = np.random.default_rng(9)
    dag = gen_random_dag(5, 0.4, rng)
    spec = sample_sem_params(dag, rng, errors="gaussian")
    spec = SemSpec(
        dag=dag,
        beta=spec.beta,
        gamma=tuple(np.zeros_like(g) for g in spec.gamma),
        errors="gaussian",
    )
    data = sample_data(spec, 100_000, np.random.default_rng(10))
    for j in range(5):
        col = data.values[:, j]
        z = (col - col.mean()) / col.std()
        skew = np.mean(z**3)
        kurt = np.mean(z**4)
        assert abs(skew) < 0.05
        assert abs(kurt - 3.0) < 0.1


def test_seed_determinism():
    dag1 = gen_random_dag(8, 0.3, np.random.default_rng(42))
    dag2 = gen_random_dag(8, 0.3, np.random.default_rng(42))
    assert dag1 == dag2
    spec1 = sample_sem_params(dag1, np.random.default_rng(43), errors="beta")
    spec2 = sample_sem_params(dag2, np.random.default_rng(43), errors="beta")
    d1 = sample_data(spec1, 100, np.random.default_rng(44))
    d2 = sample_data(spec2, 100, np.random.default_rng(44))
    np.testing.assert_array_equal(d1.values, d2.values)


def test_beta_errors_centered():
    dag = Dag(1)
    spec = sample_sem_params(dag, np.random.default_rng(0), errors="beta")
    data = sample_data(spec, 200_000, np.random.default_rng(2))
    assert abs(data.values.mean()) < 0.005


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(values=np.array([[np.nan]]))
    with pytest.raises(ValueError):
        Dataset(values=np.zeros((2, 2)), names=("a",))
    ds = Dataset(values=np.zeros((3, 2)))
    assert ds.names == ("x0", "x1")
    assert (ds.n, ds.p) == (3, 2)


def test_bad_error_family():
    dag = Dag(1)
    with pytest.raises(ValueError):
        SemSpec(dag=dag, beta=(np.array([]),), gamma=(np.array([]),), errors="cauchy")
