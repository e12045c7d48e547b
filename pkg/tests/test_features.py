import numpy as np
import pytest

from resque.features import ColumnScaler, FeatureMap


def test_degree_one_is_identity():
    x = np.array([[1.0], [2.0], [-3.0]])
    out = FeatureMap(1).expand(x)
    np.testing.assert_array_equal(out, x)


def test_degree_two_monomials():
    x = np.array([[1.0], [2.0]])
    out = FeatureMap(2).expand(x)
    np.testing.assert_array_equal(out, [[1.0, 1.0], [2.0, 4.0]])


def test_subset_monotonicity():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((20, 8))
    fm = FeatureMap(1)
    big = fm.expand(data[:, [2, 5, 7]])
    small = fm.expand(data[:, [2, 5]])
    np.testing.assert_array_equal(small, big[:, :2])
    fm3 = FeatureMap(3)
    big3 = fm3.expand(data[:, [2, 5, 7]])
    small3 = fm3.expand(data[:, [2, 5]])
    np.testing.assert_array_equal(small3, big3[:, :6])


def test_block_concat_property():
    rng = np.random.default_rng(1)
    data = rng.standard_normal((15, 4))
    fm = FeatureMap(2)
    whole = fm.expand(data)
    stacked = np.hstack([fm.expand(data[:, [l]]) for l in range(4)])
    np.testing.assert_array_equal(whole, stacked)


def test_source_of():
    fm2 = FeatureMap(2)
    assert fm2.source_of(0, 4) == 0
    assert fm2.source_of(3, 4) == 1
    fm3 = FeatureMap(3)
    assert fm3.source_of(7, 3) == 7 // 3 == 2
    assert fm3.basis_index(7, 3) == (2, 2)
    with pytest.raises(IndexError):
        fm2.source_of(8, 4)


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        FeatureMap(1).expand(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        FeatureMap(2).expand(np.array([[np.inf], [1.0]]))


def test_degree_bounds():
    with pytest.raises(ValueError):
        FeatureMap(0)
    with pytest.raises(ValueError):
        FeatureMap(4)


def test_scaler_normalizes_and_unscales():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((200, 3)) * [2.0, 0.5, 7.0] + [1.0, -4.0, 0.1]
    sc = ColumnScaler()
    Z = sc.fit_transform(X)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-12)
    beta_std = np.array([0.3, -1.2, 0.0])
    b_std = 2.0
    raw, b_raw = sc.unscale_coef(beta_std, b_std)
    np.testing.assert_allclose(Z @ beta_std + b_std, X @ raw + b_raw, atol=1e-10)


def test_scaler_constant_column():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    Z = ColumnScaler().fit_transform(X)
    np.testing.assert_array_equal(Z[:, 0], np.zeros(10))
    assert np.isfinite(Z).all()
