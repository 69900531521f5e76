import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from smkl.kernels import (DegenerateDataError, KernelMatrix, build_bank, gaussian_kernel,
                          linear_kernel, load_bank, pairwise_sq_dists, polynomial_kernel,
                          rescale_kernel, save_bank)


def test_sq_dists_line():
    D2, m = pairwise_sq_dists(np.array([[0.0], [1.0]]))
    np.testing.assert_array_equal(D2, [[0, 1], [1, 0]])
    assert m == 1


def test_sq_dists_identical_rows():
    D2, m = pairwise_sq_dists(np.ones((3, 2)))
    assert np.all(D2 == 0) and m == 0


def test_sq_dists_345():
    D2, m = pairwise_sq_dists(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert D2[0, 1] == D2[1, 0] == 25 and m == 25


def test_gaussian_values():
    D2 = np.array([[0.0, 4.0], [4.0, 0.0]])
    H = gaussian_kernel(D2, 1, 4.0).values
    np.testing.assert_array_equal(np.diag(H), [1.0, 1.0])
    assert abs(H[0, 1] - np.exp(-1)) < 1e-15


def test_gaussian_wide_bandwidth_near_one(rng):
    D2, m = pairwise_sq_dists(rng.standard_normal((10, 3)))
    assert gaussian_kernel(D2, 100, m).values.min() >= np.exp(-1 / 100)


def test_gaussian_degenerate():
    with pytest.raises(DegenerateDataError):
        gaussian_kernel(np.zeros((3, 3)), 1.0, 0.0)


def test_linear_kernel():
    np.testing.assert_array_equal(linear_kernel(np.eye(2)).values, np.eye(2))
    np.testing.assert_array_equal(linear_kernel(np.array([[2.0]])).values, [[4.0]])


def test_polynomial_kernel():
    np.testing.assert_array_equal(polynomial_kernel(np.eye(2), 0, 2).values, np.eye(2))
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    H = polynomial_kernel(X, 1, 2).values
    assert H[0, 1] == 4.0
    assert polynomial_kernel(X, 1, 4).values[0, 2] == 1.0


def test_rescale():
    H = rescale_kernel(KernelMatrix(np.array([[4.0, 2.0], [2.0, 4.0]]), "k"))
    np.testing.assert_array_equal(H.values, [[1.0, 0.5], [0.5, 1.0]])
    assert rescale_kernel(H).values is H.values


def test_rescale_gaussian_unchanged(rng):
    D2, m = pairwise_sq_dists(rng.standard_normal((6, 2)))
    G = gaussian_kernel(D2, 1.0, m)
    np.testing.assert_array_equal(rescale_kernel(G).values, G.values)


def test_rescale_zero_kernel():
    with pytest.raises(DegenerateDataError):
        rescale_kernel(KernelMatrix(np.zeros((2, 2)), "zero"))


def test_recipes(rng):
    X = rng.standard_normal((20, 3))
    b12 = build_bank(X, "clustering12")
    b7 = build_bank(X, "ssl7")
    assert len(b12) == 12 and len(b7) == 7
    assert b12.kinds[:7] == [f"gaussian(t={t:g})" for t in (0.01, 0.05, 0.1, 1, 10, 50, 100)]
    assert b12.kinds[7:] == ["linear", "polynomial(a=0,b=2)", "polynomial(a=0,b=4)",
                             "polynomial(a=1,b=2)", "polynomial(a=1,b=4)"]
    assert b7.kinds == ["gaussian(t=0.1)", "gaussian(t=1)", "gaussian(t=10)",
                        "gaussian(t=100)", "linear", "polynomial(a=0,b=2)",
                        "polynomial(a=1,b=2)"]
    for k in b12.kernels + b7.kernels:
        assert np.abs(k.values).max() == 1.0
        assert k.values.min() >= -1.0
        assert np.abs(k.values - k.values.T).max() <= 1e-10


def test_bank_degenerate_data():
    with pytest.raises(DegenerateDataError):
        build_bank(np.ones((5, 2)), "clustering12")


def test_bank_is_immutable(rng):
    bank = build_bank(rng.standard_normal((5, 2)), "ssl7")
    with pytest.raises(ValueError):
        bank[0].values[0, 0] = 3.0


def test_bank_round_trip(tmp_path, rng):
    bank = build_bank(rng.standard_normal((8, 3)), "ssl7")
    save_bank(bank, tmp_path)
    again = load_bank(tmp_path)
    assert again.kinds == bank.kinds and again.recipe_name == "ssl7"
    for a, b in zip(bank.kernels, again.kernels):
        np.testing.assert_array_equal(a.values, b.values)


data = arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
              elements=st.floats(-10, 10, allow_nan=False, width=64))


@settings(max_examples=50, deadline=None)
@given(data)
def test_unscaled_gram_kernels_psd(X):
    for H in (linear_kernel(X), polynomial_kernel(X, 0, 2), polynomial_kernel(X, 1, 2),
              polynomial_kernel(X, 0, 4), polynomial_kernel(X, 1, 4)):
        scale = len(H.values) * np.abs(H.values).max()
        assert np.linalg.eigvalsh(H.values)[0] >= -1e-8 * scale


@settings(max_examples=50, deadline=None)
@given(data, st.floats(0.01, 100), st.floats(0.01, 100))
def test_gaussian_monotone_in_t(X, t1, t2):
    D2, m = pairwise_sq_dists(X)
    if m == 0:
        return
    lo, hi = sorted((t1, t2))
    assert np.all(gaussian_kernel(D2, lo, m).values <= gaussian_kernel(D2, hi, m).values)


@settings(max_examples=50, deadline=None)
@given(data)
def test_rescale_idempotent(X):
    H = linear_kernel(X)
    if np.abs(H.values).max() == 0:
        return
    once = rescale_kernel(H)
    np.testing.assert_array_equal(rescale_kernel(once).values, once.values)
