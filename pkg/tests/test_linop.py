import numpy as np
import pytest
from hypothesis import given, strategies as st

from proxista.errors import ConvergenceError, ShapeError
from proxista.linop import (adjoint_consistency_check, compose, gram_matrix, gram_spectral_bounds,
                            load_csv_filter, load_csv_matrix, make_block_synthesis,
                            make_convolution, make_dense, make_identity)

from conftest import philox


# -- factories ---------------------------------------------------------------

def test_dense_identity_and_diagonal():
    assert np.array_equal(make_dense(np.eye(3)).apply([1, 2, 3]), [1, 2, 3])
    assert np.array_equal(make_dense(np.diag([1.0, 2, 3])).apply([1, 1, 1]), [1, 2, 3])


def test_dense_adjoint_by_hand():
    H = make_dense([1, 0, 1, 0, 1, 0], rows=2, cols=3)
    assert np.array_equal(H.adjoint([1, 1]), [1, 1, 1])
    assert H.shape == (2, 3)


def test_dense_shape_errors():
    with pytest.raises(ShapeError):
        make_dense([1, 2, 3], rows=2, cols=2)
    with pytest.raises(ShapeError):
        make_dense(np.ones((2, 3)), rows=3, cols=2)
    with pytest.raises(ShapeError):
        make_dense(np.eye(2)).apply([1, 2, 3])
    with pytest.raises(ShapeError):
        make_dense(np.eye(2)).adjoint([1.0])


def test_dense_is_a_copy():
    a = np.eye(2)
    H = make_dense(a)
    a[0, 0] = 5
    assert H.apply([1, 0])[0] == 1


@pytest.mark.parametrize("filt, x, expected", [
    ([1.0], [3.0, -1.0, 2.0], [3.0, -1.0, 2.0]),
    ([1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]),
    ([1.0, -1.0], [1.0, 1.0], [1.0, 0.0, -1.0]),
])
def test_convolution_by_hand(filt, x, expected):
    H = make_convolution(filt, len(x))
    assert H.out_dim == len(x) + len(filt) - 1
    assert np.allclose(H.apply(x), expected)


def test_convolution_shape_matches_sixty_by_fifty():
    assert make_convolution(np.ones(11), 50).shape == (60, 50)


def test_convolution_rejects_empty_filter():
    with pytest.raises(ValueError):
        make_convolution([], 4)


@pytest.mark.parametrize("B, c, expected", [
    (3, [2.0], [2.0, 2.0, 2.0]),
    (1, [1.0, 5.0], [1.0, 5.0]),
    (2, [1.0, 3.0], [1.0, 1.0, 3.0, 3.0]),
])
def test_block_synthesis(B, c, expected):
    assert np.array_equal(make_block_synthesis(B, len(c)).apply(c), expected)


def test_compose_by_hand():
    D = compose(make_dense([[2.0]]), make_dense([[3.0]]))
    assert D.apply([1.0])[0] == 6.0
    FG = compose(make_convolution([1.0, 1.0], 2), make_block_synthesis(2, 1))
    assert np.array_equal(FG.apply([1.0]), [1.0, 2.0, 1.0])


def test_compose_with_identity_acts_as_inner(rng):
    A = make_dense(rng.standard_normal((4, 3)))
    C = compose(make_identity(4), A)
    for _ in range(10):
        x = rng.standard_normal(3)
        assert np.allclose(C.apply(x), A.apply(x), rtol=0, atol=1e-14)


def test_compose_shape_mismatch():
    with pytest.raises(ShapeError):
        compose(make_identity(3), make_identity(2))


def test_to_dense_and_transpose(rng):
    H = make_convolution(rng.standard_normal(4), 6)
    M = H.to_dense()
    assert np.allclose(H.T.to_dense(), M.T)
    assert np.allclose(gram_matrix(H), M.T @ M)


# -- spectral bounds ---------------------------------------------------------

def test_bounds_diagonal():
    b = gram_spectral_bounds(make_dense(np.diag([1.0, 2.0, 3.0])))
    assert b.sigma_m == pytest.approx(1.0, abs=1e-12)
    assert b.sigma_M == pytest.approx(9.0, abs=1e-12)


def test_bounds_identity():
    b = gram_spectral_bounds(make_identity(5))
    assert (b.sigma_m, b.sigma_M) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_bounds_convolution_against_dense_eig():
    H = make_convolution([1.0, 1.0], 4)
    M = H.to_dense()
    w = np.linalg.eigvalsh(M.T @ M)
    b = gram_spectral_bounds(H)
    assert b.sigma_m == pytest.approx(w[0], abs=1e-10)
    assert b.sigma_M == pytest.approx(w[-1], abs=1e-10)


@pytest.mark.parametrize("H", [make_convolution([1.0, 0.5], 8), make_dense(np.diag([1.0, 2, 3, 4]))],
                         ids=["conv", "diag"])
def test_power_iteration_certified_against_dense(H):
    exact = gram_spectral_bounds(H, method="exact-eig")
    it = gram_spectral_bounds(H, method="power-iteration", tol=1e-12, max_iters=100_000)
    assert it.method == "power-iteration"
    assert it.sigma_M == pytest.approx(exact.sigma_M, rel=1e-9)
    assert it.sigma_m == pytest.approx(exact.sigma_m, rel=1e-9)


def test_power_iteration_on_clustered_spectrum():
    # the small end of this Gram spectrum is clustered, so the shifted
    # iteration crawls and its stopping rule fires well before full accuracy
    H = make_convolution(0.6 ** np.arange(11), 50)
    exact = gram_spectral_bounds(H)
    it = gram_spectral_bounds(H, method="power-iteration", tol=1e-10, max_iters=1_000_000)
    assert it.sigma_M == pytest.approx(exact.sigma_M, rel=1e-8)
    assert it.sigma_m == pytest.approx(exact.sigma_m, rel=1e-4)
    assert it.sigma_m >= exact.sigma_m


def test_power_iteration_nonconvergence_carries_estimates():
    H = make_convolution(0.6 ** np.arange(11), 50)
    with pytest.raises(ConvergenceError) as ei:
        gram_spectral_bounds(H, method="power-iteration", tol=1e-15, max_iters=3)
    assert ei.value.estimates is not None


def test_sigma_m_clipped_at_zero():
    # rank-deficient: eigensolver noise must not produce a negative sigma_m
    b = gram_spectral_bounds(make_dense(np.ones((3, 3))))
    assert b.sigma_m >= 0.0
    assert b.sigma_M == pytest.approx(9.0)


def test_rayleigh_quotients_inside_bounds():
    rng = philox(3)
    H = make_convolution(rng.standard_normal(5), 12)
    b = gram_spectral_bounds(H)
    X = rng.standard_normal((1000, 12))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    q = np.array([np.sum(H.apply(x) ** 2) for x in X])
    assert np.all(q >= b.sigma_m - 1e-9) and np.all(q <= b.sigma_M + 1e-9)


def test_compose_bounds_submultiplicative():
    F = make_convolution(0.8 ** np.arange(11), 60)
    G = make_block_synthesis(3, 20)
    bF, bG, bFG = (gram_spectral_bounds(A) for A in (F, G, compose(F, G)))
    assert bFG.sigma_M <= bF.sigma_M * bG.sigma_M * (1 + 1e-12)


# -- adjoints ----------------------------------------------------------------

def test_adjoint_consistency_of_each_kind():
    rng = philox(9)
    maps = [
        make_dense(rng.standard_normal((5, 4))),
        make_convolution(rng.standard_normal(6), 10),
        make_block_synthesis(3, 7),
        compose(make_convolution(rng.standard_normal(4), 21), make_block_synthesis(3, 7)),
    ]
    for H in maps:
        assert adjoint_consistency_check(H, trials=100, seed=1) < 1e-12


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.integers(1, 20), st.integers(0, 2 ** 32))
def test_convolution_adjoint_property(filt, n, seed):
    H = make_convolution(filt, n)
    rng = philox(seed)
    x, r = rng.standard_normal(n), rng.standard_normal(H.out_dim)
    lhs, rhs = H.apply(x) @ r, x @ H.adjoint(r)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs) + np.abs(filt).sum() * np.abs(x).sum() * np.abs(r).max())


@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2 ** 32))
def test_linearity_property(B, K, seed):
    rng = philox(seed)
    H = compose(make_convolution(rng.standard_normal(3), B * K), make_block_synthesis(B, K))
    x, z = rng.standard_normal(K), rng.standard_normal(K)
    a = rng.uniform(-3, 3)
    assert np.allclose(H.apply(x + z), H.apply(x) + H.apply(z), rtol=1e-12, atol=1e-12)
    assert np.allclose(H.apply(a * x), a * H.apply(x), rtol=1e-12, atol=1e-12)


# -- csv fixtures ------------------------------------------------------------

def test_csv_loaders(tmp_path):
    (tmp_path / "m.csv").write_text("1,2\n3,4\n5,6\n")
    (tmp_path / "f.csv").write_text("1,0.5,0.25\n")
    H = load_csv_matrix(tmp_path / "m.csv")
    assert H.shape == (3, 2)
    assert np.array_equal(H.apply([1, 1]), [3, 7, 11])
    assert np.array_equal(load_csv_filter(tmp_path / "f.csv"), [1, 0.5, 0.25])
