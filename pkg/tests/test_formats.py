import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensorgrid.errors import InvalidArgumentError, SizeGuardError
from tensorgrid.formats import (
    CanonicalTensor3, TuckerTensor3, add, canonical_tucker_dot, convolve, convolve_columns,
    frobenius_norm, hadamard, merge_parallel_terms, rank1, relative_error, scalar_product, scale,
    to_dense, tucker_dot, zeros,
)

from conftest import random_canonical
from oracles import dense_canonical_loops, dense_convolution_fft, dense_convolution_loops


def ones_rank1(n):
    return rank1(np.ones(n), np.ones(n), np.ones(n))


def random_tucker(rng, shape, ranks):
    zs = tuple(np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(shape, ranks))
    return TuckerTensor3(rng.standard_normal(ranks), zs)


def test_rank0_dense_is_zero():
    d = to_dense(zeros((3, 4, 5)))
    assert d.shape == (3, 4, 5) and not d.any()


def test_constant_tensor():
    t = rank1(np.ones(4), np.ones(5), np.ones(6), weight=2.0)
    np.testing.assert_array_equal(to_dense(t), np.full((4, 5, 6), 2.0))


def test_to_dense_matches_loops(rng):
    t = random_canonical(rng, (8, 8, 8), 3)
    np.testing.assert_allclose(to_dense(t), dense_canonical_loops(t), rtol=0, atol=1e-14 * np.abs(t.weights).max() * 30)


def test_size_guard():
    t = rank1(np.ones(1024), np.ones(1024), np.ones(1024))
    with pytest.raises(SizeGuardError):
        to_dense(t)


def test_tensor_is_immutable(rng):
    t = random_canonical(rng, (3, 3, 3), 2)
    with pytest.raises(ValueError):
        t.factors[0][0, 0] = 1.0


def test_rank_mismatch_rejected():
    with pytest.raises(InvalidArgumentError):
        CanonicalTensor3(np.ones(2), (np.ones((3, 2)), np.ones((3, 2)), np.ones((3, 1))))


def test_scalar_product_ones():
    assert scalar_product(ones_rank1(4), ones_rank1(4)) == 64.0


def test_scalar_product_orthogonal_axis():
    a = rank1([1, 0, 0], [1, 2, 3], [1, 1, 1])
    b = rank1([0, 1, 0], [1, 2, 3], [1, 1, 1])
    assert scalar_product(a, b) == 0.0


def test_scalar_product_dense(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 8), 3)
    ref = np.sum(to_dense(a) * to_dense(b))
    assert abs(scalar_product(a, b) - ref) <= 1e-12 * abs(ref)


def test_extent_mismatch(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 7), 2)
    for op in (scalar_product, add, hadamard):
        with pytest.raises(InvalidArgumentError):
            op(a, b)
    with pytest.raises(InvalidArgumentError):
        convolve(a, b, 0.1)


def test_hadamard_identity(rng):
    a = random_canonical(rng, (5, 6, 7), 3)
    np.testing.assert_allclose(to_dense(hadamard(a, rank1(np.ones(5), np.ones(6), np.ones(7)))), to_dense(a))


def test_hadamard_zero(rng):
    a = random_canonical(rng, (5, 6, 7), 3)
    p = hadamard(a, zeros((5, 6, 7)))
    assert p.rank == 0 and not to_dense(p).any()


def test_hadamard_dense(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 8), 2)
    p = hadamard(a, b)
    assert p.rank == 4
    ref = to_dense(a) * to_dense(b)
    np.testing.assert_allclose(to_dense(p), ref, rtol=0, atol=1e-13 * np.abs(ref).max())


def test_add_zero(rng):
    a = random_canonical(rng, (4, 4, 4), 3)
    s = add(a, zeros((4, 4, 4)))
    assert s.rank == 3
    np.testing.assert_array_equal(to_dense(s), to_dense(a))


def test_add_negative_cancels(rng):
    a = random_canonical(rng, (4, 4, 4), 3)
    s = add(a, scale(a, -1.0))
    assert s.rank == 6
    assert np.abs(to_dense(s)).max() <= 1e-14 * np.abs(to_dense(a)).max()
    assert merge_parallel_terms(s).rank == 0


def test_add_dense(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 8), 3)
    s = add(a, b)
    assert s.rank == 5
    ref = to_dense(a) + to_dense(b)
    np.testing.assert_allclose(to_dense(s), ref, rtol=0, atol=1e-14 * np.abs(ref).max() * 4)


def test_convolve_delta_identity(rng):
    n, h = 9, 0.3
    a = random_canonical(rng, (n, n, n), 2)
    e = np.zeros(n)
    e[(n - 1) // 2] = 1.0 / h
    c = convolve(a, rank1(e, e, e), h)
    np.testing.assert_allclose(to_dense(c), to_dense(a), rtol=1e-13, atol=1e-13)


def test_convolve_gaussians_loops():
    n, h = 16, 0.4
    x = (np.arange(n) - 7.5) * h
    a = rank1(np.exp(-x ** 2), np.exp(-0.5 * x ** 2), np.exp(-2 * x ** 2))
    b = rank1(np.exp(-0.7 * x ** 2), np.exp(-x ** 2), np.exp(-0.3 * x ** 2))
    ref = dense_convolution_loops(to_dense(a), to_dense(b), h)
    got = to_dense(convolve(a, b, h))
    assert np.linalg.norm(got - ref) <= 1e-12 * np.linalg.norm(ref)


def test_convolve_rank2_fft(rng):
    n, h = 32, 0.2
    a = random_canonical(rng, (n, n, n), 2)
    b = random_canonical(rng, (n, n, n), 2)
    c = convolve(a, b, h)
    assert c.rank == 4
    ref = dense_convolution_fft(to_dense(a), to_dense(b), h)
    assert np.linalg.norm(to_dense(c) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_convolve_doubled_reference(rng):
    n, h = 10, 0.5
    a = random_canonical(rng, (n, n, n), 2)
    b = random_canonical(rng, (2 * n, 2 * n, 2 * n), 3)
    ref = dense_convolution_fft(to_dense(a), to_dense(b), h)
    assert np.linalg.norm(to_dense(convolve(a, b, h)) - ref) <= 1e-12 * np.linalg.norm(ref)


@pytest.mark.parametrize("nb_factor", [1, 2])
def test_fft_and_direct_agree(rng, nb_factor):
    for n in (7, 64, 130):
        a = rng.standard_normal((n, 3))
        b = rng.standard_normal((nb_factor * n, 4))
        d = convolve_columns(a, b, 0.1, "direct")
        f = convolve_columns(a, b, 0.1, "fft")
        assert np.abs(d - f).max() <= 1e-12 * np.abs(d).max()


def test_norm_ones():
    assert frobenius_norm(ones_rank1(4)) == 8.0


def test_relative_error_self(rng):
    a = random_canonical(rng, (6, 6, 6), 4)
    assert relative_error(a, a) == 0.0


def test_relative_error_dense(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 8), 3)
    da, db = to_dense(a), to_dense(b)
    ref = np.linalg.norm(da - db) / np.linalg.norm(db)
    assert abs(relative_error(a, b) - ref) <= 1e-13 * ref


def test_relative_error_zero_reference(rng):
    with pytest.raises(ZeroDivisionError):
        relative_error(random_canonical(rng, (3, 3, 3), 1), zeros((3, 3, 3)))


def test_tucker_identity_core_is_rank1(rng):
    zs = tuple(np.linalg.qr(rng.standard_normal((n, 1)))[0] for n in (5, 6, 7))
    t = TuckerTensor3(np.ones((1, 1, 1)), zs)
    c = rank1(zs[0][:, 0], zs[1][:, 0], zs[2][:, 0])
    np.testing.assert_allclose(to_dense(t), to_dense(c), rtol=1e-15)


def test_tucker_dense_contraction(rng):
    t = random_tucker(rng, (8, 8, 8), (2, 3, 4))
    ref = np.zeros((8, 8, 8))
    z1, z2, z3 = t.factors
    for a in range(2):
        for b in range(3):
            for c in range(4):
                ref += t.core[a, b, c] * np.multiply.outer(np.multiply.outer(z1[:, a], z2[:, b]), z3[:, c])
    np.testing.assert_allclose(to_dense(t), ref, rtol=0, atol=1e-13 * np.abs(ref).max())
    assert t.orthogonality_defect() < 1e-12


def test_tucker_scalar_products(rng):
    s = random_tucker(rng, (8, 8, 8), (2, 3, 4))
    t = random_tucker(rng, (8, 8, 8), (3, 3, 2))
    a = random_canonical(rng, (8, 8, 8), 3)
    ds, dt, da = to_dense(s), to_dense(t), to_dense(a)
    ref = np.sum(ds * dt)
    assert abs(tucker_dot(s, t) - ref) <= 1e-12 * np.linalg.norm(ds) * np.linalg.norm(dt)
    ref = np.sum(ds * da)
    assert abs(canonical_tucker_dot(a, s) - ref) <= 1e-12 * np.linalg.norm(ds) * np.linalg.norm(da)
    assert abs(scalar_product(s, a) - ref) <= 1e-12 * np.linalg.norm(ds) * np.linalg.norm(da)
    assert abs(frobenius_norm(s) - np.linalg.norm(ds)) <= 1e-12 * np.linalg.norm(ds)


def test_merge_parallel_terms(rng):
    a = random_canonical(rng, (5, 5, 5), 3)
    m = merge_parallel_terms(add(a, scale(a, 2.0)))
    assert m.rank == 3
    np.testing.assert_allclose(to_dense(m), 3 * to_dense(a), rtol=1e-13, atol=1e-13)


shapes = st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))


@settings(max_examples=40, deadline=None)
@given(shapes, st.integers(0, 3), st.integers(0, 3), st.integers(0, 2 ** 32 - 1))
def test_homomorphism_properties(shape, ra, rb, seed):
    rng = np.random.default_rng(seed)
    a = random_canonical(rng, shape, ra)
    b = random_canonical(rng, shape, rb)
    da, db = to_dense(a), to_dense(b)
    assert add(a, b).rank == ra + rb
    assert hadamard(a, b).rank == ra * rb
    assert convolve(a, b, 0.5).rank == ra * rb
    tol = 1e-10 * (1 + np.abs(da).max() * np.abs(db).max() + np.abs(da).max() + np.abs(db).max())
    np.testing.assert_allclose(to_dense(add(a, b)), da + db, rtol=0, atol=tol)
    np.testing.assert_allclose(to_dense(hadamard(a, b)), da * db, rtol=0, atol=tol)
    np.testing.assert_allclose(to_dense(convolve(a, b, 0.5)), dense_convolution_fft(da, db, 0.5), rtol=0,
                               atol=tol * np.prod(shape))
    # symmetric and bilinear scalar product
    assert scalar_product(a, b) == pytest.approx(scalar_product(b, a), rel=1e-12, abs=1e-12)
    c = random_canonical(rng, shape, 2)
    lhs = scalar_product(add(scale(a, 1.5), c), b)
    rhs = 1.5 * scalar_product(a, b) + scalar_product(c, b)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10 * (1 + abs(rhs)))
    assert scalar_product(a, a) >= -1e-12
