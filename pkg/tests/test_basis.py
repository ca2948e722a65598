import math

import numpy as np
import pytest

import gaussian_oracle as go
from tensorgrid.basis import (BasisSet, Molecule, SeparableBasisFunction, build_basis, discretize_basis,
                              shell_functions)
from tensorgrid.errors import InvalidArgumentError, OutOfDomainError
from tensorgrid.formats import to_dense
from tensorgrid.grid import make_grid
from tensorgrid.hartree_fock import overlap_matrix


def s_function(center, alpha, coef=1.0):
    return SeparableBasisFunction(center, (alpha,), (coef,))


def test_unit_exponent_factor_values():
    g = make_grid(4.0, 31)
    bs = BasisSet((s_function((0, 0, 0), 1.0),), g)
    x = g.points(0)
    for f in bs.factors:
        np.testing.assert_allclose(f[:, 0], np.exp(-x ** 2), rtol=0, atol=1e-15)
    dense = to_dense(discretize_basis(bs)[0])
    assert np.unravel_index(np.argmax(dense), dense.shape) == (15, 15, 15)


def test_contracted_function_has_primitive_rank():
    g = make_grid(4.0, 16)
    f = SeparableBasisFunction((0.1, 0, 0), (0.5, 2.0), (0.6, 0.4))
    assert discretize_basis(BasisSet((f,), g))[0].rank == 2


def test_grid_overlap_matches_analytic():
    g = make_grid(8.0, 128)
    fa = SeparableBasisFunction((0.3, -0.2, 0.1), (0.8, 0.3), (0.5, 0.6))
    fb = s_function((-0.5, 0.4, 0.0), 0.45)
    S = overlap_matrix(BasisSet((fa, fb), g))
    ca = [(0.5, 0.8, fa.center), (0.6, 0.3, fa.center)]
    cb = [(1.0, 0.45, fb.center)]
    ref = np.array([[go.overlap(go._normalized(x), go._normalized(y)) for y in (ca, cb)] for x in (ca, cb)])
    np.testing.assert_allclose(S, ref, atol=1e-5)
    assert S[0, 0] == pytest.approx(1.0, abs=1e-5)


def test_p_functions_normalized_and_orthogonal_to_s():
    g = make_grid(8.0, 96)
    funcs = shell_functions("p", (0.2, 0, 0), (0.7,), (1.0,)) + [s_function((0.2, 0, 0), 0.7)]
    S = overlap_matrix(BasisSet(tuple(funcs), g))
    np.testing.assert_allclose(S, np.eye(4), atol=1e-8)


def test_p_overlap_between_centres_matches_quadrature():
    g = make_grid(8.0, 128)
    a, A = 0.6, (0.4, 0.0, 0.0)
    b, B = 0.9, (-0.3, 0.0, 0.0)
    px = SeparableBasisFunction(A, (a,), (1.0,), (1, 0, 0))
    sb = s_function(B, b)
    S = overlap_matrix(BasisSet((px, sb), g))
    raw = (go.moment_1d(a, A[0], 1, b, B[0], 0) * go.moment_1d(a, 0, 0, b, 0, 0) ** 2)
    na = 1 / math.sqrt(go.moment_1d(a, 0, 1, a, 0, 1) * go.moment_1d(a, 0, 0, a, 0, 0) ** 2)
    nb = 1 / math.sqrt(go.moment_1d(b, 0, 0, b, 0, 0) ** 3)
    assert S[0, 1] == pytest.approx(raw * na * nb, abs=1e-6)


def test_function_values_match_grid_image():
    g = make_grid(3.0, 12)
    f = SeparableBasisFunction((0.2, -0.1, 0.3), (0.5, 1.5), (0.7, 0.3), (0, 1, 0))
    dense = to_dense(discretize_basis(BasisSet((f,), g))[0])
    pts = np.stack(np.meshgrid(*[g.points(a) for a in range(3)], indexing="ij"), axis=-1)
    np.testing.assert_allclose(dense, f(pts), atol=1e-14)


def test_centre_outside_box():
    with pytest.raises(OutOfDomainError):
        BasisSet((s_function((5.0, 0, 0), 1.0),), make_grid(4.0, 16))


@pytest.mark.parametrize("kwargs", [
    dict(center=(0, 0, 0), exponents=(-1.0,), coefficients=(1.0,)),
    dict(center=(0, 0, 0), exponents=(1.0, 2.0), coefficients=(1.0,)),
    dict(center=(0, 0, 0), exponents=(1.0,), coefficients=(1.0,), powers=(2, 0, 0)),
])
def test_invalid_functions(kwargs):
    with pytest.raises(InvalidArgumentError):
        SeparableBasisFunction(**kwargs)


def test_molecule_validation_and_repulsion():
    mol = Molecule((1.0, 1.0), ((-0.7, 0, 0), (0.7, 0, 0)))
    assert mol.n_electrons == 2 and mol.n_orb == 1 and mol.occupation == 2.0
    assert mol.nuclear_repulsion() == pytest.approx(1 / 1.4, rel=1e-15)
    assert Molecule((1.0,), ((0, 0, 0),)).occupation == 1.0
    with pytest.raises(InvalidArgumentError):
        Molecule((3.0,), ((0, 0, 0),))
    with pytest.raises(InvalidArgumentError):
        Molecule((1.0, 1.0), ((0, 0, 0),))


def test_build_basis_expands_p_shells():
    mol = Molecule((8.0, 1.0, 1.0), ((0, 0, 0), (1.4, 1.1, 0), (-1.4, 1.1, 0)))
    shells = {8: [("s", (5.0, 1.0), (0.4, 0.7)), ("p", (1.2,), (1.0,))], 1: [("s", (0.5,), (1.0,))]}
    bs = build_basis(mol, shells, make_grid(6.0, 32))
    assert bs.size == 6 and bs.n_primitives == 7
    assert [f.powers for f in bs.functions[1:4]] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    with pytest.raises(InvalidArgumentError):
        build_basis(mol, {8: shells[8]}, make_grid(6.0, 32))
