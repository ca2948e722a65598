"""Separable Gaussian basis functions, molecules and their grid images.

A basis function is a contraction of Cartesian Gaussian primitives
``(x - c)^p exp(-alpha |x - c|^2)`` with per-axis powers 0 or 1, so each
primitive is a product of three 1D factors and discretizes to a rank-1
tensor.  All grid quantities are computed from the per-axis matrices of
primitive values; contracted quantities follow by congruence with the
contraction matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError
from .formats import CanonicalTensor3
from .grid import Grid3

ELEMENTS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "Ne": 10,
}


def _moment(power: int, alpha: float) -> float:
    """``int x^(2 power) exp(-alpha x^2) dx`` over the real line."""
    return math.gamma(power + 0.5) / alpha ** (power + 0.5)


@dataclass(frozen=True)
class SeparableBasisFunction:
    """Normalized contraction of Cartesian Gaussian primitives.

    Parameters
    ----------
    center : 3 floats
        Centre in bohr.
    exponents : sequence of float
        Primitive exponents ``alpha > 0``.
    coefficients : sequence of float
        Contraction coefficients referring to normalized primitives.
    powers : 3 ints
        Polynomial degree per axis, 0 or 1; ``(0, 0, 0)`` is s-type.
    """

    center: tuple
    exponents: tuple
    coefficients: tuple
    powers: tuple = (0, 0, 0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        e = tuple(float(v) for v in np.atleast_1d(self.exponents))
        k = tuple(float(v) for v in np.atleast_1d(self.coefficients))
        p = tuple(int(v) for v in self.powers)
        if len(c) != 3 or len(p) != 3:
            raise InvalidArgumentError("centre and powers need three components")
        if not e or len(e) != len(k):
            raise InvalidArgumentError("exponents and coefficients must be non-empty and of equal length")
        if min(e) <= 0:
            raise InvalidArgumentError("exponents must be positive")
        if any(v not in (0, 1) for v in p):
            raise InvalidArgumentError("only s- and p-type factors are supported")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "exponents", e)
        object.__setattr__(self, "coefficients", k)
        object.__setattr__(self, "powers", p)

    @property
    def n_primitives(self) -> int:
        return len(self.exponents)

    def primitive_norm(self, alpha: float) -> float:
        """Factor making the primitive with exponent ``alpha`` unit-normalized."""
        return 1.0 / math.sqrt(math.prod(_moment(p, 2 * alpha) for p in self.powers))

    def primitive_weights(self) -> np.ndarray:
        """Coefficients of the raw primitives in the normalized function."""
        w = np.array([c * self.primitive_norm(a) for a, c in zip(self.exponents, self.coefficients)])
        gram = np.array([[math.prod(_moment(p, a + b) for p in self.powers)
                          for b in self.exponents] for a in self.exponents])
        return w / math.sqrt(w @ gram @ w)

    def axis_factors(self, x: np.ndarray, axis: int) -> np.ndarray:
        """Raw primitive factors along ``axis`` at points ``x``, shape ``(len(x), P)``."""
        d = np.asarray(x, dtype=float)[:, None] - self.center[axis]
        return d ** self.powers[axis] * np.exp(-np.asarray(self.exponents)[None, :] * d ** 2)

    def __call__(self, points) -> np.ndarray:
        """Values at an array of points of shape ``(..., 3)``."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        vals = np.ones((flat.shape[0], self.n_primitives))
        for axis in range(3):
            vals *= self.axis_factors(flat[:, axis], axis)
        return (vals @ self.primitive_weights()).reshape(pts.shape[:-1])


def shell_functions(kind: str, center, exponents, coefficients) -> list:
    """Basis functions of one shell: one s function or the three p functions."""
    if kind == "s":
        return [SeparableBasisFunction(center, exponents, coefficients)]
    if kind == "p":
        return [SeparableBasisFunction(center, exponents, coefficients, tuple(int(i == a) for i in range(3)))
                for a in range(3)]
    raise InvalidArgumentError(f"unsupported shell type {kind!r}")


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Basis functions bound to a grid, with cached primitive side matrices.

    Attributes
    ----------
    factors : tuple of ndarray
        Per axis, the ``n x P`` matrix of raw primitive values at the nodes.
    contraction : ndarray
        ``P x N_b`` matrix; column ``mu`` holds the primitive weights of
        function ``mu``.
    """

    functions: tuple
    grid: Grid3
    factors: tuple = field(init=False, repr=False)
    contraction: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        funcs = tuple(self.functions)
        if not funcs:
            raise InvalidArgumentError("a basis needs at least one function")
        for f in funcs:
            for axis in range(3):
                if abs(f.center[axis]) > self.grid.b_half[axis]:
                    raise OutOfDomainError(f"basis centre {f.center} lies outside the box")
        object.__setattr__(self, "functions", funcs)
        facs = tuple(np.hstack([f.axis_factors(self.grid.points(axis), axis) for f in funcs])
                     for axis in range(3))
        for a in facs:
            a.flags.writeable = False
        object.__setattr__(self, "factors", facs)
        total = sum(f.n_primitives for f in funcs)
        cmat = np.zeros((total, len(funcs)))
        start = 0
        for mu, f in enumerate(funcs):
            cmat[start:start + f.n_primitives, mu] = f.primitive_weights()
            start += f.n_primitives
        cmat.flags.writeable = False
        object.__setattr__(self, "contraction", cmat)

    @property
    def size(self) -> int:
        """Number of basis functions ``N_b``."""
        return len(self.functions)

    @property
    def n_primitives(self) -> int:
        return self.contraction.shape[0]

    def support(self, mu: int) -> np.ndarray:
        """Primitive indices belonging to function ``mu``."""
        return np.flatnonzero(self.contraction[:, mu])

    def contract(self, prim: np.ndarray) -> np.ndarray:
        """Map a primitive-pair matrix to the contracted basis."""
        return self.contraction.T @ prim @ self.contraction


def discretize_basis(bs: BasisSet) -> list:
    """Grid images of the basis functions as canonical tensors.

    Each function of ``P`` primitives gives a rank-``P`` tensor whose
    factors are the primitive values at the grid nodes.
    """
    out = []
    for mu in range(bs.size):
        idx = bs.support(mu)
        out.append(CanonicalTensor3(bs.contraction[idx, mu], tuple(f[:, idx] for f in bs.factors)))
    return out


@dataclass(frozen=True)
class Molecule:
    """Point nuclei with charges and positions (bohr) and an electron count.

    Closed-shell systems have ``2 * n_orb`` electrons; a single electron is
    also accepted and occupies one orbital alone.
    """

    charges: tuple
    centers: tuple
    n_electrons: int | None = None

    def __post_init__(self):
        z = tuple(float(v) for v in self.charges)
        c = tuple(tuple(float(x) for x in p) for p in self.centers)
        if not z or len(z) != len(c) or any(len(p) != 3 for p in c):
            raise InvalidArgumentError("need one 3D centre per nuclear charge")
        if min(z) <= 0:
            raise InvalidArgumentError("nuclear charges must be positive")
        ne = int(round(sum(z))) if self.n_electrons is None else int(self.n_electrons)
        if ne < 1 or (ne > 1 and ne % 2):
            raise InvalidArgumentError(f"{ne} electrons: only closed shells or one electron are supported")
        object.__setattr__(self, "charges", z)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "n_electrons", ne)

    @property
    def n_orb(self) -> int:
        """Number of occupied spatial orbitals."""
        return max(1, self.n_electrons // 2)

    @property
    def occupation(self) -> float:
        """Electrons per occupied orbital."""
        return 1.0 if self.n_electrons == 1 else 2.0

    def nuclear_repulsion(self) -> float:
        e = 0.0
        for a in range(len(self.charges)):
            for b in range(a):
                e += self.charges[a] * self.charges[b] / math.dist(self.centers[a], self.centers[b])
        return e


def build_basis(mol: Molecule, shells: dict, grid: Grid3) -> BasisSet:
    """Basis from per-element shells placed on every nucleus.

    ``shells`` maps a nuclear charge to a list of ``(kind, exponents,
    coefficients)`` entries.
    """
    funcs = []
    for z, c in zip(mol.charges, mol.centers):
        key = int(round(z))
        if key not in shells:
            raise InvalidArgumentError(f"no basis given for nuclear charge {key}")
        for kind, exps, coefs in shells[key]:
            funcs.extend(shell_functions(kind, c, exps, coefs))
    return BasisSet(tuple(funcs), grid)
