"""Factorized two-electron integrals on the grid.

The pipeline has four stages:

1. per axis, the ``n x P^2`` matrix of primitive-pair products is
   compressed by a pivoted Cholesky factorization of its row Gram matrix
   (``G ~ U V^T``);
2. for every kernel term the small matrices ``M_k = h U^T (p_k * U)`` are
   formed with one 1D convolution per column of ``U``;
3. entries, columns and the diagonal of the TEI matrix
   ``B = sum_k prod_l V M_k V^T`` are evaluated on demand;
4. a diagonally pivoted Cholesky factorization ``B ~ L L^T`` is built
   from those columns.

Compound indices are ``mu * N_b + nu``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisSet
from .errors import ConvergenceError, InvalidArgumentError
from .formats import convolve_columns
from .kernels import KernelTensor


def pair_products(bs: BasisSet) -> tuple:
    """Per-axis ``n x P^2`` matrices of primitive-pair products, pair ``p * P + q``."""
    return tuple((f[:, :, None] * f[:, None, :]).reshape(f.shape[0], -1) for f in bs.factors)


def _fit_axis(g: np.ndarray, eps: float):
    """Pivoted Cholesky of ``g g^T`` with columns computed on demand."""
    diag = np.einsum("ij,ij->i", g, g)
    total = float(diag.sum())
    if total == 0:
        return np.zeros((g.shape[0], 0))
    cols = []
    w = np.zeros((g.shape[0], 0))
    while diag.sum() > eps ** 2 * total and len(cols) < g.shape[0]:
        p = int(np.argmax(diag))
        piv = diag[p]
        if piv <= 0:
            if piv < -1e-12 * total:
                warnings.warn(f"Gram matrix indefinite by {piv:.3g}; fit truncated", stacklevel=3)
            break
        col = g @ g[p] - w @ w[p]
        col /= np.sqrt(piv)
        cols.append(col)
        w = np.column_stack(cols)
        diag = diag - col ** 2
    return w


def tei_density_fitting(bs: BasisSet, eps_fit: float = 1e-8):
    """Low-rank factors ``G^(l) ~ U^(l) V^(l)^T`` of the pair-product matrices.

    Returns
    -------
    us, vs : tuple of ndarray
        ``U`` has orthonormal columns (``n x R_l``), ``V = G^T U``.
    ranks : tuple of int
    """
    if not eps_fit > 0:
        raise InvalidArgumentError("eps_fit must be positive")
    us, vs = [], []
    for g in pair_products(bs):
        w = _fit_axis(g, eps_fit)
        u = np.linalg.qr(w)[0] if w.shape[1] else w
        us.append(u)
        vs.append(g.T @ u)
    return tuple(us), tuple(vs), tuple(u.shape[1] for u in us)


def tei_convolution_matrices(us, kernel: KernelTensor) -> tuple:
    """Per axis an array ``(R, R_l, R_l)`` of ``h U^T (p_k * U)``."""
    if not kernel.doubled:
        raise InvalidArgumentError("convolution matrices need the doubled reference kernel")
    h = kernel.grid.h
    out = []
    for u, p in zip(us, kernel.factors):
        conv = convolve_columns(u, p, h)
        out.append(np.einsum("ia,ibk->kab", u, conv, optimize=True))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class TEIFactorization:
    """Everything needed to evaluate TEI entries without forming ``B``."""

    basis: BasisSet
    us: tuple
    vs: tuple
    conv: tuple
    kernel_weights: np.ndarray
    eps_fit: float

    @property
    def fit_ranks(self) -> tuple:
        return tuple(u.shape[1] for u in self.us)

    @property
    def size(self) -> int:
        """Side length ``N_b^2`` of the TEI matrix."""
        return self.basis.size ** 2

    def _pairs(self, mu, nu):
        bs = self.basis
        sa, sb = bs.support(mu), bs.support(nu)
        idx = (sa[:, None] * bs.n_primitives + sb[None, :]).ravel()
        coef = np.outer(bs.contraction[sa, mu], bs.contraction[sb, nu]).ravel()
        return idx, coef

    def primitive_block(self, rows, cols) -> np.ndarray:
        """Block of the primitive-pair TEI matrix."""
        out = None
        for v, m in zip(self.vs, self.conv):
            part = np.einsum("pa,kab,qb->kpq", v[rows], m, v[cols], optimize=True)
            out = part if out is None else out * part
        return np.einsum("k,kpq->pq", self.kernel_weights, out)

    def _check(self, *idx):
        nb = self.basis.size
        if any(not 0 <= i < nb for i in idx):
            raise InvalidArgumentError(f"basis index out of range in {idx}")


def factorize_tei(bs: BasisSet, kernel: KernelTensor, eps_fit: float = 1e-8) -> TEIFactorization:
    """Run density fitting and build the convolution matrices."""
    if kernel.grid != bs.grid:
        raise InvalidArgumentError("kernel and basis live on different grids")
    us, vs, _ = tei_density_fitting(bs, eps_fit)
    conv = tei_convolution_matrices(us, kernel)
    return TEIFactorization(bs, us, vs, conv, np.asarray(kernel.tensor.weights), eps_fit)


def tei_matrix_entry(fac: TEIFactorization, mu: int, nu: int, kappa: int, lam: int) -> float:
    """``(mu nu | kappa lam)``."""
    fac._check(mu, nu, kappa, lam)
    r, cr = fac._pairs(mu, nu)
    c, cc = fac._pairs(kappa, lam)
    return float(cr @ fac.primitive_block(r, c) @ cc)


def tei_column(fac: TEIFactorization, col: int) -> np.ndarray:
    """Column ``kappa * N_b + lam`` of the TEI matrix."""
    nb = fac.basis.size
    if not 0 <= col < nb * nb:
        raise InvalidArgumentError(f"column {col} out of range")
    c, cc = fac._pairs(*divmod(col, nb))
    prim = fac.basis.n_primitives
    block = fac.primitive_block(np.arange(prim * prim), c) @ cc
    return fac.basis.contract(block.reshape(prim, prim)).ravel()


def tei_diagonal(fac: TEIFactorization) -> np.ndarray:
    """Diagonal entries ``(mu nu | mu nu)``."""
    nb = fac.basis.size
    out = np.empty(nb * nb)
    for mu in range(nb):
        for nu in range(mu + 1):
            out[mu * nb + nu] = out[nu * nb + mu] = tei_matrix_entry(fac, mu, nu, mu, nu)
    return out


def tei_cholesky(fac: TEIFactorization, eps_chol: float = 1e-10) -> np.ndarray:
    """Pivoted Cholesky factor ``L`` (``N_b^2 x R_B``) with ``B ~ L L^T``.

    Stops once every remaining diagonal entry is at most ``eps_chol``
    times the largest initial diagonal entry.

    Raises
    ------
    ConvergenceError
        On a pivot more negative than the round-off allowance.
    """
    d = tei_diagonal(fac)
    dmax = float(d.max())
    if dmax <= 0:
        return np.zeros((d.size, 0))
    cols = []
    lmat = np.zeros((d.size, 0))
    while len(cols) < d.size:
        p = int(np.argmax(d))
        piv = d[p]
        if piv <= eps_chol * dmax:
            break
        col = tei_column(fac, p) - lmat @ lmat[p]
        if col[p] < -1e-10 * dmax:
            raise ConvergenceError(f"negative pivot {col[p]:.3g} at column {p}")
        col /= np.sqrt(piv)
        cols.append(col)
        lmat = np.column_stack(cols)
        d = d - col ** 2
    return lmat


def coulomb_exchange_from_factors(L: np.ndarray, D: np.ndarray):
    """``J(D)`` and ``K(D)`` (with the ``-1/2`` factor) from Cholesky factors."""
    nb = D.shape[0]
    if D.shape != (nb, nb) or L.shape[0] != nb * nb:
        raise InvalidArgumentError(f"shape mismatch: L {L.shape}, D {D.shape}")
    J = (L @ (L.T @ D.ravel())).reshape(nb, nb)
    ls = L.T.reshape(-1, nb, nb)
    K = -0.5 * np.einsum("sml,lt,snt->mn", ls, D, ls, optimize=True)
    return 0.5 * (J + J.T), 0.5 * (K + K.T)


def fock_from_factors(H: np.ndarray, L: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Fock matrix ``H + J(D) + K(D)``."""
    if H.shape != D.shape:
        raise InvalidArgumentError(f"shape mismatch: H {H.shape}, D {D.shape}")
    J, K = coulomb_exchange_from_factors(L, D)
    return H + J + K
