"""Grid-based closed-shell Hartree-Fock.

Integrals are computed from grid images of the basis functions.

* Overlap and kinetic matrices use 1D sums and tridiagonal stencils.
* The nuclear potential is a sum of windowed copies of a reference kernel.
* Coulomb and exchange operators use canonical-format convolutions.

The SCF driver can build its two-electron part either from the
factorized TEI matrix or from these grid operators.

Kernel tensors store cell integrals of ``1/r``.  A potential is therefore
``sum_j rho_j P_{i-j}`` without an extra mesh weight, and a matrix
element carries one factor ``h^3`` from the outer integral.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import BasisSet, Molecule
from .errors import ConvergenceError, InvalidArgumentError
from .formats import CanonicalTensor3, add, convolve, hadamard, scale, zeros
from .grid import window_for_center
from .kernels import KernelTensor, kernel_for_grid
from .reduction import ReductionConfig, reduce_rank
from .tei import factorize_tei, fock_from_factors, tei_cholesky


def _pair_gram(bs: BasisSet, axis_weights=None) -> list:
    """Per axis the primitive Gram matrices ``F^T diag(w) F``."""
    out = []
    for axis, f in enumerate(bs.factors):
        w = None if axis_weights is None else axis_weights[axis]
        out.append(f.T @ f if w is None else f.T @ (w[:, None] * f))
    return out


def _projected(bs: BasisSet, t: CanonicalTensor3) -> np.ndarray:
    """Primitive matrix ``sum_i F_a F_b t`` for a canonical tensor ``t``."""
    acc = None
    for f, tf in zip(bs.factors, t.factors):
        part = np.einsum("ia,ib,it->tab", f, f, tf, optimize=True)
        acc = part if acc is None else acc * part
    if acc is None or t.rank == 0:
        return np.zeros((bs.n_primitives, bs.n_primitives))
    return np.einsum("t,tab->ab", t.weights, acc)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _cubic_h(bs: BasisSet) -> float:
    return bs.grid.h


def overlap_matrix(bs: BasisSet) -> np.ndarray:
    """``S_{mu nu} = h^3 <G_mu, G_nu>``."""
    h = _cubic_h(bs)
    g = _pair_gram(bs)
    S = _sym(bs.contract(h ** 3 * g[0] * g[1] * g[2]))
    if np.linalg.eigvalsh(S)[0] <= 1e-12 * np.abs(S).max():
        warnings.warn("overlap matrix is not positive definite; basis is nearly dependent", stacklevel=2)
    return S


def _laplace_1d(f: np.ndarray, h: float) -> np.ndarray:
    """``(1/h) tridiag(-1, 2, -1)`` applied to the columns of ``f``."""
    out = 2.0 * f
    out[1:] -= f[:-1]
    out[:-1] -= f[1:]
    return out / h


def _consistent_mass_1d(f: np.ndarray, h: float) -> np.ndarray:
    """``(h/6) tridiag(1, 4, 1)`` applied to the columns of ``f``."""
    out = 4.0 * f
    out[1:] += f[:-1]
    out[:-1] += f[1:]
    return out * (h / 6.0)


def kinetic_matrix(bs: BasisSet, mass: str = "lumped") -> np.ndarray:
    """Kinetic energy ``1/2 int grad g_k . grad g_m`` from nodal values.

    Each axis uses the stiffness stencil ``(1/h) tridiag(-1, 2, -1)``.
    The transverse axes carry either the lumped mass ``h I`` (default)
    or the consistent mass ``(h/6) tridiag(1, 4, 1)``.
    """
    h = _cubic_h(bs)
    if mass == "lumped":
        masses = [h * f.T @ f for f in bs.factors]
    elif mass == "consistent":
        masses = [f.T @ _consistent_mass_1d(f, h) for f in bs.factors]
    else:
        raise InvalidArgumentError(f"unknown mass mode {mass!r}")
    stiff = [f.T @ _laplace_1d(f, h) for f in bs.factors]
    prim = (stiff[0] * masses[1] * masses[2] + masses[0] * stiff[1] * masses[2]
            + masses[0] * masses[1] * stiff[2])
    return _sym(bs.contract(0.5 * prim))


def reference_kernel(bs: BasisSet, eps: float = 1e-8) -> KernelTensor:
    """Doubled-grid Newton kernel for the basis grid."""
    return kernel_for_grid(bs.grid, eps=eps, doubled=True)


def nuclear_potential(mol: Molecule, kernel: KernelTensor, eps: float | None = None) -> CanonicalTensor3:
    """``sum_a Z_a P(x - a_a)`` as a canonical tensor of rank ``M R``.

    With ``eps`` the sum is rank-reduced to that relative accuracy.
    """
    if not kernel.doubled:
        raise InvalidArgumentError("nuclear potential needs the doubled reference kernel")
    grid = kernel.grid
    total = zeros(grid.shape)
    for z, c in zip(mol.charges, mol.centers):
        win = window_for_center(grid, c)
        moved = np.abs(grid.coordinate(grid.index_of(c)) - np.asarray(c)).max()
        if moved > 1e-8 * grid.h:
            warnings.warn(f"nucleus at {c} moved by {moved:.3g} to the nearest node", stacklevel=2)
        fs = tuple(win.apply(f, axis) for axis, f in enumerate(kernel.factors))
        total = add(total, CanonicalTensor3(z * kernel.tensor.weights, fs))
    if eps is not None:
        total = reduce_rank(total, ReductionConfig(eps=eps))
    return total


def nuclear_matrix(bs: BasisSet, mol: Molecule, kernel: KernelTensor,
                   eps: float | None = None) -> np.ndarray:
    """Nuclear attraction ``-<G_k G_m, sum_a Z_a P(x - a_a)>`` (negative definite)."""
    pot = nuclear_potential(mol, kernel, eps)
    return _sym(-bs.contract(_projected(bs, pot)))


def core_hamiltonian(bs: BasisSet, mol: Molecule, kernel: KernelTensor, mass: str = "lumped") -> np.ndarray:
    return kinetic_matrix(bs, mass) + nuclear_matrix(bs, mol, kernel)


def orbital_tensors(bs: BasisSet, C: np.ndarray) -> list:
    """Grid images of the orbitals in the columns of ``C``."""
    prim = bs.contraction @ np.asarray(C, dtype=float)
    return [CanonicalTensor3(prim[:, a], bs.factors) for a in range(prim.shape[1])]


def density_tensor(bs: BasisSet, C: np.ndarray, occupation: float = 2.0,
                   eps: float | None = 1e-10) -> CanonicalTensor3:
    """Electron density ``occupation * sum_a phi_a^2`` in canonical format.

    The orbital squares give rank ``N_orb P^2``.  With ``eps`` the sum is
    passed through :func:`reduce_rank`.
    """
    total = zeros(bs.grid.shape)
    for phi in orbital_tensors(bs, C):
        total = add(total, scale(hadamard(phi, phi), occupation))
    if eps is not None:
        total = reduce_rank(total, ReductionConfig(eps=eps))
    return total


def hartree_potential(theta: CanonicalTensor3, kernel: KernelTensor) -> CanonicalTensor3:
    """``V_H(x_i) = sum_j theta_j P_{i-j}``, rank ``R_rho R``."""
    return convolve(theta, kernel.tensor, 1.0)


def coulomb_matrix(bs: BasisSet, v_h: CanonicalTensor3) -> np.ndarray:
    """``J_{km} = h^3 <G_k G_m, V_H>``."""
    return _sym(_cubic_h(bs) ** 3 * bs.contract(_projected(bs, v_h)))


def exchange_matrix(bs: BasisSet, C: np.ndarray, kernel: KernelTensor) -> np.ndarray:
    """Exchange integrals ``sum_a (k a | a m)`` over the orbitals in ``C``.

    One convolution is done per orbital and primitive.  The Fock matrix
    of a closed shell uses ``-exchange_matrix``; that is the ``-1/2``
    factor applied to ``D = 2 C C^T``.
    """
    h3 = _cubic_h(bs) ** 3
    npr = bs.n_primitives
    prim = np.zeros((npr, npr))
    for phi in orbital_tensors(bs, C):
        for q in range(npr):
            fq = tuple(f[:, q:q + 1] for f in bs.factors)
            pot = convolve(hadamard(phi, CanonicalTensor3(np.ones(1), fq)), kernel.tensor, 1.0)
            prim[:, q] += h3 * _projected(bs, pot) @ phi.weights
    return _sym(bs.contract(prim))


def density_factor(D: np.ndarray, occupation: float = 2.0) -> np.ndarray:
    """Columns ``Y`` with ``occupation * Y Y^T = D`` for a positive semidefinite ``D``."""
    w, v = np.linalg.eigh(_sym(D))
    keep = w > 1e-14 * max(float(np.abs(w).max()), 1e-300)
    return v[:, keep] * np.sqrt(w[keep] / occupation)


@dataclass(frozen=True)
class SCFConfig:
    """Settings of the SCF iteration.

    ``two_electron`` selects the factorized TEI route (``"tei"``) or the
    direct grid operators (``"grid"``) for ``J`` and ``K``.
    """

    max_iterations: int = 60
    energy_tol: float = 1e-9
    mixing: float = 0.7
    two_electron: str = "tei"
    kernel_eps: float = 1e-8
    eps_fit: float = 1e-8
    eps_chol: float = 1e-10
    density_eps: float | None = 1e-10
    mass: str = "lumped"

    def __post_init__(self):
        if self.two_electron not in ("tei", "grid"):
            raise InvalidArgumentError(f"unknown two-electron route {self.two_electron!r}")
        if not 0 < self.mixing <= 1:
            raise InvalidArgumentError("mixing must lie in (0, 1]")
        if self.max_iterations < 1:
            raise InvalidArgumentError("need at least one iteration")


@dataclass
class SCFState:
    """Result and history of an SCF run."""

    C: np.ndarray
    D: np.ndarray
    orbital_energies: np.ndarray
    energy: float
    iterations: int
    converged: bool
    energies: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    orthonormality: list = field(default_factory=list)
    n_orb: int = 1
    H: np.ndarray | None = None
    S: np.ndarray | None = None
    cholesky: np.ndarray | None = None


def solve_generalized(F: np.ndarray, S_chol: np.ndarray):
    """Solve ``F C = S C diag(e)`` by congruence with the lower Cholesky factor of ``S``."""
    linv_f = scipy.linalg.solve_triangular(S_chol, F, lower=True)
    fp = scipy.linalg.solve_triangular(S_chol, linv_f.T, lower=True)
    e, y = np.linalg.eigh(_sym(fp))
    C = scipy.linalg.solve_triangular(S_chol.T, y, lower=False)
    return e, C


def scf_solve(mol: Molecule, bs: BasisSet, cfg: SCFConfig = SCFConfig(),
              kernel: KernelTensor | None = None) -> SCFState:
    """Self-consistent field iteration for a closed shell (or one electron).

    Starts from ``D = 0``.  Each step diagonalizes ``F(D)``, occupies the
    ``N_orb`` lowest orbitals and mixes
    ``D <- alpha D_new + (1 - alpha) D``.  It stops when the energy
    change is at most ``energy_tol``.

    Raises
    ------
    InvalidArgumentError
        If ``S`` is not positive definite or there are too few basis functions.
    """
    if mol.n_orb > bs.size:
        raise InvalidArgumentError(f"{mol.n_orb} occupied orbitals need at least as many basis functions")
    kernel = reference_kernel(bs, cfg.kernel_eps) if kernel is None else kernel
    S = overlap_matrix(bs)
    try:
        S_chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("overlap matrix is not positive definite; basis is linearly dependent") from exc
    H = core_hamiltonian(bs, mol, kernel, cfg.mass)
    e_nn = mol.nuclear_repulsion()
    one_electron = mol.n_electrons == 1
    # the Fock matrix of one electron does not depend on D, so no damping is needed
    mixing = 1.0 if one_electron else cfg.mixing
    occ = mol.occupation

    L = None
    if not one_electron and cfg.two_electron == "tei":
        L = tei_cholesky(factorize_tei(bs, kernel, cfg.eps_fit), cfg.eps_chol)

    def fock(D, C_occ):
        if one_electron:
            return H.copy()
        if L is not None:
            return fock_from_factors(H, L, D)
        if not D.any():
            return H.copy()
        v_h = hartree_potential(density_tensor(bs, C_occ, occ, cfg.density_eps), kernel)
        return H + coulomb_matrix(bs, v_h) - exchange_matrix(bs, C_occ, kernel)

    nb = bs.size
    D = np.zeros((nb, nb))
    C_occ = np.zeros((nb, 0))
    state = SCFState(C=np.zeros((nb, nb)), D=D, orbital_energies=np.zeros(nb), energy=np.nan,
                     iterations=0, converged=False, n_orb=mol.n_orb, H=H, S=S, cholesky=L)
    eye = np.eye(nb)
    for it in range(cfg.max_iterations):
        F = fock(D, C_occ)
        energy = 0.5 * float(np.sum(D * (H + F))) + e_nn
        state.residuals.append(float(np.linalg.norm(F @ D @ S - S @ D @ F)))
        state.energies.append(energy)
        try:
            eps_orb, C = solve_generalized(F, S_chol)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigensolver failed at iteration {it + 1}") from exc
        state.orthonormality.append(float(np.abs(C.T @ S @ C - eye).max()))
        C_new = C[:, :mol.n_orb]
        D_new = occ * C_new @ C_new.T
        D = mixing * D_new + (1.0 - mixing) * D
        C_occ = density_factor(D, occ)
        state.C, state.orbital_energies, state.iterations = C, eps_orb, it + 1
        if len(state.energies) > 1 and abs(state.energies[-1] - state.energies[-2]) <= cfg.energy_tol:
            state.converged = True
            break
    state.D = D
    state.energy = state.energies[-1]
    return state
