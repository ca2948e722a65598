"""Second-order Moller-Plesset correction from Cholesky-factorized integrals.

Occupied-virtual pairs use the compound index ``ia = i * N_v + (a - N_orb)``.
The factorized energy replaces the denominator ``1 / (e_a + e_b - e_i - e_j)``
by an exponential sum, so each term of the sum separates into products of
small matrices built from the MO Cholesky factors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kernels import ExponentialSum, reciprocal_expsum


@dataclass(frozen=True, eq=False)
class MOSpace:
    """Orbital energies (ascending), MO coefficients and the occupied count."""

    energies: np.ndarray
    C: np.ndarray
    n_orb: int

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if e.ndim != 1 or C.shape != (C.shape[0], e.size):
            raise InvalidArgumentError(f"shape mismatch: energies {e.shape}, C {C.shape}")
        if np.any(np.diff(e) < 0):
            raise InvalidArgumentError("orbital energies must be sorted ascending")
        if not 1 <= self.n_orb <= e.size:
            raise InvalidArgumentError(f"invalid occupied count {self.n_orb}")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "C", C)

    @property
    def n_vir(self) -> int:
        return self.energies.size - self.n_orb

    @property
    def n_ov(self) -> int:
        return self.n_orb * self.n_vir

    @property
    def occupied(self) -> np.ndarray:
        return self.energies[:self.n_orb]

    @property
    def virtual(self) -> np.ndarray:
        return self.energies[self.n_orb:]

    @property
    def gap(self) -> float:
        """Lowest virtual minus highest occupied orbital energy."""
        if self.n_vir == 0:
            return np.inf
        return float(self.virtual[0] - self.occupied[-1])


def mo_transform_cholesky(L: np.ndarray, C: np.ndarray, mos: MOSpace) -> np.ndarray:
    """Occupied-virtual block ``L_V`` (``N_ov x R_B``) of the MO Cholesky factors.

    Column ``s`` is ``C_occ^T L_s C_vir`` flattened row-major, where ``L_s``
    is column ``s`` of ``L`` reshaped to ``N_b x N_b``.
    """
    C = np.asarray(C, dtype=float)
    nb = C.shape[0]
    if L.shape[0] != nb * nb:
        raise InvalidArgumentError(f"factor has {L.shape[0]} rows, expected {nb * nb}")
    ls = L.T.reshape(-1, nb, nb)
    co, cv = C[:, :mos.n_orb], C[:, mos.n_orb:]
    blocks = np.einsum("mi,smn,na->sia", co, ls, cv, optimize=True)
    return blocks.reshape(L.shape[1], -1).T


def _check_gap(mos: MOSpace):
    if not mos.gap > 0:
        raise InvalidArgumentError(f"non-positive HOMO-LUMO gap {mos.gap:.3g}; denominators may vanish")


def mp2_energy_dense(V: np.ndarray, mos: MOSpace) -> float:
    """Quadruple-loop energy from the dense ``N_ov x N_ov`` matrix ``v_{ia,jb}``."""
    _check_gap(mos)
    no, nv = mos.n_orb, mos.n_vir
    v = np.asarray(V, dtype=float).reshape(no, nv, no, nv)
    eo, ev = mos.occupied, mos.virtual
    total = 0.0
    for i in range(no):
        for j in range(no):
            for a in range(nv):
                for b in range(nv):
                    den = ev[a] + ev[b] - eo[i] - eo[j]
                    total += v[i, a, j, b] * (2.0 * v[i, a, j, b] - v[i, b, j, a]) / den
    return -total


def energy_denominator_expsum(mos: MOSpace, eps: float) -> ExponentialSum:
    """Exponential sum for ``1/x`` over all denominators ``e_a + e_b - e_i - e_j``."""
    _check_gap(mos)
    lo = 2.0 * mos.gap
    hi = 2.0 * float(mos.virtual[-1] - mos.occupied[0])
    return reciprocal_expsum(lo, hi, eps)


def mp2_energy_factorized(LV: np.ndarray, mos: MOSpace, eps: float = 1e-10,
                          expsum: ExponentialSum | None = None) -> float:
    """Energy from ``L_V`` with the separable exponential-sum denominator.

    For each term ``omega_k exp(-lam_k x)`` the same-spin part is
    ``||L_V^T W_k L_V||_F^2`` with ``W_k`` the diagonal of pair factors, and
    the exchange part is ``sum_{s,t} tr((A~_s A_t^T)^2)``.
    """
    _check_gap(mos)
    es = energy_denominator_expsum(mos, eps) if expsum is None else expsum
    no, nv = mos.n_orb, mos.n_vir
    a = LV.T.reshape(-1, no, nv)
    total = 0.0
    for om, lam in zip(es.omega, es.lam):
        do = np.exp(lam * mos.occupied)
        dv = np.exp(-lam * mos.virtual)
        x = np.outer(do, dv).ravel()
        w = LV.T @ (x[:, None] * LV)
        direct = float(np.sum(w * w))
        at = a * x.reshape(no, nv)
        prod = np.einsum("sia,tja->stij", at, a, optimize=True)
        exchange = float(np.einsum("stij,stji->", prod, prod, optimize=True))
        total += om * (2.0 * direct - exchange)
    return -total


def mp2_energy(source: np.ndarray, mos: MOSpace, mode: str = "factorized", eps: float = 1e-10) -> float:
    """MP2 correlation energy.

    Parameters
    ----------
    source : ndarray
        MO Cholesky factor ``L_V`` (``N_ov x R_B``).
    mode : {"factorized", "oracle"}
        ``"oracle"`` forms ``V = L_V L_V^T`` and runs the quadruple loop.
    eps : float
        Relative accuracy of the denominator expansion.
    """
    if mode == "oracle":
        return mp2_energy_dense(source @ source.T, mos)
    if mode == "factorized":
        return mp2_energy_factorized(source, mos, eps)
    raise InvalidArgumentError(f"unknown mode {mode!r}")
