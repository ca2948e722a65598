"""Rank reduction: HOSVD, reduced HOSVD, ALS canonical-to-Tucker and back.

The canonical-to-Tucker route never forms the full tensor.  Its cost is
``O(R n r^2)`` per sweep plus small SVDs, where ``R`` is the canonical rank
and ``r`` the Tucker rank.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .formats import (
    CanonicalTensor3, TuckerTensor3, _check_guard, canonical_dot, merge_parallel_terms,
)

# relative improvement below which ALS sweeps stop early
STAGNATION = 1e-14


@dataclass(frozen=True)
class ReductionConfig:
    """Either fixed Tucker ranks or a relative truncation threshold.

    Parameters
    ----------
    ranks : tuple of int, optional
        Target Tucker ranks ``(r1, r2, r3)``.
    eps : float, optional
        Relative truncation threshold; per mode the discarded singular
        values satisfy ``||sigma_tail|| <= eps * ||sigma||``.
    max_sweeps : int
        Number of ALS sweeps over the three modes.
    """

    ranks: tuple | None = None
    eps: float | None = None
    max_sweeps: int = 3

    def __post_init__(self):
        if (self.ranks is None) == (self.eps is None):
            raise InvalidArgumentError("set exactly one of ranks and eps")
        if self.ranks is not None:
            r = (int(self.ranks),) * 3 if np.ndim(self.ranks) == 0 else tuple(int(x) for x in self.ranks)
            if len(r) != 3 or min(r) < 0:
                raise InvalidArgumentError(f"invalid ranks {self.ranks}")
            object.__setattr__(self, "ranks", r)
        elif not self.eps > 0:
            raise InvalidArgumentError("eps must be positive")
        if self.max_sweeps < 1:
            raise InvalidArgumentError("at least one ALS sweep is required")


@dataclass
class ReductionInfo:
    """Diagnostics of a canonical-to-Tucker run."""

    status: str = "ok"
    # squared relative errors after RHOSVD and after every mode update
    sq_errors: list = field(default_factory=list)
    sweeps: int = 0
    clamped: bool = False


def truncation_rank(s: np.ndarray, eps: float) -> int:
    """Smallest ``r`` with ``||s[r:]|| <= eps * ||s||`` for descending ``s``."""
    total = float(np.sum(s ** 2))
    if total == 0:
        return 0
    # tail[r] = sum of s[k]^2 for k >= r
    tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    return int(np.argmax(tail <= eps ** 2 * total))


def left_singular(a: np.ndarray):
    """Thin left singular vectors and values of a matrix.

    Tall matrices are first reduced by QR, so the cost stays linear in the
    number of rows.
    """
    m, k = a.shape
    if m > k:
        q, r = np.linalg.qr(a)
        u, s, _ = np.linalg.svd(r)
        return q @ u, s
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u, s


def _select(u, s, mode, cfg, cap, info):
    if cfg.ranks is not None:
        r = cfg.ranks[mode]
        if r > cap:
            warnings.warn(f"rank {r} on mode {mode + 1} clamped to {cap}", stacklevel=3)
            info.clamped = True
            r = cap
    else:
        r = truncation_rank(s, cfg.eps)
    return u[:, :r]


def _zero_tucker(shape):
    return TuckerTensor3(np.zeros((0, 0, 0)), tuple(np.zeros((n, 0)) for n in shape))


def unfold(a: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(a, mode, 0).reshape(a.shape[mode], -1)


def hosvd(a: np.ndarray, cfg: ReductionConfig) -> TuckerTensor3:
    """Truncated higher-order SVD of a dense 3-tensor."""
    a = np.asarray(a, dtype=float)
    _check_guard(a.shape)
    if not a.any():
        return _zero_tucker(a.shape)
    info = ReductionInfo()
    zs = []
    for mode in range(3):
        u, s = left_singular(unfold(a, mode))
        zs.append(_select(u, s, mode, cfg, len(s), info))
    core = np.einsum("ijk,ia,jb,kc->abc", a, *zs, optimize=True)
    return TuckerTensor3(core, tuple(zs))


def _core(weights, proj):
    return np.einsum("k,ak,bk,ck->abc", weights, *proj, optimize=True)


def rhosvd(a: CanonicalTensor3, cfg: ReductionConfig, info: ReductionInfo | None = None) -> TuckerTensor3:
    """Tucker approximation from the SVDs of the normalized side matrices."""
    info = ReductionInfo() if info is None else info
    a = a.normalized()
    if a.rank == 0:
        return _zero_tucker(a.shape)
    zs = []
    for mode, f in enumerate(a.factors):
        u, s = left_singular(f)
        zs.append(_select(u, s, mode, cfg, min(f.shape), info))
    proj = [z.T @ f for z, f in zip(zs, a.factors)]
    return TuckerTensor3(_core(a.weights, proj), tuple(zs))


def canonical_to_tucker(a: CanonicalTensor3, cfg: ReductionConfig, return_info: bool = False):
    """ALS refinement of the RHOSVD subspaces of a canonical tensor.

    Each mode update replaces ``Z_l`` by the dominant left singular vectors
    of the canonical tensor projected onto the other two subspaces, so the
    fit never gets worse.  Modes are visited in the fixed order 1, 2, 3.

    Returns
    -------
    TuckerTensor3, or (TuckerTensor3, ReductionInfo) if ``return_info``.
    """
    info = ReductionInfo()
    a = a.normalized()
    start = rhosvd(a, cfg, info)
    if a.rank == 0:
        return (start, info) if return_info else start
    norm2 = canonical_dot(a, a)
    if norm2 <= 0:
        info.status = "zero"
        out = _zero_tucker(a.shape)
        return (out, info) if return_info else out
    info.sq_errors.append(max(norm2 - float(np.sum(start.core ** 2)), 0.0) / norm2)
    zs = list(start.factors)
    try:
        proj = [z.T @ f for z, f in zip(zs, a.factors)]
        prev = info.sq_errors[-1]
        for sweep in range(cfg.max_sweeps):
            for mode in range(3):
                o1, o2 = [m for m in range(3) if m != mode]
                kr = (proj[o1][:, None, :] * proj[o2][None, :, :]).reshape(-1, a.rank)
                mat = (a.factors[mode] * a.weights) @ kr.T
                u, s = left_singular(mat)
                zs[mode] = _select(u, s, mode, cfg, min(mat.shape), info)
                proj[mode] = zs[mode].T @ a.factors[mode]
                kept = float(np.sum(s[:zs[mode].shape[1]] ** 2))
                info.sq_errors.append(max(norm2 - kept, 0.0) / norm2)
            info.sweeps = sweep + 1
            if prev - info.sq_errors[-1] < STAGNATION:
                break
            prev = info.sq_errors[-1]
    except np.linalg.LinAlgError:
        warnings.warn("SVD failed during ALS; returning the RHOSVD approximation", stacklevel=2)
        info.status = "fallback-rhosvd"
        return (start, info) if return_info else start
    out = TuckerTensor3(_core(a.weights, proj), tuple(zs))
    return (out, info) if return_info else out


def tucker_to_canonical(t: TuckerTensor3) -> CanonicalTensor3:
    """Canonical form of a Tucker tensor with rank ``min(r_i r_j)``.

    The core is split into fibres along the mode whose complement has the
    smallest rank product; each fibre, mapped by that mode's side matrix,
    becomes one canonical term.
    """
    r = t.ranks
    if min(r) == 0:
        return CanonicalTensor3(np.zeros(0), tuple(np.zeros((n, 0)) for n in t.shape))
    fibre_mode = int(np.argmax(r))  # minimizing the product of the other two
    o1, o2 = [m for m in range(3) if m != fibre_mode]
    core = np.moveaxis(t.core, (o1, o2, fibre_mode), (0, 1, 2)).reshape(r[o1] * r[o2], r[fibre_mode])
    fibres = t.factors[fibre_mode] @ core.T
    i, j = np.divmod(np.arange(r[o1] * r[o2]), r[o2])
    fs = [None, None, None]
    fs[o1] = t.factors[o1][:, i]
    fs[o2] = t.factors[o2][:, j]
    fs[fibre_mode] = fibres
    out = CanonicalTensor3(np.ones(len(i)), tuple(fs)).normalized()
    return out


def reduce_rank(a: CanonicalTensor3, cfg: ReductionConfig) -> CanonicalTensor3:
    """Compress a canonical tensor through its Tucker form.

    Exactly repeated terms are merged first.  If the Tucker-to-canonical
    conversion would not lower the rank, the merged input is returned.
    """
    merged = merge_parallel_terms(a)
    if merged.rank <= 1:
        return merged
    out = tucker_to_canonical(canonical_to_tucker(merged, cfg))
    return out if out.rank < merged.rank else merged


def tucker_decay(a: np.ndarray, ranks) -> np.ndarray:
    """Relative Frobenius error of the rank-``(r, r, r)`` HOSVD for each ``r``.

    Errors are measured as direct residual norms, so they resolve values
    far below the square root of machine precision.
    """
    a = np.asarray(a, dtype=float)
    _check_guard(a.shape)
    norm = np.linalg.norm(a)
    us = [left_singular(unfold(a, mode))[0] for mode in range(3)]
    out = []
    for r in ranks:
        z = [u[:, :r] for u in us]
        core = np.einsum("ijk,ia,jb,kc->abc", a, *z, optimize=True)
        approx = np.einsum("abc,ia,jb,kc->ijk", core, *z, optimize=True)
        out.append(np.linalg.norm(a - approx) / norm)
    return np.array(out)
