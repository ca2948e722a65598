"""Canonical and Tucker tensor formats in three dimensions.

All operations work on the per-axis side matrices only, so their cost is
linear in the grid size ``n``.  Dense arrays appear only through
:func:`to_dense`, which is meant for testing and small problems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import InvalidArgumentError, SizeGuardError

DENSE_LIMIT = 2 ** 27
# below this length 1D convolutions are summed directly, above via FFT
FFT_THRESHOLD = 128


def _frozen(a, ndim):
    a = np.array(a, dtype=float)
    if a.ndim != ndim:
        raise InvalidArgumentError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CanonicalTensor3:
    """Rank-``R`` tensor ``sum_k c_k u_k (x) v_k (x) w_k``.

    Attributes
    ----------
    weights : ndarray, shape (R,)
    factors : tuple of three ndarrays, shapes (n_l, R)
    """

    weights: np.ndarray
    factors: tuple

    def __post_init__(self):
        w = _frozen(self.weights, 1)
        fs = tuple(_frozen(f, 2) for f in self.factors)
        if len(fs) != 3:
            raise InvalidArgumentError("a 3-tensor needs exactly three side matrices")
        for f in fs:
            if f.shape[1] != w.shape[0]:
                raise InvalidArgumentError("side matrices and weights disagree on the rank")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", fs)

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def normalized(self) -> "CanonicalTensor3":
        """Equivalent tensor with unit-norm columns; norms move into the weights.

        Terms with a zero column are dropped.
        """
        norms = [np.linalg.norm(f, axis=0) for f in self.factors]
        scale = norms[0] * norms[1] * norms[2]
        keep = scale > 0
        return CanonicalTensor3(
            self.weights[keep] * scale[keep],
            tuple(f[:, keep] / nrm[keep] for f, nrm in zip(self.factors, norms)),
        )

    def __repr__(self):
        return f"CanonicalTensor3(shape={self.shape}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class TuckerTensor3:
    """Tucker tensor ``core x_1 Z1 x_2 Z2 x_3 Z3`` with orthonormal ``Z``.

    Attributes
    ----------
    core : ndarray, shape (r1, r2, r3)
    factors : tuple of three ndarrays, shapes (n_l, r_l)
    """

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        core = _frozen(self.core, 3)
        fs = tuple(_frozen(f, 2) for f in self.factors)
        if len(fs) != 3:
            raise InvalidArgumentError("a 3-tensor needs exactly three side matrices")
        if tuple(f.shape[1] for f in fs) != core.shape:
            raise InvalidArgumentError("side matrices do not match the core shape")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", fs)

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def orthogonality_defect(self) -> float:
        """Largest entry of ``|Z^T Z - I|`` over the three side matrices."""
        out = 0.0
        for f in self.factors:
            if f.shape[1]:
                out = max(out, np.abs(f.T @ f - np.eye(f.shape[1])).max())
        return out

    def __repr__(self):
        return f"TuckerTensor3(shape={self.shape}, ranks={self.ranks})"


def zeros(shape) -> CanonicalTensor3:
    """Rank-0 canonical tensor of the given extents."""
    return CanonicalTensor3(np.zeros(0), tuple(np.zeros((n, 0)) for n in shape))


def rank1(u, v, w, weight=1.0) -> CanonicalTensor3:
    """Rank-1 canonical tensor ``weight * u (x) v (x) w``."""
    return CanonicalTensor3([weight], tuple(np.asarray(x, dtype=float)[:, None] for x in (u, v, w)))


def _check_guard(shape):
    size = int(np.prod(shape, dtype=np.int64))
    if size > DENSE_LIMIT:
        raise SizeGuardError(f"dense tensor of shape {shape} exceeds {DENSE_LIMIT} entries")


def to_dense(t) -> np.ndarray:
    """Full array of a canonical or Tucker tensor."""
    _check_guard(t.shape)
    if isinstance(t, CanonicalTensor3):
        u1, u2, u3 = t.factors
        return np.einsum("r,ir,jr,kr->ijk", t.weights, u1, u2, u3, optimize=True)
    if isinstance(t, TuckerTensor3):
        return tucker_to_dense(t)
    raise TypeError(f"unsupported tensor type {type(t).__name__}")


def tucker_to_dense(t: TuckerTensor3) -> np.ndarray:
    _check_guard(t.shape)
    z1, z2, z3 = t.factors
    return np.einsum("abc,ia,jb,kc->ijk", t.core, z1, z2, z3, optimize=True)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"extent mismatch: {a.shape} vs {b.shape}")


def scale(a: CanonicalTensor3, alpha: float) -> CanonicalTensor3:
    """``alpha * a``."""
    return CanonicalTensor3(alpha * a.weights, a.factors)


def add(a: CanonicalTensor3, b: CanonicalTensor3) -> CanonicalTensor3:
    """Sum by concatenation of side matrices; rank ``R_a + R_b``."""
    _same_shape(a, b)
    return CanonicalTensor3(
        np.concatenate([a.weights, b.weights]),
        tuple(np.hstack([fa, fb]) for fa, fb in zip(a.factors, b.factors)),
    )


def hadamard(a: CanonicalTensor3, b: CanonicalTensor3) -> CanonicalTensor3:
    """Entrywise product; rank ``R_a * R_b`` with term ``(i, j)`` at ``i * R_b + j``."""
    _same_shape(a, b)
    fs = tuple(
        (fa[:, :, None] * fb[:, None, :]).reshape(fa.shape[0], -1)
        for fa, fb in zip(a.factors, b.factors)
    )
    return CanonicalTensor3(np.outer(a.weights, b.weights).ravel(), fs)


def canonical_dot(a: CanonicalTensor3, b: CanonicalTensor3) -> float:
    """Euclidean scalar product of two canonical tensors."""
    _same_shape(a, b)
    g = np.ones((a.rank, b.rank))
    for fa, fb in zip(a.factors, b.factors):
        g *= fa.T @ fb
    return float(a.weights @ g @ b.weights)


def tucker_dot(s: TuckerTensor3, t: TuckerTensor3) -> float:
    """Euclidean scalar product of two Tucker tensors."""
    _same_shape(s, t)
    w = [zs.T @ zt for zs, zt in zip(s.factors, t.factors)]
    return float(np.einsum("abc,ai,bj,ck,ijk->", s.core, *w, t.core, optimize=True))


def canonical_tucker_dot(a: CanonicalTensor3, t: TuckerTensor3) -> float:
    """Scalar product between a canonical and a Tucker tensor."""
    _same_shape(a, t)
    y = [z.T @ u for z, u in zip(t.factors, a.factors)]
    return float(np.einsum("abc,ak,bk,ck,k->", t.core, *y, a.weights, optimize=True))


def scalar_product(a, b) -> float:
    """Scalar product of any two canonical/Tucker tensors."""
    ca, cb = isinstance(a, CanonicalTensor3), isinstance(b, CanonicalTensor3)
    if ca and cb:
        return canonical_dot(a, b)
    if ca:
        return canonical_tucker_dot(a, b)
    if cb:
        return canonical_tucker_dot(b, a)
    return tucker_dot(a, b)


def frobenius_norm(t) -> float:
    if isinstance(t, TuckerTensor3):
        return float(np.linalg.norm(t.core))
    return float(np.sqrt(max(scalar_product(t, t), 0.0)))


def merge_parallel_terms(a: CanonicalTensor3, tol: float = 0.0) -> CanonicalTensor3:
    """Combine terms whose normalized columns coincide on all three axes.

    With ``tol = 0`` only bitwise-equal directions are merged, which makes
    the result exact; terms whose weights cancel are dropped.
    """
    a = a.normalized()
    if a.rank == 0:
        return a
    fs, w = [], a.weights.copy()
    cols = np.arange(a.rank)
    for f in a.factors:
        # fix the sign of each column by its largest-magnitude entry
        sgn = np.sign(f[np.abs(f).argmax(axis=0), cols])
        fs.append(f * sgn)
        w *= sgn
    group = np.empty(a.rank, dtype=int)
    reps = []
    if tol == 0:
        seen = {}
        for k in range(a.rank):
            key = b"".join(f[:, k].tobytes() for f in fs)
            group[k] = seen.setdefault(key, len(reps))
            if group[k] == len(reps):
                reps.append(k)
    else:
        for k in range(a.rank):
            for g, r in enumerate(reps):
                if all(np.abs(f[:, k] - f[:, r]).max() <= tol for f in fs):
                    group[k] = g
                    break
            else:
                group[k] = len(reps)
                reps.append(k)
    wsum = np.zeros(len(reps))
    np.add.at(wsum, group, w)
    keep = wsum != 0
    idx = np.asarray(reps)[keep]
    return CanonicalTensor3(wsum[keep], tuple(f[:, idx] for f in fs))


def relative_error(a, b) -> float:
    """``||a - b|| / ||b||`` for canonical tensors (``b`` is the reference)."""
    nb = frobenius_norm(b)
    if nb == 0:
        raise ZeroDivisionError("reference tensor has zero norm")
    if isinstance(a, CanonicalTensor3) and isinstance(b, CanonicalTensor3):
        diff = merge_parallel_terms(add(a, scale(b, -1.0)))
        return frobenius_norm(diff) / nb
    d2 = scalar_product(a, a) - 2 * scalar_product(a, b) + nb * nb
    return float(np.sqrt(max(d2, 0.0))) / nb


def conv_window_start(n: int, nb: int) -> int:
    """First index of the length-``n`` window kept from a full convolution.

    The second operand of length ``nb`` is assumed centred at index
    ``(nb - 1) // 2``; ``nb = 2n`` is the doubled reference grid.
    """
    return (nb - 1) // 2


def convolve_columns(a: np.ndarray, b: np.ndarray, h: float = 1.0, method: str = "auto") -> np.ndarray:
    """All pairwise windowed 1D convolutions of the columns of ``a`` and ``b``.

    Parameters
    ----------
    a : ndarray, shape (n, Ra)
    b : ndarray, shape (nb, Rb)
    h : float
        Quadrature weight applied to every convolution.
    method : {"auto", "fft", "direct"}

    Returns
    -------
    ndarray, shape (n, Ra, Rb)
    """
    n, nb = a.shape[0], b.shape[0]
    s = conv_window_start(n, nb)
    if method == "auto":
        method = "fft" if n >= FFT_THRESHOLD else "direct"
    if method == "fft":
        size = scipy.fft.next_fast_len(n + nb - 1, real=True)
        fa = scipy.fft.rfft(a, size, axis=0)
        fb = scipy.fft.rfft(b, size, axis=0)
        full = scipy.fft.irfft(fa[:, :, None] * fb[:, None, :], size, axis=0)
        out = full[s:s + n]
    elif method == "direct":
        # out[p] = sum_i a[i] b[s + p - i]
        idx = s + np.arange(n)[:, None] - np.arange(n)[None, :]
        valid = (idx >= 0) & (idx < nb)
        toe = b[np.clip(idx, 0, nb - 1)] * valid[:, :, None]
        out = np.einsum("ia,pib->pab", a, toe, optimize=True)
    else:
        raise InvalidArgumentError(f"unknown convolution method {method!r}")
    return h * out


def convolve(a: CanonicalTensor3, b: CanonicalTensor3, h: float, method: str = "auto") -> CanonicalTensor3:
    """Tensor-product convolution ``h^3 sum_j a_j b_{i-j}`` on the box.

    ``b`` may live on the grid of ``a`` or on its doubled reference grid.
    The result has rank ``R_a * R_b`` and the extents of ``a``.
    """
    if h <= 0:
        raise InvalidArgumentError("mesh size must be positive")
    for na, nb in zip(a.shape, b.shape):
        if nb not in (na, 2 * na):
            raise InvalidArgumentError(f"extent mismatch: {a.shape} vs {b.shape}")
    fs = tuple(
        convolve_columns(fa, fb, h, method).reshape(fa.shape[0], -1)
        for fa, fb in zip(a.factors, b.factors)
    )
    return CanonicalTensor3(np.outer(a.weights, b.weights).ravel(), fs)
