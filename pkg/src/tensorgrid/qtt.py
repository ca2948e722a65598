"""Quantics folding of long vectors and tensor-train compression.

A vector of length ``2^L`` is reshaped into an ``L``-dimensional
``2 x ... x 2`` array whose first mode is the least significant binary
digit of the index, then compressed by sequential truncated SVDs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .reduction import truncation_rank


def _levels(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise InvalidArgumentError(f"length {n} is not a power of two >= 2")
    return n.bit_length() - 1


def fold(x) -> np.ndarray:
    """Quantics image: ``out[j1, ..., jL] = x[sum_v j_v 2^(v-1)]``."""
    x = np.asarray(x)
    L = _levels(x.shape[0])
    # C order makes the last axis fastest, so reverse to put the low bit first
    return x.reshape((2,) * L).transpose(tuple(range(L - 1, -1, -1)))


def unfold(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fold`."""
    L = t.ndim
    return np.ascontiguousarray(t.transpose(tuple(range(L - 1, -1, -1)))).reshape(-1)


@dataclass(frozen=True, eq=False)
class QuanticsImage:
    """Tensor train with cores of shape ``(r_{v-1}, 2, r_v)``."""

    cores: tuple

    @property
    def levels(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple:
        """Inner ranks ``(r_1, ..., r_{L-1})``."""
        return tuple(c.shape[2] for c in self.cores[:-1])

    def full(self) -> np.ndarray:
        """Reconstruct the underlying vector."""
        out = self.cores[0].reshape(2, -1)
        for c in self.cores[1:]:
            # rows: digits so far, low bit first
            out = np.einsum("ir,rjs->jis", out, c).reshape(-1, c.shape[2])
        return out.reshape(-1)


def tt_decompose(x, eps: float) -> QuanticsImage:
    """TT-SVD of the quantics image of ``x`` with relative accuracy ``eps``.

    Each of the ``L - 1`` SVDs discards a tail of norm at most
    ``eps / sqrt(L - 1)`` times the norm of ``x``, so the reconstruction
    error is at most ``eps * ||x||``.
    """
    x = np.asarray(x, dtype=float)
    L = _levels(x.shape[0])
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    norm = np.linalg.norm(x)
    if L == 1:
        return QuanticsImage((x.reshape(1, 2, 1).copy(),))
    delta = eps * norm / np.sqrt(L - 1)
    cores = []
    # rows of `rest` index the current bond, columns the remaining digits (low bit first)
    rest = fold(x).reshape(2, -1, order="F")
    r_prev = 1
    for _ in range(L - 1):
        u, s, vt = np.linalg.svd(rest, full_matrices=False)
        r = max(1, _tail_rank(s, delta))
        cores.append(u[:, :r].reshape(r_prev, 2, r, order="F"))
        rest = (s[:r, None] * vt[:r]).reshape(r * 2, -1, order="F")
        r_prev = r
    cores.append(rest.reshape(r_prev, 2, 1, order="F"))
    return QuanticsImage(tuple(cores))


def _tail_rank(s, delta):
    """Smallest rank whose discarded tail has norm at most ``delta``."""
    total = float(np.sum(s ** 2))
    if total == 0:
        return 0
    return truncation_rank(s, delta / np.sqrt(total)) if delta > 0 else len(s)


def tt_storage(img: QuanticsImage) -> int:
    """Number of stored core entries, ``sum_v r_{v-1} * 2 * r_v``."""
    return int(sum(c.size for c in img.cores))


def tt_eval(img: QuanticsImage, i: int) -> float:
    """Entry ``i`` of the represented vector in ``O(L r^2)`` operations."""
    L = img.levels
    if not 0 <= i < 2 ** L:
        raise InvalidArgumentError(f"index {i} out of range for length {2 ** L}")
    v = np.ones(1)
    for level, c in enumerate(img.cores):
        v = v @ c[:, (i >> level) & 1, :]
    return float(v[0])
