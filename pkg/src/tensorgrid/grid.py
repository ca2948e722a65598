"""Uniform cell-centred grids on a symmetric box and node-aligned windowing.

A grid with ``n`` points on ``[-b, b]`` has mesh size ``h = 2 b / (n + 1)``
and nodes ``x_j = -b + (j + 1) h`` for ``j = 0, ..., n - 1``.  Kernels that
need to be translated to arbitrary nodes are stored once on a *doubled*
reference grid of ``2 n`` points holding offsets ``m h`` for
``m = -(n - 1), ..., n``; a translate is then a plain slice of length ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError, SnapError


def _triple(value, kind):
    if np.ndim(value) == 0:
        return (kind(value),) * 3
    value = tuple(kind(v) for v in value)
    if len(value) != 3:
        raise InvalidArgumentError("expected a scalar or a length-3 sequence")
    return value


@dataclass(frozen=True)
class Grid3:
    """Tensor grid on the box ``prod_l [-b_half[l], b_half[l]]``.

    Parameters
    ----------
    b_half : tuple of float
        Half widths of the box per axis (bohr).
    n : tuple of int
        Number of grid points per axis.
    """

    b_half: tuple
    n: tuple

    def __post_init__(self):
        object.__setattr__(self, "b_half", _triple(self.b_half, float))
        object.__setattr__(self, "n", _triple(self.n, int))
        if min(self.b_half) <= 0:
            raise InvalidArgumentError("box half width must be positive")
        if min(self.n) < 2:
            raise InvalidArgumentError("at least two grid points per axis are required")

    @property
    def spacing(self) -> tuple:
        """Mesh size per axis."""
        return tuple(2.0 * b / (n + 1) for b, n in zip(self.b_half, self.n))

    @property
    def h(self) -> float:
        """Common mesh size; raises if the axes use different spacings."""
        hs = self.spacing
        if not np.allclose(hs, hs[0], rtol=1e-13, atol=0.0):
            raise InvalidArgumentError(f"grid is not isotropic: spacings {hs}")
        return hs[0]

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def is_cubic(self) -> bool:
        return self.n[0] == self.n[1] == self.n[2] and np.allclose(self.b_half, self.b_half[0])

    def points(self, axis: int = 0) -> np.ndarray:
        """Node coordinates along one axis."""
        n, b = self.n[axis], self.b_half[axis]
        h = 2.0 * b / (n + 1)
        # written symmetrically so that x[j] == -x[n-1-j] holds bit for bit
        return (np.arange(n) - 0.5 * (n - 1)) * h

    def reference_points(self, axis: int = 0) -> np.ndarray:
        """Offsets ``m h``, ``m = -(n-1)..n``, of the doubled reference grid."""
        n = self.n[axis]
        return np.arange(-(n - 1), n + 1) * self.spacing[axis]

    def coordinate(self, index) -> np.ndarray:
        """Coordinates of a node given its three 0-based indices."""
        return np.array([(index[a] - 0.5 * (self.n[a] - 1)) * self.spacing[a] for a in range(3)])

    def index_of(self, point, tol=None) -> tuple:
        """Indices of the node nearest to ``point``.

        Raises
        ------
        OutOfDomainError
            If the point lies outside the box.
        SnapError
            If the nearest node is farther than ``tol`` (default ``h / 2``)
            along some axis.
        """
        point = np.asarray(point, dtype=float)
        out = []
        for a in range(3):
            x, n, h = point[a], self.n[a], self.spacing[a]
            if not abs(x) <= self.b_half[a] * (1 + 1e-14):
                raise OutOfDomainError(f"coordinate {x} outside [-{self.b_half[a]}, {self.b_half[a]}]")
            j = int(np.clip(np.rint(x / h + 0.5 * (n - 1)), 0, n - 1))
            t = 0.5 * h if tol is None else tol
            dist = abs(x - (j - 0.5 * (n - 1)) * h)
            if dist > t * (1 + 1e-12):
                raise SnapError(f"coordinate {x} is {dist:.3g} from the nearest node (tolerance {t:.3g})")
            out.append(j)
        return tuple(out)


def make_grid(b_half, n) -> Grid3:
    """Grid with ``n`` points per axis on ``[-b_half, b_half]^3``."""
    return Grid3(b_half, n)


def grid_from_spacing(h: float, n) -> Grid3:
    """Grid with mesh size ``h`` and ``n`` points per axis."""
    if h <= 0:
        raise InvalidArgumentError("mesh size must be positive")
    n = _triple(n, int)
    return Grid3(tuple(0.5 * h * (m + 1) for m in n), n)


@dataclass(frozen=True)
class WindowMap:
    """Per-axis slices ``[start, start + n)`` into length-``2n`` reference vectors."""

    start: tuple
    n: tuple

    def __post_init__(self):
        for s, n in zip(self.start, self.n):
            if s < 0 or s + n > 2 * n:
                raise InvalidArgumentError("window reads outside the reference grid")

    def apply(self, ref: np.ndarray, axis: int) -> np.ndarray:
        """Window a reference vector (or matrix of column vectors) along ``axis``."""
        n, s = self.n[axis], self.start[axis]
        if ref.shape[0] != 2 * n:
            raise InvalidArgumentError(f"reference length {ref.shape[0]} != {2 * n}")
        return ref[s:s + n]

    def shifted(self, steps) -> "WindowMap":
        """Window for a centre moved by ``steps`` nodes per axis."""
        steps = _triple(steps, int)
        return WindowMap(tuple(s - m for s, m in zip(self.start, steps)), self.n)


def window_for_center(grid: Grid3, center, tol=None) -> WindowMap:
    """Window that translates a reference kernel to the node at ``center``.

    Applying the map to a doubled-grid reference vector ``p`` yields
    ``p`` evaluated at ``x_i - center`` for every node ``x_i``.
    """
    idx = grid.index_of(center, tol=tol)
    return WindowMap(tuple(n - 1 - j for n, j in zip(grid.n, idx)), grid.n)
