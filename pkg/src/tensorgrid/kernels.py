"""Separable Gaussian-sum expansions of radial kernels.

A kernel such as ``1/r`` is written as a Laplace-type integral over
Gaussians and discretized by a trapezoidal (sinc) rule,

    1/r  ~  sum_k a_k exp(-t_k^2 r^2),

which is a rank-``2M+1`` canonical tensor once each Gaussian is projected
onto the grid cells axis by axis.  The same machinery yields exponential
sums ``1/x ~ sum_k w_k exp(-l_k x)`` for energy denominators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf, erfc, gamma

from .errors import ConvergenceError, InvalidArgumentError
from .formats import CanonicalTensor3
from .grid import Grid3

# default sinc step constant for exponentially spaced nodes
DEFAULT_C0 = 5.0
# M ~ KAPPA * log(1/eps)^2, used as the starting point of the M search
KAPPA = 0.35
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True, eq=False)
class ExpSum:
    """Gaussian sum ``sum_k weights[k] * exp(-nodes[k]**2 r**2)``.

    Attributes
    ----------
    M : int
        Half size; there are ``2M + 1`` terms.
    C0 : float
        Step constant, ``step = C0 * log(M) / M``.
    nodes, weights : ndarray
        Quadrature nodes ``t_k`` and weights ``a_k``, ``k = -M..M``.
    spacing : {"exp", "uniform"}
        ``"exp"`` uses ``t_k = exp(k * step)``; ``"uniform"`` uses
        ``t_k = k * step`` with a calibrated constant weight.
    scale : float
        Calibration factor applied to the uniform-node weights (1 otherwise).
    kind : str
        ``"newton"``, ``"shielded"`` or ``"power"``.
    """

    M: int
    C0: float
    step: float
    nodes: np.ndarray
    weights: np.ndarray
    spacing: str = "exp"
    scale: float = 1.0
    kind: str = "newton"

    @property
    def rank(self) -> int:
        return self.nodes.shape[0]

    def __call__(self, r):
        """Evaluate the Gaussian sum at radii ``r``."""
        r = np.asarray(r, dtype=float)
        return np.exp(-np.multiply.outer(r ** 2, self.nodes ** 2)) @ self.weights


def make_expsum(M: int, C0: float | None = None, spacing: str = "exp", kind: str = "newton",
                kappa: float = 0.0, power: float = 1.0, calibration_range=(0.1, 10.0),
                center: float = 1.0) -> ExpSum:
    """Sinc-quadrature Gaussian sum for ``1/r`` and related kernels.

    Parameters
    ----------
    M : int
        The sum has ``2M + 1`` terms.
    C0 : float, optional
        Step constant; defaults to :data:`DEFAULT_C0` for exponential
        nodes and 1.0 for uniform nodes.
    spacing : {"exp", "uniform"}
        Node family.  Uniform nodes follow the plain trapezoid rule on
        ``t in R`` and need a weight scale, fitted by least squares against
        ``1/r`` over ``calibration_range``.
    kind : {"newton", "shielded", "power"}
        ``1/r``, ``exp(-kappa r)/r`` or ``1/r**power``.
    center : float
        Exponential nodes are ``center * exp(k * step)``; choosing
        ``1 / sqrt(r_min * r_max)`` balances the sum over a radius range.
    """
    if M < 1:
        raise InvalidArgumentError("M must be at least 1")
    if spacing not in ("exp", "uniform"):
        raise InvalidArgumentError(f"unknown node spacing {spacing!r}")
    if C0 is None:
        C0 = DEFAULT_C0 if spacing == "exp" else 1.0
    if C0 <= 0:
        raise InvalidArgumentError("C0 must be positive")
    step = C0 * math.log(M) / M
    k = np.arange(-M, M + 1)
    if spacing == "uniform":
        if kind != "newton":
            raise InvalidArgumentError("uniform nodes are only provided for 1/r")
        t = k * step
        w = np.full(t.shape, _TWO_OVER_SQRT_PI * step)
        scale = 1.0
        if step > 0:
            r = np.geomspace(*calibration_range, 200)
            g = np.exp(-np.multiply.outer(r ** 2, t ** 2)) @ w * r
            scale = float(np.sum(g) / np.sum(g * g))
        return ExpSum(M, C0, step, t, scale * w, spacing, scale, kind)
    if center <= 0:
        raise InvalidArgumentError("center must be positive")
    t = center * np.exp(k * step)
    if kind == "newton":
        w = _TWO_OVER_SQRT_PI * step * t
    elif kind == "shielded":
        w = _TWO_OVER_SQRT_PI * step * t * np.exp(-kappa ** 2 / (4 * t ** 2))
    elif kind == "power":
        if power <= 0:
            raise InvalidArgumentError("power must be positive")
        w = 2.0 / gamma(power / 2) * step * t ** power
    else:
        raise InvalidArgumentError(f"unknown kernel kind {kind!r}")
    return ExpSum(M, C0, step, t, w, spacing, 1.0, kind)


def kernel_values(kind: str, r, kappa: float = 0.0, power: float = 1.0):
    """Exact kernel for comparison with an :class:`ExpSum`."""
    r = np.asarray(r, dtype=float)
    if kind == "newton":
        return 1.0 / r
    if kind == "shielded":
        return np.exp(-kappa * r) / r
    if kind == "power":
        return r ** -power
    raise InvalidArgumentError(f"unknown kernel kind {kind!r}")


def max_relative_error(es: ExpSum, r_min: float, r_max: float, num: int = 400,
                       kappa: float = 0.0, power: float = 1.0) -> float:
    """Largest relative error of the Gaussian sum on a log grid of radii."""
    r = np.geomspace(r_min, r_max, num)
    exact = kernel_values(es.kind, r, kappa, power)
    return float(np.max(np.abs(es(r) - exact) / exact))


def choose_expsum(eps: float, r_min: float, r_max: float, M_max: int = 400,
                  C0_grid=None) -> ExpSum:
    """Smallest exponential-node 1/r sum meeting ``eps`` on ``[r_min, r_max]``.

    ``M`` starts at ``KAPPA * log(1/eps)**2`` and grows until the measured
    error is below ``eps``; for every ``M`` the best ``C0`` of a small grid
    is taken.  Nodes are centred on ``1 / sqrt(r_min * r_max)``.
    """
    if not (0 < r_min < r_max) or not 0 < eps < 1:
        raise InvalidArgumentError("need 0 < r_min < r_max and 0 < eps < 1")
    C0_grid = np.arange(3.0, 9.01, 0.5) if C0_grid is None else C0_grid
    M = max(2, int(math.ceil(KAPPA * math.log(1 / eps) ** 2)))
    # back off while the smaller sum is still accurate enough
    center = 1.0 / math.sqrt(r_min * r_max)
    while M > 2 and _best(M - 4 if M > 6 else M - 1, r_min, r_max, C0_grid, center)[1] <= eps:
        M = M - 4 if M > 6 else M - 1
    while M <= M_max:
        es, err = _best(M, r_min, r_max, C0_grid, center)
        if err <= eps:
            return es
        M += max(1, M // 10)
    raise ConvergenceError(f"no Gaussian sum with M <= {M_max} reaches {eps:g} on [{r_min}, {r_max}]")


def calibrate_c0(M: int, r_min: float, r_max: float, bounds=(2.0, 10.0)) -> float:
    """Step constant minimizing the max relative 1/r error on ``[r_min, r_max]``."""
    res = minimize_scalar(lambda c: max_relative_error(make_expsum(M, c), r_min, r_max),
                          bounds=bounds, method="bounded", options={"xatol": 1e-4})
    return float(res.x)


def kernel_for_grid(grid: Grid3, eps: float = 1e-8, doubled: bool = True) -> "KernelTensor":
    """Newton kernel tensor whose Gaussian sum meets ``eps`` on all grid offsets.

    The radial range runs from a tenth of the mesh size, which keeps the
    cell integrals near the origin accurate, to the largest offset.
    """
    h = grid.h
    reach = np.sqrt(3.0) * max(grid.b_half) * (2.0 if doubled else 1.0)
    return newton_kernel_tensor(grid, choose_expsum(eps, 0.1 * h, reach), doubled)


def _best(M, r_min, r_max, C0_grid, center):
    best = None
    for c in C0_grid:
        es = make_expsum(M, c, center=center)
        err = max_relative_error(es, r_min, r_max)
        if best is None or err < best[1]:
            best = (es, err)
    return best


def gaussian_cell_integrals(t: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``int_left^right exp(-t^2 x^2) dx`` for every cell and node.

    Returns an array of shape ``(len(left), len(t))``.  The erfc form is
    used on cells far from the origin to avoid cancellation.
    """
    t = np.asarray(t, dtype=float)[None, :]
    zl = t * np.asarray(left, dtype=float)[:, None]
    zr = t * np.asarray(right, dtype=float)[:, None]
    pos = zl >= 0.5
    neg = zr <= -0.5
    diff = erf(zr) - erf(zl)
    diff = np.where(pos, erfc(zl) - erfc(zr), diff)
    diff = np.where(neg, erfc(-zr) - erfc(-zl), diff)
    width = np.broadcast_to(right[:, None] - left[:, None], diff.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, 0.5 * math.sqrt(math.pi) * diff / np.where(t > 0, t, 1.0), width)
    return out


def kernel_axis_factor(es: ExpSum, centers: np.ndarray, h: float) -> np.ndarray:
    """Cell-integrated axis vectors ``a_k^{1/3} int_cell exp(-t_k^2 x^2) dx``."""
    ints = gaussian_cell_integrals(es.nodes, centers - 0.5 * h, centers + 0.5 * h)
    return ints * np.cbrt(es.weights)[None, :]


@dataclass(frozen=True, eq=False)
class KernelTensor:
    """Canonical kernel tensor on a grid or on its doubled reference grid.

    Entries are cell integrals, so ``tensor / h**3`` approximates the cell
    average of the kernel around each offset.
    """

    tensor: CanonicalTensor3
    grid: Grid3
    doubled: bool
    expsum: ExpSum

    @property
    def kind(self) -> str:
        return self.expsum.kind

    @property
    def rank(self) -> int:
        return self.tensor.rank

    @property
    def factors(self):
        return self.tensor.factors

    def value_at_origin(self) -> float:
        """Entry at zero offset (the regularized on-node value)."""
        idx = [(n - 1) if self.doubled else (n - 1) // 2 for n in self.grid.n]
        f = self.tensor.factors
        return float(np.sum(self.tensor.weights * f[0][idx[0]] * f[1][idx[1]] * f[2][idx[2]]))


def newton_kernel_tensor(grid: Grid3, es: ExpSum, doubled: bool = False) -> KernelTensor:
    """Project the Gaussian sum ``es`` onto the grid cells.

    With ``doubled=True`` the tensor lives on the ``2n`` reference offsets
    ``m h, m = -(n-1)..n`` and serves as the master copy for windowing and
    convolution.  The three side matrices coincide on a cubic grid.
    """
    h = grid.h
    factors = []
    cache = {}
    for axis in range(3):
        key = grid.n[axis]
        if key not in cache:
            x = grid.reference_points(axis) if doubled else grid.points(axis)
            cache[key] = kernel_axis_factor(es, x, h)
        factors.append(cache[key])
    tensor = CanonicalTensor3(np.ones(es.rank), tuple(factors))
    return KernelTensor(tensor, grid, doubled, es)


@dataclass(frozen=True, eq=False)
class ExponentialSum:
    """``1/x ~ sum_k omega[k] * exp(-lam[k] * x)`` on ``[lo, hi]``."""

    omega: np.ndarray
    lam: np.ndarray
    lo: float
    hi: float
    max_error: float

    @property
    def terms(self) -> int:
        return self.omega.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.multiply.outer(x, self.lam)) @ self.omega


def reciprocal_expsum(lo: float, hi: float, eps: float, max_terms: int = 256,
                      check_points: int = 1000) -> ExponentialSum:
    """Exponential sum for ``1/x`` on ``[lo, hi]`` with relative error ``<= eps``.

    Uses the trapezoid rule for ``1/x = int exp(u - exp(u) x) du``; the
    step and truncation are set from the analyticity strip and the tails,
    then refined until the error measured on ``check_points`` log-spaced
    points meets ``eps``.

    Raises
    ------
    ConvergenceError
        If more than ``max_terms`` terms would be needed.
    """
    if not (0 < lo <= hi) or not 0 < eps < 1:
        raise InvalidArgumentError("need 0 < lo <= hi and 0 < eps < 1")
    if hi == lo:
        return ExponentialSum(np.array([math.e / lo]), np.array([1.0 / lo]), lo, hi, 0.0)
    ratio = hi / lo
    x = np.geomspace(lo, hi, check_points)
    safety = 1.0
    while True:
        tol = eps / (4 * safety)
        step = math.pi ** 2 / math.log(4.0 / tol)
        u_min = math.log(tol / (2 * ratio))
        u_max = math.log(math.log(2.0 / tol))
        u = np.arange(u_min, u_max + step, step)
        if u.size > max_terms:
            raise ConvergenceError(f"1/x on [{lo}, {hi}] needs more than {max_terms} terms for eps={eps:g}")
        # work on y = x / lo in [1, ratio], then rescale
        omega = step * np.exp(u) / lo
        lam = np.exp(u) / lo
        approx = np.exp(-np.multiply.outer(x, lam)) @ omega
        err = float(np.max(np.abs(approx * x - 1.0)))
        if err <= eps:
            return ExponentialSum(omega, lam, lo, hi, err)
        safety *= 4.0
