"""Drivers for the numerical experiments exposed on the command line."""
from __future__ import annotations

import time

import numpy as np

from .errors import InvalidArgumentError
from .formats import CanonicalTensor3, convolve, to_dense
from .grid import make_grid
from .kernels import choose_expsum, newton_kernel_tensor
from .qtt import tt_decompose
from .reduction import tucker_decay


def kernel_error_scan(n: int, box: float, eps: float, r_min: float = 0.5, r_max: float | None = None,
                      num: int = 200, seed: int = 0):
    """Compare the ``h^-3``-scaled kernel tensor with ``1/r`` at grid nodes.

    Probes are ``num`` distinct nodes drawn with ``seed`` among those with
    ``r_min <= r <= r_max`` (default ``r_max`` is just inside the box).

    Returns
    -------
    rows : ndarray, shape (num, 4)
        Columns ``r, exact, approx, rel_err`` sorted by radius.
    rank : int
    """
    grid = make_grid(box, n)
    h = grid.h
    r_max = box - h if r_max is None else r_max
    es = choose_expsum(eps, 0.1 * h, np.sqrt(3.0) * box)
    kt = newton_kernel_tensor(grid, es, doubled=False)
    rng = np.random.default_rng(seed)
    c = (n - 1) / 2
    picked = set()
    idx = []
    while len(idx) < num:
        j = tuple(int(v) for v in rng.integers(0, n, 3))
        r = h * np.sqrt(sum((v - c) ** 2 for v in j))
        if r_min <= r <= r_max and j not in picked:
            picked.add(j)
            idx.append(j)
    idx = np.array(idx)
    f = kt.factors
    approx = np.einsum("k,pk,pk,pk->p", kt.tensor.weights, f[0][idx[:, 0]], f[1][idx[:, 1]],
                       f[2][idx[:, 2]]) / h ** 3
    r = h * np.sqrt(np.sum((idx - c) ** 2, axis=1))
    exact = 1.0 / r
    rows = np.column_stack([r, exact, approx, np.abs(approx - exact) / exact])
    return rows[np.argsort(rows[:, 0])], kt.rank


def lattice_offsets(n_centers: int, step: int) -> np.ndarray:
    """Node offsets from the grid centre of ``n_centers`` points ``step`` nodes apart."""
    return (np.arange(n_centers) - (n_centers - 1) / 2) * step


def _center_indices(n: int, n_centers: int, step: int) -> np.ndarray:
    j = (n - 1) / 2 + lattice_offsets(n_centers, step)
    if not np.allclose(j, np.rint(j)) or j.min() < 0 or j.max() > n - 1:
        raise InvalidArgumentError(f"{n_centers} centres {step} nodes apart do not fit on nodes of n={n}")
    return np.rint(j).astype(int)


def potential_tensors(function: str, n: int, box: float, n_centers: int = 8, step: int = 7,
                      alpha: float = 1.0, eps: float = 1e-10):
    """Dense single potential at the centre and its lattice sum.

    ``function`` is ``"slater"`` (``exp(-alpha r)`` sampled at nodes) or
    ``"newton"`` (cell-averaged Gaussian-sum ``1/r``).  Lattice centres
    are grid nodes ``step`` apart, ``n_centers`` per axis.
    """
    grid = make_grid(box, n)
    centers = _center_indices(n, n_centers, step)
    if function == "slater":
        x = grid.points(0)
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        single = np.exp(-alpha * np.sqrt(X ** 2 + Y ** 2 + Z ** 2))
        lat = np.zeros_like(single)
        xc = x[centers]
        for cx in xc:
            for cy in xc:
                for cz in xc:
                    lat += np.exp(-alpha * np.sqrt((X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2))
        return single, lat
    if function == "newton":
        h = grid.h
        es = choose_expsum(eps, 0.1 * h, 2 * np.sqrt(3.0) * box)
        ref = newton_kernel_tensor(grid, es, doubled=True)
        single_f = tuple(f[n - 1 - (n - 1) // 2:][:n] for f in ref.factors)
        single = to_dense(CanonicalTensor3(ref.tensor.weights, single_f)) / h ** 3
        assembled = tuple(sum(f[n - 1 - j:2 * n - 1 - j] for j in centers) for f in ref.factors)
        lat = to_dense(CanonicalTensor3(ref.tensor.weights, assembled)) / h ** 3
        return single, lat
    raise InvalidArgumentError(f"unknown function {function!r}")


def tucker_decay_curves(function: str = "slater", n: int = 64, rmax: int = 15, box: float = 10.0, **kw):
    """HOSVD error ``E_FN(r)`` for ``r = 1..rmax`` of a single potential and its lattice sum."""
    single, lat = potential_tensors(function, n, box, **kw)
    ranks = np.arange(1, rmax + 1)
    return ranks, tucker_decay(single, ranks), tucker_decay(lat, ranks)


def conv_bench(nmin: int = 128, nmax: int = 1024, rank: int = 4, seed: int = 0, repeats: int = 3,
               dense_max: int = 128):
    """Time tensor-product convolution of random rank-``rank`` operands.

    Returns rows ``(n, seconds, rank, dense_seconds)``.  ``dense_seconds``
    times a dense 3D FFT convolution for ``n <= dense_max`` and is NaN
    otherwise.
    """
    import scipy.signal

    rng = np.random.default_rng(seed)
    rows = []
    n = nmin
    while n <= nmax:
        a = CanonicalTensor3(np.ones(rank), tuple(rng.standard_normal((n, rank)) for _ in range(3)))
        b = CanonicalTensor3(np.ones(rank), tuple(rng.standard_normal((n, rank)) for _ in range(3)))
        best = np.inf
        for _ in range(repeats):
            t = time.perf_counter()
            convolve(a, b, 1.0)
            best = min(best, time.perf_counter() - t)
        dense = np.nan
        if n <= dense_max:
            da, db = to_dense(a), to_dense(b)
            t = time.perf_counter()
            scipy.signal.fftconvolve(da, db, mode="same")
            dense = time.perf_counter() - t
        rows.append((n, best, rank, dense))
        n *= 2
    return rows


def qtt_test_vector(function: str, L: int, rng) -> np.ndarray:
    """Random instance of an exponential, trigonometric or cubic vector of length ``2^L``."""
    i = np.arange(2 ** L, dtype=float)
    x = i / 2 ** L
    if function == "exp":
        return np.exp(-rng.uniform(0.1, 5.0) * x)
    if function == "sin":
        return np.sin(rng.uniform(1.0, 50.0) * x + rng.uniform(0, 2 * np.pi))
    if function == "poly":
        c = rng.standard_normal(4)
        return c[0] + c[1] * x + c[2] * x ** 2 + c[3] * x ** 3
    raise InvalidArgumentError(f"unknown function {function!r}")


def qtt_rank_table(function: str, L: int = 12, eps: float = 1e-10, draws: int = 20, seed: int = 0):
    """TT ranks of ``draws`` random test vectors; one rank tuple per draw."""
    rng = np.random.default_rng(seed)
    return [tt_decompose(qtt_test_vector(function, L, rng), eps).ranks for _ in range(draws)]
