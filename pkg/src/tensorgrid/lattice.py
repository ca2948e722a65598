"""Potential sums and interaction energies over finite rectangular lattices.

Every lattice node sits on a grid node, so a shifted kernel is a window
of the doubled-grid reference tensor.  Summing the windows axis by axis
gives assembled side vectors.  The lattice sum therefore keeps the
reference rank, and the assembly work is linear in the number of
nodes per axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SizeGuardError
from .formats import CanonicalTensor3, TuckerTensor3, add
from .grid import Grid3, WindowMap, grid_from_spacing
from .kernels import KernelTensor, kernel_for_grid
from .reduction import ReductionConfig, reduce_rank

PAIR_GUARD = 2 * 10 ** 9


@dataclass(frozen=True)
class LatticeBlock:
    """Rectangular sub-block of lattice indices ``start .. start + counts - 1``.

    ``include=False`` removes the block from the included ones.  ``Z``
    overrides the lattice charge for the block.
    """

    start: tuple
    counts: tuple
    include: bool = True
    Z: float | None = None

    def __post_init__(self):
        s = tuple(int(v) for v in self.start)
        c = tuple(int(v) for v in self.counts)
        if len(s) != 3 or len(c) != 3 or min(s) < 0 or min(c) < 1:
            raise InvalidArgumentError(f"invalid block start {self.start} / counts {self.counts}")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "counts", c)

    def mask(self, shape) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[tuple(slice(s, s + c) for s, c in zip(self.start, self.counts))] = True
        return m


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice of ``L1 x L2 x L3`` unit charges with spacing ``b`` (bohr).

    The grid has ``n0`` cells per lattice spacing and a margin of ``n0``
    cells around the lattice.  ``shift`` moves the whole lattice by whole
    grid nodes inside that margin, ``|shift| < n0``.
    """

    counts: tuple
    spacing: float
    Z: float = 1.0
    n0: int = 64
    shift: tuple = (0, 0, 0)
    blocks: tuple = ()
    grid: Grid3 = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = (int(self.counts),) * 3 if np.ndim(self.counts) == 0 else tuple(int(v) for v in self.counts)
        if len(L) != 3 or min(L) < 1:
            raise InvalidArgumentError(f"invalid lattice counts {self.counts}")
        if not self.spacing > 0 or self.n0 < 1:
            raise InvalidArgumentError("spacing and n0 must be positive")
        shift = tuple(int(v) for v in self.shift)
        if len(shift) != 3 or max(abs(v) for v in shift) >= self.n0:
            raise InvalidArgumentError(f"shift {self.shift} must stay below n0 = {self.n0} per axis")
        object.__setattr__(self, "counts", L)
        object.__setattr__(self, "shift", shift)
        blocks = tuple(self.blocks)
        for blk in blocks:
            if any(s + c > n for s, c, n in zip(blk.start, blk.counts, L)):
                raise InvalidArgumentError(f"block {blk} exceeds the lattice {L}")
        object.__setattr__(self, "blocks", blocks)
        n = tuple(self.n0 * (l + 1) + 1 for l in L)
        object.__setattr__(self, "grid", grid_from_spacing(self.spacing / self.n0, n))

    @property
    def h(self) -> float:
        return self.spacing / self.n0

    @property
    def n_nodes(self) -> int:
        return math.prod(self.counts)

    def node_index(self, axis: int, k):
        """Grid index of lattice node ``k`` along ``axis``."""
        return self.n0 + self.shift[axis] + np.asarray(k) * self.n0

    def positions(self) -> np.ndarray:
        """Coordinates of all lattice nodes, shape ``(L1 L2 L3, 3)``."""
        axes = [self.grid.points(a)[self.node_index(a, np.arange(self.counts[a]))] for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    def window(self, k) -> WindowMap:
        """Window translating the reference kernel to lattice node ``k``."""
        n = self.grid.n
        return WindowMap(tuple(n[a] - 1 - int(self.node_index(a, k[a])) for a in range(3)), n)

    def resolved_blocks(self) -> tuple:
        """Blocks after validation; a lattice without blocks is one full block."""
        if not self.blocks:
            return (LatticeBlock((0, 0, 0), self.counts),)
        inc = np.zeros(self.counts, dtype=int)
        exc = np.zeros(self.counts, dtype=int)
        for blk in self.blocks:
            (inc if blk.include else exc)[blk.mask(self.counts)] += 1
        if inc.max(initial=0) > 1 or exc.max(initial=0) > 1:
            raise InvalidArgumentError("lattice blocks overlap")
        if np.any(exc > inc):
            raise InvalidArgumentError("an excluded block reaches outside the included ones")
        return self.blocks

    def charges(self) -> np.ndarray:
        """Charge at each lattice index after resolving blocks."""
        q = np.zeros(self.counts)
        for blk in self.resolved_blocks():
            z = self.Z if blk.Z is None else blk.Z
            q[blk.mask(self.counts)] += z if blk.include else -z
        return q


def lattice_kernel(spec: LatticeSpec, eps: float = 1e-8) -> KernelTensor:
    """Doubled-grid Newton reference kernel for the lattice grid."""
    return kernel_for_grid(spec.grid, eps=eps, doubled=True)


@dataclass(frozen=True, eq=False)
class AssembledPotential:
    """Lattice potential with the count of window additions used to build it."""

    tensor: object
    window_ops: int


def _check_reference(spec: LatticeSpec, n_ref):
    if tuple(n_ref) != tuple(2 * n for n in spec.grid.n):
        raise InvalidArgumentError(f"reference extents {tuple(n_ref)} do not match the doubled lattice grid")


def _assemble(spec: LatticeSpec, factors, start, counts):
    """Per axis the sum of windows over lattice nodes ``start .. start + counts - 1``."""
    out, ops = [], 0
    n = spec.grid.n
    for a in range(3):
        f = factors[a]
        acc = np.zeros((n[a], f.shape[1]))
        for k in range(start[a], start[a] + counts[a]):
            s = n[a] - 1 - int(spec.node_index(a, k))
            acc += f[s:s + n[a]]
            ops += f.shape[1]
        out.append(acc)
    return tuple(out), ops


def single_kernel(spec: LatticeSpec, reference: KernelTensor, k) -> CanonicalTensor3:
    """Reference kernel windowed to lattice node ``k`` (charge ``Z``)."""
    win = spec.window(k)
    return CanonicalTensor3(spec.Z * reference.tensor.weights,
                            tuple(win.apply(f, a) for a, f in enumerate(reference.factors)))


def lattice_sum_canonical(spec: LatticeSpec, reference: KernelTensor) -> AssembledPotential:
    """Potential of the full rectangular lattice, with the rank of ``reference``.

    Work is ``R (L1 + L2 + L3)`` window additions of length-``n`` vectors.
    """
    _check_reference(spec, reference.tensor.shape)
    fs, ops = _assemble(spec, reference.factors, (0, 0, 0), spec.counts)
    return AssembledPotential(CanonicalTensor3(spec.Z * reference.tensor.weights, fs), ops)


def lattice_sum_tucker(spec: LatticeSpec, master: TuckerTensor3) -> AssembledPotential:
    """Lattice sum of a Tucker reference: side matrices assembled, core untouched.

    The charge ``Z`` is applied to the first side matrix, so the core
    object is shared with ``master``.
    """
    _check_reference(spec, master.shape)
    fs, ops = _assemble(spec, master.factors, (0, 0, 0), spec.counts)
    fs = (spec.Z * fs[0],) + fs[1:]
    return AssembledPotential(TuckerTensor3(master.core, fs), ops)


def lattice_sum_composite(spec: LatticeSpec, reference: KernelTensor,
                          eps: float | None = 1e-10) -> AssembledPotential:
    """Potential of a union of rectangular blocks.

    Block sums are added (excluded blocks with a negative charge) to give
    rank ``R * #blocks``.  With ``eps`` that sum is passed through
    :func:`reduce_rank`.
    """
    _check_reference(spec, reference.tensor.shape)
    total, ops = None, 0
    for blk in spec.resolved_blocks():
        fs, o = _assemble(spec, reference.factors, blk.start, blk.counts)
        ops += o
        z = spec.Z if blk.Z is None else blk.Z
        part = CanonicalTensor3((z if blk.include else -z) * reference.tensor.weights, fs)
        total = part if total is None else add(total, part)
    if eps is not None:
        total = reduce_rank(total, ReductionConfig(eps=eps))
    return AssembledPotential(total, ops)


def _traced(spec: LatticeSpec, factor: np.ndarray, axis: int) -> np.ndarray:
    """Assembled vectors of one axis restricted to the lattice nodes, shape ``(L, R)``."""
    L = spec.counts[axis]
    n = spec.grid.n[axis]
    nodes = spec.node_index(axis, np.arange(L))
    # window of node k at node j reads the reference at n - 1 + nodes[j] - nodes[k]
    idx = n - 1 + nodes[:, None] - nodes[None, :]
    return factor[idx].sum(axis=1)


def lattice_interaction_energy(spec: LatticeSpec, reference: KernelTensor) -> float:
    """``1/2 sum_{j != k} Z^2 / |x_j - x_k|`` from the traced reference tensor.

    The assembled potential is evaluated only at the lattice nodes, so the
    cost is ``O(R L^2)``.  The self-interaction is removed by subtracting
    the reference value at zero offset once per node.
    """
    _check_reference(spec, reference.tensor.shape)
    if spec.blocks:
        raise InvalidArgumentError("the energy evaluator needs a uniform rectangular lattice")
    prod = np.asarray(reference.tensor.weights, dtype=float).copy()
    for a in range(3):
        prod = prod * _traced(spec, reference.factors[a], a).sum(axis=0)
    total = float(np.sum(prod))
    self_term = spec.n_nodes * reference.value_at_origin()
    return 0.5 * spec.Z ** 2 * (total - self_term) / spec.h ** 3


def displacement_energy(spec: LatticeSpec) -> float:
    """Exact energy from node-displacement multiplicities, ``O(L1 L2 L3)`` terms."""
    L = spec.counts
    ms = [np.arange(-(l - 1), l) for l in L]
    mult = [l - np.abs(m) for l, m in zip(L, ms)]
    total = []
    for i, m1 in enumerate(ms[0]):
        d2 = (m1 ** 2 + ms[1][:, None] ** 2 + ms[2][None, :] ** 2).astype(float)
        w = mult[0][i] * mult[1][:, None] * mult[2][None, :]
        with np.errstate(divide="ignore"):
            inv = np.where(d2 > 0, 1.0 / np.sqrt(np.where(d2 > 0, d2, 1.0)), 0.0)
        total.append(float(np.sum(w * inv)))
    return 0.5 * spec.Z ** 2 / spec.spacing * math.fsum(total)


def direct_energy_oracle(spec: LatticeSpec, chunk: int = 512) -> float:
    """Brute-force ``1/2 sum_{j != k} Z_j Z_k / |x_j - x_k|`` over ordered pairs.

    Row blocks are summed with numpy's pairwise summation and the block
    totals with ``math.fsum``, so the result does not depend on timing.

    Raises
    ------
    SizeGuardError
        If the number of ordered pairs exceeds :data:`PAIR_GUARD`.
    """
    q = spec.charges().ravel()
    keep = q != 0
    pos = spec.positions()[keep]
    q = q[keep]
    N = pos.shape[0]
    if N * (N - 1) > PAIR_GUARD:
        raise SizeGuardError(f"{N * (N - 1)} pairs exceed the guard of {PAIR_GUARD}")
    parts = []
    for s in range(0, N, chunk):
        d = pos[s:s + chunk, None, :] - pos[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        rows = np.arange(s, min(s + chunk, N))
        r[rows - s, rows] = np.inf
        parts.append(float(np.sum((q[s:s + chunk, None] * q[None, :]) / r)))
    return 0.5 * math.fsum(parts)
