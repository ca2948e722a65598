"""Command-line front end.

Every command writes CSV, by default to standard output, preceded by
``#``-comment metadata lines (version, command, config hash and every
option value).  Exit codes: 0 success, 1 numerical failure, 2 usage or
input error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from contextlib import nullcontext

import numpy as np
import scipy.fft

from . import __version__
from .basis import ELEMENTS, Molecule, build_basis
from .errors import ConvergenceError, InvalidArgumentError, OutOfDomainError, SizeGuardError, SnapError
from .grid import make_grid

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "TENSORGRID_THREADS"


class UsageError(Exception):
    """Malformed input files or option values."""


def fmt(x) -> str:
    """Round-trip text form of a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _charge(token: str) -> float:
    if token in ELEMENTS:
        return float(ELEMENTS[token])
    try:
        return float(token)
    except ValueError:
        raise UsageError(f"unknown element or charge {token!r}") from None


def parse_geometry(text: str):
    """Parse ``Z x y z`` lines (bohr); ``Z`` may be a number or an element symbol."""
    charges, centers = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise UsageError(f"geometry line {lineno}: expected 'Z x y z', got {raw!r}")
        try:
            xyz = tuple(float(v) for v in parts[1:])
        except ValueError:
            raise UsageError(f"geometry line {lineno}: bad coordinate in {raw!r}") from None
        charges.append(_charge(parts[0]))
        centers.append(xyz)
    if not charges:
        raise UsageError("geometry file has no atoms")
    return tuple(charges), tuple(centers)


def parse_basis(text: str) -> dict:
    """Parse per-element shells.

    Format::

        element H
        s 2
          1.309756 0.430128
          0.233136 0.678914

    Each ``s N`` or ``p N`` header is followed by ``N`` lines of
    ``exponent coefficient``.
    """
    lines = [(i, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines(), 1)]
    lines = [(i, p) for i, p in lines if p]
    shells: dict = {}
    current = None
    pos = 0
    while pos < len(lines):
        lineno, parts = lines[pos]
        pos += 1
        head = parts[0].lower()
        if head == "element" and len(parts) == 2:
            current = int(round(_charge(parts[1])))
            shells.setdefault(current, [])
        elif head in ("s", "p") and len(parts) == 2:
            if current is None:
                raise UsageError(f"basis line {lineno}: shell before any 'element' line")
            try:
                count = int(parts[1])
            except ValueError:
                raise UsageError(f"basis line {lineno}: bad primitive count {parts[1]!r}") from None
            if count < 1 or pos + count > len(lines):
                raise UsageError(f"basis line {lineno}: expected {count} primitive lines")
            prims = []
            for k in range(count):
                pl, pp = lines[pos + k]
                if len(pp) != 2:
                    raise UsageError(f"basis line {pl}: expected 'exponent coefficient'")
                try:
                    prims.append((float(pp[0]), float(pp[1])))
                except ValueError:
                    raise UsageError(f"basis line {pl}: non-numeric primitive") from None
            pos += count
            shells[current].append((head, tuple(p[0] for p in prims), tuple(p[1] for p in prims)))
        else:
            raise UsageError(f"basis line {lineno}: cannot parse {' '.join(parts)!r}")
    if not shells:
        raise UsageError("basis file defines no elements")
    return shells


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values (keys as in --help, dashes or underscores)")
    common.add_argument("--output", help="directory for CSV and other output files (default: stdout)")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker threads for FFTs (default: ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=0, help="random seed")

    p = argparse.ArgumentParser(prog="tensorgrid", description="Grid-based tensor methods for electronic structure.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="pointwise error of the 1/r kernel tensor")
    k.add_argument("--n", type=_positive_int, help="grid points per axis (required)")
    k.add_argument("--box", type=_positive_float, default=20.0, help="box half-width in bohr")
    k.add_argument("--eps", type=_positive_float, default=1e-6, help="Gaussian-sum tolerance")
    k.add_argument("--rmin", type=_positive_float, default=0.5)
    k.add_argument("--rmax", type=_positive_float, default=None)
    k.add_argument("--probes", type=_positive_int, default=200)

    t = sub.add_parser("tucker-decay", parents=[common], help="Tucker error vs rank for a potential and its lattice sum")
    t.add_argument("--function", choices=["slater", "newton"], default="slater")
    t.add_argument("--n", type=_positive_int, default=64)
    t.add_argument("--rmax", type=_positive_int, default=15)
    t.add_argument("--box", type=_positive_float, default=10.0)
    t.add_argument("--alpha", type=_positive_float, default=1.0, help="Slater exponent")
    t.add_argument("--centers", type=_positive_int, default=8, help="lattice points per axis")
    t.add_argument("--step", type=_positive_int, default=7, help="lattice spacing in grid nodes")

    c = sub.add_parser("conv-bench", parents=[common], help="timing of tensor-product convolution")
    c.add_argument("--nmin", type=_positive_int, default=128)
    c.add_argument("--nmax", type=_positive_int, default=1024)
    c.add_argument("--rank", type=_positive_int, default=16)
    c.add_argument("--repeats", type=_positive_int, default=5)

    h = sub.add_parser("hf", parents=[common], help="Hartree-Fock SCF on a grid")
    h.add_argument("--geometry", help="file with 'Z x y z' lines in bohr (required)")
    h.add_argument("--basis", help="basis file (required)")
    h.add_argument("--n", type=_positive_int, help="grid points per axis (required)")
    h.add_argument("--box", type=_positive_float, help="box half-width in bohr (required)")
    h.add_argument("--charge", type=int, default=0)
    h.add_argument("--max-iter", type=_positive_int, default=60)
    h.add_argument("--tol", type=_positive_float, default=1e-9, help="energy convergence threshold")
    h.add_argument("--mixing", type=_positive_float, default=0.7)
    h.add_argument("--route", choices=["tei", "grid"], default="tei", help="two-electron route")
    h.add_argument("--kernel-eps", type=_positive_float, default=1e-8)
    h.add_argument("--mp2", action="store_true", help="append the MP2 correction")

    e = sub.add_parser("lattice-energy", parents=[common], help="interaction energy of a charge lattice")
    e.add_argument("--L", type=_positive_int, nargs="+", help="lattice size (1 or 3 values, required)")
    e.add_argument("--spacing", type=_positive_float, default=2.0)
    e.add_argument("--Z", type=_positive_float, default=1.0)
    e.add_argument("--n0", type=_positive_int, default=64)
    e.add_argument("--eps", type=_positive_float, default=1e-8, help="kernel tolerance")
    e.add_argument("--oracle", action="store_true", help="also compute the direct pair sum")

    q = sub.add_parser("qtt-rank", parents=[common], help="QTT ranks of function-generated vectors")
    q.add_argument("--function", choices=["exp", "sin", "poly"], default="exp")
    q.add_argument("--L", type=_positive_int, default=12)
    q.add_argument("--eps", type=_positive_float, default=1e-10)
    q.add_argument("--draws", type=_positive_int, default=20)
    return p


REQUIRED = {"kernel": ["n"], "hf": ["geometry", "basis", "n", "box"], "lattice-energy": ["L"]}
_GLOBAL = {"config", "output", "threads", "seed", "command"}


def _apply_config(parser, sub, args, argv):
    """Merge JSON config values; options given on the command line win."""
    with open(args.config, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    known = {a.dest for a in sub._actions} - {"help", "config"}
    values = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown config key {key!r} for command {args.command}")
        values[dest] = value
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _metadata(args, extra=None) -> list:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}
    digest = hashlib.sha256(json.dumps(opts, sort_keys=True, default=str).encode()).hexdigest()[:16]
    lines = [f"# tensorgrid {__version__}", f"# command: {args.command}", f"# config_hash: {digest}"]
    lines += [f"# {k}: {v if isinstance(v, (str, list)) or v is None else fmt(v)}" for k, v in opts.items()
              if k != "command"]
    lines += [f"# {k}: {fmt(v)}" for k, v in (extra or {}).items()]
    return lines


def _emit(args, name, header, rows, extra=None, trailer=None):
    text = "\n".join(_metadata(args, extra) + [",".join(header)]
                     + [",".join(fmt(v) for v in row) for row in rows]
                     + [f"# {k}: {fmt(v)}" for k, v in (trailer or {}).items()]) + "\n"
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        with open(os.path.join(args.output, f"{name}.csv"), "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_kernel(args):
    from .experiments import kernel_error_scan

    rows, rank = kernel_error_scan(args.n, args.box, args.eps, args.rmin, args.rmax, args.probes, args.seed)
    _emit(args, "kernel", ["r", "exact", "approx", "rel_err"], rows,
          extra={"rank": rank, "max_rel_err": rows[:, 3].max()})
    return EXIT_OK


def cmd_tucker_decay(args):
    from .experiments import tucker_decay_curves

    r, single, lat = tucker_decay_curves(args.function, args.n, args.rmax, args.box, n_centers=args.centers,
                                         step=args.step, **({"alpha": args.alpha} if args.function == "slater" else {}))
    mono = bool(np.all(np.diff(single) < 0) and np.all(np.diff(lat) < 0))
    ratio = float(np.max(np.maximum(single / lat, lat / single)))
    _emit(args, "tucker_decay", ["r", "single", "lattice"], zip(r, single, lat),
          extra={"monotone": mono, "max_ratio": ratio})
    return EXIT_OK


def cmd_conv_bench(args):
    from .experiments import conv_bench

    rows = conv_bench(args.nmin, args.nmax, args.rank, args.seed, args.repeats)
    ratios = [rows[i + 1][1] / rows[i][1] for i in range(len(rows) - 1)]
    _emit(args, "conv_bench", ["n", "seconds", "rank", "dense_fft_seconds"], rows,
          extra={"max_doubling_ratio": max(ratios) if ratios else math.nan})
    return EXIT_OK


def cmd_hf(args):
    from .hartree_fock import SCFConfig, reference_kernel, scf_solve
    from .mp2 import MOSpace, mo_transform_cholesky, mp2_energy
    from .tei import factorize_tei, tei_cholesky

    charges, centers = parse_geometry(_read(args.geometry))
    shells = parse_basis(_read(args.basis))
    mol = Molecule(charges, centers, int(round(sum(charges))) - args.charge)
    bs = build_basis(mol, shells, make_grid(args.box, args.n))
    cfg = SCFConfig(max_iterations=args.max_iter, energy_tol=args.tol, mixing=args.mixing,
                    two_electron=args.route, kernel_eps=args.kernel_eps)
    t0 = time.perf_counter()
    st = scf_solve(mol, bs, cfg)
    trailer = {"converged": st.converged, "iterations": st.iterations, "e_hf": st.energy,
               "e_nuclear": mol.nuclear_repulsion(), "seconds": time.perf_counter() - t0}
    if args.mp2:
        if mol.n_electrons < 2 or mol.n_orb >= bs.size:
            raise UsageError("MP2 needs a closed shell with at least one virtual orbital")
        L = st.cholesky
        if L is None:
            L = tei_cholesky(factorize_tei(bs, reference_kernel(bs, args.kernel_eps)), cfg.eps_chol)
        mos = MOSpace(st.orbital_energies, st.C, mol.n_orb)
        e2 = mp2_energy(mo_transform_cholesky(L, st.C, mos), mos)
        trailer.update({"e_mp2": e2, "e_total": st.energy + e2})
    rows = zip(range(1, len(st.energies) + 1), st.energies, st.residuals, st.orthonormality)
    _emit(args, "hf", ["iteration", "energy", "commutator_norm", "orthonormality_error"], rows,
          extra={"n_basis": bs.size, "n_electrons": mol.n_electrons}, trailer=trailer)
    if args.output:
        np.savez(os.path.join(args.output, "hf_matrices.npz"), S=st.S, H=st.H, C=st.C, D=st.D,
                 orbital_energies=st.orbital_energies)
    return EXIT_OK if st.converged else EXIT_NUMERICAL


def cmd_lattice_energy(args):
    from .lattice import (LatticeSpec, direct_energy_oracle, displacement_energy, lattice_interaction_energy,
                          lattice_kernel, PAIR_GUARD)

    if len(args.L) not in (1, 3):
        raise UsageError("--L takes one or three values")
    counts = tuple(args.L) * 3 if len(args.L) == 1 else tuple(args.L)
    spec = LatticeSpec(counts, args.spacing, args.Z, args.n0)
    t0 = time.perf_counter()
    ref = lattice_kernel(spec, args.eps)
    e_tensor = lattice_interaction_energy(spec, ref)
    t_tensor = time.perf_counter() - t0
    header = ["L1", "L2", "L3", "n0", "rank", "energy_tensor", "seconds_tensor"]
    row = [*counts, args.n0, ref.rank, e_tensor, t_tensor]
    if args.oracle:
        n = spec.n_nodes
        t0 = time.perf_counter()
        if n * (n - 1) <= PAIR_GUARD:
            e_direct, method = direct_energy_oracle(spec), "pairs"
        else:
            e_direct, method = displacement_energy(spec), "displacements"
        header += ["energy_direct", "seconds_direct", "rel_dev", "oracle"]
        row += [e_direct, time.perf_counter() - t0, abs(e_tensor - e_direct) / abs(e_direct), method]
    _emit(args, "lattice_energy", header, [row])
    return EXIT_OK


def cmd_qtt_rank(args):
    from .experiments import qtt_rank_table

    table = qtt_rank_table(args.function, args.L, args.eps, args.draws, args.seed)
    rows = [(i, " ".join(str(r) for r in ranks), max(ranks)) for i, ranks in enumerate(table)]
    _emit(args, "qtt_rank", ["draw", "ranks", "max_rank"], rows,
          extra={"max_rank": max(r[2] for r in rows)})
    return EXIT_OK


COMMANDS = {"kernel": cmd_kernel, "tucker-decay": cmd_tucker_decay, "conv-bench": cmd_conv_bench,
            "hf": cmd_hf, "lattice-energy": cmd_lattice_energy, "qtt-rank": cmd_qtt_rank}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        if args.config:
            args = _apply_config(parser, sub, args, argv)
        missing = [d for d in REQUIRED.get(args.command, []) if getattr(args, d) is None]
        if missing:
            raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
        threads = args.threads or int(os.environ.get(THREADS_ENV, "1"))
        with scipy.fft.set_workers(threads) if threads > 1 else nullcontext():
            return COMMANDS[args.command](args)
    except (UsageError, InvalidArgumentError, OutOfDomainError, SnapError, OSError) as exc:
        print(f"tensorgrid {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, SizeGuardError, np.linalg.LinAlgError) as exc:
        print(f"tensorgrid {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
