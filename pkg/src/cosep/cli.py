"""Command-line front end.

Every command writes a JSON run manifest next to its outputs with the
parameters, seeds, library versions and output checksums. Exit codes:
0 success, 2 usage, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from . import io as cio
from .basis import build_dct2_basis
from .coherence import DEFAULT_THETA, FLOOR, coherence_report, shift_coherence_table
from .errors import (
    DegenerateColumnError,
    DimensionError,
    InvalidParameterError,
    OptimizationError,
    ParseError,
    SolverError,
    ValidationError,
)
from .evaluation import MASK_SOURCES, SweepConfig, run_sweep, spread, write_shift_table
from .optimizer import DesignConfig, design
from .recovery import SolverConfig, demosaic, recover_frames
from .sensing import FrameStack, Snapshot, acquire, tile

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("COSEP_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"invalid thread count {value!r}") from None
    if n < 1:
        raise UsageError(f"thread count must be >= 1, got {n}")
    return n


def _int_range(text: str) -> tuple:
    """``"2:6"`` (inclusive) or ``"2,3,5"``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return tuple(range(lo, hi + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer range {text!r}") from None


def _float_range(text: str) -> tuple:
    """``"0.05:0.5:0.05"`` (inclusive) or ``"0.1,0.2"``."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return tuple(round(lo + i * step, 10) for i in range(count))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float range {text!r}") from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(args, outputs, extra=None):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    manifest = {
        "command": args.command,
        "parameters": params,
        "versions": {
            "cosep": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": _kernels.BACKEND,
        },
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    if extra:
        manifest["results"] = extra
    path = args.manifest or _default_manifest(args, outputs)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _default_manifest(args, outputs):
    if getattr(args, "out_prefix", None):
        return f"{args.out_prefix}manifest.json"
    if outputs:
        return f"{outputs[0]}.manifest.json"
    return f"{args.command}.manifest.json"


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(epsilon=args.eps, rel_epsilon=args.rel_eps, max_iters=args.max_iters,
                        stride=args.stride)


def _load_snapshot(args, mask) -> Snapshot:
    snap = cio.read_snapshot(args.snap)
    return Snapshot(snap.y, {"m": mask.side, "T": mask.frames})


def cmd_design(args):
    cfg = DesignConfig(m=args.m, T=args.T, theta=args.theta, circular=args.circular,
                       starts=args.starts, max_iters=args.iters, seed=args.seed, floor=args.floor)
    D = build_dct2_basis(args.m)
    mask, trace = design(cfg, D, threads=args.threads)
    cio.write_mask(mask, args.out)
    outputs = [args.out]
    if args.trace:
        trace.write_csv(args.trace, all_starts=args.trace_all)
        outputs.append(args.trace)
    results = {"exact_mu": trace.exact_mu, "soft_coherence": trace.final[trace.best_start],
               "best_start": trace.best_start, "mask_digest": mask.digest()}
    print(f"exact coherence {trace.exact_mu:.6f} (start {trace.best_start})")
    return outputs, results


def cmd_coherence(args):
    mask = cio.read_mask(args.code)
    rep = coherence_report(mask, build_dct2_basis(mask.side), args.theta, circular=args.circular)
    results = {"exact_mu": rep.exact_mu, "argmax_pair": list(rep.argmax_pair),
               "soft_coherence": rep.soft_c, "theta": rep.theta, "terms": rep.n_terms}
    if rep.per_shift is not None:
        results["max_over_shifts"] = float(rep.per_shift.max())
        results["shift_iqr"] = spread(rep.per_shift)
    print(json.dumps(results, indent=2))
    outputs = []
    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
        outputs.append(args.out)
    return outputs, results


def cmd_sense(args):
    mask = cio.read_mask(args.code)
    frames = cio.read_frames(args.frames)
    if frames.T != mask.frames:
        raise UsageError(f"mask has {mask.frames} frames but {frames.T} were given")
    N1, N2 = frames.shape
    snap = acquire(frames, tile(mask, N1, N2), mask, quantize_bits=args.quantize_bits)
    cio.write_snapshot(snap, args.out)
    outputs = [args.out]
    if args.preview:
        cio.write_snapshot_preview(snap, mask.frames, args.preview)
        outputs.append(args.preview)
    return outputs, {"shape": [N1, N2]}


def _report_results(report):
    results = report.as_dict()
    if report.rrmse is not None:
        print(f"RRMSE {report.rrmse:.6g}")
    if report.failures:
        print(f"{report.failures} of {report.patches} patch solves failed", file=sys.stderr)
    return results


def cmd_recover(args):
    mask = cio.read_mask(args.code)
    snap = _load_snapshot(args, mask)
    truth = cio.read_frames(args.truth) if args.truth else None
    frames, report = recover_frames(snap, mask, build_dct2_basis(mask.side), _solver_cfg(args),
                                    threads=args.threads, truth=truth)
    outputs = []
    for t, frame in enumerate(frames.frames):
        path = f"{args.out_prefix}{t}.pgm"
        cio.write_image(frame, path)
        outputs.append(path)
        if args.float:
            mpath = f"{args.out_prefix}{t}.txt"
            cio.write_matrix(frame, mpath)
            outputs.append(mpath)
    return outputs, _report_results(report)


def cmd_demosaic(args):
    mask = cio.read_mask(args.code)
    snap = _load_snapshot(args, mask)
    truth = None
    if args.truth:
        img = cio.read_image(args.truth)
        if img.ndim != 3:
            raise UsageError("--truth for demosaic must be a PPM image")
        truth = FrameStack(img)
    planes, report = demosaic(snap, mask, build_dct2_basis(mask.side), _solver_cfg(args),
                              threads=args.threads, truth=truth)
    cio.write_image(planes.frames, args.out)
    return [args.out], _report_results(report)


def cmd_sweep(args):
    cfg = SweepConfig(m=args.m, T_range=args.T_range, s_range=args.s_range, trials=args.trials,
                      seed=args.seed, mask_source=args.mask_source, theta=args.theta,
                      starts=args.starts, max_iters=args.iters,
                      solver=SolverConfig(epsilon=args.eps, rel_epsilon=args.rel_eps))
    emap = run_sweep(cfg, build_dct2_basis(args.m), threads=args.threads)
    emap.write_csv(args.out)
    return [args.out], {"failures": int(emap.failures.sum()), **emap.meta}


def cmd_shift_hist(args):
    mask = cio.read_mask(args.code)
    table = shift_coherence_table(mask, build_dct2_basis(mask.side))
    write_shift_table(table, args.out)
    results = {"max": float(table.max()), "median": float(np.median(table)),
               "iqr": spread(table)}
    print(f"max {results['max']:.6f}  median {results['median']:.6f}  IQR {results['iqr']:.6f}")
    return [args.out], results


def _solver_flags(p):
    p.add_argument("--eps", type=float, default=None,
                   help="absolute residual bound (default: --rel-eps times ||y|| per patch)")
    p.add_argument("--rel-eps", type=float, default=SolverConfig.rel_epsilon)
    p.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cosep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--threads", default=None,
                       help="worker threads (default: $COSEP_THREADS or 1)")
        p.add_argument("--manifest", default=None, help="run manifest path")
        return p

    p = add("design", cmd_design, "optimize a code mask")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--floor", type=float, default=FLOOR)
    p.add_argument("--circular", action="store_true", help="optimize over all circular shifts")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="CSV of the descent history")
    p.add_argument("--trace-all", action="store_true", help="trace every start")

    p = add("coherence", cmd_coherence, "report the coherence of a mask")
    p.add_argument("--code", required=True)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--circular", action="store_true")
    p.add_argument("--out", default=None, help="JSON report")

    p = add("sense", cmd_sense, "simulate a coded snapshot")
    p.add_argument("--code", required=True)
    p.add_argument("--frames", nargs="+", required=True, help="one PGM per frame")
    p.add_argument("--out", required=True)
    p.add_argument("--quantize-bits", type=int, default=None)
    p.add_argument("--preview", default=None, help="PGM view of the snapshot")

    p = add("recover", cmd_recover, "recover frames from a snapshot")
    p.add_argument("--code", required=True)
    p.add_argument("--snap", required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--truth", nargs="+", default=None, help="ground-truth PGM frames")
    p.add_argument("--float", action="store_true", help="also write unquantized matrices")
    _solver_flags(p)

    p = add("demosaic", cmd_demosaic, "recover R, G, B from a panchromatic snapshot")
    p.add_argument("--code", required=True)
    p.add_argument("--snap", required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="ground-truth PPM")
    _solver_flags(p)

    p = add("sweep", cmd_sweep, "error map over sparsity and frame count")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--T-range", type=_int_range, default=SweepConfig.T_range)
    p.add_argument("--s-range", type=_float_range, default=SweepConfig.s_range)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--mask-source", choices=MASK_SOURCES, default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--rel-eps", type=float, default=SolverConfig.rel_epsilon)
    p.add_argument("--out", required=True)

    p = add("shift-hist", cmd_shift_hist, "coherence of every circular shift of a mask")
    p.add_argument("--code", required=True)
    p.add_argument("--out", required=True)
    return parser


def argv_from_manifest(manifest: dict, threads=None) -> list:
    """Command line that reproduces the run recorded in ``manifest``."""
    params = dict(manifest["parameters"])
    command = params.pop("command")
    if threads is not None:
        params["threads"] = threads
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    argv = [command]
    for action in sub._actions:
        if not action.option_strings or action.dest not in params:
            continue
        value = params[action.dest]
        flag = action.option_strings[-1]
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, (list, tuple)):
            if action.nargs in ("+", "*"):
                argv += [flag, *map(str, value)]
            else:
                argv += [flag, ",".join(map(repr, value))]
        else:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.threads = _threads(args.threads)
        outputs, results = args.func(args)
        _write_manifest(args, outputs, results)
    except (UsageError, InvalidParameterError, DimensionError) as err:
        print(f"cosep {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OptimizationError, SolverError, DegenerateColumnError) as err:
        print(f"cosep {args.command}: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ParseError, ValidationError) as err:
        print(f"cosep {args.command}: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK
