"""Coded-snapshot frame separation with coherence-optimized codes."""

from importlib.metadata import PackageNotFoundError, version as _version

from ._kernels import BACKEND
from .basis import Dictionary, analyze, build_dct2_basis, synthesize
from .coherence import (
    CodeMask,
    CoherenceReport,
    Shift,
    circular_soft_coherence,
    circular_soft_coherence_grad,
    coherence_report,
    exact_coherence,
    gram_entry,
    shift_coherence_table,
    shift_mask,
    soft_coherence,
    soft_coherence_grad,
)
from .errors import (
    CosepError,
    DegenerateColumnError,
    DimensionError,
    InvalidParameterError,
    OptimizationError,
    ParseError,
    SolverError,
    ValidationError,
)
from .evaluation import ErrorMap, SweepConfig, diff_map, gen_sparse_stack, rrmse, run_sweep
from .optimizer import DesignConfig, DesignTrace, design, random_mask
from .recovery import SolverConfig, bpdn_solve, demosaic, recover_frames, recover_patch
from .sensing import FrameStack, Snapshot, TiledCode, acquire, patch_code, tile

try:
    __version__ = _version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

__all__ = [
    "BACKEND", "CodeMask", "CoherenceReport", "CosepError", "DegenerateColumnError",
    "DesignConfig", "DesignTrace", "Dictionary", "DimensionError", "ErrorMap",
    "FrameStack", "InvalidParameterError", "OptimizationError", "ParseError", "Shift",
    "Snapshot", "SolverConfig", "SolverError", "SweepConfig", "TiledCode",
    "ValidationError", "acquire", "analyze", "bpdn_solve", "build_dct2_basis",
    "circular_soft_coherence", "circular_soft_coherence_grad", "coherence_report",
    "demosaic", "design", "diff_map", "exact_coherence", "gen_sparse_stack",
    "gram_entry", "patch_code", "random_mask", "recover_frames", "recover_patch",
    "rrmse", "run_sweep", "shift_coherence_table", "shift_mask", "soft_coherence",
    "soft_coherence_grad", "synthesize", "tile",
]
