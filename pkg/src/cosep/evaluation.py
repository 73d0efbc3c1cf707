"""Error maps over sparsity and frame count, and coherence statistics."""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import Dictionary, build_dct2_basis
from .coherence import CodeMask, exact_coherence
from .errors import DimensionError, InvalidParameterError, SolverError
from .optimizer import DesignConfig, design, random_mask
from .recovery import Factorization, SolverConfig, effective_matrix, _synthesize, bpdn_solve
from .sensing import FrameStack

MASK_SOURCES = ("random", "designed-plain", "designed-circular")


def rrmse(truth, estimate) -> float:
    """Relative root mean square error ``||estimate - truth|| / ||truth||``."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise DimensionError(f"shape mismatch: {truth.shape} vs {estimate.shape}")
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise InvalidParameterError("RRMSE is undefined for an all-zero reference")
    return float(np.linalg.norm(estimate - truth) / norm)


def gen_sparse_stack(m: int, T: int, s: float, seed=0, dictionary: Dictionary | None = None):
    """``T`` random ``m x m`` frames, each with ``round(s m^2)`` standard-normal
    DCT coefficients at uniformly random positions.

    Returns ``(FrameStack, coefficients)`` with coefficients of shape (T, m^2).
    """
    if not 0 < s <= 1:
        raise InvalidParameterError(f"sparsity fraction must be in (0, 1], got {s}")
    dictionary = dictionary or build_dct2_basis(m)
    n = m * m
    k = max(1, int(round(s * n)))
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((T, n))
    for t in range(T):
        support = rng.choice(n, size=k, replace=False)
        coeffs[t, support] = rng.standard_normal(k)
    frames = (coeffs @ dictionary.atoms.T).reshape(T, m, m)
    return FrameStack(frames), coeffs


@dataclass(frozen=True)
class SweepConfig:
    m: int = 8
    T_range: tuple = (2, 3, 4, 5, 6)
    s_range: tuple = tuple(round(0.05 * i, 2) for i in range(1, 11))
    trials: int = 20
    seed: int = 0
    mask_source: str = "random"
    theta: float = 1000.0
    starts: int = 20
    max_iters: int = 2000
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")
        if any(not 0 < s <= 1 for s in self.s_range):
            raise InvalidParameterError("sparsity fractions must lie in (0, 1]")
        if any(t < 1 for t in self.T_range):
            raise InvalidParameterError("frame counts must be >= 1")
        if self.mask_source not in MASK_SOURCES:
            raise InvalidParameterError(
                f"mask source must be one of {MASK_SOURCES}, got {self.mask_source!r}"
            )

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ErrorMap:
    """Mean RRMSE per ``(T, s)`` cell; ``mean[i, j]`` is ``T_values[i]``, ``s_values[j]``."""

    s_values: tuple
    T_values: tuple
    mean: np.ndarray
    trials: np.ndarray
    failures: np.ndarray
    meta: dict = field(default_factory=dict)

    def cell(self, T, s) -> float:
        return float(self.mean[self.T_values.index(T), self.s_values.index(s)])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "T", "mean_rrmse", "trials", "failures"])
            for i, T in enumerate(self.T_values):
                for j, s in enumerate(self.s_values):
                    w.writerow([repr(float(s)), T, repr(float(self.mean[i, j])),
                                int(self.trials[i, j]), int(self.failures[i, j])])

    @classmethod
    def read_csv(cls, path) -> "ErrorMap":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        s_values = tuple(sorted({float(r["s"]) for r in rows}))
        T_values = tuple(sorted({int(r["T"]) for r in rows}))
        shape = (len(T_values), len(s_values))
        mean = np.full(shape, np.nan)
        trials = np.zeros(shape, dtype=int)
        failures = np.zeros(shape, dtype=int)
        for r in rows:
            i, j = T_values.index(int(r["T"])), s_values.index(float(r["s"]))
            mean[i, j] = float(r["mean_rrmse"])
            trials[i, j] = int(r["trials"])
            failures[i, j] = int(r["failures"])
        return cls(s_values, T_values, mean, trials, failures)


def diff_map(a: ErrorMap, b: ErrorMap) -> ErrorMap:
    """Cellwise ``a - b``; entries may be negative."""
    if tuple(a.s_values) != tuple(b.s_values) or tuple(a.T_values) != tuple(b.T_values):
        raise DimensionError("error maps are on different grids")
    return ErrorMap(a.s_values, a.T_values, a.mean - b.mean,
                    np.minimum(a.trials, b.trials), a.failures + b.failures,
                    meta={"difference": [a.meta.get("config"), b.meta.get("config")]})


def sweep_masks(cfg: SweepConfig, dictionary: Dictionary, threads: int = 1) -> dict:
    """Designed mask for every ``T`` of the sweep (empty for random sources)."""
    if cfg.mask_source == "random":
        return {}
    circular = cfg.mask_source == "designed-circular"
    out = {}
    for T in cfg.T_range:
        dcfg = DesignConfig(m=cfg.m, T=T, theta=cfg.theta, circular=circular,
                            starts=cfg.starts, max_iters=cfg.max_iters, seed=cfg.seed)
        out[T], _ = design(dcfg, dictionary, threads=threads)
    return out


def _trial_seed(cfg, T, j, trial, stream):
    return np.random.SeedSequence([cfg.seed, T, j, trial, stream])


def run_sweep(cfg: SweepConfig, dictionary: Dictionary | None = None,
              masks: dict | None = None, threads: int = 1) -> ErrorMap:
    """Average recovery RRMSE of random sparse stacks over the (T, s) grid.

    Random sources draw a fresh mask per trial; designed sources use one mask
    per ``T`` (designed here unless supplied in ``masks``). Solver failures
    are counted per cell and their best feasible point is still scored.
    """
    dictionary = dictionary or build_dct2_basis(cfg.m)
    if masks is None:
        masks = sweep_masks(cfg, dictionary, threads)
    if cfg.mask_source != "random":
        missing = [T for T in cfg.T_range if T not in masks]
        if missing:
            raise InvalidParameterError(f"no mask supplied for T in {missing}")

    def run_cell(cell):
        T, j = cell
        s = cfg.s_range[j]
        errs, fails = [], 0
        fixed = None
        if cfg.mask_source != "random":
            fixed = Factorization(effective_matrix(masks[T].values, dictionary))
        for trial in range(cfg.trials):
            stack, _ = gen_sparse_stack(cfg.m, T, s, _trial_seed(cfg, T, j, trial, 0), dictionary)
            if fixed is None:
                mask = random_mask(cfg.m, T, _trial_seed(cfg, T, j, trial, 1))
                fac = Factorization(effective_matrix(mask.values, dictionary))
            else:
                fac = fixed
            y = fac.A @ np.concatenate([dictionary.atoms.T @ f.ravel() for f in stack.frames])
            try:
                alpha = bpdn_solve(fac.A, y, cfg.solver, fac)
            except SolverError as err:
                alpha = err.x
                fails += 1
            errs.append(rrmse(stack.frames, _synthesize(alpha, dictionary, T)))
        return float(np.mean(errs)), len(errs), fails

    cells = [(T, j) for T in cfg.T_range for j in range(len(cfg.s_range))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    shape = (len(cfg.T_range), len(cfg.s_range))
    mean = np.array([r[0] for r in results]).reshape(shape)
    trials = np.array([r[1] for r in results]).reshape(shape)
    failures = np.array([r[2] for r in results]).reshape(shape)
    meta = {"config": cfg.digest(), "mask_source": cfg.mask_source}
    if masks:
        meta["masks"] = {str(T): masks[T].digest() for T in sorted(masks)}
    return ErrorMap(tuple(cfg.s_range), tuple(cfg.T_range), mean, trials, failures, meta)


def random_coherences(m: int, T: int, count: int, seed=0, dictionary=None) -> np.ndarray:
    """Exact coherence of ``count`` uniform random masks."""
    dictionary = dictionary or build_dct2_basis(m)
    return np.array([
        exact_coherence(random_mask(m, T, np.random.SeedSequence([seed, i])), dictionary).exact_mu
        for i in range(count)
    ])


def write_shift_table(table, path):
    """CSV of per-shift coherences with header ``dr,dc,coherence``."""
    table = np.asarray(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dr", "dc", "coherence"])
        for dr in range(table.shape[0]):
            for dc in range(table.shape[1]):
                w.writerow([dr, dc, repr(float(table[dr, dc]))])


def spread(values) -> float:
    """Interquartile range."""
    q1, q3 = np.percentile(np.asarray(values).ravel(), [25, 75])
    return float(q3 - q1)
