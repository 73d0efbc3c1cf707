"""Multi-start projected gradient descent on soft coherence."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import Dictionary
from .coherence import DEFAULT_THETA, FLOOR, CodeMask, evaluate, exact_coherence
from .errors import DimensionError, InvalidParameterError, OptimizationError

MIN_STEP = 1e-12


@dataclass(frozen=True)
class DesignConfig:
    m: int = 8
    T: int = 2
    theta: float = DEFAULT_THETA
    circular: bool = False
    starts: int = 20
    max_iters: int = 2000
    step0: float = 0.1
    shrink: float = 0.5
    grow: float = 1.2
    tol: float = 1e-7
    window: int = 20
    seed: int = 0
    floor: float = FLOOR

    def __post_init__(self):
        if self.m < 1 or self.T < 1:
            raise InvalidParameterError(f"need m >= 1 and T >= 1, got m={self.m}, T={self.T}")
        if self.starts < 1:
            raise InvalidParameterError(f"starts must be >= 1, got {self.starts}")
        if not 0.0 < self.shrink < 1.0 < self.grow:
            raise InvalidParameterError("line search needs 0 < shrink < 1 < grow")
        if not self.tol > 0 or not self.theta > 0 or not self.step0 > 0:
            raise InvalidParameterError("tol, theta and step0 must be positive")
        if self.max_iters < 0 or self.window < 1:
            raise InvalidParameterError("max_iters must be >= 0 and window >= 1")


@dataclass
class DesignTrace:
    """Descent history. ``history[i]`` holds the soft coherence of start ``i``
    after each accepted step (entry 0 is the initialization)."""

    history: list = field(default_factory=list)
    final: list = field(default_factory=list)
    best_start: int = -1
    exact_mu: float = float("nan")

    def write_csv(self, path, all_starts=False):
        """Write ``iteration,soft_coherence`` rows for the winning start, or
        ``start,iteration,soft_coherence`` for every start."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if all_starts:
                w.writerow(["start", "iteration", "soft_coherence"])
                for s, hist in enumerate(self.history):
                    for i, c in enumerate(hist):
                        w.writerow([s, i, repr(float(c))])
            else:
                w.writerow(["iteration", "soft_coherence"])
                for i, c in enumerate(self.history[self.best_start]):
                    w.writerow([i, repr(float(c))])


def start_seed(seed: int, start: int) -> np.random.SeedSequence:
    """Per-start seed; identical for serial and parallel runs."""
    return np.random.SeedSequence([int(seed), int(start)])


def random_mask(m: int, T: int, seed=0, floor: float = FLOOR) -> CodeMask:
    """Mask with i.i.d. entries uniform on ``[floor, 1]``."""
    if m < 1 or T < 1:
        raise InvalidParameterError(f"need m >= 1 and T >= 1, got m={m}, T={T}")
    rng = np.random.default_rng(seed)
    return CodeMask(rng.uniform(floor, 1.0, size=(T, m, m)), floor=floor)


def descend(values, dictionary, cfg: DesignConfig):
    """Projected descent from one initialization.

    Returns ``(values, history, progressed)``; ``progressed`` is False when
    not even the first step could be accepted.
    """
    x = np.array(values, dtype=float)
    cur = evaluate(x, dictionary, cfg.theta, cfg.circular)
    history = [cur.value]
    step = cfg.step0
    progressed = False
    for it in range(cfg.max_iters):
        grad = cur.gradient()
        accepted = None
        while step >= MIN_STEP:
            trial = np.clip(x - step * grad, cfg.floor, 1.0)
            cand = evaluate(trial, dictionary, cfg.theta, cfg.circular)
            if cand.value < cur.value:
                accepted = trial, cand
                step *= cfg.grow
                break
            step *= cfg.shrink
        if accepted is None:
            break
        progressed = True
        x, cur = accepted
        history.append(cur.value)
        if len(history) > cfg.window:
            old = history[-1 - cfg.window]
            if old - cur.value < cfg.tol * abs(old):
                break
    return x, history, progressed


def design(cfg: DesignConfig, dictionary: Dictionary, threads: int = 1):
    """Run ``cfg.starts`` descents and keep the mask with least soft coherence.

    Ties go to the lowest start index; the result does not depend on
    ``threads``.
    """
    if dictionary.side != cfg.m:
        raise DimensionError(f"dictionary side {dictionary.side} != m={cfg.m}")

    def run(start):
        init = random_mask(cfg.m, cfg.T, start_seed(cfg.seed, start), cfg.floor)
        return descend(init.values, dictionary, cfg)

    if threads > 1 and cfg.starts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(cfg.starts)))
    else:
        results = [run(s) for s in range(cfg.starts)]

    if not any(r[2] for r in results) and cfg.max_iters > 0:
        raise OptimizationError("step underflow on the first iteration of every start")

    trace = DesignTrace(history=[r[1] for r in results], final=[r[1][-1] for r in results])
    trace.best_start = int(np.argmin(trace.final))
    mask = CodeMask(results[trace.best_start][0], floor=cfg.floor)
    trace.exact_mu = exact_coherence(mask, dictionary).exact_mu
    return mask, trace
