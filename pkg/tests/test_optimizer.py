import numpy as np
import pytest
from hypothesis import given, strategies as st

from cosep.basis import build_dct2_basis
from cosep.coherence import FLOOR, CodeMask, exact_coherence, soft_coherence
from cosep.errors import DimensionError, InvalidParameterError, OptimizationError
from cosep.optimizer import DesignConfig, descend, design, random_mask, start_seed


def small_cfg(**kw):
    base = dict(m=4, T=2, starts=3, max_iters=60, seed=0)
    base.update(kw)
    return DesignConfig(**base)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 4))
def test_random_mask_in_range(seed, m, T):
    mask = random_mask(m, T, seed)
    assert mask.values.shape == (T, m, m)
    assert mask.values.min() >= FLOOR and mask.values.max() <= 1.0


def test_random_mask_deterministic():
    assert random_mask(8, 2, 7) == random_mask(8, 2, 7)
    assert random_mask(8, 2, 7) != random_mask(8, 2, 8)


def test_start_seeds_differ():
    a = random_mask(4, 2, start_seed(0, 0))
    b = random_mask(4, 2, start_seed(0, 1))
    assert a != b


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        DesignConfig(starts=0)
    with pytest.raises(InvalidParameterError):
        DesignConfig(shrink=1.5)
    with pytest.raises(InvalidParameterError):
        DesignConfig(theta=0)


def test_trace_monotone_and_floor(dct4):
    mask, trace = design(small_cfg(), dct4)
    for hist in trace.history:
        assert all(b < a for a, b in zip(hist, hist[1:]))
    assert mask.values.min() >= FLOOR and mask.values.max() <= 1.0
    assert trace.final[trace.best_start] == min(trace.final)


def test_design_improves_on_start(dct4):
    cfg = small_cfg(starts=1, max_iters=100)
    init = random_mask(4, 2, start_seed(cfg.seed, 0))
    mask, trace = design(cfg, dct4)
    assert soft_coherence(mask, dct4) < soft_coherence(init, dct4)
    assert trace.history[0][0] == pytest.approx(soft_coherence(init, dct4), rel=1e-12)
    assert trace.exact_mu == exact_coherence(mask, dct4).exact_mu


def test_circular_design_runs(dct4):
    mask, trace = design(small_cfg(circular=True, starts=2, max_iters=20), dct4)
    assert all(h[-1] < h[0] for h in trace.history)


def test_deterministic_across_threads(dct4):
    cfg = small_cfg(starts=4, max_iters=30, seed=3)
    a, ta = design(cfg, dct4, threads=1)
    b, tb = design(cfg, dct4, threads=3)
    assert a == b
    assert ta.history == tb.history


def test_side_mismatch(dct8):
    with pytest.raises(DimensionError):
        design(small_cfg(), dct8)


def test_step_underflow_raises(dct4):
    # a step too small to change any entry can never be accepted
    cfg = small_cfg(step0=1e-13, starts=2)
    with pytest.raises(OptimizationError):
        design(cfg, dct4)


def test_descend_stops_at_tolerance(dct4):
    cfg = small_cfg(max_iters=5000, tol=1e-2, window=5)
    _, hist, progressed = descend(random_mask(4, 2, 1).values, dct4, cfg)
    assert progressed and len(hist) < 5001


def test_trace_csv(tmp_path, dct4):
    _, trace = design(small_cfg(starts=2, max_iters=10), dct4)
    p = tmp_path / "t.csv"
    trace.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "iteration,soft_coherence"
    assert len(lines) == len(trace.history[trace.best_start]) + 1
    trace.write_csv(p, all_starts=True)
    lines = p.read_text().splitlines()
    assert lines[0] == "start,iteration,soft_coherence"
    assert len(lines) == sum(len(h) for h in trace.history) + 1


def test_designed_well_below_random(dct8):
    mask, trace = design(DesignConfig(m=8, T=2, starts=2, max_iters=300, seed=1), dct8)
    random_median = np.median([exact_coherence(random_mask(8, 2, [7, i]), dct8).exact_mu
                               for i in range(25)])
    assert trace.exact_mu <= random_median - 0.3
