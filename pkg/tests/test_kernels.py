"""The compiled kernels agree with the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cosep import _kernels
from cosep._kernels import _pykernels
from cosep.basis import build_dct2_basis
from cosep.coherence import _gram_blocks, _rolled, _tables, _all_shifts, Shift
from cosep.optimizer import random_mask
from cosep.recovery import Factorization, effective_matrix

ck = pytest.importorskip("cosep._kernels._ckernels")


def test_env_forces_fallback():
    code = "import cosep; print(cosep.BACKEND)"
    env = dict(os.environ, COSEP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def blocks(m, T, circular, seed=0):
    D = build_dct2_basis(m)
    mask = random_mask(m, T, seed)
    shifts = _all_shifts(m) if circular else [Shift(0, 0)]
    return _gram_blocks(_rolled(mask.values, shifts), _tables(D))


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("m,T,circular", [(4, 2, False), (4, 3, True), (8, 2, False)])
@pytest.mark.parametrize("theta", [1.0, 1000.0])
def test_soft_max_value(m, T, circular, theta):
    gram, inv, mu, nu = blocks(m, T, circular)
    a = ck.soft_max_value(gram, inv, mu, nu, theta)
    b = _pykernels.soft_max_value(gram, inv, mu, nu, theta)
    assert a == pytest.approx(b, rel=1e-13)


@pytest.mark.parametrize("m,T,circular", [(4, 2, False), (4, 3, True)])
def test_grad_terms(m, T, circular):
    gram, inv, mu, nu = blocks(m, T, circular, seed=1)
    ra = ck.soft_max_grad_terms(gram, inv, mu, nu, 1000.0)
    rb = _pykernels.soft_max_grad_terms(gram, inv, mu, nu, 1000.0)
    assert ra[0] == pytest.approx(rb[0], rel=1e-13)
    active = np.asarray(rb[4])
    assert np.array_equal(np.asarray(ra[4]), active)
    for x, y in zip(ra[1:4], rb[1:4]):
        x, y = np.asarray(x), np.asarray(y)
        scale = np.max(np.abs(y)) or 1.0
        assert np.max(np.abs(x[active] - y[active])) <= 1e-12 * scale


def test_max_abs_term():
    gram, inv, mu, nu = blocks(4, 3, True, seed=2)
    assert ck.max_abs_term(gram, inv, mu, nu) == _pykernels.max_abs_term(gram, inv, mu, nu)


def test_admm_iterations_match():
    D = build_dct2_basis(4)
    A = effective_matrix(random_mask(4, 2, 3).values, D)
    fac = Factorization(A)
    rng = np.random.default_rng(0)
    y = A @ np.where(rng.random(32) < 0.1, rng.standard_normal(32), 0.0)
    states = []
    for impl in (ck, _pykernels):
        st = [np.zeros(32), np.zeros(32), np.zeros(16), np.zeros(32), np.zeros(16)]
        res = impl.admm_iterations(fac.A, fac.R, y, 1e-8, 0.5, 50, *st)
        states.append((res, st))
    (ra, sa), (rb, sb) = states
    assert np.allclose(ra, rb, rtol=1e-10, atol=1e-14)
    for x, y_ in zip(sa, sb):
        assert np.allclose(x, y_, rtol=1e-10, atol=1e-13)
