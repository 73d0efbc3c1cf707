"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``COSEP_PURE_PYTHON=1``
to force the numpy implementations.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("COSEP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

soft_max_value = _impl.soft_max_value
soft_max_grad_terms = _impl.soft_max_grad_terms
max_abs_term = _impl.max_abs_term
admm_iterations = _impl.admm_iterations

__all__ = [
    "BACKEND",
    "soft_max_value",
    "soft_max_grad_terms",
    "max_abs_term",
    "admm_iterations",
]
