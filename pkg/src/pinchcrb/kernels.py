"""Backend selection for the batch kernels.

The compiled extension is used when it was built; otherwise (or when
``PINCHCRB_PURE_PYTHON=1``) the numpy implementation is used. Both expose
``aggregate_batch`` and ``rx_gram_batch`` with identical semantics.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("PINCHCRB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
    _impl: ModuleType = _compiled
else:
    BACKEND = "python"
    _impl = _pykernels


def available_backends() -> dict[str, ModuleType]:
    found = {"python": _pykernels}
    if _compiled is not None:
        found["cython"] = _compiled
    return found


def aggregate_batch(y, wg_phase, k, sqrt_a0, r, theta):
    return _impl.aggregate_batch(y, wg_phase, k, sqrt_a0, r, theta)


def rx_gram_batch(nd, R, k, b0, r, theta):
    return _impl.rx_gram_batch(nd, R, k, b0, r, theta)
