"""Select the compiled core at import, falling back to NumPy.

Set ``MRGP_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
the backend-equivalence tests).
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

_core = None
if not os.environ.get("MRGP_PURE_PYTHON"):
    try:
        from . import _core  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _core = None

BACKEND = "cython" if _core is not None else "numpy"
_impl = _core if _core is not None else _fallback


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def sqdist_ard(X1, X2, inv_ls) -> np.ndarray:
    """Scaled squared distances ``sum_k ((x1_k - x2_k) * inv_ls_k)**2``."""
    return _impl.sqdist_ard(_f64(X1), _f64(X2), _f64(inv_ls))


def ard_contract(X, inv_ls, M) -> np.ndarray:
    """Per-column weighted sum of scaled squared differences over all pairs."""
    return _impl.ard_contract(_f64(X), _f64(inv_ls), _f64(M))


def ou_recurse(x0, mu: float, decay: float, scale: float, Z) -> np.ndarray:
    """Apply ``x <- mu + (x - mu) * decay + scale * z`` along each row of ``Z``."""
    return _impl.ou_recurse(_f64(x0), float(mu), float(decay), float(scale), _f64(Z))
