"""Hot-loop kernels with backend selection at import time.

The compiled extension is preferred; the numpy fallback implements the same
API and is forced with ``CMVLAB_FORCE_FALLBACK=1`` (used by the benchmark
and the backend-equivalence tests).
"""

import os

from . import pyback as _pyback

if os.environ.get("CMVLAB_FORCE_FALLBACK", "") == "1":
    _impl = _pyback
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _pyback

BACKEND = _impl.BACKEND

phase_final = _impl.phase_final
phase_final_many = _impl.phase_final_many
phase_trajectory = _impl.phase_trajectory
refine_roots = _impl.refine_roots


def backend_name() -> str:
    """Which kernel implementation is active ('native' or 'python')."""
    return BACKEND


def backends():
    """All importable backends, for equivalence tests and benchmarks."""
    out = {"python": _pyback}
    try:
        from . import _native
        out["native"] = _native
    except ImportError:
        pass
    return out
