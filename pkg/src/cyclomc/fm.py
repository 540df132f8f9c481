"""Selects the Fourier-Motzkin kernel: the compiled one if it was built.

Set ``CYCLOMC_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from cyclomc import _fm_py

if os.environ.get("CYCLOMC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fm_py
else:
    try:
        from cyclomc import _fm as _impl
    except ImportError:  # extension not built
        _impl = _fm_py

BACKEND = "cython" if _impl is not _fm_py else "python"

eliminate = _impl.eliminate
dedupe = _impl.dedupe
count_pairs = _impl.count_pairs

__all__ = ["BACKEND", "eliminate", "dedupe", "count_pairs"]
