"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy versions in ``_pykernels`` are used. Set ``ROBUSTLAB_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("ROBUSTLAB_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

spread_value_grad = _impl.spread_value_grad
spread_values = _impl.spread_values
# numpy's vectorized row sort beats the compiled selection loop here
capped_min_rows = _pykernels.capped_min_rows
dilate_once = _impl.dilate_once
cube_mass = _impl.cube_mass
project_capped = _impl.project_capped

__all__ = [
    "BACKEND",
    "spread_value_grad",
    "spread_values",
    "capped_min_rows",
    "dilate_once",
    "cube_mass",
    "project_capped",
]
