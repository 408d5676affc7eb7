"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The numba backend is used when importable, unless the environment variable
EDMD_NO_NUMBA is set to 1/true/yes, which forces the numpy backend. Both
backends implement the same functions with the same semantics; BACKEND names
the one in use.
"""

import os

_FORCE_NUMPY = os.environ.get("EDMD_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

HAS_NUMBA = False
if not _FORCE_NUMPY:
    try:
        from . import numba_backend as _backend
        HAS_NUMBA = True
        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as _backend
        BACKEND = "numpy"
else:
    from . import numpy_backend as _backend
    BACKEND = "numpy"

thin_plate_matrix = _backend.thin_plate_matrix
kmeans_assign = _backend.kmeans_assign
double_well_em = _backend.double_well_em
rect_em = _backend.rect_em
duffing_rk4 = _backend.duffing_rk4
duffing_basin = _backend.duffing_basin

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "thin_plate_matrix",
    "kmeans_assign",
    "double_well_em",
    "rect_em",
    "duffing_rk4",
    "duffing_basin",
]
