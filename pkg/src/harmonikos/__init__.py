"""Instantons on flat R^{4n} from harmonic-space prepotentials.

Reconstruction (bridge, second prepotential, curvature) and residual suites
for the identities those fields satisfy.
"""

import os as _os

_threads = _os.environ.get("HARMONIKOS_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .lie import get_algebra, sl2, u1  # noqa: E402
from .fields import make_prepotential, parse  # noqa: E402
from .reconstruct import BridgeOptions, GaugeData, reconstruct  # noqa: E402

__all__ = ["__version__", "get_algebra", "sl2", "u1", "make_prepotential", "parse",
           "BridgeOptions", "GaugeData", "reconstruct"]
