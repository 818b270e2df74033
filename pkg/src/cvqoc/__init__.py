"""Quantum optimal control with CV-QNN free functions over TFC collocation."""

import os as _os

# Cap BLAS thread pools before numpy loads; harmless if it is already loaded.
_threads = _os.environ.get("CVQOC_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from . import cvqnn, fock, lindblad, optimize, pmp, problems, tfc

__all__ = ["cvqnn", "fock", "lindblad", "optimize", "pmp", "problems", "tfc"]
__version__ = "0.1.0"
