"""Desk-scale prior-fitted network for multitask tabular regression."""

import os

# At the matrix sizes this model produces, BLAS-internal threading loses to
# single-threaded kernels plus our own chunk-level threading (measured ~1.5-2x
# end to end), so pin the pools unless the user overrides.
try:
    from threadpoolctl import threadpool_limits as _threadpool_limits

    _threadpool_limits(int(os.environ.get("MINIPFN_BLAS_THREADS", "1")), "blas")
except (ImportError, ValueError):
    pass

__version__ = "0.1.0"
