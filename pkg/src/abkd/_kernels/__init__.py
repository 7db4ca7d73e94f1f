"""CSR kernel selection: compiled extension when available, numpy otherwise.

Set ABKD_PURE_PYTHON=1 to force the numpy fallback. The active backend
name is exposed as BACKEND ("cython" or "numpy"); both backends produce
results accumulated in the same per-row storage order.
"""

import os

from . import numpy_ref

if os.environ.get("ABKD_PURE_PYTHON") == "1":
    _impl = numpy_ref
    BACKEND = "numpy"
else:
    try:
        from . import _csr_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = numpy_ref
        BACKEND = "numpy"

csr_dense_matmul = _impl.csr_dense_matmul
csr_t_dense_matmul = _impl.csr_t_dense_matmul
