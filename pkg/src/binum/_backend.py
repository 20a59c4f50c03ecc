"""Select the ascent kernel at import time.

Prefers the compiled extension; falls back to the numpy implementation when
the extension is missing (pure-source install) or when BINUM_FORCE_PY is set
in the environment (used by tests and the benchmark to compare the two).
"""

import os

if os.environ.get("BINUM_FORCE_PY"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

solve_kernel = _impl.solve_kernel
BACKEND = _impl.BACKEND
