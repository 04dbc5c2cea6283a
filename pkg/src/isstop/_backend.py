"""Select the accumulation kernel at import time.

The compiled extension is used when it is importable. Setting the
environment variable ``ISSTOP_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

fallback_accumulate_into = _kernels_py.accumulate_into

compiled_accumulate_into = None
if os.environ.get("ISSTOP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import accumulate_into as compiled_accumulate_into
    except ImportError:
        compiled_accumulate_into = None

if compiled_accumulate_into is not None:
    BACKEND = "compiled"
    accumulate_into = compiled_accumulate_into
else:
    BACKEND = "python"
    accumulate_into = fallback_accumulate_into
