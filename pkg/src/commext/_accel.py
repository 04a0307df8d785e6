"""Pick the compiled rotation kernel when it was built, else the numpy reference.

Set ``COMMEXT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

backend = "python"
RotationObjective = _kernels_py.RotationObjective

if os.environ.get("COMMEXT_PURE_PYTHON") != "1":
    try:
        from ._kernels import RotationObjective  # noqa: F811
    except ImportError:
        pass
    else:
        backend = "cython"

scan_golden = _kernels_py.scan_golden
