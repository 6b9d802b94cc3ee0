"""Backend selection for the hot numerical kernels.

Prefers the compiled Cython extension and falls back to the pure-numpy
implementation when the extension is not built. Override with the
environment variable SHIFTBOOT_KERNELS:

* ``SHIFTBOOT_KERNELS=c``  — require the compiled extension (ImportError if missing)
* ``SHIFTBOOT_KERNELS=py`` — force the numpy fallback

``BACKEND`` records which implementation is active; reports and the
benchmark script read it.
"""

import os

from . import _kernels_py

_choice = os.environ.get("SHIFTBOOT_KERNELS", "auto").strip().lower()

if _choice == "py":
    _impl = _kernels_py
    BACKEND = "python"
elif _choice == "c":
    from . import _kernels as _impl

    BACKEND = "compiled"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

fixed_point_curve = _impl.fixed_point_curve
weighted_group_moments = _impl.weighted_group_moments
em_accumulate = _impl.em_accumulate
