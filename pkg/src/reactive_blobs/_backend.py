"""Select the stencil kernel implementation at import time.

The compiled ``_core`` extension is used when it is importable; set
``REACTIVE_BLOBS_PURE=1`` to force the numpy fallback.
"""

import os

from . import _fallback

_core = None
if os.environ.get("REACTIVE_BLOBS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

_impl = _core if _core is not None else _fallback

NAME = "compiled" if _core is not None else "numpy"

rbgs = _impl.rbgs
rbgs_reverse = _impl.rbgs_reverse
apply_operator = _impl.apply_operator
residual = _impl.residual
neighbor_sum = _impl.neighbor_sum


def implementations():
    """Mapping of available backend name -> module, for benchmarks and tests."""
    out = {"numpy": _fallback}
    if _core is not None:
        out["compiled"] = _core
    return out
