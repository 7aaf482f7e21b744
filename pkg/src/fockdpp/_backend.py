"""Select the compiled core or the numpy fallback at import time.

Set ``FOCKDPP_BACKEND=python`` to force the fallback, ``cython`` to require
the compiled extension.
"""

import os

from . import _fallback

_choice = os.environ.get("FOCKDPP_BACKEND", "auto").strip().lower()

try:
    from . import _core
except ImportError:
    _core = None

if _choice == "python" or (_choice == "auto" and _core is None):
    impl = _fallback
elif _choice in ("cython", "auto"):
    if _core is None:
        raise ImportError("FOCKDPP_BACKEND=cython but the compiled extension is not built")
    impl = _core
else:
    raise ImportError("unknown FOCKDPP_BACKEND %r" % _choice)

NAME = "cython" if impl is _core else "python"

log_kernel_series = impl.log_kernel_series
nn_distances = impl.nn_distances
hkpv_first_accept = impl.hkpv_first_accept


def available():
    """Mapping of backend name to implementation module for the backends present."""
    out = {"python": _fallback}
    if _core is not None:
        out["cython"] = _core
    return out
