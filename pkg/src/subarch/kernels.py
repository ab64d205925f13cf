"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
``SUBARCH_PURE`` environment variable is set) the numpy fallback is used.
Both expose ``sgd_dense_chain`` and ``forward_dense_chain``.
"""

import os
from types import ModuleType

from . import _kernels_py

try:
    if os.environ.get("SUBARCH_PURE"):
        raise ImportError("pure backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        name = BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


sgd_dense_chain = get_backend().sgd_dense_chain
forward_dense_chain = get_backend().forward_dense_chain
