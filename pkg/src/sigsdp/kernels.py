"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``SIGSDP_PURE_PYTHON=1``
forces the reference implementation.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

py = _kernels_py

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("SIGSDP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    _impl = compiled
    BACKEND = "compiled"
else:
    _impl = _kernels_py
    BACKEND = "python"

sampled_gram = _impl.sampled_gram
expm_taylor_action = _impl.expm_taylor_action
fill_slots = _impl.fill_slots
taylor_plan = _impl.taylor_plan
gershgorin_interval = _impl.gershgorin_interval
MmwWorkspace = _impl.MmwWorkspace


def available_backends():
    """Mapping of backend name to module for every importable backend."""
    out = {"python": _kernels_py}
    if compiled is not None:
        out["compiled"] = compiled
    return out
