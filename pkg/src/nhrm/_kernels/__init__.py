"""Hot loops: the plaquette-phase sum and the chain propagator.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is selected.  Set ``NHRM_PURE_PYTHON=1``
to force the numpy path.
"""
import os

from . import _pykernels as python

compiled = None
if not os.environ.get("NHRM_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

BACKEND = "cython" if compiled is not None else "python"
AVAILABLE = ("cython", "python") if compiled is not None else ("python",)


def get(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or
    ``None`` for the default)."""
    if name is None:
        return compiled if compiled is not None else python
    if name == "python":
        return python
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
