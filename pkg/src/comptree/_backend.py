"""Select the EM kernel at import time.

Set ``COMPTREE_BACKEND=python`` to force the numpy fallback even when the
compiled extension is importable.
"""
import os

from . import _em_py

BACKEND = "python"
run_em = _em_py.run_em

if os.environ.get("COMPTREE_BACKEND", "").lower() != "python":
    try:
        from . import _em_ext
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        run_em = _em_ext.run_em


def get_run_em(name=None):
    """Return the kernel for ``name`` (``"cython"``/``"python"``), or the active one."""
    if name is None:
        return run_em
    if name == "python":
        return _em_py.run_em
    if name == "cython":
        from . import _em_ext

        return _em_ext.run_em
    raise ValueError(f"unknown backend {name!r}")
