"""Kernel backend selection.

Two interchangeable implementations of the fused dual-number kernels:

* ``py`` -- NumPy reference (`_ref`), always available.
* ``cy`` -- compiled Cython module (`_fast`), built by setup.py when a
  compiler is present.

The active backend is chosen at import time from the CLINN_KERNELS
environment variable ("auto", "py", "cy"; default "auto" prefers the
compiled module) and can be switched at runtime with `use()`, which the
tests and the kernel benchmark rely on.
"""

import os

from . import _ref

_BACKENDS = {"py": _ref}

try:  # compiled extension is optional
    from . import _fast as _fast_mod

    _BACKENDS["cy"] = _fast_mod
except ImportError:
    _fast_mod = None

_active = None


def available():
    """Names of importable backends."""
    return sorted(_BACKENDS)


def use(name):
    """Select the active backend ("py", "cy", or "auto"). Returns it."""
    global _active
    if name == "auto":
        name = "cy" if "cy" in _BACKENDS else "py"
    if name not in _BACKENDS:
        raise ValueError(
            f"kernel backend {name!r} not available (have {available()}); "
            "build the extension or set CLINN_KERNELS=py"
        )
    _active = _BACKENDS[name]
    return _active


def active():
    """The active backend module."""
    return _active


use(os.environ.get("CLINN_KERNELS", "auto"))
