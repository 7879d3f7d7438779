"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available. Set POINTASSIST_BACKEND=python (or =native) to force one.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

_FORCED = os.environ.get("POINTASSIST_BACKEND", "").strip().lower()
if _FORCED == "python":
    _active = _fallback
elif _FORCED == "native":
    if _native is None:
        raise ImportError(
            "POINTASSIST_BACKEND=native but the compiled extension is not built; "
            "run `pip install -e . --no-build-isolation` or unset the variable"
        )
    _active = _native
else:
    _active = _native if _native is not None else _fallback


def backend_name() -> str:
    return "native" if _active is _native and _native is not None else "python"


def get_backend(name: str | None = None):
    """Kernel module by name: 'native', 'python', or None for the active one."""
    if name is None:
        return _active
    if name == "python":
        return _fallback
    if name == "native":
        if _native is None:
            raise ValueError("native kernel backend is not built")
        return _native
    raise ValueError(f"unknown backend {name!r}")


raycast = _active.raycast
batch_overlap = _active.batch_overlap
