"""Selects the compiled stepping kernel when it is importable.

Set ``VS_SDIMSIM_PURE=1`` to force the pure-Python loop.
"""
from __future__ import annotations

import os

from . import _fallback

_compiled = None
if os.environ.get("VS_SDIMSIM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

HAVE_COMPILED = _compiled is not None
DEFAULT = "compiled" if HAVE_COMPILED else "python"
BACKENDS = ("auto", "compiled", "python")


def resolve(name: str = "auto") -> str:
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")
    if name == "auto":
        return DEFAULT
    if name == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel is not available; build the extension first")
    return name


def march(problem, coeffs: dict, h, blocks, backend: str = "auto"):
    """Run the stepping loop for ``problem`` on the chosen backend.

    Problems without a built-in kernel description always use the Python loop.
    """
    which = resolve(backend)
    args = (coeffs["A"], coeffs["Abar"], coeffs["U"], coeffs["B"], coeffs["Bbar"],
            coeffs["V"], h, blocks)
    if problem.kernel is None:
        if backend == "compiled":
            raise RuntimeError(f"problem {problem.name!r} has no compiled kernel")
        return _fallback.march(problem.f, problem.g, *args)
    kind, params = problem.kernel
    if which == "compiled":
        return _compiled.march_builtin(kind, params, *args)
    return _fallback.march_builtin(kind, params, *args)
