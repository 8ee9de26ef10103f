"""Fixed-step integration kernels.

Two interchangeable backends implement the same stepping semantics: a Cython
extension (`_core_cy`) and a pure numpy fallback (`_core_py`).  The compiled
backend is picked at import when available; setting BEARING_FLOWS_NO_EXT=1
forces the fallback.  Both follow the reference semantics documented in
`_core_py.run`, with identical floating-point operation order on everything
that feeds back into the dynamics, so trajectories agree bitwise.
"""
import os

if os.environ.get("BEARING_FLOWS_NO_EXT"):
    from bearing_flows.engine import _core_py as core

    BACKEND = "python"
else:
    try:
        from bearing_flows.engine import _core_cy as core  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        from bearing_flows.engine import _core_py as core

        BACKEND = "python"

__all__ = ["core", "BACKEND"]
