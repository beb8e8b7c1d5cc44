"""Kernel backend selection.

Hot loops (RK4 cascades, the ring solver, Euler-Maruyama updates) exist in
two versions: numba ``@njit`` kernels and pure-numpy twins.  The active
backend is chosen once at import from the ``LQCHAIN_BACKEND`` environment
variable (``numba`` or ``numpy``); the default is numba when it imports,
numpy otherwise.
"""

from __future__ import annotations

import os

_env = os.environ.get("LQCHAIN_BACKEND", "").strip().lower()

if _env not in ("", "numba", "numpy"):
    raise RuntimeError(f"LQCHAIN_BACKEND must be 'numba' or 'numpy', got {_env!r}")

if _env == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _env == "numba":
            raise RuntimeError("LQCHAIN_BACKEND=numba but numba is not importable")
        NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def set_num_threads(n: int) -> None:
    """Cap kernel parallelism; a no-op on the numpy backend."""
    if NUMBA_ENABLED and n > 0:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
