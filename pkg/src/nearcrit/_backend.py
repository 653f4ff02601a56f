"""Select the compiled core when available, else the pure-Python loops.

Set ``NEARCRIT_PURE=1`` to force the fallback.
"""

import os

BACKEND = "python"
if os.environ.get("NEARCRIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._core import intensity_at, sweep_slab, volterra_forward  # noqa: F401

        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass
if BACKEND == "python":
    from ._pycore import intensity_at, sweep_slab, volterra_forward  # noqa: F401

from ._pycore import KIND_EXP, KIND_GAMMA2  # noqa: E402,F401
