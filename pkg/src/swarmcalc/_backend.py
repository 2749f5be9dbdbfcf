"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used. ``SWARMCALC_BACKEND=python`` or ``=cython`` forces a
choice (forcing cython raises if the extension is missing). Both backends
are bit-identical for the same seeds, so the switch only affects speed.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_forced = os.environ.get("SWARMCALC_BACKEND", "").lower()
if _forced == "cython" and _compiled is None:
    raise ImportError(
        "SWARMCALC_BACKEND=cython but the compiled kernels are not built; "
        "run `pip install -e . --no-build-isolation`"
    )

if _compiled is not None and _forced != "python":
    kernels = _compiled
    BACKEND = "cython"
else:
    kernels = _kernels_py
    BACKEND = "python"


def backend_name():
    """Name of the active kernel backend: 'cython' or 'python'."""
    return BACKEND


def final_states_batch(n, inits, steps, s_of, pos, pay, gens):
    if hasattr(kernels, "final_states_batch"):
        return kernels.final_states_batch(n, inits, steps, s_of, pos, pay, gens)
    import numpy as np

    out = np.empty(len(gens), dtype=np.int64)
    for i, gen in enumerate(gens):
        out[i] = kernels.final_state(n, int(inits[i]), steps, s_of, pos, pay, gen)
    return out


def hitting_times_batch(n, b0, target, max_steps, s_of, pos, pay, gens):
    if hasattr(kernels, "hitting_times_batch"):
        return kernels.hitting_times_batch(n, b0, target, max_steps, s_of, pos, pay, gens)
    import numpy as np

    out = np.empty(len(gens), dtype=np.int64)
    for i, gen in enumerate(gens):
        out[i] = kernels.hitting_time(n, b0, target, max_steps, s_of, pos, pay, gen)
    return out
