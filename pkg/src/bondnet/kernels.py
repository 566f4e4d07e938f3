"""Backend selection for the per-bond kernels.

The compiled ``_kernels_c`` extension is used when it imports; otherwise the
NumPy implementation in ``_kernels_py``. Set ``BONDNET_PURE_PYTHON=1`` to
force the fallback.
"""
import os

import numpy as np

from . import _kernels_py
from .errors import DegenerateBond

if os.environ.get("BONDNET_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "numpy"


def available_backends():
    out = {"numpy": _kernels_py}
    try:
        from . import _kernels_c
    except ImportError:
        pass
    else:
        out["cython"] = _kernels_c
    return out


def use_backend(name):
    """Switch the active backend by name; returns the previous name."""
    global _impl, BACKEND
    impls = available_backends()
    if name not in impls:
        raise ValueError(f"backend {name!r} not available; have {sorted(impls)}")
    prev = BACKEND
    _impl, BACKEND = impls[name], name
    return prev


def bond_response(y, rest, params, law_ids, broken, eps_len, tangent=False, impl=None):
    impl = impl or _impl
    y = np.ascontiguousarray(y, dtype=float)
    res = impl.bond_response(
        y,
        np.ascontiguousarray(rest, dtype=float),
        np.ascontiguousarray(params, dtype=float),
        np.ascontiguousarray(law_ids, dtype=np.intp),
        np.ascontiguousarray(broken, dtype=np.uint8),
        float(eps_len),
        bool(tangent),
    )
    bad = res[-1]
    if bad >= 0:
        raise DegenerateBond(
            f"bond {bad} collapsed to length {np.linalg.norm(y[bad]):g} "
            "with a law that still carries force there", bond=int(bad))
    return res[:-1]


def scatter_nodal(start, end, F, n, impl=None):
    impl = impl or _impl
    return impl.scatter_nodal(start, end, np.ascontiguousarray(F, dtype=float), n)


def scatter_blocks(slot, bond, sign, blocks, nslots, impl=None):
    impl = impl or _impl
    return impl.scatter_blocks(slot, bond, sign, np.ascontiguousarray(blocks), nslots)
