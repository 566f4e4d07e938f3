"""NumPy implementation of the per-bond kernels.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are tested against. Signatures match ``_kernels_c``.
"""
import numpy as np

from .material import law_response


def bond_response(y, rest, params, law_ids, broken, eps_len, tangent):
    """Per-bond extension, force, slope, secant coefficient, force vector.

    Returns ``(ext, f, fp, coef, F, blocks, bad)``. ``blocks`` is ``None``
    unless ``tangent``; ``bad`` is the index of the first collapsed bond whose
    law has no finite secant limit, or -1.
    """
    m = y.shape[0]
    broken = np.asarray(broken).astype(bool)
    ynorm = np.sqrt(y[:, 0] * y[:, 0] + y[:, 1] * y[:, 1] + y[:, 2] * y[:, 2])
    ext = ynorm - rest
    f, fp = law_response(ext, params[law_ids])
    f = np.where(broken, 0.0, f)
    fp = np.where(broken, 0.0, fp)

    collapsed = ynorm < eps_len
    bad_mask = collapsed & ((f != 0.0) | (fp != 0.0))
    bad = int(np.argmax(bad_mask)) if bad_mask.any() else -1
    safe = np.where(collapsed, 1.0, ynorm)
    coef = np.where(collapsed, 0.0, f / safe)
    F = coef[:, None] * y

    blocks = None
    if tangent:
        u = y / safe[:, None]
        uu = u[:, :, None] * u[:, None, :]
        eye = np.broadcast_to(np.eye(3), (m, 3, 3))
        blocks = fp[:, None, None] * uu + coef[:, None, None] * (eye - uu)
        blocks[collapsed] = 0.0
    return ext, f, fp, coef, F, blocks, bad


def scatter_nodal(start, end, F, n):
    """Nodal sums ``A.T @ F``: add at start nodes, then subtract at end nodes."""
    out = np.zeros((n, 3))
    np.add.at(out, start, F)
    np.subtract.at(out, end, F)
    return out


def scatter_blocks(slot, bond, sign, blocks, nslots):
    """Accumulate signed 3x3 bond blocks into Jacobian block slots."""
    out = np.zeros((nslots, 3, 3))
    np.add.at(out, slot, sign[:, None, None] * blocks[bond])
    return out
