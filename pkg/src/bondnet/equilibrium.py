"""Assembly of the nodal equilibrium equations.

Nodes are split into *free* nodes (unknown position, known applied load) and
*prescribed* nodes (known position, unknown reaction). For positions ``X``
the bond forces are ``F_i = f(|y_i| - |b_i|) / |y_i| * y_i`` with
``y = A @ X``, and the nodal force sums are ``A.T @ F``. The residual is the
nodal sum on free nodes minus the applied loads; the reactions are the nodal
sums on prescribed nodes.

Free-node unknowns are flattened node-major: dof ``3*a + c`` is coordinate
``c`` of the ``a``-th free node.
"""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import PartitionError, ProblemError
from .material import MaterialLaw, fractured_mask, pack_laws


@dataclass(frozen=True, eq=False)
class Partition:
    free: np.ndarray
    prescribed: np.ndarray

    @classmethod
    def from_prescribed(cls, n, prescribed):
        """Partition with the given prescribed nodes; free nodes in index order."""
        prescribed = np.asarray(prescribed, dtype=np.intp).ravel()
        free = np.setdiff1d(np.arange(n, dtype=np.intp), prescribed)
        part = cls(free, prescribed)
        part.check(n)
        return part

    @property
    def p(self):
        return len(self.free)

    @property
    def q(self):
        return len(self.prescribed)

    def check(self, n):
        both = np.concatenate([self.free, self.prescribed])
        if len(both) != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise PartitionError(
                "free and prescribed nodes must be disjoint and cover all "
                f"{n} nodes exactly once")
        if self.q < 1:
            raise PartitionError("at least one node must be prescribed")


@dataclass(frozen=True, eq=False)
class EquilibriumProblem:
    """Network, per-bond laws, partition, prescribed positions and loads."""

    net: object
    laws: tuple
    law_ids: np.ndarray
    part: Partition
    X_Q: np.ndarray
    B_P: np.ndarray

    @classmethod
    def create(cls, net, law, part, X_Q=None, B_P=None, law_ids=None):
        """Build and validate a problem.

        ``law`` is a single :class:`MaterialLaw` or a sequence indexed by
        ``law_ids``. ``X_Q`` defaults to the reference positions of the
        prescribed nodes, ``B_P`` to zero loads.
        """
        laws = (law,) if isinstance(law, MaterialLaw) else tuple(law)
        if law_ids is None:
            if len(laws) != 1:
                raise ProblemError("law_ids is required with more than one law")
            law_ids = np.zeros(net.m, dtype=np.intp)
        if X_Q is None:
            X_Q = net.D[part.prescribed]
        if B_P is None:
            B_P = np.zeros((part.p, 3))
        prob = cls(net, laws, np.asarray(law_ids, dtype=np.intp), part,
                   np.array(X_Q, dtype=float).reshape(-1, 3),
                   np.array(B_P, dtype=float).reshape(-1, 3))
        prob.check()
        return prob

    def check(self):
        self.part.check(self.net.n)
        if not all(isinstance(law, MaterialLaw) for law in self.laws):
            raise ProblemError("laws must be MaterialLaw instances")
        if self.law_ids.shape != (self.net.m,):
            raise ProblemError(f"law_ids must have length {self.net.m}")
        if self.law_ids.size and not (0 <= self.law_ids.min() and self.law_ids.max() < len(self.laws)):
            raise ProblemError("law_ids reference a missing law")
        if self.X_Q.shape != (self.part.q, 3):
            raise ProblemError(f"X_Q must have shape ({self.part.q}, 3), got {self.X_Q.shape}")
        if self.B_P.shape != (self.part.p, 3):
            raise ProblemError(f"B_P must have shape ({self.part.p}, 3), got {self.B_P.shape}")
        if not (np.all(np.isfinite(self.X_Q)) and np.all(np.isfinite(self.B_P))):
            raise ProblemError("X_Q and B_P must be finite")

    @property
    def p(self):
        return self.part.p

    @property
    def q(self):
        return self.part.q

    @cached_property
    def params(self):
        return pack_laws(self.laws)

    @cached_property
    def bond_params(self):
        return self.params[self.law_ids]

    @cached_property
    def free_pos(self):
        """Position of each node in the free list, -1 for prescribed nodes."""
        pos = np.full(self.net.n, -1, dtype=np.intp)
        pos[self.part.free] = np.arange(self.p)
        return pos

    @cached_property
    def _jac_pattern(self):
        return _block_pattern(self.net.start, self.net.end, self.free_pos, self.p)

    def reference_free_positions(self):
        return self.net.D[self.part.free].copy()

    def full_positions(self, X_P):
        X = np.empty((self.net.n, 3))
        X[self.part.free] = X_P
        X[self.part.prescribed] = self.X_Q
        return X

    def at_level(self, s):
        """Problem with loads scaled by ``s`` and prescribed displacements by ``s``."""
        X_ref = self.net.D[self.part.prescribed]
        return replace(self, X_Q=X_ref + s * (self.X_Q - X_ref), B_P=s * self.B_P)

    def no_broken(self):
        return np.zeros(self.net.m, dtype=bool)


def _block_pattern(start, end, free_pos, p):
    """Block sparsity of the free-node Jacobian.

    Returns the block-slot index, bond and sign of every bond contribution,
    plus the BSR ``indices``/``indptr`` of the unique blocks.
    """
    fs, fe = free_pos[start], free_pos[end]
    bonds = np.arange(len(start), dtype=np.intp)
    rows, cols, bond, sign = [], [], [], []
    for r, c, sel, sg in ((fs, fs, fs >= 0, 1.0), (fe, fe, fe >= 0, 1.0),
                          (fs, fe, (fs >= 0) & (fe >= 0), -1.0),
                          (fe, fs, (fs >= 0) & (fe >= 0), -1.0)):
        rows.append(r[sel])
        cols.append(c[sel])
        bond.append(bonds[sel])
        sign.append(np.full(sel.sum(), sg))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    bond = np.concatenate(bond)
    sign = np.concatenate(sign)
    # every free node gets a diagonal block so that J + lam*I is well formed
    diag = np.arange(p, dtype=np.intp)
    keys = np.unique(np.concatenate([rows * max(p, 1) + cols, diag * max(p, 1) + diag]))
    slot = np.searchsorted(keys, rows * max(p, 1) + cols).astype(np.intp)
    indices = (keys % max(p, 1)).astype(np.intp)
    indptr = np.searchsorted(keys // max(p, 1), np.arange(p + 1)).astype(np.intp)
    return slot, bond, sign, indices, indptr


@dataclass(eq=False)
class SystemState:
    """Fully assembled configuration.

    ``f`` holds signed force magnitudes from the law and ``coef`` the secant
    coefficients ``f/|y|``; ``F = coef[:, None] * y`` and ``nodal = A.T @ F``.
    """

    X: np.ndarray
    y: np.ndarray
    ext: np.ndarray
    f: np.ndarray
    coef: np.ndarray
    F: np.ndarray
    nodal: np.ndarray
    broken: np.ndarray
    blocks: np.ndarray = field(default=None, repr=False)

    def fractured(self, prob):
        """Unbroken bonds whose extension lies past a fracture threshold."""
        return fractured_mask(self.ext, prob.bond_params) & ~self.broken


def assemble_state(prob, X_P, broken=None, tangent=False):
    """Assemble positions, bond vectors, bond forces and nodal sums."""
    X_P = np.asarray(X_P, dtype=float).reshape(prob.p, 3)
    if not np.all(np.isfinite(X_P)):
        raise ValueError("X_P contains non-finite values")
    if broken is None:
        broken = prob.no_broken()
    net = prob.net
    X = prob.full_positions(X_P)
    y = X[net.start] - X[net.end]
    ext, f, _, coef, F, blocks = kernels.bond_response(
        y, net.rest_lengths, prob.params, prob.law_ids, broken, net.eps_len, tangent)
    nodal = kernels.scatter_nodal(net.start, net.end, F, net.n)
    return SystemState(X, y, ext, f, coef, F, nodal, np.asarray(broken, dtype=bool), blocks)


def residual_of_state(prob, state):
    return state.nodal[prob.part.free] - prob.B_P


def residual(prob, X_P, broken=None):
    """Free-node residual ``(A.T @ F)[free] - B_P`` as a ``(p, 3)`` array."""
    return residual_of_state(prob, assemble_state(prob, X_P, broken))


def jacobian_of_state(prob, state):
    if state.blocks is None:
        raise ValueError("state was assembled without tangent blocks")
    slot, bond, sign, indices, indptr = prob._jac_pattern
    data = kernels.scatter_blocks(slot, bond, sign, state.blocks, len(indices))
    return sp.bsr_matrix((data, indices, indptr), shape=(3 * prob.p, 3 * prob.p))


def jacobian(prob, X_P, broken=None):
    """Analytic ``3p x 3p`` Jacobian of the residual in BSR format (3x3 blocks).

    Each bond contributes ``f'(e) u u^T + f(e)/|y| (I - u u^T)`` with
    ``u = y/|y|``, scattered with incidence signs onto its free end nodes.
    """
    return jacobian_of_state(prob, assemble_state(prob, X_P, broken, tangent=True))


def reactions(prob, state):
    """Reaction forces ``(A.T @ F)[prescribed]`` as a ``(q, 3)`` array."""
    return state.nodal[prob.part.prescribed].copy()


def fd_jacobian(prob, X_P, broken=None, step=None):
    """Dense central finite-difference Jacobian of :func:`residual`."""
    X_P = np.asarray(X_P, dtype=float).reshape(prob.p, 3)
    if step is None:
        step = 1e-6 * float(np.mean(prob.net.rest_lengths))
    x0 = X_P.ravel()
    J = np.empty((x0.size, x0.size))
    for j in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (residual(prob, xp, broken).ravel() - residual(prob, xm, broken).ravel()) / (2 * step)
    return J
