"""Node/bond graph, incidence matrix and bond vectors.

Row ``i`` of the incidence matrix ``A`` has ``+1`` in the column of the
start node of bond ``i`` and ``-1`` in the column of its end node, so the
reference bond vectors ``b = A @ D`` point from the end node to the start
node. The equilibrium equations are unchanged by flipping a bond, so only
consistency matters.

Indices are 0-based here; file formats and the CLI use 1-based ids.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    DisconnectedGraph,
    DuplicateBond,
    InvalidNodeIndex,
    NetworkError,
    SelfLoop,
    ZeroLengthBond,
)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable node/bond network in its reference configuration.

    Attributes
    ----------
    D : (n, 3) reference node positions.
    start, end : (m,) node indices of each bond.
    A : (m, n) sparse CSR incidence matrix, two entries per row.
    b : (m, 3) reference bond vectors ``A @ D``.
    rest_lengths : (m,) Euclidean norms of the rows of ``b``.
    """

    D: np.ndarray
    start: np.ndarray
    end: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    rest_lengths: np.ndarray

    @property
    def n(self):
        return self.D.shape[0]

    @property
    def m(self):
        return self.start.shape[0]

    @property
    def bonds(self):
        return list(zip(self.start.tolist(), self.end.tolist()))

    @property
    def eps_len(self):
        """Scale-relative threshold below which a bond counts as collapsed."""
        from .material import EPS_LEN_REL
        return EPS_LEN_REL * float(np.mean(self.rest_lengths))

    def __repr__(self):
        return f"Network(n={self.n}, m={self.m})"


def incidence_matrix(start, end, n):
    m = len(start)
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([start, end]).ravel()
    vals = np.tile([1.0, -1.0], m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n))


def build_network(positions, bonds):
    """Build a validated :class:`Network`.

    Parameters
    ----------
    positions : array_like, shape (n, 3)
    bonds : sequence of (start, end) 0-based node index pairs
    """
    D = np.asarray(positions, dtype=float)
    if D.ndim != 2 or D.shape[1] != 3:
        raise NetworkError(f"positions must have shape (n, 3), got {D.shape}")
    n = D.shape[0]
    if n < 2:
        raise NetworkError(f"need at least 2 nodes, got {n}")
    if not np.all(np.isfinite(D)):
        raise NetworkError("positions contain non-finite values")
    bonds = [tuple(bd) for bd in bonds]
    if not bonds:
        raise NetworkError("bond list is empty")

    seen = {}
    for i, bd in enumerate(bonds):
        if len(bd) != 2:
            raise NetworkError(f"bond {i} must be a (start, end) pair, got {bd!r}")
        s, e = bd
        if not all(isinstance(v, (int, np.integer)) for v in bd):
            raise InvalidNodeIndex(f"bond {i} has non-integer node index {bd!r}")
        if not (0 <= s < n and 0 <= e < n):
            raise InvalidNodeIndex(f"bond {i} references node outside [0, {n}): {bd!r}")
        if s == e:
            raise SelfLoop(f"bond {i} connects node {s} to itself")
        key = (min(s, e), max(s, e))
        if key in seen:
            raise DuplicateBond(f"bond {i} duplicates bond {seen[key]} (nodes {key})")
        seen[key] = i

    start = np.array([s for s, _ in bonds], dtype=np.intp)
    end = np.array([e for _, e in bonds], dtype=np.intp)
    A = incidence_matrix(start, end, n)
    b = A @ D
    rest = np.linalg.norm(b, axis=1)
    zero = np.flatnonzero(rest == 0)
    if zero.size:
        raise ZeroLengthBond(f"bond {zero[0]} has zero rest length")

    ncomp, _ = connected_components(A.T @ A, directed=False)
    if ncomp != 1:
        raise DisconnectedGraph(f"network has {ncomp} connected components")

    start.setflags(write=False)
    end.setflags(write=False)
    return Network(_frozen(D), start, end, A, _frozen(b), _frozen(rest))


def deformed_bond_vectors(net, X):
    """Deformed bond vectors ``y = A @ X`` for node positions ``X``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (net.n, 3):
        raise ValueError(f"X must have shape ({net.n}, 3), got {X.shape}")
    return X[net.start] - X[net.end]


class Diagnostic(NamedTuple):
    code: str
    message: str


def validate_network(net):
    """Re-check the invariants of ``net``; an empty list means valid."""
    out = []
    n, m = net.D.shape[0], net.start.shape[0]
    A = sp.csr_matrix(net.A)
    if A.shape != (m, n):
        out.append(Diagnostic("ShapeMismatch",
                              f"A has shape {A.shape}, expected {(m, n)}"))
        return out
    if net.b.shape != (m, 3) or net.rest_lengths.shape != (m,):
        out.append(Diagnostic("ShapeMismatch", "b or rest_lengths has the wrong shape"))
        return out

    A.sum_duplicates()
    for i in range(m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        nz = vals != 0
        cols, vals = cols[nz], vals[nz]
        ok = (len(vals) == 2 and sorted(vals.tolist()) == [-1.0, 1.0]
              and cols[vals == 1.0][0] == net.start[i]
              and cols[vals == -1.0][0] == net.end[i])
        if not ok:
            out.append(Diagnostic(
                "MalformedIncidenceRow",
                f"row {i} has entries {dict(zip(cols.tolist(), vals.tolist()))}, "
                f"row sum {vals.sum():g}"))

    if np.any(net.start == net.end):
        out.append(Diagnostic("SelfLoop", "a bond connects a node to itself"))
    keys = {(min(s, e), max(s, e)) for s, e in zip(net.start.tolist(), net.end.tolist())}
    if len(keys) != m:
        out.append(Diagnostic("DuplicateBond", "a node pair is bonded more than once"))

    b = A @ net.D
    bad = np.flatnonzero(np.any(b != net.b, axis=1))
    for i in bad:
        out.append(Diagnostic("BondVectorMismatch", f"b[{i}] differs from (A @ D)[{i}]"))
    norms = np.linalg.norm(net.b, axis=1)
    for i in np.flatnonzero(norms != net.rest_lengths):
        out.append(Diagnostic(
            "StaleRestLength",
            f"rest_lengths[{i}] = {net.rest_lengths[i]!r} but |b[{i}]| = {norms[i]!r}"))
    for i in np.flatnonzero(~(net.rest_lengths > 0)):
        out.append(Diagnostic("NonPositiveRestLength", f"rest_lengths[{i}] <= 0"))

    ncomp, _ = connected_components(abs(A).T @ abs(A), directed=False)
    if ncomp != 1:
        out.append(Diagnostic("DisconnectedGraph", f"{ncomp} connected components"))
    return out
