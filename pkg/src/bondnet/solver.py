"""Damped Newton solution of the free-node equilibrium equations.

Each iteration solves ``(J + lam*I) dx = R`` with a sparse LU factorization
and backtracks on ``||R||``. The shift ``lam`` is raised when the factorization
reports a (near) singular matrix, typically from rigid rotations about
prescribed nodes, or when the line search fails; it decays back towards
``SolverOptions.damping`` after accepted steps.

Fracture is event driven: after convergence at a load level, unbroken bonds
whose extension lies past a fracture threshold are marked broken and the
same level is solved again, until no new bond breaks.
"""
from dataclasses import dataclass, field
import enum
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .equilibrium import (
    assemble_state,
    fd_jacobian,
    jacobian,
    jacobian_of_state,
    reactions,
    residual_of_state,
)
from .errors import DegenerateBond, StepFailure

log = logging.getLogger(__name__)

# smallest accepted pivot ratio of the LU factors before lam is raised
PIVOT_RTOL = 1e-12
LAM_GROWTH = 10.0
LAM_FLOOR_REL = 1e-10
LAM_MAX_REL = 1e10
ARMIJO = 1e-4


class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    SINGULAR_SYSTEM = "SingularSystem"
    DEGENERATE_GEOMETRY = "DegenerateGeometry"


@dataclass
class SolverOptions:
    """Newton controls.

    ``tol_residual`` is relative to ``max(1, max|B_P|)``. ``polish`` extra
    Newton steps are taken after the tolerance is met, as long as each one at
    least halves the residual.
    """

    tol_residual: float = 1e-10
    max_iterations: int = 100
    damping: float = 0.0
    line_search_beta: float = 0.5
    max_backtracks: int = 30
    load_steps: int = 1
    allow_fracture: bool = True
    polish: int = 2

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be > 0")
        if not 0 < self.line_search_beta < 1:
            raise ValueError("line_search_beta must be in (0, 1)")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")
        if self.max_iterations < 0 or self.max_backtracks < 0:
            raise ValueError("iteration limits must be >= 0")
        if self.load_steps < 1:
            raise ValueError("load_steps must be >= 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "line_search" in d:
            d["line_search_beta"] = d.pop("line_search")
        return cls(**d)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class IterationRecord:
    residual_norm: float
    step_norm: float
    lam: float
    backtracks: int
    step: int = 1
    stage: int = 0


@dataclass
class SolveReport:
    """Result of :func:`solve` or :func:`load_sweep`.

    ``per_step_history`` has one ``(m, 2)`` array of ``(extension, force)``
    per load step; ``broken_history`` the broken set and ``step_residuals``
    the final residual norm after each step.
    """

    status: Status
    X: np.ndarray
    F: np.ndarray
    B_Q: np.ndarray
    broken_bonds: tuple
    trace: list = field(default_factory=list)
    per_step_history: list = field(default_factory=list)
    broken_history: list = field(default_factory=list)
    step_residuals: list = field(default_factory=list)
    residual_norm: float = 0.0
    extensions: np.ndarray = None
    forces: np.ndarray = None
    message: str = ""
    last_converged_step: int = 0

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    @property
    def iterations(self):
        return len(self.trace)


def _norm(R):
    return float(np.sqrt(np.sum(R * R)))


def _factorize(A):
    """LU factors of ``A``, or None when it is (numerically) singular."""
    if A.shape[0] == 0:
        return None
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError:
        return None
    d = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(d)) or d.max() == 0 or d.min() < PIVOT_RTOL * d.max():
        return None
    return lu


class _LevelSolver:
    """Newton iteration at one load level with a fixed broken set."""

    def __init__(self, prob, opts, broken, lam):
        self.prob = prob
        self.opts = opts
        self.broken = broken
        self.lam = lam
        self.tol = opts.tol_residual * max(1.0, float(np.max(np.abs(prob.B_P), initial=0.0)))

    def _eval(self, x, tangent=False):
        st = assemble_state(self.prob, x.reshape(-1, 3), self.broken, tangent)
        return st, residual_of_state(self.prob, st).ravel()

    def run(self, x, trace, step, stage=0):
        opts = self.opts
        try:
            st, R = self._eval(x, tangent=True)
        except DegenerateBond as exc:
            return Status.DEGENERATE_GEOMETRY, x, None, str(exc)
        rn = _norm(R)
        polishing = 0
        iters = 0
        while True:
            if rn <= self.tol:
                if rn == 0.0 or polishing >= opts.polish:
                    return Status.CONVERGED, x, st, ""
            if iters >= opts.max_iterations:
                if rn <= self.tol:
                    return Status.CONVERGED, x, st, ""
                return Status.MAX_ITERATIONS, x, st, f"residual {rn:.3e} after {iters} iterations"
            out = self._step(x, st, R, rn)
            if out is None:
                if rn <= self.tol:
                    return Status.CONVERGED, x, st, ""
                return Status.SINGULAR_SYSTEM, x, st, (
                    f"no descent step found up to lam = {self.lam:.3e} (residual {rn:.3e})")
            x_new, st_new, R_new, rn_new, dx_norm, bt = out
            if rn <= self.tol:
                # polishing: keep only steps that clearly improve
                if not rn_new <= 0.5 * rn:
                    return Status.CONVERGED, x, st, ""
                polishing += 1
            iters += 1
            trace.append(IterationRecord(rn_new, dx_norm, self.lam, bt, step, stage))
            x, st, R, rn = x_new, st_new, R_new, rn_new

    def _lam_bounds(self, J):
        d = np.abs(J.diagonal())
        scale = float(d.mean()) if d.size and d.mean() > 0 else float(
            np.mean([law.stiffness for law in self.prob.laws]) / np.mean(self.prob.net.rest_lengths))
        return LAM_FLOOR_REL * scale, LAM_MAX_REL * scale

    def _step(self, x, st, R, rn):
        """Find an accepted damped step, escalating lam as needed."""
        opts = self.opts
        J = sp.csc_matrix(jacobian_of_state(self.prob, st))
        lam_floor, lam_max = self._lam_bounds(J)
        eye = sp.identity(J.shape[0], format="csc")
        while True:
            lu = _factorize(J + self.lam * eye)
            if lu is None:
                self.lam = max(self.lam * LAM_GROWTH, lam_floor)
                if self.lam > lam_max:
                    return None
                continue
            dx = lu.solve(R)
            if not np.all(np.isfinite(dx)):
                self.lam = max(self.lam * LAM_GROWTH, lam_floor)
                if self.lam > lam_max:
                    return None
                continue
            t = 1.0
            for bt in range(opts.max_backtracks + 1):
                trial = x - t * dx
                try:
                    st_new, R_new = self._eval(trial, tangent=True)
                except DegenerateBond:
                    t *= opts.line_search_beta
                    continue
                rn_new = _norm(R_new)
                if rn_new < (1.0 - ARMIJO * t) * rn:
                    # decay lam towards the requested damping
                    lam = self.lam / LAM_GROWTH
                    self.lam = lam if lam >= lam_floor else opts.damping
                    return trial, st_new, R_new, rn_new, t * _norm(dx), bt
                t *= opts.line_search_beta
            self.lam = max(self.lam * LAM_GROWTH, lam_floor)
            if self.lam > lam_max:
                return None


def _history_row(state):
    return np.column_stack([state.ext, state.f])


def _solve_level(prob, opts, x0, broken, trace, step, lam):
    """Solve one load level, re-equilibrating after each fracture event.

    Returns ``(status, x, state, broken, message, lam)``.
    """
    x = x0.ravel().copy()
    broken = broken.copy()
    for stage in range(prob.net.m + 1):
        ls = _LevelSolver(prob, opts, broken, lam)
        status, x, st, msg = ls.run(x, trace, step, stage)
        lam = opts.damping
        if status is not Status.CONVERGED or not opts.allow_fracture:
            return status, x, st, broken, msg
        newly = st.fractured(prob)
        if not newly.any():
            return status, x, st, broken, msg
        log.info("load step %d: bonds %s break", step, (np.flatnonzero(newly) + 1).tolist())
        broken = broken | newly
    return status, x, st, broken, msg


def _degenerate_report(prob, status, x, broken, trace, history, broken_hist, step_res,
                       msg, last_ok):
    nan = np.full((prob.net.m, 3), np.nan)
    return SolveReport(
        status=status,
        X=prob.full_positions(x.reshape(-1, 3)),
        F=nan,
        B_Q=np.full((prob.q, 3), np.nan),
        broken_bonds=tuple(int(i) for i in np.flatnonzero(broken)),
        trace=trace,
        per_step_history=history,
        broken_history=broken_hist,
        step_residuals=step_res,
        residual_norm=float("nan"),
        extensions=np.full(prob.net.m, np.nan),
        forces=np.full(prob.net.m, np.nan),
        message=msg,
        last_converged_step=last_ok,
    )


def _report(prob, status, x, st, broken, trace, history, broken_hist, step_res, msg, last_ok):
    if st is None:
        try:
            st = assemble_state(prob, x.reshape(-1, 3), broken)
        except DegenerateBond:
            return _degenerate_report(prob, status, x, broken, trace, history, broken_hist,
                                      step_res, msg, last_ok)
    R = residual_of_state(prob, st)
    return SolveReport(
        status=status,
        X=st.X,
        F=st.F,
        B_Q=reactions(prob, st),
        broken_bonds=tuple(int(i) for i in np.flatnonzero(broken)),
        trace=trace,
        per_step_history=history,
        broken_history=broken_hist,
        step_residuals=step_res,
        residual_norm=_norm(R),
        extensions=st.ext,
        forces=st.f,
        message=msg,
        last_converged_step=last_ok,
    )


def _initial_guess(prob, initial_guess):
    if initial_guess is None:
        return prob.reference_free_positions()
    x0 = np.array(initial_guess, dtype=float).reshape(prob.p, 3)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial guess must be finite")
    return x0


def solve(prob, opts=None, initial_guess=None, broken=None):
    """Solve the equilibrium problem at its full load in a single level.

    ``initial_guess`` defaults to the reference positions of the free nodes.
    Numerical failure is reported through ``SolveReport.status``.
    """
    opts = opts or SolverOptions()
    x0 = _initial_guess(prob, initial_guess)
    broken = prob.no_broken() if broken is None else np.asarray(broken, dtype=bool).copy()
    trace = []
    status, x, st, broken, msg = _solve_level(prob, opts, x0, broken, trace, 1, opts.damping)
    if st is None:
        return _report(prob, status, x, st, broken, trace, [], [], [], msg, 0)
    ok = status is Status.CONVERGED
    return _report(prob, status, x, st, broken, trace, [_history_row(st)],
                   [tuple(np.flatnonzero(broken).tolist())],
                   [_norm(residual_of_state(prob, st))], msg, int(ok))


def load_sweep(prob, opts=None, initial_guess=None):
    """Apply loads and prescribed displacements in ``opts.load_steps`` equal increments.

    Each step is warm-started from the previous equilibrium. Raises
    :class:`StepFailure` with the partial report when a step does not
    converge.
    """
    opts = opts or SolverOptions()
    x = _initial_guess(prob, initial_guess).ravel()
    broken = prob.no_broken()
    trace, history, broken_hist, step_res = [], [], [], []
    nsteps = opts.load_steps
    for k in range(1, nsteps + 1):
        level = prob if k == nsteps else prob.at_level(k / nsteps)
        status, x, st, broken, msg = _solve_level(level, opts, x, broken, trace, k, opts.damping)
        if st is None:
            rep = _report(level, status, x, st, broken, trace, history, broken_hist,
                          step_res, msg, k - 1)
            raise StepFailure(k - 1, rep)
        history.append(_history_row(st))
        broken_hist.append(tuple(np.flatnonzero(broken).tolist()))
        step_res.append(_norm(residual_of_state(level, st)))
        if status is not Status.CONVERGED:
            rep = _report(level, status, x, st, broken, trace, history, broken_hist,
                          step_res, msg, k - 1)
            raise StepFailure(k - 1, rep)
    return _report(prob, Status.CONVERGED, x, st, broken, trace, history, broken_hist,
                   step_res, "", nsteps)


def check_jacobian(prob, X_P, broken=None, fd_step=None):
    """Largest entrywise gap between analytic and central-difference Jacobians.

    Normalized by the largest finite-difference entry.
    """
    if fd_step is not None and not fd_step > 0:
        raise ValueError("fd_step must be > 0")
    Ja = jacobian(prob, X_P, broken).toarray()
    Jf = fd_jacobian(prob, X_P, broken, fd_step)
    scale = max(np.abs(Jf).max(initial=0.0), np.abs(Ja).max(initial=0.0))
    if scale == 0:
        return 0.0
    return float(np.abs(Ja - Jf).max() / scale)
