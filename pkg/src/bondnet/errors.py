"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2); numerical
failures during a solve derive from :class:`SolverError` (exit code 1).
"""


class BondnetError(Exception):
    """Base class for all package errors."""


class InputError(BondnetError, ValueError):
    """Malformed or inconsistent input data."""


# -- network ---------------------------------------------------------------

class NetworkError(InputError):
    pass


class DuplicateBond(NetworkError):
    pass


class SelfLoop(NetworkError):
    pass


class ZeroLengthBond(NetworkError):
    pass


class DisconnectedGraph(NetworkError):
    pass


class InvalidNodeIndex(NetworkError):
    pass


# -- material law ----------------------------------------------------------

class MaterialError(InputError):
    pass


class InvalidLawParameters(MaterialError):
    pass


class NonFiniteExtension(MaterialError):
    pass


class SmoothingDisabled(MaterialError):
    pass


class KinkAmbiguity(BondnetError, ArithmeticError):
    """Derivative requested exactly on an unsmoothed regime boundary.

    ``left_slope`` holds the left-limit slope, which is the convention used
    by the Jacobian assembly.
    """

    def __init__(self, extension, left_slope):
        super().__init__(
            f"extension {extension!r} lies on an unsmoothed kink; "
            f"left-limit slope is {left_slope!r}"
        )
        self.extension = extension
        self.left_slope = left_slope


class DegenerateBond(BondnetError, ArithmeticError):
    """A bond collapsed to (near) zero length where the law has no finite limit."""

    def __init__(self, message, bond=None):
        super().__init__(message)
        self.bond = bond


# -- equilibrium / solver --------------------------------------------------

class PartitionError(InputError):
    pass


class ProblemError(InputError):
    pass


class SolverError(BondnetError, RuntimeError):
    pass


class StepFailure(SolverError):
    """A load step failed to converge during a sweep.

    ``last_converged_step`` is 0 when the first step already failed;
    ``report`` holds the state of the failed step.
    """

    def __init__(self, last_converged_step, report):
        super().__init__(
            f"load step {last_converged_step + 1} failed with status "
            f"{report.status.value}"
        )
        self.last_converged_step = last_converged_step
        self.report = report


# -- scenario I/O ----------------------------------------------------------

class ScenarioError(InputError):
    pass


class ParseError(ScenarioError):
    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


class UnknownNodeId(ScenarioError):
    pass


class UnknownLawId(ScenarioError):
    pass


class ConflictingConstraint(ScenarioError):
    pass


class InvalidGridDimensions(ScenarioError):
    pass
