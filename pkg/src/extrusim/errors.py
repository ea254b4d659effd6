"""Exception types shared across the package.

Everything derives from ExtrusimError so callers can catch solver failures
with a single except clause, while the CLI maps the subclasses onto exit
codes.
"""


class ExtrusimError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ExtrusimError, ValueError):
    """An argument lies outside its admissible physical range."""


class SingularityError(ExtrusimError, ZeroDivisionError):
    """A denominator that must stay away from zero did not."""


class GridError(ExtrusimError, ValueError):
    """Sampled functions do not share the grid an operation requires."""


class ResolutionError(ExtrusimError, ValueError):
    """A requested step or horizon cannot be resolved on the given grid."""


class CompatibilityError(ExtrusimError, ValueError):
    """Initial and boundary data disagree at the inflow corner."""


class ConvergenceError(ExtrusimError, RuntimeError):
    """An iteration hit its cap before reaching the requested tolerance."""


class DivergenceError(ExtrusimError, RuntimeError):
    """A fixed-point iterate left its admissible set."""


class FeasibilityError(ExtrusimError, ValueError):
    """A control problem is posed over an infeasible horizon or target."""


class SchemeError(ExtrusimError, RuntimeError):
    """A discrete scheme violated one of its validity conditions mid-run."""


class SchemaError(ExtrusimError, ValueError):
    """A configuration file violates the documented schema.

    The message starts with the first offending key so the CLI can report
    it verbatim.
    """
