"""Exception hierarchy shared by every solver.

Library code raises these; only :func:`qtazrp_lab.cli.run` turns them into exit codes.
"""


class QTazrpError(Exception):
    """Base class for all errors raised by qtazrp_lab."""


class DomainError(QTazrpError, ValueError):
    """An argument violates an operation's precondition."""


class PoleError(DomainError):
    """Evaluation at (or numerically too close to) a pole."""


class ContourError(DomainError):
    """A contour family fails its nesting or enclosure conditions."""


class ResourceError(QTazrpError):
    """A state, path or quadrature size limit was exceeded."""


class ConsistencyError(QTazrpError):
    """An internal invariant failed; this indicates a bug, not bad input."""


class CrossCheckError(QTazrpError):
    """Two methods that must agree differ by more than the tolerance."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CROSS_CHECK = 3
