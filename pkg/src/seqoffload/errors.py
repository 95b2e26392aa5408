"""Exception hierarchy shared by the solvers."""


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class BracketError(ValueError):
    """The function has no sign change on the supplied bracket."""


class BracketOverflow(OverflowError):
    """No sign change was found before the bracket cap was exceeded."""


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap.

    ``residual`` carries the last measured residual, when one exists.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(ValueError):
    """No allocation satisfies the constraints.

    ``constraint`` names the binding constraint (e.g. ``"deadline"``,
    ``"mobility"``, ``"bracket"``) and ``subject`` the offending entity id.
    """

    def __init__(self, message, constraint=None, subject=None):
        super().__init__(message)
        self.constraint = constraint
        self.subject = subject
