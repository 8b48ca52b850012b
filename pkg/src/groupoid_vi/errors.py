"""Exception types shared across the toolkit."""


class GroupoidVIError(Exception):
    """Base class for every error raised by this package."""


class NotComposable(GroupoidVIError):
    """Arrow endpoints do not match within the composability tolerance."""


class OutOfBranch(GroupoidVIError):
    """Group element lies outside the injectivity branch of the logarithm."""


class SingularTau(GroupoidVIError):
    """The retraction map cannot be inverted at the requested point."""


class SingularHessian(GroupoidVIError):
    """Fiber Hessian of the Lagrangian is singular or too ill-conditioned."""


class SingularJacobian(GroupoidVIError):
    """Newton Jacobian became singular during a solve."""


class SingularRegularityMatrix(GroupoidVIError):
    """Discrete Lagrangian fails the regularity test at the current arrow."""


class NoConvergence(GroupoidVIError):
    """Iterative solver exhausted its budget without meeting tolerance."""


class StepFailure(GroupoidVIError):
    """Adaptive integrator could not complete a step."""


class EmptyCertificate(GroupoidVIError):
    """No step size satisfies all convexity inequalities."""


class InsufficientPoints(GroupoidVIError):
    """Too few usable grid points for a log-log order fit."""
