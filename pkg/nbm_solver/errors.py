class NbmError(Exception):
    """Base class for every error raised by nbm_solver."""
    pass


class GeometryDomainError(NbmError, ValueError):
    """Raised when a point lies outside a sampled grid or a grid is malformed."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point

    def __str__(self):
        if self.point is None:
            return self.args[0]
        return f"{self.args[0]} (point {tuple(float(c) for c in self.point)})"


class DegenerateGradientError(NbmError, ArithmeticError):
    """Raised when |grad phi| vanishes where a normal is required."""

    def __init__(self, point, magnitude):
        super().__init__()
        self.point = point
        self.magnitude = magnitude

    def __str__(self):
        return (
            f"Degenerate level-set gradient |grad phi| = {self.magnitude:.3e} "
            f"at {tuple(float(c) for c in self.point)}"
        )


class PreconditionViolation(NbmError, ValueError):
    pass


class DegenerateStencilError(NbmError, ArithmeticError):
    """Raised when a one-sided least-squares system is rank deficient."""

    def __init__(self, side, members):
        super().__init__()
        self.side = side
        self.members = members

    def __str__(self):
        return (
            f"Rank-deficient least-squares stencil on side '{self.side}' "
            f"({self.members} member neighbours)"
        )


class SingularExtrapolationError(NbmError, ArithmeticError):
    def __init__(self, side, denominator):
        super().__init__()
        self.side = side
        self.denominator = denominator

    def __str__(self):
        return (
            f"Singular extrapolation on side '{self.side}': "
            f"1 +/- zeta = {self.denominator:.3e}"
        )


class FootprintError(NbmError, KeyError):
    """Raised when a residual is assembled without a required network value."""

    def __init__(self, position, side):
        super().__init__()
        self.position = position
        self.side = side

    def __str__(self):
        return (
            f"Missing footprint value for side '{self.side}' at "
            f"{tuple(float(c) for c in self.position)}"
        )


class TrainingDivergedError(NbmError, FloatingPointError):
    """Raised when the loss turns NaN/Inf; carries a dump of the training state."""

    def __init__(self, epoch, step, last_finite_loss, state_dump=None):
        super().__init__()
        self.epoch = epoch
        self.step = step
        self.last_finite_loss = last_finite_loss
        self.state_dump = state_dump

    def __str__(self):
        return (
            f"Non-finite loss at epoch {self.epoch} (optimizer step {self.step}); "
            f"last finite loss {self.last_finite_loss}"
        )


class FileFormatError(NbmError, OSError):
    """Raised when a checkpoint or level-set grid file cannot be decoded."""

    def __init__(self, message, offset, path="(unknown file)"):
        super().__init__(message)
        self.message = message
        self.offset = offset
        self.path = path

    def __str__(self):
        return f"Malformed file {self.path} at byte offset {self.offset}: {self.message}"


class InvalidConfigError(NbmError, ValueError):
    """Raised when a run configuration is malformed or inconsistent."""
    pass
