class LabError(ValueError):
    """Base class for every error raised by the laboratory."""


class SymmetryError(LabError):
    def __init__(self, violation, tol, message=None):
        self.violation = violation
        super().__init__(message or f'matrix is not self-adjoint: max |A - A^H| = {violation:.3e} > {tol:.1e}')


class DomainError(LabError):
    def __init__(self, function_name, eigenvalue):
        self.eigenvalue = eigenvalue
        super().__init__(f'{function_name} is undefined at eigenvalue {eigenvalue!r}')


class ParameterError(LabError):
    pass


class DimensionError(LabError):
    pass


class PositivityError(LabError):
    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message or f'matrix is not positive definite: minimum eigenvalue {min_eigenvalue:.3e}')


class TraceError(LabError):
    def __init__(self, trace, expected=1.0):
        self.trace = trace
        super().__init__(f'state has trace {trace!r}, expected {expected!r}')


class BasisError(LabError):
    pass


class ChartError(LabError):
    def __init__(self, theta, reason):
        self.theta = theta
        super().__init__(f'chart evaluation failed at theta={list(theta)}: {reason}')


class ChannelError(LabError):
    pass


class ConfigError(LabError):
    def __init__(self, field_name, message):
        self.field_name = field_name
        super().__init__(f'{field_name}: {message}')
