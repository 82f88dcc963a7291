"""Exception hierarchy shared by all modules."""


class FormalPowerError(Exception):
    """Base class for every error raised by this package."""


class DomainParameterError(FormalPowerError, ValueError):
    pass


class GeometryError(FormalPowerError):
    """A point, stencil or integration path leaves the domain."""


class IntegrationError(FormalPowerError):
    """Non-finite integrand value encountered during quadrature."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class CompatibilityError(FormalPowerError):
    """The field handed to the antiderivative operator is not a gradient."""


class PathError(GeometryError):
    pass


class AlgebraError(FormalPowerError, ValueError):
    pass


class DegeneratePairError(FormalPowerError):
    pass


class ConformalMapError(FormalPowerError):
    pass


class SeparabilityError(FormalPowerError):
    pass


class PositivityError(FormalPowerError):
    pass


class NotASolutionError(FormalPowerError):
    pass


class IllConditionedError(FormalPowerError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnderdeterminedError(FormalPowerError, ValueError):
    pass


class ConfigError(FormalPowerError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
