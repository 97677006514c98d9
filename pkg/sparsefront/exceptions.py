"""Exception hierarchy; ``exit_code`` is what the CLI returns for each family."""


class SparseFrontError(Exception):
    exit_code = 1


class ConfigurationError(SparseFrontError):
    exit_code = 2


class DataError(ConfigurationError):
    pass


class InfeasibleError(ConfigurationError):
    pass


class PreconditionError(SparseFrontError, ValueError):
    pass


class NumericalError(SparseFrontError):
    exit_code = 3


class DomainError(NumericalError):
    pass
