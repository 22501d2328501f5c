"""Exception types raised across the package."""


class RpcaError(Exception):
    """Base class for every error raised by rpcadpd."""


class DimensionError(RpcaError, ValueError):
    pass


class DomainError(RpcaError, ValueError):
    pass


class ConfigError(RpcaError, ValueError):
    pass


class RankError(RpcaError, ValueError):
    pass


class DegenerateBasisError(RpcaError, ArithmeticError):
    pass


class DegenerateSpectrumError(RpcaError, ArithmeticError):
    pass


class HarnessError(RpcaError, RuntimeError):
    pass


class ConvergenceError(RpcaError, RuntimeError):
    """Iteration cap reached; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
