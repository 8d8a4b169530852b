"""Exception hierarchy. CLI exit codes key off these classes."""


class TrajGanError(Exception):
    exit_code = 2


class ContractError(TrajGanError):
    """A caller broke an operation's precondition."""

    exit_code = 1


class DimensionError(ContractError, ValueError):
    pass


class NumericError(TrajGanError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, op=None):
        super().__init__(message)
        self.op = op


class ConfigError(TrajGanError, ValueError):
    exit_code = 1


class MalformedSceneError(TrajGanError, ValueError):
    pass


class SceneFormatError(MalformedSceneError):
    pass


class CheckpointError(TrajGanError):
    pass
