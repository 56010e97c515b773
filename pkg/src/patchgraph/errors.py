"""Exception types shared across the engine."""


class PatchGraphError(Exception):
    pass


class ShapeError(PatchGraphError, ValueError):
    pass


class DomainError(PatchGraphError, ValueError):
    pass


class ContractError(PatchGraphError, ValueError):
    pass


class CapacityError(PatchGraphError, ValueError):
    pass


class BoundsError(PatchGraphError, IndexError):
    pass


class NumericalError(PatchGraphError, ArithmeticError):
    pass


class CheckpointError(PatchGraphError):
    def __init__(self, message, mismatches=()):
        super().__init__(message)
        self.mismatches = list(mismatches)


class ConfigError(PatchGraphError, ValueError):
    pass
