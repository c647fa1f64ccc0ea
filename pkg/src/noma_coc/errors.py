"""Exception types shared across the package."""


class NomaCocError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NomaCocError):
    """Invalid or mutually inconsistent configuration values."""


class ContractError(NomaCocError):
    """A caller violated an operation precondition."""


class DegenerateClusterError(NomaCocError):
    """A cluster has no usable pre-outage power to scale from."""


class BudgetExceededError(NomaCocError):
    """An enumeration or wall-time budget was exhausted.

    ``completed`` carries how many items finished before the cut-off.
    """

    def __init__(self, message: str, completed: int = 0):
        super().__init__(message)
        self.completed = completed


class InfeasibleError(NomaCocError):
    """A power-allocation problem has no strictly feasible point.

    ``binding`` names the constraints at the phase-I optimum.
    """

    def __init__(self, message: str, binding: list[str] | None = None):
        super().__init__(message)
        self.binding = binding or []

    def certificate(self) -> dict:
        return {"infeasible": True, "binding": self.binding, "detail": str(self)}
