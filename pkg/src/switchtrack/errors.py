"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario, type invariant, or schema constraint is violated."""


class InfeasibleScenarioError(ConfigurationError):
    """Configuration is well formed but cannot satisfy its own guarantees."""


class DegenerateInputError(ValueError):
    """The operation has no defined result for this input."""


class ContractViolationError(RuntimeError):
    """A caller broke an interface precondition."""


class NumericFaultError(ArithmeticError):
    """The simulation produced a non-finite value."""
