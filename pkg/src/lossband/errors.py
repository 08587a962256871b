"""Exception types shared across the package."""


class LossbandError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(LossbandError):
    """A parameter vector or dataset does not match the expected dimension."""


class NonFiniteValue(LossbandError):
    """An input or computed quantity is NaN or infinite."""


class ChainError(LossbandError):
    """A chain operation received an invalid chain, index or geometry."""


class PermutationError(LossbandError):
    """An invalid hidden-layer index or unit permutation was supplied."""


class TrainingDiverged(LossbandError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"loss became non-finite at step {step}")


class RelaxationFailed(LossbandError):
    """Path relaxation produced a non-finite loss or gradient."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"non-finite value at relaxation iteration {iteration}")


class InsertionError(LossbandError):
    """Pivot insertion candidates are inconsistent (e.g. duplicate segments)."""


class GraphError(LossbandError):
    """A landscape-graph operation received inconsistent data."""


class DisconnectedGraph(GraphError):
    """The landscape graph does not span its nodes."""

    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        super().__init__(f"graph is disconnected; components: {self.components}")


class GridDomainError(LossbandError):
    """A query point lies outside the grid specification."""


class ConfigError(LossbandError):
    """Invalid experiment configuration or command-line usage."""
