"""Exception hierarchy shared by every stage of the pipeline."""


class BlockGGMError(Exception):
    """Base class for all errors raised by blockggm."""


class InputError(BlockGGMError, ValueError):
    """Malformed data: wrong shape, non-finite entries, missing values."""


class ConstantColumn(InputError):
    """A column has (numerically) zero variance and cannot be standardized."""

    def __init__(self, index, name=None):
        self.index = index
        self.name = name
        label = f"{name!r} (column {index})" if name is not None else f"column {index}"
        super().__init__(f"{label} is constant; drop it before analysis")


class SingularBlock(BlockGGMError):
    """The MLE covariance of a block is singular (p_k >= n or rank deficient)."""

    def __init__(self, block_index, size, n):
        self.block_index = block_index
        self.size = size
        self.n = n
        super().__init__(
            f"block {block_index} of size {size} has a singular MLE covariance (n={n})"
        )


class EmptyCandidateSet(BlockGGMError):
    pass


class DegeneratePath(BlockGGMError):
    """All candidate models share a single dimension; no slope can be read."""


class InsufficientComplexModels(BlockGGMError):
    pass


class SingularInput(BlockGGMError):
    pass


class NotConverged(BlockGGMError):
    """The glasso solver hit ``max_iter``; ``estimate`` holds the last iterate."""

    def __init__(self, max_iter, estimate=None):
        self.max_iter = max_iter
        self.estimate = estimate
        super().__init__(f"graphical lasso did not converge in {max_iter} sweeps")
