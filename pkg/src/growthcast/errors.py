class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """Inputs are inconsistent with each other (shapes, variants, ids)."""


class KernelError(RuntimeError):
    """An MCMC kernel could not produce a valid update."""


class ChainError(RuntimeError):
    """A Markov chain hit a non-finite state or a failing step."""

    def __init__(self, message, step=None, sweep=None):
        super().__init__(message)
        self.step = step
        self.sweep = sweep
