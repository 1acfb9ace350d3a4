"""Exception types shared across the package."""


class HlabError(ValueError):
    """Base class for all hlab errors."""


class SingularSymbolError(HlabError):
    """A Fourier multiplier is non-finite at some grid wavevector."""


class UnderResolvedError(HlabError):
    """Grid cannot resolve the requested correlation length."""


class InvalidSpectrumError(HlabError):
    """Power spectrum violates nonnegativity or support constraints."""


class IncompatibleEnsembleError(HlabError):
    """Realizations or bundles do not share a common grid / scale."""


class InsufficientEnsembleError(HlabError):
    """Too few realizations for the requested Monte Carlo estimate."""


class RhoUndefinedError(HlabError):
    """The homogenized constant diverges (slow correlation decay)."""


class DegenerateFitError(HlabError):
    """Rate fit received non-positive or insufficient data."""


class ConfigError(HlabError):
    """Malformed experiment configuration."""


class SolverStagnationError(RuntimeError):
    """Krylov solver failed to reach the requested residual.

    Carries the preconditioned residual history so the caller can inspect
    how the iteration stalled instead of silently using a bad iterate.
    """

    def __init__(self, message, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


class CampaignError(RuntimeError):
    """Too many cells of a Monte Carlo campaign failed."""
