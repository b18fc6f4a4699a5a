"""Exception hierarchy.

Every numerical guard raises a subclass of :class:`NumericalGuard`; the CLI
maps those to exit code 3 and :class:`ConfigError` to exit code 2.
"""


class NHRMError(Exception):
    pass


class NumericalGuard(NHRMError):
    pass


class GapClosed(NumericalGuard):
    """Raised at the band-touching point (delta, V) = (0, 0), k = pi."""


class IndefinitePhase(NumericalGuard):
    """Raised when gamma_k = 0 with V != 0, where the azimuth is undefined."""


class GaugeSingular(NumericalGuard):
    """Raised when a gauge is evaluated at its own singular pole."""


class LoopThroughDegeneracy(NumericalGuard):
    def __init__(self, min_distance, tol):
        self.min_distance = min_distance
        self.tol = tol
        super().__init__(
            f"loop passes within {min_distance:.3e} of the degeneracy point "
            f"(tolerance {tol:.1e})"
        )


class GridTooCoarse(NumericalGuard):
    pass


class RatioPole(NumericalGuard):
    pass


class ComplexSpectrum(NumericalGuard):
    pass


class BondAbsent(NHRMError, IndexError):
    pass


class NormDrift(NumericalGuard):
    def __init__(self, message, suggested_steps=None):
        self.suggested_steps = suggested_steps
        if suggested_steps is not None:
            message = f"{message}; try n_steps >= {suggested_steps}"
        super().__init__(message)


class ConfigError(NHRMError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
