"""Exception hierarchy.

Every failure mode raised by the library belongs to one of the families
below so the command-line layer can map it to a stable exit code.
"""


class BosonBenchError(Exception):
    """Base class for all library errors."""


class ConfigError(BosonBenchError):
    """Bad user input: unknown keys, malformed values, inconsistent flags."""


class ConstructionError(BosonBenchError):
    """A state or operator could not be built as requested."""


class InvalidDimensionError(ConstructionError):
    pass


class InvalidArgumentError(ConstructionError):
    pass


class TruncationFailureError(ConstructionError):
    """Required Fock-space dimension exceeds the configured cap, or the
    constructed state keeps too much weight above the cutoff."""


class LatticeWindowError(ConstructionError):
    """The coherent-state lattice sum would need a window beyond the
    supported size to reach the requested tolerance."""


class InvalidEnvelopeError(ConstructionError):
    """Envelope parameters are unphysical (e.g. mean photon number below
    the squeezing contribution)."""


class CertificationError(BosonBenchError):
    """A channel failed its completeness certificate."""


class IncompleteChannelError(CertificationError):
    pass


class NumericalConsistencyError(BosonBenchError):
    """An internal cross-check left its tolerance band."""


class OracleScaleError(BosonBenchError):
    """The brute-force recovery oracle was asked for a problem size it is
    not meant to handle."""


class OptimizationFailureError(BosonBenchError):
    """No candidate in an optimization run produced a usable evaluation."""


class CheckpointError(BosonBenchError):
    """A sweep checkpoint is unreadable or does not match the run config."""


# Exit codes used by the CLI, one per error family.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSTRUCTION = 3
EXIT_CERTIFICATION = 4
EXIT_NUMERICAL = 5
EXIT_ORACLE = 6
EXIT_OPTIMIZATION = 7
EXIT_CHECKPOINT = 8


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code of its error family."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, ConstructionError):
        return EXIT_CONSTRUCTION
    if isinstance(exc, CertificationError):
        return EXIT_CERTIFICATION
    if isinstance(exc, NumericalConsistencyError):
        return EXIT_NUMERICAL
    if isinstance(exc, OracleScaleError):
        return EXIT_ORACLE
    if isinstance(exc, OptimizationFailureError):
        return EXIT_OPTIMIZATION
    if isinstance(exc, CheckpointError):
        return EXIT_CHECKPOINT
    return 1
