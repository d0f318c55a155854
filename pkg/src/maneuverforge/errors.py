"""Exception types shared across the package."""

from __future__ import annotations


class ManeuverForgeError(Exception):
    """Base class for all package errors."""


class InvalidControl(ManeuverForgeError):
    """A raw control channel was non-finite."""


class SimulationDiverged(ManeuverForgeError):
    """Integration produced a non-finite state.

    ``trajectory`` holds the partial log accumulated before the fault,
    when the fault occurred inside a rollout.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class MalformedPlan(ManeuverForgeError):
    """A maneuver plan violates its structural invariants."""


class OutOfRange(ManeuverForgeError):
    """A lookup time falls outside a control schedule."""


class EmptyTrajectory(ManeuverForgeError):
    """A metric needs at least one sample."""


class TooShort(ManeuverForgeError):
    """A trajectory has too few samples for a differential metric."""


class TooFewSamples(ManeuverForgeError):
    """A statistic needs at least two samples."""


class Rejected(ManeuverForgeError):
    """The validator refused a plan; ``report`` carries the verdict."""

    def __init__(self, report):
        super().__init__(f"plan rejected with {len(report.violations)} violation(s)")
        self.report = report


class EnrichmentFailed(ManeuverForgeError):
    """Query enrichment could not be completed."""


class SchemaViolation(ManeuverForgeError):
    """A generated document does not conform to the requested schema."""


class BackendUnavailable(ManeuverForgeError):
    """The generation backend could not be reached."""


class Timeout(ManeuverForgeError):
    """The generation backend did not answer in time."""


class AuthMissing(ManeuverForgeError):
    """The endpoint requires credentials that are absent or wrong."""


class RateLimited(ManeuverForgeError):
    """Retries were exhausted against HTTP 429 responses."""


class FixtureExhausted(ManeuverForgeError):
    """A replay fixture ran out of records before the run finished."""


class FixtureMismatch(ManeuverForgeError):
    """A replayed record was made for a different output schema."""


class AllIterationsRejected(ManeuverForgeError):
    """No iteration of a run produced measurable metrics."""


class ConfigError(ManeuverForgeError):
    """A run configuration file is malformed or has unknown keys."""
