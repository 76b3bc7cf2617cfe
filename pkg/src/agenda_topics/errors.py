"""Exception hierarchy for the agenda topic pipeline.

Per-record problems (short documents, unmatched seed codes, missing strata)
are reported as values and warnings; the exceptions below are reserved for
conditions that stop a run. The CLI maps each class to its own exit code.
"""


class AgendaError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigurationError(AgendaError):
    """Invalid configuration, missing input file, or unusable settings."""

    exit_code = 2


class SeedSchemeError(ConfigurationError):
    """Seed scheme file is malformed or has overlapping patterns."""


class DataError(AgendaError):
    """Input data violates a documented precondition."""

    exit_code = 3


class RankDeficiencyError(DataError):
    """Regression design matrix is not of full column rank."""

    def __init__(self, predictors: list[str]):
        self.predictors = predictors
        super().__init__(f"Design matrix is rank deficient; collinear predictors: {', '.join(predictors)}")


class MissingTopicMetadataError(DataError):
    """A retained new topic has no user-supplied label and type."""

    def __init__(self, missing: dict[int, list[str]]):
        self.missing = missing
        lines = [f"  topic {topic_id}: {' '.join(words)}" for topic_id, words in missing.items()]
        super().__init__("Missing topic metadata for retained new topics:\n" + "\n".join(lines))


class InstanceTooLargeError(DataError):
    """Exact enumeration requested on an instance beyond the size limit."""

    def __init__(self, n_assignments: int, limit: int):
        self.n_assignments = n_assignments
        self.limit = limit
        super().__init__(f"Instance has {n_assignments:,} canonical assignments; enumeration limit is {limit:,}")


class InvariantViolation(AgendaError):
    """A model invariant no longer holds; the state must not be used."""

    exit_code = 4

    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"Invariant '{invariant}' violated: {detail}")
