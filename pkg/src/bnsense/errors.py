"""Exception hierarchy shared by the engine, CLI, and service.

Everything raised on a bad *input* (as opposed to a bug) derives from
EngineError so the CLI can map it to exit code 1 and the HTTP layer to 422.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for domain errors (bad networks, scenarios, parameters)."""


class InvalidNetworkError(EngineError):
    """A network failed validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid network: {lines}")


class DocumentError(EngineError):
    """A document failed to parse or validate; carries positioned issues."""

    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(str(i) for i in self.issues)
        super().__init__(f"invalid document: {lines}")


class UnknownEntityError(EngineError):
    """A variable, state, configuration, or parameter reference did not resolve."""


class InvalidScenarioError(EngineError):
    """Scenario is malformed, e.g. target variable listed as evidence."""


class FrozenParameterError(EngineError):
    """Operation on a deterministic (0/1) parameter that cannot be varied."""


class ZeroEvidenceError(EngineError):
    """The evidence assignment has probability zero under the model."""


class OutOfDomainError(EngineError):
    """A parameter perturbation or edit left the valid parameter domain."""


class EnumerationLimitError(EngineError):
    """Brute-force enumeration refused: state space above the supported cap."""


class SamplingError(EngineError):
    """Monte Carlo run produced no usable (positively weighted) samples."""


class SupportError(EngineError):
    """Logarithmic rule applied where the model assigns zero probability."""


class FitDivergenceError(EngineError):
    """The fit objective became non-finite."""

    def __init__(self, epoch: int, assessment_index: int):
        self.epoch = epoch
        self.assessment_index = assessment_index
        super().__init__(
            f"fit diverged at epoch {epoch} on assessment {assessment_index}"
        )


class AssessmentEvaluationError(EngineError):
    """Wraps a per-assessment failure with the offending assessment index."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"assessment {index}: {cause}")
