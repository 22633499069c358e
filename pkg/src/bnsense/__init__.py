"""Sensitivity analysis and assessment fitting for discrete Bayesian networks.

The package computes exact derivatives of posterior target probabilities
with respect to individual network parameters, estimates the same values by
weighted sampling, and fits parameters to directly assessed target
distributions by gradient descent on proper scoring-rule distances.
"""

from .errors import (
    AssessmentEvaluationError,
    DocumentError,
    EngineError,
    EnumerationLimitError,
    FitDivergenceError,
    FrozenParameterError,
    InvalidNetworkError,
    InvalidScenarioError,
    OutOfDomainError,
    SamplingError,
    SupportError,
    UnknownEntityError,
    ZeroEvidenceError,
)
from .model import Network, NoisyOrParams, ParamIndex, TableParams, Variable
from .sensitivity import Scenario, SensitivityReport

__all__ = [
    "AssessmentEvaluationError",
    "DocumentError",
    "EngineError",
    "EnumerationLimitError",
    "FitDivergenceError",
    "FrozenParameterError",
    "InvalidNetworkError",
    "InvalidScenarioError",
    "Network",
    "NoisyOrParams",
    "OutOfDomainError",
    "ParamIndex",
    "SamplingError",
    "Scenario",
    "SensitivityReport",
    "SupportError",
    "TableParams",
    "UnknownEntityError",
    "Variable",
    "ZeroEvidenceError",
]
