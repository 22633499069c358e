"""Scoring-rule distances, their parameter gradients, and gradient-descent
fitting of a network to directly assessed target distributions.

A fit visits assessments one at a time (per-scenario stochastic descent),
stepping every unscreened, non-frozen parameter against the gradient of the
weighted distance. Raw table weights are clamped to a positive floor and
rows rescaled to unit sum, which leaves the represented distribution's
constraint set intact without a projection step; noisy-OR values are kept
inside the open unit interval the same way.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import inference, model
from .errors import (
    AssessmentEvaluationError,
    EngineError,
    FitDivergenceError,
    InvalidScenarioError,
    SupportError,
)
from .inference import InferenceContext
from .model import Network, NoisyOrParams, ParamIndex
from .sensitivity import Scenario, _expectations, check_scenario, screen_structural_zeros, sensitivities

LOGARITHMIC = "logarithmic"
QUADRATIC = "quadratic"

HOLISTIC = "holistic"
LOCAL = "local"


@dataclass(frozen=True)
class ScoringRule:
    tag: str

    def __post_init__(self):
        if self.tag not in (LOGARITHMIC, QUADRATIC):
            raise ValueError(f"unknown scoring rule {self.tag!r}")


@dataclass(frozen=True)
class Assessment:
    """A directly judged target distribution for one scenario.

    A local judgment (a CPT row an expert stands behind) is the same thing
    with the parent configuration as evidence and the node as target, so
    both kinds flow through one code path; `kind` is retained for reporting.
    """

    scenario: Scenario
    assessed: Mapping[str, float]
    weight: float = 1.0
    kind: str = HOLISTIC


def check_assessment(net: Network, a: Assessment) -> None:
    check_scenario(net, a.scenario)
    states = net.var(a.scenario.target).states
    if set(a.assessed) != set(states):
        raise InvalidScenarioError(
            f"assessed distribution keys {sorted(a.assessed)} do not match "
            f"states of {a.scenario.target!r}")
    values = [a.assessed[s] for s in states]
    if any(v < 0 for v in values) or abs(sum(values) - 1.0) > 1e-9:
        raise InvalidScenarioError(
            f"assessed distribution for {a.scenario.target!r} must be "
            "nonnegative and sum to 1")
    if not a.weight > 0:
        raise InvalidScenarioError("assessment weight must be positive")
    if a.kind not in (HOLISTIC, LOCAL):
        raise InvalidScenarioError(f"unknown assessment kind {a.kind!r}")


@dataclass(frozen=True)
class FitConfig:
    step_size: float = 0.2
    max_epochs: int = 200
    convergence_tol: float = 1e-8
    restarts: int = 1
    scenario_order: str = "fixed-cycle"
    parameter_floor: float = 1e-6
    seed: int = 0
    step_schedule: str = "halving"
    outlier_factor: float = 3.0
    outlier_min_distance: float = 1e-3
    screening: bool = True

    def __post_init__(self):
        if self.step_size <= 0 or self.max_epochs < 1 or self.restarts < 1:
            raise ValueError("step_size, max_epochs and restarts must be positive")
        if not 0 < self.convergence_tol < 1:
            raise ValueError("convergence_tol must lie in (0, 1)")
        if self.scenario_order not in ("fixed-cycle", "shuffled"):
            raise ValueError(f"unknown scenario order {self.scenario_order!r}")
        if self.step_schedule not in ("halving", "fixed"):
            raise ValueError(f"unknown step schedule {self.step_schedule!r}")
        if not 0 < self.parameter_floor < 0.5:
            raise ValueError("parameter_floor must lie in (0, 0.5)")
        if self.outlier_factor <= 0:
            raise ValueError("outlier_factor must be positive")
        if self.outlier_min_distance < 0:
            raise ValueError("outlier_min_distance must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    network: Network
    objective_trace: tuple[float, ...]
    distances: tuple[float, ...]
    outliers: tuple[int, ...]
    restart_index: int


# -- distances ---------------------------------------------------------------


def score_distance(p: Sequence[float], p_star: Sequence[float], rule: ScoringRule) -> float:
    """Expected-score distance of model distribution p from assessment p*.

    Logarithmic rule: sum of p*·(log p* - log p), the divergence of p from
    p*, zero exactly at p = p*. Quadratic rule: sum of
    (p*(1-p*) + (p-p*)²)·p*, which is offset by its own value at p = p* but
    has the same minimizer.
    """
    pv = np.asarray(p, dtype=float)
    sv = np.asarray(p_star, dtype=float)
    if pv.shape != sv.shape:
        raise InvalidScenarioError("distributions must cover the same states")
    if rule.tag == LOGARITHMIC:
        total = 0.0
        for pi, si in zip(pv, sv):
            if si <= 0.0:
                continue
            if pi <= 0.0:
                raise SupportError(
                    "model assigns probability 0 to an assessed-positive state")
            total += si * (math.log(si) - math.log(pi))
        return total
    h = sv * (1.0 - sv) + (pv - sv) ** 2
    return float(h @ sv)


def _h_prime(rule: ScoringRule, p: np.ndarray, p_star: np.ndarray) -> np.ndarray:
    if rule.tag == LOGARITHMIC:
        out = np.zeros_like(p)
        mask = p_star > 0.0
        out[mask] = -1.0 / p[mask]
        return out
    return 2.0 * (p - p_star)


def _aligned_assessed(net: Network, a: Assessment) -> np.ndarray:
    states = net.var(a.scenario.target).states
    return np.array([float(a.assessed[s]) for s in states])


def assessment_distance(
    net: Network, a: Assessment, rule: ScoringRule, ctx: InferenceContext | None = None
) -> float:
    """Current distance of the model from one assessment."""
    check_assessment(net, a)
    if ctx is None:
        ctx = inference.compile(net)
    cal = ctx.propagate(a.scenario.evidence, net=net)
    marg = cal.marginal(a.scenario.target)
    return score_distance(marg / marg.sum(), _aligned_assessed(net, a), rule)


def distance_gradient(
    net: Network,
    a: Assessment,
    rule: ScoringRule,
    ctx: InferenceContext | None = None,
    screen: bool = True,
) -> dict[ParamIndex, float]:
    """Exact gradient of the assessment distance over interior parameters.

    Chain rule over the per-state posterior derivatives; structurally
    screened parameters come out exactly 0, frozen ones are absent.
    """
    check_assessment(net, a)
    if ctx is None:
        ctx = inference.compile(net)
    report = sensitivities(net, a.scenario, ctx=ctx) if screen else _unscreened_report(net, a.scenario, ctx)
    p = np.asarray(report.target_marginal)
    p_star = _aligned_assessed(net, a)
    if rule.tag == LOGARITHMIC and bool(np.any((p_star > 0.0) & (p <= 0.0))):
        raise SupportError("model assigns probability 0 to an assessed-positive state")
    hp = _h_prime(rule, p, p_star)
    coeff = {s: float(p_star[i] * hp[i]) for i, s in enumerate(report.target_states)}
    grad: dict[ParamIndex, float] = {}
    for (param, state), value in report.entries.items():
        grad[param] = grad.get(param, 0.0) + coeff[state] * value
    return grad


def _unscreened_report(net: Network, sc: Scenario, ctx: InferenceContext):
    """Sensitivity entries computed the long way for every interior parameter."""
    from .sensitivity import SensitivityReport

    params = [p for v in net.variables for p in model.interior_params(net, v.id)]
    states, p_t, cond, uncond = _expectations(net, sc, ctx, params)
    entries = {
        (p, s): float(p_t[i] * (cond[p][i] - uncond[p]))
        for p in params
        for i, s in enumerate(states)
    }
    return SensitivityReport(
        scenario=sc,
        target_states=states,
        target_marginal=tuple(float(x) for x in p_t),
        entries=entries,
        structural_zero=frozenset(),
        frozen=frozenset(
            p for v in net.variables for p in net.param_indices(v.id)
            if model.is_frozen(net, p)),
        node_max={},
    )


def log_gradient_expectation_form(
    net: Network, a: Assessment, ctx: InferenceContext | None = None
) -> dict[ParamIndex, float]:
    """Logarithmic-rule gradient as a difference of U expectations.

    For the log rule the chain rule collapses: the gradient equals
    E[U | x_e] minus the assessment-weighted mixture of the per-state
    conditional expectations. Must agree with distance_gradient.
    """
    check_assessment(net, a)
    if ctx is None:
        ctx = inference.compile(net)
    params = [p for v in net.variables for p in model.interior_params(net, v.id)]
    states, p_t, cond, uncond = _expectations(net, a.scenario, ctx, params)
    p_star = _aligned_assessed(net, a)
    if bool(np.any((p_star > 0.0) & (p_t <= 0.0))):
        raise SupportError("model assigns probability 0 to an assessed-positive state")
    return {p: float(uncond[p] - cond[p] @ p_star) for p in params}


def aggregate_objective(
    net: Network,
    assessments: Sequence[Assessment],
    rule: ScoringRule,
    ctx: InferenceContext | None = None,
    screen: bool = True,
) -> tuple[float, dict[ParamIndex, float]]:
    """Weighted total distance and its gradient over all assessments."""
    if ctx is None:
        ctx = inference.compile(net)
    total = 0.0
    grad: dict[ParamIndex, float] = {}
    for i, a in enumerate(assessments):
        try:
            total += a.weight * assessment_distance(net, a, rule, ctx)
            for p, g in distance_gradient(net, a, rule, ctx, screen=screen).items():
                grad[p] = grad.get(p, 0.0) + a.weight * g
        except EngineError as e:
            raise AssessmentEvaluationError(i, e) from e
    return total, grad


# -- descent -----------------------------------------------------------------


def _project(net: Network, floor: float) -> Network:
    """Clamp interior raw parameters away from the boundary.

    Deterministic (frozen) entries are left byte-identical; table rows with
    at least one interior entry are rescaled to unit sum afterwards, which
    preserves zeros and the represented distribution's normalization.
    """
    updates: dict[ParamIndex, float] = {}
    for v in net.variables:
        par = net.params[v.id]
        if isinstance(par, NoisyOrParams):
            for p in net.param_indices(v.id):
                value = net.param_value(p)
                if value in (0.0, 1.0):
                    continue
                clipped = min(max(value, floor), 1.0 - floor)
                if clipped != value:
                    updates[p] = clipped
            continue
        for cfg in net.configurations(v.id):
            row = {s: par.entries[(s, cfg)] for s in v.states}
            nonzero = [s for s, x in row.items() if x != 0.0]
            if len(nonzero) <= 1:
                continue  # deterministic row stays byte-identical
            clamped = {
                s: (max(row[s], floor) if s in nonzero else 0.0) for s in v.states
            }
            total = sum(clamped.values())
            for s in v.states:
                new = clamped[s] / total
                if new != row[s]:
                    updates[ParamIndex(v.id, (s, cfg))] = new
    return net.with_params(updates) if updates else net


def _apply_step(
    net: Network,
    grad: Mapping[ParamIndex, float],
    step: float,
    weight: float,
    floor: float,
) -> Network:
    updates = {
        p: net.param_value(p) - step * weight * g
        for p, g in grad.items()
        if g != 0.0
    }
    if not updates:
        return net
    return _project(net.with_params(updates), floor)


def single_step(
    net: Network,
    a: Assessment,
    rule: ScoringRule,
    step_size: float,
    ctx: InferenceContext | None = None,
    parameter_floor: float = 1e-6,
) -> tuple[Network, np.ndarray, float]:
    """One descent update for one assessment.

    Returns the updated network, the new target distribution under the
    assessment's scenario, and the new distance. This is the interactive
    what-if primitive: apply, look, decide.
    """
    if ctx is None:
        ctx = inference.compile(net)
    grad = distance_gradient(net, a, rule, ctx)
    new_net = _apply_step(net, grad, step_size, a.weight, parameter_floor)
    cal = ctx.propagate(a.scenario.evidence, net=new_net)
    marg = cal.marginal(a.scenario.target)
    p = marg / marg.sum()
    return new_net, p, score_distance(p, _aligned_assessed(net, a), rule)


def _jitter(net: Network, rng: np.random.Generator, floor: float) -> Network:
    """Random multiplicative perturbation of every interior parameter."""
    updates: dict[ParamIndex, float] = {}
    for v in net.variables:
        for p in model.interior_params(net, v.id):
            factor = 1.0 + rng.uniform(-0.3, 0.3)
            value = net.param_value(p) * factor
            if isinstance(net.params[v.id], NoisyOrParams):
                value = min(max(value, floor), 1.0 - floor)
            updates[p] = value
    return _project(net.with_params(updates), floor)


def fit(
    net: Network,
    assessments: Sequence[Assessment],
    rule: ScoringRule,
    cfg: FitConfig,
) -> FitResult:
    """Per-scenario gradient descent to the best-fitting parameter vector.

    Each epoch visits every assessment once and steps against its weighted
    gradient. Under the halving schedule an epoch that increases the total
    objective is rolled back and retried with half the step, so the reported
    trace never increases. The best of `restarts` independently started runs
    wins; starts after the first are seeded multiplicative jitters of the
    given parameters.
    """
    model.require_valid(net)
    if not assessments:
        raise InvalidScenarioError("fit requires at least one assessment")
    for a in assessments:
        check_assessment(net, a)
    base = model.scale_to_unit(net)
    ctx = inference.compile(base)
    touchable = set()
    for a in assessments:
        screened = screen_structural_zeros(base, a.scenario) if cfg.screening else set()
        for v in base.variables:
            touchable.update(p for p in model.interior_params(base, v.id) if p not in screened)
    if not touchable:
        raise InvalidScenarioError(
            "no assessment touches any non-frozen parameter; nothing to fit")

    best: FitResult | None = None
    for r in range(cfg.restarts):
        if r == 0:
            cur = base
        else:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, r])))
            cur = _jitter(base, rng, cfg.parameter_floor)
        result = _fit_once(cur, assessments, rule, cfg, ctx, r)
        if best is None or result.objective_trace[-1] < best.objective_trace[-1]:
            best = replace(result, restart_index=r)
    return best


def _fit_once(
    start: Network,
    assessments: Sequence[Assessment],
    rule: ScoringRule,
    cfg: FitConfig,
    ctx: InferenceContext,
    restart: int,
) -> FitResult:
    def objective(net: Network) -> float:
        total = 0.0
        for i, a in enumerate(assessments):
            try:
                total += a.weight * assessment_distance(net, a, rule, ctx)
            except EngineError as e:
                raise AssessmentEvaluationError(i, e) from e
        return total

    cur = start
    prev = objective(cur)
    trace = [prev]
    step = cfg.step_size
    min_step = cfg.step_size * 2.0**-40

    for epoch in range(cfg.max_epochs):
        order = list(range(len(assessments)))
        if cfg.scenario_order == "shuffled":
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([cfg.seed, restart, epoch])))
            rng.shuffle(order)
        snapshot = cur
        current_index = -1
        try:
            for i in order:
                current_index = i
                a = assessments[i]
                grad = distance_gradient(cur, a, rule, ctx, screen=cfg.screening)
                cur = _apply_step(cur, grad, step, a.weight, cfg.parameter_floor)
            obj = objective(cur)
        except EngineError as e:
            raise AssessmentEvaluationError(current_index, e) from e
        if not math.isfinite(obj):
            raise FitDivergenceError(epoch, current_index)
        if cfg.step_schedule == "halving" and obj > prev:
            cur = snapshot
            step *= 0.5
            if step < min_step:
                break
            continue
        trace.append(obj)
        done = abs(prev - obj) <= cfg.convergence_tol * max(abs(prev), 1e-12)
        prev = obj
        if done:
            break

    distances = tuple(
        float(assessment_distance(cur, a, rule, ctx)) for a in assessments
    )
    # a large ratio alone is meaningless among near-zero residuals, so an
    # assessment must also miss by an absolute margin to count as an outlier
    median = statistics.median(distances) if distances else 0.0
    threshold = max(cfg.outlier_factor * median, cfg.outlier_min_distance)
    outliers = tuple(i for i, d in enumerate(distances) if d > threshold)
    return FitResult(
        network=cur,
        objective_trace=tuple(trace),
        distances=distances,
        outliers=outliers,
        restart_index=restart,
    )
