"""Scoring rules, gradients, projection, and the descent loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnsense import inference, model
from bnsense.errors import (
    AssessmentEvaluationError,
    InvalidScenarioError,
    SupportError,
)
from bnsense.fitting import (
    HOLISTIC,
    LOGARITHMIC,
    QUADRATIC,
    Assessment,
    FitConfig,
    ScoringRule,
    aggregate_objective,
    assessment_distance,
    check_assessment,
    distance_gradient,
    fit,
    log_gradient_expectation_form,
    score_distance,
    single_step,
)
from bnsense.model import ParamIndex
from bnsense.sensitivity import Scenario, finite_diff_sensitivity

LOG = ScoringRule(LOGARITHMIC)
QUAD = ScoringRule(QUADRATIC)


def simplex(rng, k):
    x = rng.random(k) + 0.05
    return tuple(x / x.sum())


# -- scoring rules ---------------------------------------------------------


def test_log_distance_known_value():
    # sums p*_t (log p*_t - log p_t) over states
    assert score_distance((0.5, 0.5), (0.8, 0.2), LOG) == pytest.approx(
        0.19274475702175747, abs=1e-15)
    assert score_distance((0.3, 0.7), (0.3, 0.7), LOG) == 0.0


def test_quadratic_distance_known_values():
    assert score_distance((0.5, 0.5), (1.0, 0.0), QUAD) == pytest.approx(0.25)
    p = (0.8, 0.2)
    assert score_distance(p, p, QUAD) == pytest.approx(0.16)


@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**31))
@settings(deadline=None, max_examples=60)
def test_log_distance_is_nonnegative_and_zero_only_at_match(k, seed):
    rng = np.random.default_rng(seed)
    p = simplex(rng, k)
    q = simplex(rng, k)
    d = score_distance(p, q, LOG)
    assert d >= 0.0
    assert score_distance(p, p, LOG) == pytest.approx(0.0, abs=1e-14)
    if max(abs(a - b) for a, b in zip(p, q)) > 1e-3:
        assert d > 0.0


@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**31))
@settings(deadline=None, max_examples=60)
def test_quadratic_distance_is_minimized_at_match(k, seed):
    rng = np.random.default_rng(seed)
    p_star = simplex(rng, k)
    base = score_distance(p_star, p_star, QUAD)
    for _ in range(5):
        other = simplex(rng, k)
        assert score_distance(other, p_star, QUAD) >= base - 1e-12


def test_log_rule_support_violation():
    with pytest.raises(SupportError):
        score_distance((0.0, 1.0), (0.5, 0.5), LOG)
    # zero assessed mass on a zero-probability state is fine
    assert score_distance((0.0, 1.0), (0.0, 1.0), LOG) == 0.0


def test_unknown_rule_tag():
    with pytest.raises(ValueError):
        ScoringRule("hinge")


# -- assessments -------------------------------------------------------------


def holistic(evidence, target, assessed, weight=1.0):
    return Assessment(
        scenario=Scenario(evidence=evidence, target=target),
        assessed=assessed, weight=weight, kind=HOLISTIC)


def test_check_assessment(dyspnea_net):
    good = holistic({"A": "t_A"}, "B", {"t_B": 0.2, "f_B": 0.8})
    check_assessment(dyspnea_net, good)
    for bad in [
        holistic({}, "B", {"t_B": 1.0}),                      # missing state
        holistic({}, "B", {"t_B": 0.5, "f_B": 0.4}),          # sum != 1
        holistic({}, "B", {"t_B": -0.1, "f_B": 1.1}),         # negative
        holistic({}, "B", {"t_B": 0.2, "f_B": 0.8}, weight=0.0),
        holistic({"B": "t_B"}, "B", {"t_B": 0.2, "f_B": 0.8}),
    ]:
        with pytest.raises((InvalidScenarioError, ValueError)):
            check_assessment(dyspnea_net, bad)


def test_assessment_distance_uses_the_given_network(dyspnea_net, dyspnea_ctx):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85})
    d0 = assessment_distance(dyspnea_net, a, LOG, ctx=dyspnea_ctx)
    moved = dyspnea_net.with_param(ParamIndex("B", ("t_B", ("t_A",))), 0.12)
    d1 = assessment_distance(moved, a, LOG, ctx=dyspnea_ctx)
    assert d1 != d0
    assert d1 < d0  # 0.12 raw pushes the posterior toward the assessed 0.15


# -- gradients ----------------------------------------------------------------


def test_gradient_matches_finite_differences(dyspnea_net, dyspnea_ctx):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85})
    for rule in (LOG, QUAD):
        grad = distance_gradient(dyspnea_net, a, rule, ctx=dyspnea_ctx)
        for p in [ParamIndex("B", ("t_B", ("t_A",))),
                  ParamIndex("E", ("t_E", ("f_F",))),
                  ParamIndex("H", ("t_H", ("f_C", "t_G")))]:
            h = 1e-6
            up = assessment_distance(
                dyspnea_net.with_param(p, dyspnea_net.param_value(p) + h), a, rule,
                ctx=dyspnea_ctx)
            dn = assessment_distance(
                dyspnea_net.with_param(p, dyspnea_net.param_value(p) - h), a, rule,
                ctx=dyspnea_ctx)
            assert grad[p] == pytest.approx((up - dn) / (2 * h), abs=1e-6)


def test_gradient_paths_agree(dyspnea_net, dyspnea_ctx):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85})
    chain = distance_gradient(dyspnea_net, a, LOG, ctx=dyspnea_ctx, screen=False)
    expect = log_gradient_expectation_form(dyspnea_net, a, ctx=dyspnea_ctx)
    assert set(chain) == set(expect)
    for p in chain:
        assert chain[p] == pytest.approx(expect[p], abs=1e-12)


def test_gradient_screen_flag_only_changes_rounding(dyspnea_net, dyspnea_ctx):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.3, "f_B": 0.7})
    fast = distance_gradient(dyspnea_net, a, LOG, ctx=dyspnea_ctx, screen=True)
    slow = distance_gradient(dyspnea_net, a, LOG, ctx=dyspnea_ctx, screen=False)
    assert set(fast) == set(slow)
    for p in fast:
        assert fast[p] == pytest.approx(slow[p], abs=1e-9)
    for p in fast:
        if p.node in ("A", "D"):
            assert fast[p] == 0.0


def test_support_error_from_model_zero(dyspnea_net):
    # C given E=t_E is deterministically t_C, so f_C has probability zero
    ok = holistic({"A": "t_A", "E": "t_E"}, "C", {"t_C": 1.0, "f_C": 0.0})
    assert assessment_distance(dyspnea_net, ok, LOG) == pytest.approx(0.0, abs=1e-12)
    bad = holistic({"A": "t_A", "E": "t_E"}, "C", {"t_C": 0.1, "f_C": 0.9})
    with pytest.raises(SupportError):
        assessment_distance(dyspnea_net, bad, LOG)


def test_aggregate_objective_weights(dyspnea_net, dyspnea_ctx):
    a1 = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85}, weight=1.0)
    a2 = holistic({}, "F", {"t_F": 0.4, "f_F": 0.6}, weight=3.0)
    total, grad = aggregate_objective(dyspnea_net, [a1, a2], LOG, ctx=dyspnea_ctx)
    d1 = assessment_distance(dyspnea_net, a1, LOG, ctx=dyspnea_ctx)
    d2 = assessment_distance(dyspnea_net, a2, LOG, ctx=dyspnea_ctx)
    assert total == pytest.approx(1.0 * d1 + 3.0 * d2, abs=1e-12)
    g_f = distance_gradient(dyspnea_net, a2, LOG, ctx=dyspnea_ctx)
    p = ParamIndex("F", ("t_F", ()))
    g_1 = distance_gradient(dyspnea_net, a1, LOG, ctx=dyspnea_ctx)
    assert grad[p] == pytest.approx(1.0 * g_1[p] + 3.0 * g_f[p], abs=1e-12)


def test_aggregate_objective_wraps_failures(dyspnea_net):
    bad = holistic({"C": "t_C", "B": "f_B", "E": "f_E"}, "D", {"t_D": 0.5, "f_D": 0.5})
    with pytest.raises(AssessmentEvaluationError) as e:
        aggregate_objective(dyspnea_net, [bad], LOG)
    assert e.value.index == 0


# -- stepping and fitting ------------------------------------------------------


def test_single_step_descends(dyspnea_net, dyspnea_ctx):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85})
    before = assessment_distance(dyspnea_net, a, LOG, ctx=dyspnea_ctx)
    new_net, dist, after = single_step(dyspnea_net, a, LOG, 0.05, ctx=dyspnea_ctx)
    assert after < before
    assert dist.sum() == pytest.approx(1.0)
    # frozen tables survive a step untouched
    assert new_net.params["C"] == dyspnea_net.params["C"]


def test_fit_recovers_a_single_assessment(dyspnea_net):
    a = holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.15, "f_B": 0.85})
    cfg = FitConfig(step_size=0.3, max_epochs=150, convergence_tol=1e-12, seed=0)
    result = fit(dyspnea_net, [a], LOG, cfg)
    trace = result.objective_trace
    assert all(trace[i + 1] <= trace[i] + 1e-12 for i in range(len(trace) - 1))
    assert trace[-1] < 1e-5
    got = inference.query_marginal(
        inference.compile(result.network), a.scenario.evidence, "B")
    assert got[0] == pytest.approx(0.15, abs=0.005)
    assert result.distances[0] == pytest.approx(trace[-1], abs=1e-9)
    assert result.outliers == ()


def test_fit_restarts_are_deterministic(dyspnea_net):
    a = holistic({}, "F", {"t_F": 0.42, "f_F": 0.58})
    cfg = FitConfig(step_size=0.2, max_epochs=40, restarts=3, seed=7)
    r1 = fit(dyspnea_net, [a], LOG, cfg)
    r2 = fit(dyspnea_net, [a], LOG, cfg)
    assert r1.objective_trace == r2.objective_trace
    assert r1.restart_index == r2.restart_index
    assert r1.network == r2.network


def test_fit_shuffled_order_is_seeded(dyspnea_net):
    items = [
        holistic({}, "F", {"t_F": 0.45, "f_F": 0.55}),
        holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.12, "f_B": 0.88}),
        holistic({}, "G", {"t_G": 0.5, "f_G": 0.5}),
    ]
    cfg = FitConfig(step_size=0.1, max_epochs=25, scenario_order="shuffled", seed=3)
    r1 = fit(dyspnea_net, items, LOG, cfg)
    r2 = fit(dyspnea_net, items, LOG, cfg)
    assert r1.objective_trace == r2.objective_trace


def test_fit_flags_outliers(dyspnea_net):
    good = [
        holistic({}, "F", {"t_F": 0.5, "f_F": 0.5}),
        holistic({}, "G", {"t_G": 0.45, "f_G": 0.55}),
        holistic({"A": "t_A", "H": "t_H"}, "B", {"t_B": 0.09, "f_B": 0.91}),
    ]
    # this one contradicts a deterministic path and cannot be matched
    liar = holistic({"A": "t_A", "E": "t_E"}, "C", {"t_C": 0.2, "f_C": 0.8})
    cfg = FitConfig(step_size=0.1, max_epochs=30)
    result = fit(dyspnea_net, good + [liar], QUAD, cfg)
    assert 3 in result.outliers
    assert set(result.outliers) <= {3}


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(step_size=0.0)
    with pytest.raises(ValueError):
        FitConfig(max_epochs=0)
    with pytest.raises(ValueError):
        FitConfig(restarts=0)
    with pytest.raises(ValueError):
        FitConfig(scenario_order="sideways")
    with pytest.raises(ValueError):
        FitConfig(parameter_floor=0.0)


def test_fit_requires_assessments(dyspnea_net):
    with pytest.raises(InvalidScenarioError):
        fit(dyspnea_net, [], LOG, FitConfig())


def test_fit_floor_keeps_parameters_positive(dyspnea_net):
    # an extreme assessment drags a probability toward 0; the floor stops it
    a = holistic({}, "F", {"t_F": 0.001, "f_F": 0.999})
    cfg = FitConfig(step_size=1.0, max_epochs=60, parameter_floor=1e-4)
    result = fit(dyspnea_net, [a], LOG, cfg)
    for p in result.network.param_indices("F"):
        assert result.network.param_value(p) >= 1e-4
