"""End-to-end behavior gates.

One test per shipped guarantee: golden sensitivity values on the dyspnea
network, agreement with independent oracles on random networks, sampler
consistency, fit recovery, and the structural-screening contract. Each
test asserts its numeric tolerance and its time budget; together they are
the suite that must stay green for a release.
"""

import time

import numpy as np
import pytest

from bnsense import inference, model
from bnsense.fitting import (
    Assessment,
    FitConfig,
    LOGARITHMIC,
    ScoringRule,
    _unscreened_report,
    distance_gradient,
    fit,
    log_gradient_expectation_form,
)
from bnsense.montecarlo import (
    LIKELIHOOD_WEIGHTING,
    LOGIC_REJECTION,
    SamplerConfig,
    estimate_sensitivities,
)
from bnsense.sensitivity import (
    Scenario,
    finite_diff_sensitivity,
    screen_structural_zeros,
    sensitivities,
)

REFERENCE = Scenario(evidence={"A": "t_A", "H": "t_H"}, target="B")

NODE_MAX_EXPECTED = {
    "B": (1.60, 0.02),
    "E": (0.041, 0.002),
    "F": (0.019, 0.002),
    "G": (0.038, 0.002),
    "H": (0.088, 0.002),
}


def test_dyspnea_node_maxima_match_golden_values(dyspnea_net):
    start = time.perf_counter()
    report = sensitivities(dyspnea_net, REFERENCE)
    elapsed = time.perf_counter() - start

    for node, (value, tol) in NODE_MAX_EXPECTED.items():
        assert report.node_max[node] == pytest.approx(value, abs=tol), node
    assert abs(report.node_max["A"]) <= 1e-12  # observed root
    assert abs(report.node_max["D"]) <= 1e-12  # barren node
    assert "C" not in report.node_max  # deterministic, fully frozen
    assert elapsed < 1.0


def test_dominant_node_exceeds_evidence_node_eighteen_fold(dyspnea_net):
    report = sensitivities(dyspnea_net, REFERENCE)
    ratio = report.node_max["B"] / report.node_max["H"]
    assert 17.0 <= ratio <= 19.0


def test_analytic_derivatives_match_finite_differences(random_suite):
    assert len(random_suite) >= 50
    start = time.perf_counter()

    checked = 0
    for net, sc in random_suite:
        ctx = inference.compile(net)
        report = sensitivities(net, sc, ctx=ctx)
        for (p, state), value in report.entries.items():
            fd = finite_diff_sensitivity(net, sc, p, state, 1e-5, ctx=ctx)
            assert value == pytest.approx(fd, abs=1e-6), (p, state)
            checked += 1

    # the same parameters must also satisfy d joint / d theta = joint * u
    # on full assignments, the identity behind every posterior derivative
    h = 1e-5
    rng = np.random.default_rng(np.random.SeedSequence(99))
    for net, _ in random_suite:
        for _ in range(3):
            x = {v.id: v.states[int(rng.integers(0, len(v.states)))]
                 for v in net.variables}
            joint = model.joint_prob(net, x)
            for v in net.variables:
                cfg = tuple(x[pv.id] for pv in net.parent_vars(v.id))
                for p in model.interior_params(net, v.id):
                    value = net.param_value(p)
                    fd = (model.joint_prob(net.with_param(p, value + h), x)
                          - model.joint_prob(net.with_param(p, value - h), x)) / (2 * h)
                    assert fd == pytest.approx(
                        joint * model.u_value(net, p, x[v.id], cfg), abs=1e-8)

    elapsed = time.perf_counter() - start
    assert checked > 1000
    assert elapsed < 60.0


def test_tree_propagation_matches_enumeration(random_suite):
    for net, sc in random_suite:
        ctx = inference.compile(net)
        fast = inference.query_marginal(ctx, sc.evidence, sc.target)
        slow = inference.enumerate_oracle(net, sc.evidence, sc.target)
        assert np.max(np.abs(fast - slow)) <= 1e-10


def test_sampled_estimates_agree_with_exact_values(dyspnea_net):
    exact = sensitivities(dyspnea_net, REFERENCE)
    start = time.perf_counter()
    for method in (LIKELIHOOD_WEIGHTING, LOGIC_REJECTION):
        cfg = SamplerConfig(method=method, sample_count=200000, seed=0)
        est = estimate_sensitivities(dyspnea_net, REFERENCE, cfg)
        assert set(est.entries) == set(exact.entries)
        hits = sum(
            1 for key, value in est.entries.items()
            if abs(value - exact.entries[key]) <= 3.0 * est.stderr[key]
        )
        assert hits / len(est.entries) >= 0.95, method
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0


def test_log_rule_gradient_paths_agree(random_suite):
    rule = ScoringRule(LOGARITHMIC)
    rng = np.random.default_rng(np.random.SeedSequence(4242))
    for net, sc in random_suite:
        ctx = inference.compile(net)
        states = net.var(sc.target).states
        weights = rng.uniform(0.1, 1.0, size=len(states))
        assessed = {s: float(w / weights.sum()) for s, w in zip(states, weights)}
        a = Assessment(scenario=sc, assessed=assessed)
        chained = distance_gradient(net, a, rule, ctx)
        direct = log_gradient_expectation_form(net, a, ctx)
        assert set(chained) == set(direct)
        for p in chained:
            assert chained[p] == pytest.approx(direct[p], abs=1e-10), p


def test_fit_recovers_perturbed_network_and_flags_corruption(dyspnea_net):
    truth = dyspnea_net
    ctx = inference.compile(truth)
    rng = np.random.default_rng(np.random.SeedSequence(20260818))

    updates = {}
    for v in truth.variables:
        for p in model.interior_params(truth, v.id):
            updates[p] = truth.param_value(p) * (1.0 + rng.uniform(-0.2, 0.2))
    perturbed = truth.with_params(updates)

    node_ids = [v.id for v in truth.variables]
    assessments = []
    while len(assessments) < 20:
        k = int(rng.integers(0, 3))
        evidence = {}
        for n in rng.choice(node_ids, size=k, replace=False):
            states = truth.var(str(n)).states
            evidence[str(n)] = states[int(rng.integers(0, len(states)))]
        target = str(rng.choice([n for n in node_ids if n not in evidence]))
        marg = ctx.propagate(evidence).marginal(target)
        if marg.sum() <= 0:
            continue
        post = marg / marg.sum()
        assessed = {s: float(x) for s, x in zip(truth.var(target).states, post)}
        assessments.append(
            Assessment(scenario=Scenario(evidence=evidence, target=target),
                       assessed=assessed))

    rule = ScoringRule(LOGARITHMIC)
    start = time.perf_counter()
    result = fit(perturbed, tuple(assessments), rule, FitConfig())

    fitted_ctx = inference.compile(result.network)
    for a in assessments:
        marg = fitted_ctx.propagate(a.scenario.evidence, net=result.network)
        post = marg.marginal(a.scenario.target)
        post = post / post.sum()
        p_star = np.array([a.assessed[s]
                           for s in result.network.var(a.scenario.target).states])
        assert 0.5 * float(np.abs(post - p_star).sum()) <= 0.01, a.scenario

    trace = result.objective_trace
    assert all(trace[i + 1] <= trace[i] + 1e-12 for i in range(len(trace) - 1))
    assert result.outliers == ()

    # re-fit with assessment 0 duplicated under flipped probabilities; the
    # optimum compromises between the twins, so at most those two can flag,
    # and the planted one must
    a0 = assessments[0]
    states = truth.var(a0.scenario.target).states
    flipped = {states[i]: a0.assessed[states[-1 - i]] for i in range(len(states))}
    corrupt = Assessment(scenario=a0.scenario, assessed=flipped)
    result2 = fit(perturbed, tuple(assessments) + (corrupt,), rule, FitConfig())
    assert 20 in result2.outliers
    assert set(result2.outliers) <= {0, 20}

    assert time.perf_counter() - start < 120.0


def test_screened_parameters_are_exact_zeros_of_the_analytic_form(random_suite, dyspnea_net):
    checked = 0
    for net, sc in random_suite:
        screened = screen_structural_zeros(net, sc)
        if not screened:
            continue
        ctx = inference.compile(net)
        report = _unscreened_report(net, sc, ctx)
        for (p, state), value in report.entries.items():
            if p in screened:
                assert abs(value) <= 1e-12, (p, state)
                checked += 1
    assert checked > 0

    # screening plus the conditional-expectation form must produce a full
    # report in exactly |target states| + 1 propagation passes
    ctx = inference.compile(dyspnea_net)
    before = ctx.propagation_count
    sensitivities(dyspnea_net, REFERENCE, ctx=ctx)
    passes = ctx.propagation_count - before
    assert passes == len(dyspnea_net.var(REFERENCE.target).states) + 1
