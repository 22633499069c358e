"""Exact posterior derivatives, screening, and the reference network values."""

import numpy as np
import pytest

from bnsense import inference, model
from bnsense.errors import InvalidScenarioError, OutOfDomainError, UnknownEntityError
from bnsense.model import Network, ParamIndex, TableParams, Variable
from bnsense.sensitivity import (
    Scenario,
    finite_diff_sensitivity,
    node_max_summary,
    screen_structural_zeros,
    sensitivities,
)

REFERENCE_SCENARIO = Scenario(evidence={"A": "t_A", "H": "t_H"}, target="B")


def test_reference_node_maxima(dyspnea_net):
    report = sensitivities(dyspnea_net, REFERENCE_SCENARIO)
    assert report.node_max["B"] == pytest.approx(1.601015, abs=5e-7)
    assert report.node_max["E"] == pytest.approx(0.041252, abs=5e-7)
    assert report.node_max["F"] == pytest.approx(0.018767, abs=5e-7)
    assert report.node_max["G"] == pytest.approx(0.037956, abs=5e-7)
    assert report.node_max["H"] == pytest.approx(0.087755, abs=5e-7)
    assert report.node_max["A"] == 0.0
    assert report.node_max["D"] == 0.0
    assert "C" not in report.node_max  # fully deterministic, nothing interior

    assert report.target_marginal[0] == pytest.approx(0.08775096498292187, abs=1e-12)
    assert report.frozen == frozenset(dyspnea_net.param_indices("C"))
    screened_nodes = {p.node for p in report.structural_zero}
    assert screened_nodes == {"A", "D"}


def test_exact_pass_count(dyspnea_net):
    ctx = inference.compile(dyspnea_net)
    before = ctx.propagation_count
    sensitivities(dyspnea_net, REFERENCE_SCENARIO, ctx=ctx)
    # one unconditioned pass plus one per target state
    assert ctx.propagation_count - before == len(dyspnea_net.var("B").states) + 1


def test_screened_entries_are_exact_zeros(dyspnea_net):
    report = sensitivities(dyspnea_net, REFERENCE_SCENARIO)
    for p in report.structural_zero:
        for s in report.target_states:
            assert report.entries[(p, s)] == 0.0


def test_matches_finite_differences(dyspnea_net, dyspnea_ctx):
    report = sensitivities(dyspnea_net, REFERENCE_SCENARIO, ctx=dyspnea_ctx)
    for p in [
        ParamIndex("B", ("t_B", ("t_A",))),
        ParamIndex("E", ("t_E", ("f_F",))),
        ParamIndex("H", ("t_H", ("f_C", "t_G"))),
        ParamIndex("F", ("t_F", ())),
    ]:
        fd = finite_diff_sensitivity(
            dyspnea_net, REFERENCE_SCENARIO, p, "t_B", 1e-5, ctx=dyspnea_ctx)
        assert report.entries[(p, "t_B")] == pytest.approx(fd, abs=1e-7)


def test_summary_witnesses_and_tie_break(dyspnea_net):
    report = sensitivities(dyspnea_net, REFERENCE_SCENARIO)
    summary = node_max_summary(report)
    value, p, state = summary["B"]
    assert value == pytest.approx(1.601015, abs=5e-7)
    assert p == ParamIndex("B", ("t_B", ("t_A",)))
    # the two target states tie in magnitude; the earlier sort key wins
    assert state == "f_B"


def test_node_filter(dyspnea_net):
    report = sensitivities(dyspnea_net, REFERENCE_SCENARIO, nodes=["E", "G"])
    assert set(report.node_max) == {"E", "G"}
    assert {p.node for p, _ in report.entries} <= {"E", "G"}
    with pytest.raises(UnknownEntityError):
        sensitivities(dyspnea_net, REFERENCE_SCENARIO, nodes=["nope"])


def test_scenario_validation(dyspnea_net):
    with pytest.raises(InvalidScenarioError):
        sensitivities(dyspnea_net, Scenario(evidence={"B": "t_B"}, target="B"))
    with pytest.raises(UnknownEntityError):
        sensitivities(dyspnea_net, Scenario(evidence={}, target="Q"))


def test_zero_posterior_state_contributes_zero():
    # P(E = e0 | T = t2) is 0, so evidence e0 rules the state t2 out entirely
    net = Network(
        variables=(
            Variable(id="T", states=("t0", "t1", "t2")),
            Variable(id="E", states=("e0", "e1")),
        ),
        parents={"T": (), "E": ("T",)},
        params={
            "T": TableParams(entries={("t0", ()): 0.2, ("t1", ()): 0.5, ("t2", ()): 0.3}),
            "E": TableParams(entries={
                ("e0", ("t0",)): 0.7, ("e1", ("t0",)): 0.3,
                ("e0", ("t1",)): 0.4, ("e1", ("t1",)): 0.6,
                ("e0", ("t2",)): 0.0, ("e1", ("t2",)): 1.0,
            }),
        },
    )
    sc = Scenario(evidence={"E": "e0"}, target="T")
    report = sensitivities(net, sc)
    assert report.target_marginal[2] == 0.0
    for p in model.interior_params(net, "T"):
        assert report.entries[(p, "t2")] == 0.0
    # interior entries elsewhere still line up with finite differences
    p = ParamIndex("T", ("t0", ()))
    fd = finite_diff_sensitivity(net, sc, p, "t0", 1e-6)
    assert report.entries[(p, "t0")] == pytest.approx(fd, abs=1e-6)


def chain3():
    def coin(bias):
        return TableParams(entries={("a", ("a",)): bias, ("b", ("a",)): 1 - bias,
                                    ("a", ("b",)): 1 - bias, ("b", ("b",)): bias})

    return Network(
        variables=(
            Variable(id="X", states=("a", "b")),
            Variable(id="Y", states=("a", "b")),
            Variable(id="Z", states=("a", "b")),
        ),
        parents={"X": (), "Y": ("X",), "Z": ("Y",)},
        params={"X": TableParams(entries={("a", ()): 0.3, ("b", ()): 0.7}),
                "Y": coin(0.8), "Z": coin(0.6)},
    )


def test_screening_on_chains():
    net = chain3()
    # target Z: everything upstream matters, nothing is screened
    assert screen_structural_zeros(net, Scenario(evidence={}, target="Z")) == set()
    # target X: Z is barren, Y is not (its table shapes the X posterior only
    # under evidence, but unconditionally it cannot matter either)
    screened = screen_structural_zeros(net, Scenario(evidence={}, target="X"))
    assert {p.node for p in screened} == {"Y", "Z"}
    # observing Z revives both tables
    screened = screen_structural_zeros(net, Scenario(evidence={"Z": "a"}, target="X"))
    assert screened == set()


def test_screening_collider():
    net = Network(
        variables=(
            Variable(id="X", states=("a", "b")),
            Variable(id="Y", states=("a", "b")),
            Variable(id="Z", states=("a", "b")),
        ),
        parents={"X": (), "Y": (), "Z": ("X", "Y")},
        params={
            "X": TableParams(entries={("a", ()): 0.3, ("b", ()): 0.7}),
            "Y": TableParams(entries={("a", ()): 0.6, ("b", ()): 0.4}),
            "Z": TableParams(entries={
                ("a", ("a", "a")): 0.9, ("b", ("a", "a")): 0.1,
                ("a", ("a", "b")): 0.5, ("b", ("a", "b")): 0.5,
                ("a", ("b", "a")): 0.4, ("b", ("b", "a")): 0.6,
                ("a", ("b", "b")): 0.2, ("b", ("b", "b")): 0.8,
            }),
        },
    )
    blocked = screen_structural_zeros(net, Scenario(evidence={}, target="X"))
    assert {p.node for p in blocked} == {"Y", "Z"}
    opened = screen_structural_zeros(net, Scenario(evidence={"Z": "a"}, target="X"))
    assert opened == set()


def test_screening_is_sound_on_chain():
    net = chain3()
    sc = Scenario(evidence={}, target="X")
    ctx = inference.compile(net)
    for p in screen_structural_zeros(net, sc):
        fd = finite_diff_sensitivity(net, sc, p, "a", 1e-5, ctx=ctx)
        assert fd == pytest.approx(0.0, abs=1e-10)


def test_finite_diff_domain_errors(dyspnea_net):
    frozen = dyspnea_net.param_indices("C")[0]
    with pytest.raises(OutOfDomainError):
        finite_diff_sensitivity(dyspnea_net, REFERENCE_SCENARIO, frozen, "t_B", 1e-5)
    with pytest.raises(OutOfDomainError):
        finite_diff_sensitivity(
            dyspnea_net, REFERENCE_SCENARIO,
            ParamIndex("B", ("t_B", ("t_A",))), "t_B", -1.0)
    # raw table weights only break the domain when a perturbation goes negative
    with pytest.raises(OutOfDomainError):
        finite_diff_sensitivity(
            dyspnea_net, REFERENCE_SCENARIO,
            ParamIndex("B", ("t_B", ("t_A",))), "t_B", 0.5)
