"""Analytic derivatives of posterior target probabilities w.r.t. parameters.

The derivative of P(x_t | x_e) with respect to a parameter factors into
P(x_t | x_e) times a difference of two conditional expectations of that
parameter's log-derivative score U. Both expectations come from family
posteriors, so one propagation per target state plus one unconditioned
propagation covers every parameter of every node at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import inference, model
from .errors import InvalidScenarioError, OutOfDomainError, UnknownEntityError
from .inference import Evidence, InferenceContext
from .model import Network, NoisyOrParams, ParamIndex


@dataclass(frozen=True)
class Scenario:
    """A sensitivity-analysis question: evidence plus a target variable."""

    evidence: Mapping[str, str]
    target: str


def check_scenario(net: Network, sc: Scenario) -> None:
    inference.check_evidence(net, sc.evidence)
    net.var(sc.target)
    if sc.target in sc.evidence:
        raise InvalidScenarioError(f"target {sc.target!r} is fixed by the evidence")


@dataclass(frozen=True)
class SensitivityReport:
    """Derivatives for every interior parameter of the requested nodes.

    `entries` maps (parameter, target state) to the exact derivative.
    Structurally screened parameters appear with entry exactly 0.0 and are
    listed in `structural_zero`; deterministic parameters carry no entries
    at all and are listed in `frozen`.
    """

    scenario: Scenario
    target_states: tuple[str, ...]
    target_marginal: tuple[float, ...]
    entries: Mapping[tuple[ParamIndex, str], float]
    structural_zero: frozenset[ParamIndex]
    frozen: frozenset[ParamIndex]
    node_max: Mapping[str, float]


def screen_structural_zeros(net: Network, sc: Scenario) -> set[ParamIndex]:
    """Interior parameters whose derivative is zero for graph reasons.

    A node's parameters are inert when, after giving the node an extra
    parameter-parent, the evidence d-separates that parent from the target.
    Reachability is computed with the two-direction BFS over (node, edge
    direction) states; a parameter-parent of node s behaves exactly like
    entering s downward from above.
    """
    check_scenario(net, sc)
    children: dict[str, list[str]] = {v.id: [] for v in net.variables}
    for v in net.variables:
        for p in net.parents[v.id]:
            children[p].append(v.id)

    observed = set(sc.evidence)
    anc = set(observed)
    stack = list(observed)
    while stack:
        n = stack.pop()
        for p in net.parents[n]:
            if p not in anc:
                anc.add(p)
                stack.append(p)

    def reaches_target(s: str) -> bool:
        # start as if arriving at s along the edge from its parameter-parent
        visited: set[tuple[str, str]] = set()
        frontier: list[tuple[str, str]] = [(s, "down")]
        while frontier:
            node, direction = frontier.pop()
            if (node, direction) in visited:
                continue
            visited.add((node, direction))
            if node == sc.target and node not in observed:
                return True
            if direction == "up" and node not in observed:
                for p in net.parents[node]:
                    frontier.append((p, "up"))
                for c in children[node]:
                    frontier.append((c, "down"))
            elif direction == "down":
                if node not in observed:
                    for c in children[node]:
                        frontier.append((c, "down"))
                if node in anc:
                    for p in net.parents[node]:
                        frontier.append((p, "up"))
        return False

    out: set[ParamIndex] = set()
    for v in net.variables:
        if not reaches_target(v.id):
            out.update(model.interior_params(net, v.id))
    return out


def _expectations(
    net: Network,
    sc: Scenario,
    ctx: InferenceContext,
    params: Sequence[ParamIndex],
) -> tuple[tuple[str, ...], np.ndarray, dict[ParamIndex, np.ndarray], dict[ParamIndex, float]]:
    """Per-parameter E[U | x_t, x_e] for each target state, and E[U | x_e].

    Issues one unconditioned propagation plus one per target state with
    positive posterior probability. The unconditioned expectation is the
    probability-weighted mixture of the conditioned ones, so no extra pass
    is needed for it.
    """
    states = net.var(sc.target).states
    cal = ctx.propagate(sc.evidence, net=net)
    marg = cal.marginal(sc.target)
    p_t = marg / marg.sum()

    u_tables = {p: model.u_table(net, p) for p in params}
    cond: dict[ParamIndex, np.ndarray] = {p: np.zeros(len(states)) for p in params}
    by_node: dict[str, list[ParamIndex]] = {}
    for p in params:
        by_node.setdefault(p.node, []).append(p)

    for i, state in enumerate(states):
        if p_t[i] <= 0.0:
            continue  # conditioning impossible; the zero factor kills the term
        cal_t = ctx.propagate({**sc.evidence, sc.target: state}, net=net)
        for node, plist in by_node.items():
            fam = cal_t.family_array(node)
            for p in plist:
                cond[p][i] = float(np.vdot(u_tables[p], fam))

    uncond = {p: float(cond[p] @ p_t) for p in params}
    return states, p_t, cond, uncond


def sensitivities(
    net: Network,
    sc: Scenario,
    nodes: Iterable[str] | None = None,
    ctx: InferenceContext | None = None,
) -> SensitivityReport:
    """Exact derivative of each target-state probability per parameter."""
    check_scenario(net, sc)
    if ctx is None:
        ctx = inference.compile(net)
    wanted = tuple(nodes) if nodes is not None else tuple(v.id for v in net.variables)
    for n in wanted:
        net.var(n)

    frozen: set[ParamIndex] = set()
    interior: list[ParamIndex] = []
    for n in wanted:
        for p in net.param_indices(n):
            if model.is_frozen(net, p):
                frozen.add(p)
            else:
                interior.append(p)

    screened = screen_structural_zeros(net, sc) & set(interior)
    active = [p for p in interior if p not in screened]

    states, p_t, cond, uncond = _expectations(net, sc, ctx, active)

    entries: dict[tuple[ParamIndex, str], float] = {}
    for p in active:
        for i, state in enumerate(states):
            entries[(p, state)] = float(p_t[i] * (cond[p][i] - uncond[p]))
    for p in screened:
        for state in states:
            entries[(p, state)] = 0.0

    node_max: dict[str, float] = {}
    for n in wanted:
        vals = [abs(entries[(p, s)]) for p in interior if p.node == n for s in states]
        if vals:
            node_max[n] = max(vals)

    return SensitivityReport(
        scenario=sc,
        target_states=states,
        target_marginal=tuple(float(x) for x in p_t),
        entries=entries,
        structural_zero=frozenset(screened),
        frozen=frozenset(frozen),
        node_max=node_max,
    )


def node_max_summary(
    report: SensitivityReport,
) -> dict[str, tuple[float, ParamIndex, str]]:
    """Per-node largest |derivative| with its witnessing parameter and state.

    Ties go to the lexicographically smallest (parameter key, target state).
    """
    best: dict[str, tuple[float, ParamIndex, str]] = {}
    ordered = sorted(report.entries, key=lambda k: (model.param_sort_key(k[0]), k[1]))
    for p, state in ordered:
        value = abs(report.entries[(p, state)])
        cur = best.get(p.node)
        if cur is None or value > cur[0]:
            best[p.node] = (value, p, state)
    return best


def finite_diff_sensitivity(
    net: Network,
    sc: Scenario,
    p: ParamIndex,
    x_t: str,
    h: float,
    ctx: InferenceContext | None = None,
) -> float:
    """Central difference of P(x_t | x_e) in the raw parameter coordinate.

    Table entries are perturbed as raw weights (renormalization is implicit
    in the local model); noisy-OR values must stay inside [0, 1].
    """
    if h <= 0:
        raise OutOfDomainError("step size must be positive")
    check_scenario(net, sc)
    i = net.state_index(sc.target, x_t)
    if model.is_frozen(net, p):
        raise OutOfDomainError(
            f"parameter {p.describe(net)} is deterministic; no interior neighborhood")
    value = net.param_value(p)
    lo, hi = value - h, value + h
    if isinstance(net.params[p.node], NoisyOrParams):
        if lo < 0.0 or hi > 1.0:
            raise OutOfDomainError(
                f"perturbation of {p.describe(net)} leaves [0, 1]")
    elif lo < 0.0:
        raise OutOfDomainError(
            f"perturbation of {p.describe(net)} makes a raw table weight negative")
    if ctx is None:
        ctx = inference.compile(net)

    def prob_at(x: float) -> float:
        cal = ctx.propagate(sc.evidence, net=net.with_param(p, x))
        marg = cal.marginal(sc.target)
        return float(marg[i] / marg.sum())

    return (prob_at(hi) - prob_at(lo)) / (2.0 * h)
