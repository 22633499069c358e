"""Discrete Bayesian networks with table and noisy-OR local models.

A network is a DAG of discrete variables. Each node carries either an
unrestricted table of nonnegative raw parameters (renormalized per parent
configuration, so a single entry can be varied without breaking the
sum-to-one constraint) or a noisy-OR parameterization for binary families
(a base term plus one inhibitor probability per parent).

Networks are immutable values: every operation is pure, and "mutation"
means building a modified copy via `with_param` / `with_params`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

from .errors import (
    FrozenParameterError,
    InvalidNetworkError,
    UnknownEntityError,
)

Config = tuple[str, ...]
"""A parent configuration: one state name per parent, in declared parent order."""

TableKey = tuple[str, Config]
"""Key of one raw table entry: (child state, parent configuration)."""

BASE_KEY = 0
"""Noisy-OR parameter key for the base ("leak") term; parents use 1-based positions."""


@dataclass(frozen=True)
class Variable:
    """A discrete variable: a set of mutually exclusive, exhaustive states."""

    id: str
    states: tuple[str, ...]
    label: str | None = None


@dataclass(frozen=True)
class TableParams:
    """Unrestricted local model: raw nonnegative weights per (state, config).

    The conditional probability is the entry divided by its row sum, so the
    representation is invariant under per-row rescaling.
    """

    entries: Mapping[TableKey, float]


@dataclass(frozen=True)
class NoisyOrParams:
    """Noisy-OR local model for a binary child with binary parents.

    `inhibitors[j]` is the probability that the cause carried by parent j
    (declared order) fails to force the child true; `base` plays the same
    role for an always-present background cause. The child is false exactly
    when the base term and every active parent's inhibitor all hold, so

        P(child true | config)  = 1 - base * prod(inhibitors of true parents)
        P(child false | config) =     base * prod(inhibitors of true parents)

    The first declared state of the child and of every parent is "true".
    """

    base: float
    inhibitors: tuple[float, ...]


Parameterization = Union[TableParams, NoisyOrParams]


@dataclass(frozen=True)
class ParamIndex:
    """Address of one scalar parameter.

    For tables, `key` is the (child state, parent configuration) pair of the
    raw entry. For noisy-OR, `key` is BASE_KEY (0) for the base term or the
    1-based parent position for that parent's inhibitor.
    """

    node: str
    key: TableKey | int

    def describe(self, net: "Network") -> str:
        """Human-readable rendering, e.g. ``B[t_B | t_A]`` or ``X[~Y]``."""
        if isinstance(self.key, int):
            if self.key == BASE_KEY:
                return f"{self.node}[base]"
            parent = net.parents[self.node][self.key - 1]
            return f"{self.node}[~{parent}]"
        state, cfg = self.key
        given = ", ".join(cfg) if cfg else "-"
        return f"{self.node}[{state} | {given}]"


@dataclass(frozen=True)
class Violation:
    """One validation finding; `node` names the offending variable when known."""

    code: str
    message: str
    node: str | None = None


@dataclass(frozen=True, eq=True)
class Network:
    """A Bayesian network: variables, parent lists, and local parameterizations."""

    variables: tuple[Variable, ...]
    parents: Mapping[str, Config]
    params: Mapping[str, Parameterization]

    # -- lookups ---------------------------------------------------------

    @cached_property
    def _vars(self) -> dict[str, Variable]:
        return {v.id: v for v in self.variables}

    @cached_property
    def _state_index(self) -> dict[str, dict[str, int]]:
        return {v.id: {s: i for i, s in enumerate(v.states)} for v in self.variables}

    def var(self, node: str) -> Variable:
        try:
            return self._vars[node]
        except KeyError:
            raise UnknownEntityError(f"unknown variable {node!r}") from None

    def state_index(self, node: str, state: str) -> int:
        idx = self._state_index.get(node, {}).get(state)
        if idx is None:
            self.var(node)
            raise UnknownEntityError(f"variable {node!r} has no state {state!r}")
        return idx

    def parent_vars(self, node: str) -> tuple[Variable, ...]:
        return tuple(self.var(p) for p in self.parents[node])

    def configurations(self, node: str) -> Iterator[Config]:
        """All parent configurations of `node`, last parent varying fastest."""
        yield from itertools.product(*(p.states for p in self.parent_vars(node)))

    def n_configurations(self, node: str) -> int:
        return int(np.prod([len(p.states) for p in self.parent_vars(node)], dtype=np.int64))

    def config_index(self, node: str, cfg: Config) -> int:
        """Flat index of a parent configuration (C order over declared parents)."""
        parents = self.parent_vars(node)
        if len(cfg) != len(parents):
            raise UnknownEntityError(
                f"configuration {cfg!r} has {len(cfg)} states, "
                f"node {node!r} has {len(parents)} parents"
            )
        idx = 0
        for pv, state in zip(parents, cfg):
            idx = idx * len(pv.states) + self.state_index(pv.id, state)
        return idx

    @cached_property
    def topo_order(self) -> tuple[str, ...]:
        ts = TopologicalSorter({v.id: tuple(self.parents.get(v.id, ())) for v in self.variables})
        return tuple(ts.static_order())

    # -- parameter access --------------------------------------------------

    def param_indices(self, node: str) -> list[ParamIndex]:
        """All parameters of `node`, in canonical (row-major) order."""
        par = self.params[node]
        if isinstance(par, NoisyOrParams):
            return [ParamIndex(node, k) for k in range(len(par.inhibitors) + 1)]
        states = self.var(node).states
        return [
            ParamIndex(node, (s, cfg))
            for cfg in self.configurations(node)
            for s in states
        ]

    def all_param_indices(self) -> list[ParamIndex]:
        return [p for v in self.variables for p in self.param_indices(v.id)]

    def param_value(self, p: ParamIndex) -> float:
        par = self.params.get(p.node)
        if par is None:
            raise UnknownEntityError(f"unknown variable {p.node!r}")
        if isinstance(par, NoisyOrParams):
            if not isinstance(p.key, int) or not 0 <= p.key <= len(par.inhibitors):
                raise UnknownEntityError(f"no noisy-OR parameter {p.key!r} on {p.node!r}")
            return par.base if p.key == BASE_KEY else par.inhibitors[p.key - 1]
        if isinstance(p.key, int) or p.key not in par.entries:
            raise UnknownEntityError(f"no table entry {p.key!r} on {p.node!r}")
        return par.entries[p.key]

    def with_params(self, updates: Mapping[ParamIndex, float]) -> "Network":
        """Copy of the network with the given raw parameter values replaced."""
        by_node: dict[str, dict] = {}
        for p, value in updates.items():
            self.param_value(p)  # validates the reference
            by_node.setdefault(p.node, {})[p.key] = float(value)
        new_params = dict(self.params)
        for node, changes in by_node.items():
            par = self.params[node]
            if isinstance(par, NoisyOrParams):
                inh = list(par.inhibitors)
                base = par.base
                for key, value in changes.items():
                    if key == BASE_KEY:
                        base = value
                    else:
                        inh[key - 1] = value
                new_params[node] = NoisyOrParams(base=base, inhibitors=tuple(inh))
            else:
                entries = dict(par.entries)
                entries.update(changes)
                new_params[node] = TableParams(entries=entries)
        return Network(variables=self.variables, parents=self.parents, params=new_params)

    def with_param(self, p: ParamIndex, value: float) -> "Network":
        return self.with_params({p: value})

    # -- numeric views -----------------------------------------------------

    def prob_array(self, node: str) -> np.ndarray:
        """Local conditional probabilities as a (n_states, n_configs) array."""
        var = self.var(node)
        par = self.params[node]
        n_cfg = self.n_configurations(node)
        out = np.empty((len(var.states), n_cfg))
        if isinstance(par, NoisyOrParams):
            q = np.full(n_cfg, par.base)
            for j, cfg in enumerate(self.configurations(node)):
                for pos, (pv, state) in enumerate(zip(self.parent_vars(node), cfg)):
                    if state == pv.states[0]:
                        q[j] *= par.inhibitors[pos]
            out[0] = 1.0 - q
            out[1] = q
            return out
        for j, cfg in enumerate(self.configurations(node)):
            col = np.array([par.entries[(s, cfg)] for s in var.states])
            out[:, j] = col / col.sum()
        return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def validate_network(net: Network) -> list[Violation]:
    """Check structural and parameter invariants; empty list means valid.

    Violations are data, not exceptions: the complete list is returned so a
    file with several problems reports all of them at once.
    """
    out: list[Violation] = []
    seen: set[str] = set()
    for v in net.variables:
        if v.id in seen:
            out.append(Violation("duplicate-variable", f"variable {v.id!r} declared twice", v.id))
        seen.add(v.id)
        if len(v.states) < 2:
            out.append(Violation("too-few-states", f"variable {v.id!r} needs at least two states", v.id))
        if len(set(v.states)) != len(v.states):
            out.append(Violation("duplicate-state", f"variable {v.id!r} has duplicate state names", v.id))

    ids = {v.id for v in net.variables}
    for node, plist in net.parents.items():
        if node not in ids:
            out.append(Violation("unknown-node", f"parents declared for unknown variable {node!r}", node))
            continue
        for p in plist:
            if p not in ids:
                out.append(Violation("unknown-parent", f"variable {node!r} lists unknown parent {p!r}", node))
        if len(set(plist)) != len(plist):
            out.append(Violation("duplicate-parent", f"variable {node!r} lists a parent twice", node))

    try:
        graph = {v.id: tuple(p for p in net.parents.get(v.id, ()) if p in ids) for v in net.variables}
        # static_order is lazy; consume it or the cycle check never runs
        list(TopologicalSorter(graph).static_order())
    except CycleError as e:
        cyc = " -> ".join(e.args[1]) if len(e.args) > 1 else ""
        out.append(Violation("cycle", f"parent graph contains a cycle: {cyc}"))

    if out:
        # structural problems make parameter checks unreliable; still try the rest
        pass

    for v in net.variables:
        par = net.params.get(v.id)
        if par is None:
            out.append(Violation("missing-parameterization", f"variable {v.id!r} has no parameterization", v.id))
            continue
        plist = net.parents.get(v.id, ())
        if any(p not in ids for p in plist):
            continue  # cannot enumerate configurations against unknown parents
        if isinstance(par, NoisyOrParams):
            family = [v] + [x for x in net.variables if x.id in plist]
            if any(len(x.states) != 2 for x in family):
                out.append(Violation(
                    "invalid-noisy-or",
                    f"noisy-OR on {v.id!r} requires a binary child and binary parents", v.id))
            if len(par.inhibitors) != len(plist):
                out.append(Violation(
                    "arity-mismatch",
                    f"noisy-OR on {v.id!r} has {len(par.inhibitors)} inhibitors for {len(plist)} parents", v.id))
            for key, value in [("base", par.base)] + [
                (f"inhibitor {j + 1}", x) for j, x in enumerate(par.inhibitors)
            ]:
                if not math.isfinite(value):
                    out.append(Violation("non-finite", f"noisy-OR {key} on {v.id!r} is not finite", v.id))
                elif not 0.0 <= value <= 1.0:
                    out.append(Violation("out-of-range", f"noisy-OR {key} on {v.id!r} is outside [0, 1]", v.id))
        else:
            expected = {(s, cfg) for s in v.states for cfg in net.configurations(v.id)}
            got = set(par.entries)
            if got != expected:
                missing = len(expected - got)
                extra = len(got - expected)
                out.append(Violation(
                    "arity-mismatch",
                    f"table on {v.id!r} does not match its family: "
                    f"{missing} entries missing, {extra} unexpected", v.id))
                continue
            for cfg in net.configurations(v.id):
                row = [par.entries[(s, cfg)] for s in v.states]
                if any(not math.isfinite(x) for x in row):
                    out.append(Violation("non-finite", f"table row {cfg!r} on {v.id!r} has a non-finite entry", v.id))
                elif any(x < 0 for x in row):
                    out.append(Violation("negative-parameter", f"table row {cfg!r} on {v.id!r} has a negative entry", v.id))
                elif sum(row) <= 0:
                    out.append(Violation("all-zero-row", f"table row {cfg!r} on {v.id!r} sums to zero", v.id))
    return out


def require_valid(net: Network) -> None:
    violations = validate_network(net)
    if violations:
        raise InvalidNetworkError(violations)


def local_prob(net: Network, node: str, state: str, cfg: Config) -> float:
    """P(node = state | parents = cfg) under the node's parameterization."""
    var = net.var(node)
    i = net.state_index(node, state)
    par = net.params[node]
    if isinstance(par, NoisyOrParams):
        q = par.base
        for pos, (pv, pstate) in enumerate(zip(net.parent_vars(node), cfg)):
            net.state_index(pv.id, pstate)
            if pstate == pv.states[0]:
                q *= par.inhibitors[pos]
        if len(cfg) != len(net.parents[node]):
            raise UnknownEntityError(f"configuration {cfg!r} does not match parents of {node!r}")
        return q if i == 1 else 1.0 - q
    net.config_index(node, cfg)  # validates cfg
    row = [par.entries[(s, cfg)] for s in var.states]
    return row[i] / sum(row)


def joint_prob(net: Network, assignment: Mapping[str, str]) -> float:
    """Probability of a full assignment: the product of all local factors."""
    missing = [v.id for v in net.variables if v.id not in assignment]
    if missing:
        raise UnknownEntityError(f"assignment misses variables {missing}")
    for node in assignment:
        net.var(node)
    p = 1.0
    for v in net.variables:
        cfg = tuple(assignment[q] for q in net.parents[v.id])
        p *= local_prob(net, v.id, assignment[v.id], cfg)
    return p


def is_frozen(net: Network, p: ParamIndex) -> bool:
    """True when the parameter is pinned at a deterministic 0/1 value.

    Such parameters cannot be varied in an open ball, so derivatives with
    respect to them are undefined; they are excluded from sensitivity and
    fitting rather than reported as zero.
    """
    par = net.params[p.node]
    if isinstance(par, NoisyOrParams):
        return net.param_value(p) in (0.0, 1.0)
    state, cfg = p.key  # type: ignore[misc]
    return local_prob(net, p.node, state, cfg) in (0.0, 1.0)


def interior_params(net: Network, node: str) -> list[ParamIndex]:
    return [p for p in net.param_indices(node) if not is_frozen(net, p)]


def u_value(net: Network, p: ParamIndex, state: str, cfg: Config) -> float:
    """Derivative of log P(node = state | cfg) with respect to parameter `p`.

    For tables the parameter only touches its own row: at the matching
    (state, config) the value is (1/S)((1-P)/P) with S the raw row sum, at
    other states of the same config it is -1/S, elsewhere 0. For noisy-OR
    parameters it is the log-derivative of the product form: 0 when the
    parameter's parent is false in `cfg`, else -(Q/theta)/(1-Q) for the true
    child and 1/theta for the false child, with Q the false-child probability.
    """
    if is_frozen(net, p):
        raise FrozenParameterError(
            f"parameter {p.describe(net)} is deterministic (0/1) and cannot be varied")
    par = net.params[p.node]
    if isinstance(par, NoisyOrParams):
        theta = net.param_value(p)
        active = p.key == BASE_KEY or (
            cfg[p.key - 1] == net.parent_vars(p.node)[p.key - 1].states[0])  # type: ignore[operator]
        if not active:
            return 0.0
        q = local_prob(net, p.node, net.var(p.node).states[1], cfg)
        if net.state_index(p.node, state) == 1:
            return 1.0 / theta
        return -(q / theta) / (1.0 - q)
    key_state, key_cfg = p.key  # type: ignore[misc]
    net.state_index(p.node, state)
    net.config_index(p.node, cfg)
    if cfg != key_cfg:
        return 0.0
    row_sum = sum(par.entries[(s, cfg)] for s in net.var(p.node).states)
    if state == key_state:
        prob = par.entries[(key_state, cfg)] / row_sum
        return (1.0 / row_sum) * ((1.0 - prob) / prob)
    return -1.0 / row_sum


def u_table(net: Network, p: ParamIndex) -> np.ndarray:
    """`u_value` over the whole family, as a (n_states, n_configs) array."""
    var = net.var(p.node)
    if is_frozen(net, p):
        raise FrozenParameterError(
            f"parameter {p.describe(net)} is deterministic (0/1) and cannot be varied")
    par = net.params[p.node]
    n_cfg = net.n_configurations(p.node)
    out = np.zeros((len(var.states), n_cfg))
    if isinstance(par, NoisyOrParams):
        theta = net.param_value(p)
        probs = net.prob_array(p.node)
        for j, cfg in enumerate(net.configurations(p.node)):
            active = p.key == BASE_KEY or (
                cfg[p.key - 1] == net.parent_vars(p.node)[p.key - 1].states[0])  # type: ignore[operator]
            if not active:
                continue
            q = probs[1, j]
            out[0, j] = -(q / theta) / (1.0 - q)
            out[1, j] = 1.0 / theta
        return out
    key_state, key_cfg = p.key  # type: ignore[misc]
    j = net.config_index(p.node, key_cfg)
    row_sum = sum(par.entries[(s, key_cfg)] for s in var.states)
    prob = par.entries[(key_state, key_cfg)] / row_sum
    out[:, j] = -1.0 / row_sum
    out[net.state_index(p.node, key_state), j] = (1.0 / row_sum) * ((1.0 - prob) / prob)
    return out


def scale_to_unit(net: Network) -> Network:
    """Rescale every table row to sum to one; noisy-OR nodes are untouched.

    Local probabilities are unchanged (the table model is scale-invariant
    per row), so this only canonicalizes the raw coordinates.
    """
    new_params: dict[str, Parameterization] = {}
    for v in net.variables:
        par = net.params[v.id]
        if isinstance(par, NoisyOrParams):
            new_params[v.id] = par
            continue
        entries: dict[TableKey, float] = {}
        for cfg in net.configurations(v.id):
            row_sum = sum(par.entries[(s, cfg)] for s in v.states)
            if row_sum <= 0:
                raise InvalidNetworkError(
                    [Violation("all-zero-row", f"table row {cfg!r} on {v.id!r} sums to zero", v.id)])
            for s in v.states:
                entries[(s, cfg)] = par.entries[(s, cfg)] / row_sum
        new_params[v.id] = TableParams(entries=entries)
    return Network(variables=net.variables, parents=net.parents, params=new_params)


def param_sort_key(p: ParamIndex):
    """Canonical ordering for deterministic reports: node, then key."""
    if isinstance(p.key, int):
        return (p.node, 0, ("", ()), p.key)
    return (p.node, 1, p.key, -1)
