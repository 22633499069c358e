"""Exact inference on a clique tree, plus a brute-force enumeration oracle.

The compiled structure is a tree of cliques over the moralized, triangulated
graph (min-fill elimination). Propagation is two-pass message passing; a
single propagation yields the evidence probability, all single-variable
marginals, and every family posterior P(x_s, x_c(s) | e), which is what the
sensitivity computations consume.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import model
from .errors import (
    EnumerationLimitError,
    InvalidScenarioError,
    UnknownEntityError,
    ZeroEvidenceError,
)
from .model import Network, require_valid

Evidence = Mapping[str, str]

ENUMERATION_LIMIT = 1 << 24
"""Largest joint state space enumerate_oracle will materialize."""


def check_evidence(net: Network, evidence: Evidence) -> None:
    for node, state in evidence.items():
        net.state_index(node, state)


@dataclass(frozen=True)
class FamilyPosterior:
    """P(x_s, x_c(s) | evidence) for one node, as an explicit table."""

    node: str
    table: Mapping[tuple[str, model.Config], float]


def _moral_edges(net: Network) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {v.id: set() for v in net.variables}
    for v in net.variables:
        ps = net.parents[v.id]
        for p in ps:
            adj[v.id].add(p)
            adj[p].add(v.id)
        for a, b in itertools.combinations(ps, 2):
            adj[a].add(b)
            adj[b].add(a)
    return adj


def _triangulate(adj: dict[str, set[str]]) -> list[frozenset[str]]:
    """Min-fill elimination; returns the elimination cliques in order."""
    work = {v: set(nb) for v, nb in adj.items()}
    cliques: list[frozenset[str]] = []
    remaining = set(work)
    while remaining:
        best = None
        for v in sorted(remaining):
            nbs = [u for u in work[v] if u in remaining]
            fill = sum(
                1
                for a, b in itertools.combinations(nbs, 2)
                if b not in work[a]
            )
            if best is None or fill < best[0]:
                best = (fill, v, nbs)
        _, v, nbs = best
        cliques.append(frozenset([v, *nbs]))
        for a, b in itertools.combinations(nbs, 2):
            work[a].add(b)
            work[b].add(a)
        remaining.remove(v)
    return cliques


def _maximal(cliques: Sequence[frozenset[str]]) -> list[frozenset[str]]:
    out: list[frozenset[str]] = []
    for c in sorted(cliques, key=len, reverse=True):
        if not any(c <= kept for kept in out):
            out.append(c)
    return out


class Calibration:
    """Result of one propagation: calibrated beliefs for a fixed evidence set.

    Beliefs are unnormalized: each clique array sums to P(evidence).
    """

    def __init__(self, ctx: "InferenceContext", net: Network, evidence: Evidence,
                 beliefs: list[np.ndarray], p_evidence: float):
        self.ctx = ctx
        self.net = net
        self.evidence = dict(evidence)
        self._beliefs = beliefs
        self.p_evidence = p_evidence

    def marginal(self, node: str) -> np.ndarray:
        """P(node | evidence) as a vector over the node's declared states."""
        self.net.var(node)
        c = self.ctx._home_clique[node]
        arr = _project(self._beliefs[c], self.ctx.clique_vars[c], (node,), self.ctx._card)
        return arr / self.p_evidence

    def family_array(self, node: str) -> np.ndarray:
        """P(node, parents | evidence) as a (n_states, n_configs) array."""
        self.net.var(node)
        keep = (node, *self.net.parents[node])
        c = self.ctx._family_clique[node]
        arr = _project(self._beliefs[c], self.ctx.clique_vars[c], keep, self.ctx._card)
        return arr.reshape(len(self.net.var(node).states), -1) / self.p_evidence


def _project(arr: np.ndarray, src: tuple[str, ...], keep: tuple[str, ...],
             card: Mapping[str, int]) -> np.ndarray:
    """Sum out the axes of `arr` not in `keep`, then order axes as `keep`."""
    keep_set = set(keep)
    drop = tuple(i for i, v in enumerate(src) if v not in keep_set)
    arr = arr.sum(axis=drop) if drop else arr
    left = [v for v in src if v in keep_set]
    perm = [left.index(v) for v in keep]
    return np.ascontiguousarray(arr.transpose(perm))


def _extend(msg: np.ndarray, sep: tuple[str, ...], dst: tuple[str, ...],
            card: Mapping[str, int]) -> np.ndarray:
    """Reshape a separator message so it broadcasts over a clique array."""
    if not sep:
        # scalar message bridging disconnected components
        return msg.reshape((1,) * len(dst))
    ordered = tuple(v for v in dst if v in set(sep))
    perm = [sep.index(v) for v in ordered]
    shape = tuple(card[v] if v in set(sep) else 1 for v in dst)
    return msg.transpose(perm).reshape(shape)


class InferenceContext:
    """Compiled clique tree for one network structure.

    Immutable after construction; `propagate` accepts parameter-changed
    copies of the same structure, so finite differences and fitting reuse
    one compilation. A propagation counter backs the pass-count guarantees
    of the sensitivity layer.
    """

    def __init__(self, net: Network):
        require_valid(net)
        self.net = net
        self._card = {v.id: len(v.states) for v in net.variables}
        self._order = {v.id: i for i, v in enumerate(net.variables)}

        adj = _moral_edges(net)
        cliques = _maximal(_triangulate(adj))
        # canonical clique identity: variables in declaration order
        self.clique_vars: list[tuple[str, ...]] = [
            tuple(sorted(c, key=self._order.__getitem__))
            for c in sorted(cliques, key=lambda c: tuple(sorted(self._order[v] for v in c)))
        ]
        n = len(self.clique_vars)

        # maximum-weight spanning forest on intersection sizes, then join
        # components with empty separators so one tree covers everything
        edges = sorted(
            ((i, j) for i in range(n) for j in range(i + 1, n)),
            key=lambda e: (-len(set(self.clique_vars[e[0]]) & set(self.clique_vars[e[1]])), e),
        )
        parent_of = list(range(n))

        def find(x: int) -> int:
            while parent_of[x] != x:
                parent_of[x] = parent_of[parent_of[x]]
                x = parent_of[x]
            return x

        self.tree_edges: list[tuple[int, int]] = []
        for i, j in edges:
            if len(set(self.clique_vars[i]) & set(self.clique_vars[j])) == 0:
                continue
            ri, rj = find(i), find(j)
            if ri != rj:
                parent_of[ri] = rj
                self.tree_edges.append((i, j))
        roots = sorted({find(i) for i in range(n)})
        for extra in roots[1:]:
            self.tree_edges.append((roots[0], extra))

        self._neighbors: list[list[int]] = [[] for _ in range(n)]
        self._separator: dict[tuple[int, int], tuple[str, ...]] = {}
        for i, j in self.tree_edges:
            self._neighbors[i].append(j)
            self._neighbors[j].append(i)
            sep = tuple(v for v in self.clique_vars[i] if v in set(self.clique_vars[j]))
            self._separator[(i, j)] = sep
            self._separator[(j, i)] = sep

        # message schedule: collect to clique 0, then distribute back out
        order: list[int] = [0]
        parent: dict[int, int] = {0: -1}
        for c in order:
            for nb in self._neighbors[c]:
                if nb not in parent:
                    parent[nb] = c
                    order.append(nb)
        self._collect = [(c, parent[c]) for c in reversed(order) if parent[c] != -1]
        self._distribute = [(parent[c], c) for c in order if parent[c] != -1]

        # each family lives in some clique; each variable gets a home clique
        self._family_clique: dict[str, int] = {}
        self._home_clique: dict[str, int] = {}
        for v in net.variables:
            fam = {v.id, *net.parents[v.id]}
            self._family_clique[v.id] = next(
                i for i, cv in enumerate(self.clique_vars) if fam <= set(cv))
            self._home_clique[v.id] = next(
                i for i, cv in enumerate(self.clique_vars) if v.id in cv)

        self.propagation_count = 0

    # -- propagation -------------------------------------------------------

    def _potentials(self, net: Network, evidence: Evidence) -> list[np.ndarray]:
        pots = [np.ones(tuple(self._card[v] for v in cv)) for cv in self.clique_vars]
        for v in net.variables:
            c = self._family_clique[v.id]
            fam = (v.id, *net.parents[v.id])
            table = net.prob_array(v.id).reshape(tuple(self._card[x] for x in fam))
            pots[c] = pots[c] * _extend(table, fam, self.clique_vars[c], self._card)
        for node, state in evidence.items():
            indicator = np.zeros(self._card[node])
            indicator[net.state_index(node, state)] = 1.0
            c = self._home_clique[node]
            pots[c] = pots[c] * _extend(indicator, (node,), self.clique_vars[c], self._card)
        return pots

    def propagate(self, evidence: Evidence, net: Network | None = None) -> Calibration:
        """Two-pass message passing under the evidence; one counted pass.

        `net` may be a parameter-modified copy of the compiled network (same
        variables, same parents); structure changes require recompilation.
        """
        self.propagation_count += 1
        net = self.net if net is None else net
        if net is not self.net:
            if tuple(v.id for v in net.variables) != tuple(v.id for v in self.net.variables) \
                    or any(net.parents[v.id] != self.net.parents[v.id] for v in net.variables):
                raise UnknownEntityError("network structure does not match the compiled context")
        check_evidence(net, evidence)

        pots = self._potentials(net, evidence)
        messages: dict[tuple[int, int], np.ndarray] = {}
        for src, dst in itertools.chain(self._collect, self._distribute):
            arr = pots[src]
            for nb in self._neighbors[src]:
                if nb != dst and (nb, src) in messages:
                    arr = arr * _extend(messages[(nb, src)], self._separator[(nb, src)],
                                        self.clique_vars[src], self._card)
            sep = self._separator[(src, dst)]
            messages[(src, dst)] = _project(arr, self.clique_vars[src], sep, self._card)

        beliefs = []
        for c in range(len(self.clique_vars)):
            arr = pots[c]
            for nb in self._neighbors[c]:
                arr = arr * _extend(messages[(nb, c)], self._separator[(nb, c)],
                                    self.clique_vars[c], self._card)
            beliefs.append(arr)
        p_e = float(beliefs[0].sum())
        if p_e <= 0.0:
            raise ZeroEvidenceError(
                f"evidence {dict(evidence)!r} has probability zero")
        return Calibration(self, net, evidence, beliefs, p_e)


def compile(net: Network) -> InferenceContext:
    """Build the clique tree for a network's structure."""
    return InferenceContext(net)


def query_marginal(ctx: InferenceContext, evidence: Evidence, target: str) -> np.ndarray:
    """Exact P(target | evidence) over the target's declared states."""
    ctx.net.var(target)
    if target in evidence:
        raise InvalidScenarioError(f"target {target!r} is fixed by the evidence")
    cal = ctx.propagate(evidence)
    marg = cal.marginal(target)
    return marg / marg.sum()


def family_posteriors(ctx: InferenceContext, evidence: Evidence) -> list[FamilyPosterior]:
    """P(x_s, x_c(s) | evidence) for every node, from a single propagation."""
    cal = ctx.propagate(evidence)
    out = []
    for v in ctx.net.variables:
        arr = cal.family_array(v.id)
        table = {
            (s, cfg): float(arr[i, j])
            for i, s in enumerate(v.states)
            for j, cfg in enumerate(ctx.net.configurations(v.id))
        }
        out.append(FamilyPosterior(node=v.id, table=table))
    return out


def enumerate_oracle(net: Network, evidence: Evidence, target: str) -> np.ndarray:
    """Exact P(target | evidence) by summing the joint over all assignments.

    Materializes the full joint as one array, so it is a testing reference,
    not an inference method; refuses state spaces beyond ENUMERATION_LIMIT.
    """
    require_valid(net)
    net.var(target)
    check_evidence(net, evidence)
    total = 1
    for v in net.variables:
        total *= len(v.states)
        if total > ENUMERATION_LIMIT:
            raise EnumerationLimitError(
                f"joint state space exceeds {ENUMERATION_LIMIT} configurations")

    axis = {v.id: i for i, v in enumerate(net.variables)}
    card = [len(v.states) for v in net.variables]
    joint = np.ones(card)
    for v in net.variables:
        fam = (v.id, *net.parents[v.id])
        table = net.prob_array(v.id).reshape([len(net.var(x).states) for x in fam])
        shape = [1] * len(card)
        perm = sorted(range(len(fam)), key=lambda i: axis[fam[i]])
        for i in perm:
            shape[axis[fam[i]]] = len(net.var(fam[i]).states)
        joint = joint * table.transpose(perm).reshape(shape)
    for node, state in evidence.items():
        indicator = np.zeros(card[axis[node]])
        indicator[net.state_index(node, state)] = 1.0
        shape = [1] * len(card)
        shape[axis[node]] = card[axis[node]]
        joint = joint * indicator.reshape(shape)
    other = tuple(i for i in range(len(card)) if i != axis[target])
    marg = joint.sum(axis=other)
    p_e = float(marg.sum())
    if p_e <= 0.0:
        raise ZeroEvidenceError(f"evidence {dict(evidence)!r} has probability zero")
    return marg / p_e
