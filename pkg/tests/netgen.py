"""Seeded random networks and scenarios for the oracle suites."""

from __future__ import annotations

import numpy as np

from bnsense.model import (
    Network,
    NoisyOrParams,
    TableParams,
    Variable,
    require_valid,
)
from bnsense.sensitivity import Scenario


def random_network(
    rng: np.random.Generator,
    max_nodes: int = 10,
    allow_noisy_or: bool = True,
) -> Network:
    """A random DAG with 3..max_nodes nodes, 2-3 states, interior parameters.

    Raw table weights are deliberately unnormalized so the suites also
    exercise the implicit row renormalization.
    """
    n = int(rng.integers(3, max_nodes + 1))
    cards = [int(rng.integers(2, 4)) for _ in range(n)]
    ids = [f"N{i}" for i in range(n)]
    variables = [
        Variable(id=ids[i], states=tuple(f"s{j}" for j in range(cards[i])))
        for i in range(n)
    ]

    parents: dict[str, tuple[str, ...]] = {}
    for i in range(n):
        k = int(rng.integers(0, min(i, 3) + 1))
        chosen = sorted(rng.choice(i, size=k, replace=False).tolist()) if k else []
        # keep families small enough for cheap finite differencing
        while int(np.prod([cards[j] for j in chosen], initial=1)) > 12:
            chosen.pop()
        parents[ids[i]] = tuple(ids[j] for j in chosen)

    params: dict[str, TableParams | NoisyOrParams] = {}
    for i in range(n):
        plist = parents[ids[i]]
        binary_family = cards[i] == 2 and all(cards[ids.index(q)] == 2 for q in plist)
        if allow_noisy_or and plist and binary_family and rng.random() < 0.35:
            params[ids[i]] = NoisyOrParams(
                base=float(rng.uniform(0.05, 0.95)),
                inhibitors=tuple(float(rng.uniform(0.05, 0.95)) for _ in plist),
            )
            continue
        entries = {}
        parent_states = [variables[ids.index(q)].states for q in plist]
        import itertools

        for cfg in itertools.product(*parent_states):
            for s in variables[i].states:
                entries[(s, cfg)] = float(rng.uniform(0.2, 3.0))
        params[ids[i]] = TableParams(entries=entries)

    net = Network(variables=tuple(variables), parents=parents, params=params)
    require_valid(net)
    return net


def random_scenario(rng: np.random.Generator, net: Network, max_evidence: int = 3) -> Scenario:
    """Random target plus evidence on distinct other nodes.

    Every configuration of these networks has positive probability, so any
    evidence assignment is consistent.
    """
    n = len(net.variables)
    target = net.variables[int(rng.integers(0, n))].id
    others = [v for v in net.variables if v.id != target]
    k = int(rng.integers(0, min(max_evidence, len(others)) + 1))
    picked = rng.choice(len(others), size=k, replace=False) if k else []
    evidence = {}
    for j in picked:
        v = others[int(j)]
        evidence[v.id] = v.states[int(rng.integers(0, len(v.states)))]
    return Scenario(evidence=evidence, target=target)
