"""Sampling-based estimation of the analytic sensitivity values.

Each full-network realization carries a weight w (rejection: 0/1 on evidence
match; likelihood weighting: product of evidence likelihoods). Per parameter
and target state, A accumulates w·U and B accumulates w; the plug-in ratio
estimates feed the same derivative formula the exact engine uses. Standard
errors come from the usual linearization of the ratio estimator.

Sampling is batched; each batch draws from an independently seeded stream
derived from (seed, batch index), so a run's output depends only on the seed
and sample count, not on batch partitioning or platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import model
from .errors import SamplingError
from .inference import Evidence
from .model import Network, ParamIndex
from .sensitivity import Scenario, check_scenario

LOGIC_REJECTION = "logic-rejection"
LIKELIHOOD_WEIGHTING = "likelihood-weighting"

BATCH = 1 << 15
"""Samples per internal batch; fixed so results are partition-independent."""


@dataclass(frozen=True)
class SamplerConfig:
    method: str
    sample_count: int
    seed: int

    def __post_init__(self):
        if self.method not in (LOGIC_REJECTION, LIKELIHOOD_WEIGHTING):
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")


class Accumulators:
    """Running sums per parameter and target state.

    For each parameter, `a` holds sum of w·U per target state and the shared
    `b` holds sum of w per target state (the increment never depends on the
    parameter, so one array serves all). The squared-term arrays exist only
    to produce standard errors. Merging is element-wise addition, so batches
    may be accumulated in any grouping.
    """

    def __init__(self, params: list[ParamIndex], n_states: int):
        self.params = list(params)
        self.n_states = n_states
        self.a = {p: np.zeros(n_states) for p in params}
        self.a2 = {p: np.zeros(n_states) for p in params}   # sum w^2 u
        self.au2 = {p: np.zeros(n_states) for p in params}  # sum w^2 u^2
        self.b = np.zeros(n_states)
        self.b2 = np.zeros(n_states)
        self.n = 0

    def b_for(self, p: ParamIndex) -> np.ndarray:
        return self.b

    def merge(self, other: "Accumulators") -> "Accumulators":
        if other.params != self.params or other.n_states != self.n_states:
            raise ValueError("accumulator shapes do not match")
        out = Accumulators(self.params, self.n_states)
        for p in self.params:
            out.a[p] = self.a[p] + other.a[p]
            out.a2[p] = self.a2[p] + other.a2[p]
            out.au2[p] = self.au2[p] + other.au2[p]
        out.b = self.b + other.b
        out.b2 = self.b2 + other.b2
        out.n = self.n + other.n
        return out


@dataclass(frozen=True)
class EstimatedSensitivityReport:
    """Monte Carlo counterpart of SensitivityReport, with uncertainty.

    Entries for target states that no positively weighted sample reached are
    listed in `undefined` instead of being fabricated.
    """

    scenario: Scenario
    target_states: tuple[str, ...]
    target_marginal: tuple[float, ...]
    entries: Mapping[tuple[ParamIndex, str], float]
    stderr: Mapping[tuple[ParamIndex, str], float]
    undefined: frozenset[tuple[ParamIndex, str]]
    frozen: frozenset[ParamIndex]
    method: str
    sample_count: int
    seed: int


def _batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, batch_index])))


def _sample_batch(
    net: Network,
    evidence: Evidence,
    method: str,
    rng: np.random.Generator,
    size: int,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], np.ndarray]:
    """Draw `size` realizations; returns per-node state and parent-config
    index arrays plus the weight vector."""
    states: dict[str, np.ndarray] = {}
    cfg_idx: dict[str, np.ndarray] = {}
    w = np.ones(size)
    for node in net.topo_order:
        k = len(net.var(node).states)
        idx = np.zeros(size, dtype=np.int64)
        for parent in net.parents[node]:
            idx = idx * len(net.var(parent).states) + states[parent]
        cfg_idx[node] = idx
        probs = net.prob_array(node)
        if method == LIKELIHOOD_WEIGHTING and node in evidence:
            s = np.full(size, net.state_index(node, evidence[node]), dtype=np.int64)
            w = w * probs[s[0], idx]
        else:
            cums = np.cumsum(probs, axis=0)[:, idx]
            r = rng.random(size)
            s = np.minimum((r[None, :] >= cums).sum(axis=0), k - 1).astype(np.int64)
        states[node] = s
    if method == LOGIC_REJECTION:
        match = np.ones(size, dtype=bool)
        for node, state in evidence.items():
            match &= states[node] == net.state_index(node, state)
        w = match.astype(float)
    return states, cfg_idx, w


def draw_sample(
    net: Network, evidence: Evidence, method: str, rng: np.random.Generator
) -> tuple[dict[str, str], float]:
    """One realization of every variable plus its sampling weight."""
    states, _, w = _sample_batch(net, evidence, method, rng, 1)
    assignment = {
        v.id: v.states[int(states[v.id][0])] for v in net.variables
    }
    return assignment, float(w[0])


def estimate_sensitivities(
    net: Network, sc: Scenario, cfg: SamplerConfig
) -> EstimatedSensitivityReport:
    """Estimate every interior parameter's derivative with a standard error."""
    model.require_valid(net)
    check_scenario(net, sc)
    t_states = net.var(sc.target).states
    k = len(t_states)

    frozen: set[ParamIndex] = set()
    params: list[ParamIndex] = []
    for v in net.variables:
        for p in net.param_indices(v.id):
            if model.is_frozen(net, p):
                frozen.add(p)
            else:
                params.append(p)

    u_tables = {p: model.u_table(net, p) for p in params}
    # When evidence pins a whole family, U is the same for every positively
    # weighted sample; shifting U by that constant leaves the estimator
    # unchanged (the constant cancels in the expectation difference) and
    # makes these known-zero entries come out exactly 0 with zero error.
    offsets: dict[ParamIndex, float] = {}
    for p in params:
        family = (p.node, *net.parents[p.node])
        if all(x in sc.evidence for x in family):
            j = net.config_index(p.node, tuple(sc.evidence[x] for x in net.parents[p.node]))
            i = net.state_index(p.node, sc.evidence[p.node])
            offsets[p] = float(u_tables[p][i, j])

    acc = Accumulators(params, k)
    remaining = cfg.sample_count
    batch_index = 0
    while remaining > 0:
        size = min(BATCH, remaining)
        rng = _batch_rng(cfg.seed, batch_index)
        states, cfg_idx, w = _sample_batch(net, sc.evidence, cfg.method, rng, size)
        t_idx = states[sc.target]
        w2 = w * w
        acc.b += np.bincount(t_idx, weights=w, minlength=k)
        acc.b2 += np.bincount(t_idx, weights=w2, minlength=k)
        for p in params:
            u = u_tables[p][states[p.node], cfg_idx[p.node]]
            if p in offsets:
                u = u - offsets[p]
            wu = w * u
            acc.a[p] += np.bincount(t_idx, weights=wu, minlength=k)
            acc.a2[p] += np.bincount(t_idx, weights=w2 * u, minlength=k)
            acc.au2[p] += np.bincount(t_idx, weights=w2 * u * u, minlength=k)
        acc.n += size
        remaining -= size
        batch_index += 1

    return _report_from(acc, net, sc, cfg, t_states, frozen)


def _report_from(
    acc: Accumulators,
    net: Network,
    sc: Scenario,
    cfg: SamplerConfig,
    t_states: tuple[str, ...],
    frozen: set[ParamIndex],
) -> EstimatedSensitivityReport:
    n = acc.n
    sd = float(acc.b.sum())
    if sd <= 0.0:
        raise SamplingError(
            f"all {cfg.sample_count} samples had zero weight under {cfg.method}; "
            "the evidence was never matched")
    sdd = float(acc.b2.sum())
    defined = acc.b > 0.0

    entries: dict[tuple[ParamIndex, str], float] = {}
    stderr: dict[tuple[ParamIndex, str], float] = {}
    undefined: set[tuple[ParamIndex, str]] = set()

    d_mean = sd / n
    dd_var = sdd / n - d_mean * d_mean
    b_mean = acc.b / n
    b_var = acc.b2 / n - b_mean * b_mean
    bd_cov = acc.b2 / n - b_mean * d_mean

    for p in acc.params:
        sa = acc.a[p]
        sc_ = float(sa.sum())
        sab = acc.a2[p]
        saa = acc.au2[p]
        scc = float(saa.sum())
        scd = float(sab.sum())

        a_mean = sa / n
        c_mean = sc_ / n
        aa_var = saa / n - a_mean * a_mean
        ab_cov = sab / n - a_mean * b_mean
        ac_cov = saa / n - a_mean * c_mean
        ad_cov = sab / n - a_mean * d_mean
        bc_cov = sab / n - b_mean * c_mean
        cc_var = scc / n - c_mean * c_mean
        cd_cov = scd / n - c_mean * d_mean

        g0 = 1.0 / d_mean
        g1 = -c_mean / d_mean**2
        g2 = -b_mean / d_mean**2
        g3 = -a_mean / d_mean**2 + 2.0 * b_mean * c_mean / d_mean**3

        var = (
            g0 * g0 * aa_var
            + g1 * g1 * b_var
            + g2 * g2 * cc_var
            + g3 * g3 * dd_var
            + 2.0 * g0 * g1 * ab_cov
            + 2.0 * g0 * g2 * ac_cov
            + 2.0 * g0 * g3 * ad_cov
            + 2.0 * g1 * g2 * bc_cov
            + 2.0 * g1 * g3 * bd_cov
            + 2.0 * g2 * g3 * cd_cov
        ) / n

        est = a_mean / d_mean - b_mean * c_mean / d_mean**2
        for i, state in enumerate(t_states):
            if not defined[i]:
                undefined.add((p, state))
                continue
            entries[(p, state)] = float(est[i])
            stderr[(p, state)] = float(np.sqrt(max(float(var[i]), 0.0)))

    return EstimatedSensitivityReport(
        scenario=sc,
        target_states=t_states,
        target_marginal=tuple(float(x) for x in (acc.b / sd)),
        entries=entries,
        stderr=stderr,
        undefined=frozenset(undefined),
        frozen=frozenset(frozen),
        method=cfg.method,
        sample_count=cfg.sample_count,
        seed=cfg.seed,
    )
