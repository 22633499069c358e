"""Versioned JSON documents for networks, scenarios, and assessments,
plus the JSON views of reports shared by the CLI and the HTTP service.

Parsing is total: any malformed input turns into a DocumentError carrying
positioned issues, never an uncontrolled exception. Serialization is
canonical (sorted keys, two-space indent, round-trip-exact floats), so a
serialized document is a stable fingerprint of its content.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from . import model
from .errors import DocumentError, EngineError, UnknownEntityError
from .fitting import Assessment, FitResult, check_assessment
from .model import (
    BASE_KEY,
    Network,
    NoisyOrParams,
    ParamIndex,
    TableParams,
    Variable,
    validate_network,
)
from .montecarlo import EstimatedSensitivityReport
from .sensitivity import Scenario, SensitivityReport, check_scenario

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Issue:
    """One positioned parse or validation problem."""

    path: str
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = self.path
        if self.line is not None:
            where = f"line {self.line}, column {self.column}"
        return f"{where}: {self.message}" if where else self.message


@dataclass(frozen=True)
class Document:
    version: int
    network: Network
    scenarios: tuple[Scenario, ...] = ()
    assessments: tuple[Assessment, ...] = ()


# -- building jsonable values -------------------------------------------------


def network_to_jsonable(net: Network) -> dict:
    variables = []
    for v in net.variables:
        par = net.params[v.id]
        if isinstance(par, NoisyOrParams):
            cpt: dict[str, Any] = {
                "kind": "noisy-or",
                "base": par.base,
                "inhibitors": {
                    pid: par.inhibitors[i] for i, pid in enumerate(net.parents[v.id])
                },
            }
        else:
            cpt = {
                "kind": "table",
                "rows": [
                    {
                        "given": list(cfg),
                        "probs": {s: par.entries[(s, cfg)] for s in v.states},
                    }
                    for cfg in net.configurations(v.id)
                ],
            }
        entry: dict[str, Any] = {
            "id": v.id,
            "states": list(v.states),
            "parents": list(net.parents[v.id]),
            "cpt": cpt,
        }
        if v.label is not None:
            entry["label"] = v.label
        variables.append(entry)
    return {"variables": variables}


def scenario_to_jsonable(sc: Scenario) -> dict:
    return {"evidence": dict(sc.evidence), "target": sc.target}


def scenario_from_jsonable(obj: Mapping) -> Scenario:
    return Scenario(evidence=dict(obj["evidence"]), target=obj["target"])


def assessment_to_jsonable(a: Assessment) -> dict:
    return {
        "scenario": scenario_to_jsonable(a.scenario),
        "assessed": dict(a.assessed),
        "weight": a.weight,
        "kind": a.kind,
    }


def assessment_from_jsonable(obj: Mapping) -> Assessment:
    return Assessment(
        scenario=scenario_from_jsonable(obj["scenario"]),
        assessed={k: float(v) for k, v in obj["assessed"].items()},
        weight=float(obj.get("weight", 1.0)),
        kind=obj.get("kind", "holistic"),
    )


def document_to_jsonable(doc: Document) -> dict:
    return {
        "version": doc.version,
        "network": network_to_jsonable(doc.network),
        "scenarios": [scenario_to_jsonable(s) for s in doc.scenarios],
        "assessments": [assessment_to_jsonable(a) for a in doc.assessments],
    }


def serialize_document(doc: Document) -> str:
    return json.dumps(document_to_jsonable(doc), sort_keys=True, indent=2) + "\n"


# -- parsing -------------------------------------------------------------------


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


class _Walker:
    """Collects issues while extracting typed fields from parsed JSON."""

    def __init__(self):
        self.issues: list[Issue] = []

    def problem(self, path: str, message: str) -> None:
        self.issues.append(Issue(path=path, message=message))

    def mapping(self, obj: Any, path: str) -> Mapping | None:
        if not isinstance(obj, Mapping):
            self.problem(path, "expected an object")
            return None
        return obj

    def string(self, obj: Mapping, key: str, path: str, required: bool = True) -> str | None:
        if key not in obj:
            if required:
                self.problem(path, f"missing required field {key!r}")
            return None
        if not isinstance(obj[key], str):
            self.problem(f"{path}.{key}", "expected a string")
            return None
        return obj[key]

    def number(self, obj: Mapping, key: str, path: str) -> float | None:
        if key not in obj:
            self.problem(path, f"missing required field {key!r}")
            return None
        if not _is_number(obj[key]):
            self.problem(f"{path}.{key}", "expected a number")
            return None
        return float(obj[key])

    def array(self, obj: Mapping, key: str, path: str, required: bool = True) -> list | None:
        if key not in obj:
            if required:
                self.problem(path, f"missing required field {key!r}")
            return None
        if not isinstance(obj[key], list):
            self.problem(f"{path}.{key}", "expected an array")
            return None
        return obj[key]

    def string_list(self, value: list, path: str) -> list[str] | None:
        if not all(isinstance(x, str) for x in value):
            self.problem(path, "expected an array of strings")
            return None
        return list(value)


def _parse_variable(w: _Walker, obj: Any, path: str):
    m = w.mapping(obj, path)
    if m is None:
        return None
    vid = w.string(m, "id", path)
    states_raw = w.array(m, "states", path)
    states = w.string_list(states_raw, f"{path}.states") if states_raw is not None else None
    parents_raw = w.array(m, "parents", path)
    parents = w.string_list(parents_raw, f"{path}.parents") if parents_raw is not None else None
    label = w.string(m, "label", path, required=False)
    cpt = w.mapping(m.get("cpt"), f"{path}.cpt") if "cpt" in m else None
    if cpt is None and "cpt" not in m:
        w.problem(path, "missing required field 'cpt'")
    if vid is None or states is None or parents is None or cpt is None:
        return None

    kind = w.string(cpt, "kind", f"{path}.cpt")
    params: model.Parameterization | None = None
    if kind == "table":
        rows = w.array(cpt, "rows", f"{path}.cpt")
        if rows is None:
            return None
        entries: dict[model.TableKey, float] = {}
        seen_cfgs: set[tuple[str, ...]] = set()
        for i, row_obj in enumerate(rows):
            rpath = f"{path}.cpt.rows[{i}]"
            row = w.mapping(row_obj, rpath)
            if row is None:
                continue
            given_raw = w.array(row, "given", rpath)
            given = w.string_list(given_raw, f"{rpath}.given") if given_raw is not None else None
            probs = w.mapping(row.get("probs"), f"{rpath}.probs") if "probs" in row else None
            if probs is None and "probs" not in row:
                w.problem(rpath, "missing required field 'probs'")
            if given is None or probs is None:
                continue
            cfg = tuple(given)
            if cfg in seen_cfgs:
                w.problem(rpath, f"duplicate row for configuration {list(cfg)}")
                continue
            seen_cfgs.add(cfg)
            for s, value in probs.items():
                if not _is_number(value):
                    w.problem(f"{rpath}.probs.{s}", "expected a number")
                    continue
                entries[(s, cfg)] = float(value)
        params = TableParams(entries=entries)
    elif kind == "noisy-or":
        base = w.number(cpt, "base", f"{path}.cpt")
        inh_map = w.mapping(cpt.get("inhibitors"), f"{path}.cpt.inhibitors") \
            if "inhibitors" in cpt else None
        if inh_map is None and "inhibitors" not in cpt:
            w.problem(f"{path}.cpt", "missing required field 'inhibitors'")
        if base is None or inh_map is None:
            return None
        inhibitors = []
        ok = True
        for pid in parents:
            if pid not in inh_map:
                w.problem(f"{path}.cpt.inhibitors", f"missing inhibitor for parent {pid!r}")
                ok = False
            elif not _is_number(inh_map[pid]):
                w.problem(f"{path}.cpt.inhibitors.{pid}", "expected a number")
                ok = False
            else:
                inhibitors.append(float(inh_map[pid]))
        for pid in inh_map:
            if pid not in parents:
                w.problem(f"{path}.cpt.inhibitors", f"inhibitor for non-parent {pid!r}")
                ok = False
        if not ok:
            return None
        params = NoisyOrParams(base=base, inhibitors=tuple(inhibitors))
    elif kind is not None:
        w.problem(f"{path}.cpt.kind", f"unknown parameterization kind {kind!r}")
        return None
    else:
        return None
    return Variable(id=vid, states=tuple(states), label=label), tuple(parents), params


def parse_document(text: str) -> Document:
    """Parse and fully validate a document; raises DocumentError otherwise."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(
            [Issue(path="", message=f"not valid JSON: {e.msg}", line=e.lineno, column=e.colno)]
        ) from None

    w = _Walker()
    top = w.mapping(data, "$")
    if top is None:
        raise DocumentError(w.issues)

    version = top.get("version")
    if not isinstance(version, int) or isinstance(version, bool):
        w.problem("$.version", "missing or non-integer format version")
    elif version != FORMAT_VERSION:
        w.problem("$.version", f"unsupported format version {version}")

    net: Network | None = None
    network_obj = w.mapping(top.get("network"), "$.network") if "network" in top else None
    if network_obj is None and "network" not in top:
        w.problem("$", "missing required field 'network'")
    if network_obj is not None:
        var_list = w.array(network_obj, "variables", "$.network")
        if var_list is not None:
            variables: list[Variable] = []
            parents: dict[str, tuple[str, ...]] = {}
            params: dict[str, model.Parameterization] = {}
            for i, vobj in enumerate(var_list):
                parsed = _parse_variable(w, vobj, f"$.network.variables[{i}]")
                if parsed is None:
                    continue
                var, plist, pz = parsed
                variables.append(var)
                parents[var.id] = plist
                params[var.id] = pz
            if not w.issues:
                net = Network(variables=tuple(variables), parents=parents, params=params)
                for violation in validate_network(net):
                    where = violation.node or ""
                    w.problem(f"$.network.variables[id={where}]" if where else "$.network",
                              violation.message)
                if w.issues:
                    net = None

    scenarios: list[Scenario] = []
    raw_scenarios = w.array(top, "scenarios", "$", required=False)
    if raw_scenarios is not None and net is not None:
        for i, sobj in enumerate(raw_scenarios):
            spath = f"$.scenarios[{i}]"
            m = w.mapping(sobj, spath)
            if m is None:
                continue
            try:
                sc = scenario_from_jsonable(m)
                check_scenario(net, sc)
                scenarios.append(sc)
            except (EngineError, KeyError, TypeError, AttributeError) as e:
                w.problem(spath, f"invalid scenario: {e}")

    assessments: list[Assessment] = []
    raw_assessments = w.array(top, "assessments", "$", required=False)
    if raw_assessments is not None and net is not None:
        for i, aobj in enumerate(raw_assessments):
            apath = f"$.assessments[{i}]"
            m = w.mapping(aobj, apath)
            if m is None:
                continue
            try:
                a = assessment_from_jsonable(m)
                check_assessment(net, a)
                assessments.append(a)
            except (EngineError, KeyError, TypeError, ValueError, AttributeError) as e:
                w.problem(apath, f"invalid assessment: {e}")

    if w.issues or net is None:
        if not w.issues:
            w.problem("$", "document has no usable network")
        raise DocumentError(w.issues)
    return Document(
        version=FORMAT_VERSION,
        network=net,
        scenarios=tuple(scenarios),
        assessments=tuple(assessments),
    )


def load_dyspnea() -> Document:
    """The bundled eight-node chest-clinic example network."""
    text = resources.files("bnsense").joinpath("data/dyspnea.json").read_text("utf-8")
    return parse_document(text)


# -- parameter references ------------------------------------------------------


def param_index_to_jsonable(net: Network, p: ParamIndex) -> dict:
    if isinstance(p.key, int):
        if p.key == BASE_KEY:
            return {"node": p.node, "term": "base"}
        return {"node": p.node, "term": "inhibitor",
                "parent": net.parents[p.node][p.key - 1]}
    state, cfg = p.key
    return {"node": p.node, "state": state, "given": list(cfg)}


def param_index_from_jsonable(net: Network, obj: Mapping) -> ParamIndex:
    node = obj.get("node")
    if not isinstance(node, str):
        raise UnknownEntityError("parameter reference is missing its node")
    net.var(node)
    term = obj.get("term")
    if term is not None:
        if not isinstance(net.params[node], NoisyOrParams):
            raise UnknownEntityError(f"{node!r} is not a noisy-or node")
        if term == "base":
            return ParamIndex(node, BASE_KEY)
        if term == "inhibitor":
            parent = obj.get("parent")
            if parent not in net.parents[node]:
                raise UnknownEntityError(
                    f"{parent!r} is not a parent of {node!r}")
            return ParamIndex(node, net.parents[node].index(parent) + 1)
        raise UnknownEntityError(f"unknown parameter term {term!r}")
    state = obj.get("state")
    given = obj.get("given")
    if not isinstance(state, str) or not isinstance(given, list):
        raise UnknownEntityError("table parameter reference needs 'state' and 'given'")
    p = ParamIndex(node, (state, tuple(given)))
    net.param_value(p)  # resolves or raises
    return p


# -- report views ---------------------------------------------------------------


def _sorted_params(params, net: Network) -> list[dict]:
    return [param_index_to_jsonable(net, p) for p in sorted(params, key=model.param_sort_key)]


def sensitivity_report_to_jsonable(net: Network, report: SensitivityReport) -> dict:
    keys = sorted(report.entries, key=lambda k: (model.param_sort_key(k[0]), k[1]))
    return {
        "scenario": scenario_to_jsonable(report.scenario),
        "target_states": list(report.target_states),
        "target_marginal": list(report.target_marginal),
        "entries": [
            {
                "param": param_index_to_jsonable(net, p),
                "state": s,
                "value": report.entries[(p, s)],
            }
            for p, s in keys
        ],
        "structural_zero": _sorted_params(report.structural_zero, net),
        "frozen": _sorted_params(report.frozen, net),
        "node_max": dict(sorted(report.node_max.items())),
    }


def sensitivity_report_from_jsonable(net: Network, obj: Mapping) -> SensitivityReport:
    return SensitivityReport(
        scenario=scenario_from_jsonable(obj["scenario"]),
        target_states=tuple(obj["target_states"]),
        target_marginal=tuple(float(x) for x in obj["target_marginal"]),
        entries={
            (param_index_from_jsonable(net, e["param"]), e["state"]): float(e["value"])
            for e in obj["entries"]
        },
        structural_zero=frozenset(
            param_index_from_jsonable(net, x) for x in obj["structural_zero"]
        ),
        frozen=frozenset(param_index_from_jsonable(net, x) for x in obj["frozen"]),
        node_max={k: float(v) for k, v in obj["node_max"].items()},
    )


def estimated_report_to_jsonable(net: Network, report: EstimatedSensitivityReport) -> dict:
    keys = sorted(report.entries, key=lambda k: (model.param_sort_key(k[0]), k[1]))
    return {
        "scenario": scenario_to_jsonable(report.scenario),
        "target_states": list(report.target_states),
        "target_marginal": list(report.target_marginal),
        "entries": [
            {
                "param": param_index_to_jsonable(net, p),
                "state": s,
                "value": report.entries[(p, s)],
                "stderr": report.stderr[(p, s)],
            }
            for p, s in keys
        ],
        "undefined": [
            {"param": param_index_to_jsonable(net, p), "state": s}
            for p, s in sorted(report.undefined,
                               key=lambda k: (model.param_sort_key(k[0]), k[1]))
        ],
        "frozen": _sorted_params(report.frozen, net),
        "method": report.method,
        "sample_count": report.sample_count,
        "seed": report.seed,
    }


def estimated_report_from_jsonable(net: Network, obj: Mapping) -> EstimatedSensitivityReport:
    entries = {}
    stderr = {}
    for e in obj["entries"]:
        key = (param_index_from_jsonable(net, e["param"]), e["state"])
        entries[key] = float(e["value"])
        stderr[key] = float(e["stderr"])
    return EstimatedSensitivityReport(
        scenario=scenario_from_jsonable(obj["scenario"]),
        target_states=tuple(obj["target_states"]),
        target_marginal=tuple(float(x) for x in obj["target_marginal"]),
        entries=entries,
        stderr=stderr,
        undefined=frozenset(
            (param_index_from_jsonable(net, u["param"]), u["state"])
            for u in obj["undefined"]
        ),
        frozen=frozenset(param_index_from_jsonable(net, x) for x in obj["frozen"]),
        method=obj["method"],
        sample_count=int(obj["sample_count"]),
        seed=int(obj["seed"]),
    )


def fit_result_to_jsonable(fr: FitResult) -> dict:
    return {
        "network": network_to_jsonable(fr.network),
        "objective_trace": list(fr.objective_trace),
        "distances": list(fr.distances),
        "outliers": list(fr.outliers),
        "restart_index": fr.restart_index,
    }


def fit_result_from_jsonable(obj: Mapping) -> FitResult:
    doc = parse_document(json.dumps({
        "version": FORMAT_VERSION,
        "network": obj["network"],
    }))
    return FitResult(
        network=doc.network,
        objective_trace=tuple(float(x) for x in obj["objective_trace"]),
        distances=tuple(float(x) for x in obj["distances"]),
        outliers=tuple(int(x) for x in obj["outliers"]),
        restart_index=int(obj["restart_index"]),
    )


def node_summary_to_jsonable(net: Network, summary: Mapping) -> dict:
    return {
        node: {
            "value": value,
            "param": param_index_to_jsonable(net, p),
            "state": state,
        }
        for node, (value, p, state) in sorted(summary.items())
    }


def query_to_jsonable(net: Network, target: str, probabilities) -> dict:
    return {
        "target": target,
        "states": list(net.var(target).states),
        "probabilities": [float(x) for x in probabilities],
    }
