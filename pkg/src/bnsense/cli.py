"""Command-line interface: validate, query, sens, mc-sens, fit, outliers.

Exit codes: 0 success, 1 domain error (bad network, impossible evidence,
unknown entity), 2 usage error. `--format json` emits the same JSON the
HTTP service returns for the equivalent request; the default human tables
round values to four significant digits.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from . import formats, inference, model
from .errors import DocumentError, EngineError
from .fitting import (
    Assessment,
    FitConfig,
    LOGARITHMIC,
    QUADRATIC,
    ScoringRule,
    assessment_distance,
    fit,
)
from .montecarlo import (
    LIKELIHOOD_WEIGHTING,
    LOGIC_REJECTION,
    SamplerConfig,
    estimate_sensitivities,
)
from .sensitivity import Scenario, node_max_summary, sensitivities

RULES = {"log": LOGARITHMIC, "quad": QUADRATIC}
METHODS = {"lw": LIKELIHOOD_WEIGHTING, "reject": LOGIC_REJECTION}


def _evidence(text: str) -> dict[str, str]:
    if not text:
        return {}
    out: dict[str, str] = {}
    for part in text.split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(
                f"evidence item {part!r} is not of the form VAR=state")
        var, state = part.split("=", 1)
        if not var or not state:
            raise argparse.ArgumentTypeError(
                f"evidence item {part!r} is not of the form VAR=state")
        if var in out:
            raise argparse.ArgumentTypeError(f"evidence lists {var!r} twice")
        out[var] = state
    return out


def _node_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def _load(path: str) -> formats.Document:
    doc = formats.parse_document(Path(path).read_text("utf-8"))
    return formats.Document(
        version=doc.version,
        network=model.scale_to_unit(doc.network),
        scenarios=doc.scenarios,
        assessments=doc.assessments,
    )


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _param_label(net: model.Network, p: model.ParamIndex) -> str:
    return p.describe(net)


def _cmd_validate(args) -> int:
    try:
        doc = _load(args.file)
    except DocumentError as e:
        if args.format == "json":
            _emit_json({"ok": False, "issues": [str(i) for i in e.issues]})
        else:
            for issue in e.issues:
                print(issue, file=sys.stderr)
        return 1
    if args.format == "json":
        _emit_json({"ok": True, "variables": len(doc.network.variables)})
    else:
        print(f"OK: {len(doc.network.variables)} variables, "
              f"{len(doc.scenarios)} scenarios, {len(doc.assessments)} assessments")
    return 0


def _cmd_query(args) -> int:
    doc = _load(args.file)
    net = doc.network
    ctx = inference.compile(net)
    dist = inference.query_marginal(ctx, args.evidence, args.target)
    if args.format == "json":
        _emit_json(formats.query_to_jsonable(net, args.target, dist))
    else:
        for state, p in zip(net.var(args.target).states, dist):
            print(f"{state}\t{_fmt(p)}")
    return 0


def _cmd_sens(args) -> int:
    doc = _load(args.file)
    net = doc.network
    sc = Scenario(evidence=args.evidence, target=args.target)
    report = sensitivities(net, sc, nodes=args.nodes)
    if args.summary:
        summary = node_max_summary(report)
        if args.format == "json":
            _emit_json(formats.node_summary_to_jsonable(net, summary))
        else:
            print("node\tmax|dP/dtheta|\tparameter\ttarget state")
            for node in sorted(summary):
                value, p, state = summary[node]
                print(f"{node}\t{_fmt(value)}\t{_param_label(net, p)}\t{state}")
        return 0
    if args.format == "json":
        _emit_json(formats.sensitivity_report_to_jsonable(net, report))
    else:
        print("target distribution:",
              " ".join(f"{s}={_fmt(x)}" for s, x in
                       zip(report.target_states, report.target_marginal)))
        print("parameter\ttarget state\tdP/dtheta")
        keys = sorted(report.entries,
                      key=lambda k: (model.param_sort_key(k[0]), k[1]))
        for p, state in keys:
            print(f"{_param_label(net, p)}\t{state}\t{_fmt(report.entries[(p, state)])}")
        if report.frozen:
            frozen = ", ".join(sorted(_param_label(net, p) for p in report.frozen))
            print(f"frozen (not differentiable): {frozen}")
    return 0


def _cmd_mc_sens(args) -> int:
    doc = _load(args.file)
    net = doc.network
    sc = Scenario(evidence=args.evidence, target=args.target)
    cfg = SamplerConfig(method=METHODS[args.method], sample_count=args.n, seed=args.seed)
    report = estimate_sensitivities(net, sc, cfg)
    if args.format == "json":
        _emit_json(formats.estimated_report_to_jsonable(net, report))
    else:
        print(f"method={report.method} samples={report.sample_count} seed={report.seed}")
        print("parameter\ttarget state\testimate\tstderr")
        keys = sorted(report.entries,
                      key=lambda k: (model.param_sort_key(k[0]), k[1]))
        for p, state in keys:
            print(f"{_param_label(net, p)}\t{state}\t"
                  f"{_fmt(report.entries[(p, state)])}\t{_fmt(report.stderr[(p, state)])}")
        for p, state in sorted(report.undefined,
                               key=lambda k: (model.param_sort_key(k[0]), k[1])):
            print(f"{_param_label(net, p)}\t{state}\tundefined\t-")
    return 0


def _cmd_fit(args) -> int:
    doc = _load(args.file)
    if not doc.assessments:
        print("document contains no assessments to fit against", file=sys.stderr)
        return 1
    cfg = FitConfig(
        step_size=args.step,
        max_epochs=args.epochs,
        convergence_tol=args.tol,
        restarts=args.restarts,
        scenario_order=args.order,
        parameter_floor=args.floor,
        seed=args.seed,
    )
    result = fit(doc.network, doc.assessments, ScoringRule(RULES[args.rule]), cfg)
    if args.out:
        fitted = formats.Document(
            version=doc.version,
            network=result.network,
            scenarios=doc.scenarios,
            assessments=doc.assessments,
        )
        Path(args.out).write_text(formats.serialize_document(fitted), "utf-8")
    if args.format == "json":
        _emit_json(formats.fit_result_to_jsonable(result))
    else:
        trace = result.objective_trace
        print(f"restart {result.restart_index}: objective "
              f"{_fmt(trace[0])} -> {_fmt(trace[-1])} over {len(trace) - 1} epochs")
        for i, d in enumerate(result.distances):
            mark = "  <- outlier" if i in result.outliers else ""
            print(f"assessment {i}\tdistance {_fmt(d)}{mark}")
        if args.out:
            print(f"fitted network written to {args.out}")
    return 0


def _cmd_outliers(args) -> int:
    doc = _load(args.file)
    if not doc.assessments:
        print("document contains no assessments", file=sys.stderr)
        return 1
    net = doc.network
    ctx = inference.compile(net)
    rule = ScoringRule(RULES[args.rule])
    distances = [assessment_distance(net, a, rule, ctx) for a in doc.assessments]
    median = statistics.median(distances)
    threshold = max(args.threshold * median, args.min_distance)
    flagged = [i for i, d in enumerate(distances) if d > threshold]
    if args.format == "json":
        _emit_json({
            "distances": distances,
            "median": median,
            "threshold": threshold,
            "outliers": flagged,
        })
    else:
        for i, d in enumerate(distances):
            mark = "  <- outlier" if i in flagged else ""
            print(f"assessment {i}\tdistance {_fmt(d)}{mark}")
        print(f"median {_fmt(median)}, threshold {_fmt(threshold)}, "
              f"{len(flagged)} outlier(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnsense",
        description="Sensitivity analysis and assessment fitting for Bayesian networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("file", help="network document (JSON)")
        p.add_argument("--format", choices=["human", "json"], default="human")

    p = sub.add_parser("validate", help="check a document and report violations")
    common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("query", help="posterior distribution of a target variable")
    common(p)
    p.add_argument("--evidence", type=_evidence, default={},
                   help="comma-separated VAR=state pairs")
    p.add_argument("--target", required=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("sens", help="exact sensitivities for a scenario")
    common(p)
    p.add_argument("--evidence", type=_evidence, default={})
    p.add_argument("--target", required=True)
    p.add_argument("--nodes", type=_node_list, default=None,
                   help="restrict to these nodes (comma-separated)")
    p.add_argument("--summary", action="store_true",
                   help="per-node maximum absolute sensitivity only")
    p.set_defaults(func=_cmd_sens)

    p = sub.add_parser("mc-sens", help="sampled sensitivities with standard errors")
    common(p)
    p.add_argument("--evidence", type=_evidence, default={})
    p.add_argument("--target", required=True)
    p.add_argument("--method", choices=sorted(METHODS), default="lw")
    p.add_argument("--n", type=int, default=100000, help="sample count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_mc_sens)

    p = sub.add_parser("fit", help="gradient-descent fit to the document's assessments")
    common(p)
    p.add_argument("--rule", choices=sorted(RULES), default="log")
    p.add_argument("--step", type=float, default=0.2, help="initial step size")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8, help="relative objective tolerance")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--order", choices=["fixed-cycle", "shuffled"], default="fixed-cycle")
    p.add_argument("--floor", type=float, default=1e-6, help="parameter floor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the fitted document here")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("outliers", help="assessments the current network fits poorly")
    common(p)
    p.add_argument("--rule", choices=sorted(RULES), default="log")
    p.add_argument("--threshold", type=float, default=3.0,
                   help="flag distances above this multiple of the median")
    p.add_argument("--min-distance", type=float, default=1e-3,
                   help="never flag distances at or below this value")
    p.set_defaults(func=_cmd_outliers)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DocumentError as e:
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"cannot read {e.filename}", file=sys.stderr)
        return 1
    except EngineError as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
