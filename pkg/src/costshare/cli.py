"""Command-line interface: instance files, mechanism runs, reports.

Instance files are JSON envelopes ``{"format_version": "1", "kind": ...,
"body": {...}}`` with one body schema per problem family. Reports are
deterministic JSON (sorted keys); ``run`` can also append a CSV row for
batch sweeps. Exit codes: 0 success, 1 validation error (JSON error object
on stderr), 2 enumeration-cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict
from typing import Any, Callable, Sequence

from . import analysis
from .core import (
    Caps,
    CapacityError,
    CostOracle,
    CostShareMethod,
    InfeasibleError,
    InvalidInputError,
    MechanismOutcome,
    caps_from_env,
    check_core,
    check_cross_monotonic,
    optimal_social_cost,
    social_cost,
)
from .dmvfl import run_dmv_fl
from .facloc import FacilityLocationInstance, fl_oracle, pt_method
from .moulin import run_moulin
from .setcover import SetCoverInstance, run_dmv_setcover, sc_oracle
from .ssrob import SSRoBInstance, gst_method, ssrob_oracle
from .steiner import SteinerInstance, jv_method, steiner_oracle

FORMAT_VERSION = "1"
KINDS = ("facility-location", "steiner", "ssrob", "set-cover", "lower-bound-spec")
MECHANISMS = ("moulin-pt", "moulin-jv", "moulin-gst", "dmv-sc", "dmv-fl")
METHODS = ("pt", "jv", "gst")


# ---------------------------------------------------------------------------
# instance (de)serialization

def instance_to_dict(instance) -> dict:
    if isinstance(instance, FacilityLocationInstance):
        body = {
            "n_players": instance.n_players,
            "opening_costs": list(instance.opening_costs),
            "metric": [list(row) for row in instance.metric],
        }
        kind = "facility-location"
    elif isinstance(instance, SSRoBInstance):
        body = {
            "n_vertices": instance.n_vertices,
            "edges": [[u, v, c] for u, v, c in instance.edges],
            "root": instance.root,
            "player_vertices": list(instance.player_hosts),
            "M": instance.M,
        }
        kind = "ssrob"
    elif isinstance(instance, SteinerInstance):
        body = {
            "n_vertices": instance.n_vertices,
            "edges": [[u, v, c] for u, v, c in instance.edges],
            "root": instance.root,
            "player_vertices": list(instance.player_hosts),
        }
        kind = "steiner"
    elif isinstance(instance, SetCoverInstance):
        body = {
            "n_players": instance.n_players,
            "sets": [{"cost": c, "members": sorted(m)} for c, m in instance.sets],
        }
        kind = "set-cover"
    else:
        raise InvalidInputError(f"cannot serialize {type(instance).__name__}")
    return {"format_version": FORMAT_VERSION, "kind": kind, "body": body}


def _need(body: dict, key: str, kind: str):
    if key not in body:
        raise InvalidInputError(f"{kind} instance missing field {key!r}", f"body.{key}")
    return body[key]


def instance_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise InvalidInputError("instance file must hold a JSON object", "$")
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidInputError(
            f"unsupported format_version {doc.get('format_version')!r}", "format_version"
        )
    kind = doc.get("kind")
    if kind not in KINDS:
        raise InvalidInputError(f"unknown instance kind {kind!r}", "kind")
    body = doc.get("body")
    if not isinstance(body, dict):
        raise InvalidInputError("instance body must be a JSON object", "body")
    if kind == "facility-location":
        openings = _need(body, "opening_costs", kind)
        if "metric" in body:
            return FacilityLocationInstance(
                n_players=_need(body, "n_players", kind),
                opening_costs=tuple(openings),
                metric=tuple(tuple(row) for row in body["metric"]),
            )
        graph = _need(body, "graph", kind)
        return FacilityLocationInstance.from_graph(
            n_vertices=_need(graph, "n_vertices", kind),
            edges=[tuple(e) for e in _need(graph, "edges", kind)],
            player_vertices=_need(body, "player_vertices", kind),
            facility_vertices=_need(body, "facility_vertices", kind),
            opening_costs=openings,
        )
    if kind == "steiner":
        return SteinerInstance(
            n_vertices=_need(body, "n_vertices", kind),
            edges=tuple(tuple(e) for e in _need(body, "edges", kind)),
            root=_need(body, "root", kind),
            player_hosts=tuple(_need(body, "player_vertices", kind)),
        )
    if kind == "ssrob":
        return SSRoBInstance(
            n_vertices=_need(body, "n_vertices", kind),
            edges=tuple(tuple(e) for e in _need(body, "edges", kind)),
            root=_need(body, "root", kind),
            player_hosts=tuple(_need(body, "player_vertices", kind)),
            M=_need(body, "M", kind),
        )
    if kind == "set-cover":
        sets = tuple(
            (entry["cost"], frozenset(entry["members"]))
            for entry in _need(body, "sets", kind)
        )
        return SetCoverInstance(n_players=_need(body, "n_players", kind), sets=sets)
    # lower-bound-spec: build the layered network and hand back its instance
    construction = analysis.build_lower_bound(
        k=_need(body, "k", kind),
        beta=_need(body, "beta", kind),
        m_override=body.get("m"),
    )
    return construction.instance


def load_instance(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read instance file: {exc}", path)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"instance file is not valid JSON: {exc}", path)
    return instance_from_dict(doc), doc


def validate_instance_dict(doc: dict) -> list[dict]:
    """Schema plus invariant validation; returns diagnostics, raises nothing."""
    try:
        instance_from_dict(doc)
    except (InvalidInputError, TypeError, KeyError, ValueError) as exc:
        field = getattr(exc, "field_path", None)
        return [{"field": field or "body", "message": str(exc)}]
    except CapacityError as exc:
        return [{"field": "body", "message": str(exc)}]
    return []


def instance_digest(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_profile(path: str, n: int, label: str) -> tuple[float, ...]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read {label} file: {exc}", path)
    values = doc.get("values") if isinstance(doc, dict) else doc
    if not isinstance(values, list) or len(values) != n:
        raise InvalidInputError(f"{label} file must hold {n} values", path)
    return tuple(float(v) for v in values)


# ---------------------------------------------------------------------------
# method / oracle / mechanism dispatch

def build_oracle(instance, caps: Caps) -> CostOracle:
    if isinstance(instance, FacilityLocationInstance):
        return fl_oracle(instance, cap=caps.facilities)
    if isinstance(instance, SSRoBInstance):
        return ssrob_oracle(instance, cap=caps.vertices)
    if isinstance(instance, SteinerInstance):
        return steiner_oracle(instance, cap=caps.terminals)
    if isinstance(instance, SetCoverInstance):
        return sc_oracle(instance, cap=caps.collection)
    raise InvalidInputError(f"no oracle for {type(instance).__name__}")


def build_method(name: str, instance, caps: Caps) -> CostShareMethod:
    if name == "pt":
        if not isinstance(instance, FacilityLocationInstance):
            raise InvalidInputError("method pt needs a facility-location instance")
        return pt_method(instance)
    if name == "jv":
        if not isinstance(instance, SteinerInstance):
            raise InvalidInputError("method jv needs a steiner instance")
        return jv_method(instance)
    if name == "gst":
        if not isinstance(instance, SSRoBInstance):
            raise InvalidInputError("method gst needs an ssrob instance")
        return gst_method(instance, cap=caps.vertices)
    raise InvalidInputError(f"unknown method {name!r} (choose from {METHODS})")


def build_mechanism(name: str, instance, caps: Caps) -> Callable[[Sequence[float]], MechanismOutcome]:
    """Bids -> outcome runner for a named mechanism on a matching instance."""
    if name in ("moulin-pt", "moulin-jv", "moulin-gst"):
        method = build_method(name.split("-")[1], instance, caps)
        oracle = build_oracle(instance, caps)
        return lambda bids: run_moulin(method, oracle, bids)
    if name == "dmv-sc":
        if not isinstance(instance, SetCoverInstance):
            raise InvalidInputError("mechanism dmv-sc needs a set-cover instance")
        return lambda bids: run_dmv_setcover(instance, bids)
    if name == "dmv-fl":
        if not isinstance(instance, FacilityLocationInstance):
            raise InvalidInputError("mechanism dmv-fl needs a facility-location instance")
        return lambda bids: run_dmv_fl(instance, bids)
    raise InvalidInputError(f"unknown mechanism {name!r} (choose from {MECHANISMS})")


# ---------------------------------------------------------------------------
# report helpers

def _dump(obj: Any, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _safe_div(a: float, b: float) -> float | None:
    return a / b if b else None


def cmd_run(args, caps: Caps) -> int:
    instance, doc = load_instance(args.instance)
    n = instance.n_players
    valuations = load_profile(args.valuations, n, "valuations")
    if args.bids:
        bids = load_profile(args.bids, n, "bids")
    else:
        bids = valuations  # --truthful
    runner = build_mechanism(args.mechanism, instance, caps)
    outcome = runner(bids)
    oracle = build_oracle(instance, caps)
    measured = social_cost(oracle, valuations, outcome.served_mask, incurred=outcome.incurred_cost)
    opt_cost = opt_witness = None
    if n <= caps.subsets:
        opt_cost, witness = optimal_social_cost(oracle, valuations, cap=caps.subsets)
        opt_witness = sorted(witness)
    price_sum = outcome.price_sum()
    report = {
        "mechanism": args.mechanism,
        "instance_digest": instance_digest(doc),
        "served": sorted(outcome.served),
        "prices": list(outcome.prices),
        "incurred_cost": outcome.incurred_cost,
        "price_sum": price_sum,
        "valuations": list(valuations),
        "bids": list(bids),
        "social_cost": measured,
        "optimal_social_cost": opt_cost,
        "optimal_witness": opt_witness,
        "budget_balance_recovery": _safe_div(price_sum, outcome.incurred_cost),
        "social_cost_ratio": _safe_div(measured, opt_cost) if opt_cost is not None else None,
        "trace": [dict(event) for event in outcome.trace],
    }
    _dump(report, args.output)
    if args.csv:
        row = {
            "mechanism": report["mechanism"],
            "instance_digest": report["instance_digest"],
            "n_served": len(report["served"]),
            "incurred_cost": report["incurred_cost"],
            "price_sum": report["price_sum"],
            "social_cost": report["social_cost"],
            "optimal_social_cost": report["optimal_social_cost"],
            "budget_balance_recovery": report["budget_balance_recovery"],
            "social_cost_ratio": report["social_cost_ratio"],
        }
        new_file = not os.path.exists(args.csv)
        with open(args.csv, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            if new_file:
                writer.writeheader()
            writer.writerow(row)
    return 0


def cmd_summability(args, caps: Caps) -> int:
    instance, doc = load_instance(args.instance)
    method = build_method(args.method, instance, caps)
    oracle = build_oracle(instance, caps)
    if args.exhaustive:
        report = analysis.worst_summability(method, oracle, mode="exhaustive", cap=caps.orderings)
    elif args.random:
        report = analysis.worst_summability(
            method, oracle, mode="random", trials=args.trials, seed=args.seed
        )
    else:
        if args.set is None or args.order is None:
            raise InvalidInputError("fixed mode needs --set and --order")
        subset = [int(x) for x in args.set.split(",") if x != ""]
        order = [int(x) for x in args.order.split(",") if x != ""]
        report = analysis.summability_for(method, oracle, subset, order)
    _dump(
        {
            "method": args.method,
            "instance_digest": instance_digest(doc),
            "value": report.value,
            "subset": sorted(report.subset),
            "ordering": list(report.ordering),
            "cost": report.cost,
            "ratio": report.ratio,
            "search_mode": report.search_mode,
        },
        args.output,
    )
    return 0


def cmd_lowerbound(args, caps: Caps) -> int:
    construction = analysis.build_lower_bound(args.k, args.beta, m_override=args.m)
    instance = construction.instance
    if args.method != "jv":
        raise InvalidInputError("the layered construction is a steiner instance; use --method jv")
    method = jv_method(instance)
    oracle = steiner_oracle(instance, cap=caps.terminals)
    selection = analysis.select_good_groups(construction, method, oracle)
    report = {
        "k": construction.k,
        "beta": construction.beta,
        "m": construction.m,
        "p": construction.p,
        "n_vertices": instance.n_vertices,
        "n_players": instance.n_players,
        "level_vertex_counts": [len(v) for v in construction.level_vertices],
        "level_edge_counts": [len(e) for e in construction.level_edges],
        "level_edge_costs": [construction.edge_cost(j) for j in range(construction.p + 1)],
        "edge_status": [asdict(s) for s in selection.edge_status],
        "group_audits": [asdict(a) for a in selection.audits],
        "complete": selection.complete,
        "all_groups_good": selection.all_groups_good,
        "selected": sorted(selection.selected),
        "ordering": list(selection.ordering),
        "level_sizes_ok": selection.level_sizes_ok,
        "level_costs": list(selection.level_costs) if selection.level_costs else None,
        "prefix_sum": selection.prefix_sum,
        "prefix_ratio": selection.prefix_ratio,
        "target_bound": selection.target_bound,
        "analysis_scale_m": analysis.predicted_m(args.k, args.beta),
    }
    _dump(report, args.output)
    return 0


def cmd_verify(args, caps: Caps) -> int:
    instance, doc = load_instance(args.instance)
    result: dict[str, Any] = {"check": args.check, "instance_digest": instance_digest(doc)}
    if args.check in ("sp", "gsp", "weak-gsp"):
        if not args.mechanism:
            raise InvalidInputError(f"--check {args.check} needs --mechanism")
        if not args.valuations:
            raise InvalidInputError(f"--check {args.check} needs --valuations")
        valuations = load_profile(args.valuations, instance.n_players, "valuations")
        runner = build_mechanism(args.mechanism, instance, caps)
        grids = None
        if args.grid_multiples:
            multiples = [float(x) for x in args.grid_multiples.split(",")]
            grids = [analysis.default_bid_grid(v, multiples) for v in valuations]
        if args.check == "sp":
            violations = analysis.check_strategyproof(runner, valuations, grids, cap=args.cap)
        else:
            violations = analysis.check_gsp(
                runner,
                valuations,
                grids,
                max_coalition=args.max_coalition,
                weak=args.check == "weak-gsp",
                cap=args.cap,
            )
        result["mechanism"] = args.mechanism
        result["violations"] = [asdict(v) for v in violations]
    elif args.check == "core":
        method = build_method(args.method, instance, caps)
        oracle = build_oracle(instance, caps)
        subset = (
            [int(x) for x in args.set.split(",")] if args.set else range(instance.n_players)
        )
        violations = check_core(method, oracle, subset, cap=caps.subsets)
        result["method"] = args.method
        result["violations"] = [sorted(v) for v in violations]
    elif args.check == "cross-monotonic":
        method = build_method(args.method, instance, caps)
        violations = check_cross_monotonic(method, cap=args.cap or caps.orderings)
        result["method"] = args.method
        result["violations"] = [
            {"player": i, "subset": sorted(s), "superset": sorted(t)} for i, s, t in violations
        ]
    else:
        raise InvalidInputError(f"unknown check {args.check!r}")
    _dump(result, args.output)
    return 0


def cmd_oracle(args, caps: Caps) -> int:
    instance, doc = load_instance(args.instance)
    oracle = build_oracle(instance, caps)
    subset = [int(x) for x in args.subset.split(",") if x != ""] if args.subset else []
    report: dict[str, Any] = {
        "instance_digest": instance_digest(doc),
        "subset": sorted(subset),
        "cost": oracle.cost(subset),
    }
    if args.valuations:
        valuations = load_profile(args.valuations, instance.n_players, "valuations")
        opt_cost, witness = optimal_social_cost(oracle, valuations, cap=caps.subsets)
        report["optimal_social_cost"] = opt_cost
        report["optimal_witness"] = sorted(witness)
    _dump(report, args.output)
    return 0


def cmd_validate(args, caps: Caps) -> int:
    try:
        with open(args.instance) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot parse instance file: {exc}", args.instance)
    diagnostics = validate_instance_dict(doc)
    _dump({"instance": args.instance, "diagnostics": diagnostics}, args.output)
    return 0 if not diagnostics else 1


# ---------------------------------------------------------------------------
# argument parsing

def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costshare",
        description="Cost-sharing mechanisms, oracles, and verifiers over instance files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a named mechanism")
    run.add_argument("--mechanism", required=True, choices=MECHANISMS)
    run.add_argument("--instance", required=True)
    run.add_argument("--valuations", required=True)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--bids", help="bids file; defaults to truthful valuations")
    group.add_argument("--truthful", action="store_true", help="bid the valuations (default)")
    run.add_argument("--output")
    run.add_argument("--csv", help="append a summary row to this CSV file")
    run.set_defaults(func=cmd_run)

    summ = sub.add_parser("summability", help="prefix-sum ratio search for a method")
    summ.add_argument("--method", required=True, choices=METHODS)
    summ.add_argument("--instance", required=True)
    mode = summ.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true")
    mode.add_argument("--random", action="store_true")
    summ.add_argument("--trials", type=int, default=200)
    summ.add_argument("--seed", type=int, default=0)
    summ.add_argument("--set", help="fixed mode: comma-separated player ids")
    summ.add_argument("--order", help="fixed mode: comma-separated ordering")
    summ.add_argument("--output")
    summ.set_defaults(func=cmd_summability)

    lb = sub.add_parser("lowerbound", help="build the layered network and select groups")
    lb.add_argument("--k", type=int, required=True)
    lb.add_argument("--beta", type=float, default=2.0)
    lb.add_argument("--m", type=int, help="desk-scale group count override")
    lb.add_argument("--method", default="jv", choices=("jv",))
    lb.add_argument("--output")
    lb.set_defaults(func=cmd_lowerbound)

    verify = sub.add_parser("verify", help="incentive / core / monotonicity checks")
    verify.add_argument("--check", required=True,
                        choices=("sp", "gsp", "weak-gsp", "core", "cross-monotonic"))
    verify.add_argument("--instance", required=True)
    verify.add_argument("--mechanism", choices=MECHANISMS)
    verify.add_argument("--method", choices=METHODS)
    verify.add_argument("--valuations")
    verify.add_argument("--grid-multiples", help="comma-separated bid multiples of each valuation")
    verify.add_argument("--max-coalition", type=int, default=2)
    verify.add_argument("--cap", type=int, default=4)
    verify.add_argument("--set", help="core check: comma-separated player ids")
    verify.add_argument("--output")
    verify.set_defaults(func=cmd_verify)

    oracle = sub.add_parser("oracle", help="evaluate C(S) and the social-cost optimum")
    oracle.add_argument("--instance", required=True)
    oracle.add_argument("--subset", help="comma-separated player ids (default empty)")
    oracle.add_argument("--valuations")
    oracle.add_argument("--output")
    oracle.set_defaults(func=cmd_oracle)

    validate = sub.add_parser("validate", help="schema and invariant diagnostics")
    validate.add_argument("--instance", required=True)
    validate.add_argument("--output")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, caps_from_env())
    except CapacityError as exc:
        json.dump({"error": {"type": "capacity", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (InfeasibleError, InvalidInputError) as exc:
        error = {"type": "infeasible" if isinstance(exc, InfeasibleError) else "invalid-input",
                 "message": str(exc)}
        field = getattr(exc, "field_path", None)
        if field:
            error["field"] = field
        json.dump({"error": error}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
