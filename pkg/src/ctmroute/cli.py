"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 assumption violation, 3 success with
part of the exogenous flow left at the origin.

Tables show minutes; JSON and CSV carry hours unless a column name says
otherwise. Every JSON document embeds the network and the arguments it was
computed from, so ``ctmroute replay`` can recompute it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import __version__
from .assignment import (
    RoutingVector,
    classify_routes,
    consistent_density,
    transfer_accounting,
)
from .equilibrium import (
    GameInstance,
    Undefined,
    WardropKind,
    price_of_anarchy,
    route_times,
    social_optimum,
    total_cost,
    wardrop,
)
from .errors import AssumptionViolation, CTMError, DomainError
from .fundamental import isclose
from .generalnet import search_equilibrium
from .netfile import InputError, NetworkDocument, load_document, parse_network
from .traveltime import link_travel_time

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_PARTIAL = 0, 1, 2, 3
PSI_TOL = 1e-9

MERGE_NOTE = (
    "steady states use proportional sharing of supply at link entrances; "
    "equilibria derived under other merge rules can differ"
)


@dataclass
class Report:
    result: dict
    table: list[str]
    csv_header: list[str] = field(default_factory=list)
    csv_rows: list[list] = field(default_factory=list)
    code: int = EXIT_OK


def _min(h: float) -> str:
    return f"{h * 60:.6g}"


def _num(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(float(v)) if isinstance(v, (int, float)) else str(v)


def _vec(xs) -> str:
    return ", ".join(f"{x:.6g}" for x in xs)


def _phi(doc: NetworkDocument, args: dict) -> float:
    phi = args.get("phi")
    if phi is None:
        phi = doc.exogenous_flow
    if phi is None:
        raise InputError("no exogenous flow: pass --phi or set exogenous_flow_veh_per_h")
    if not math.isfinite(phi):
        raise InputError(f"--phi must be finite, got {phi!r}")
    return float(phi)


def _parallel(doc: NetworkDocument):
    if doc.kind != "parallel":
        raise InputError("this command needs a network of kind 'parallel'")
    return doc.network


def _route_rows(net, labels, routing, phi, densities, times):
    return [
        [labels[p], _num(r), _num(phi * r), ";".join(_num(x) for x in densities[p]), _num(times[p])]
        for p, r in enumerate(routing)
    ]


ROUTE_HEADER = ["route", "ratio", "nominal_flow_veh_per_h", "densities_veh_per_km", "travel_time_h"]


# --------------------------------------------------------------------------
# commands


def run_wardrop(doc: NetworkDocument, args: dict) -> Report:
    net = _parallel(doc)
    phi = _phi(doc, args)
    game = GameInstance(net, phi)
    sol = wardrop(game)
    idx = sol.indices
    a = sol.assignment
    times = route_times(a)
    result = {
        "tag": sol.kind.value,
        "k": idx.k,
        "U": sorted(idx.U),
        "u": idx.u,
        "j": idx.j,
        "routes": list(doc.route_labels),
        "routing": list(a.routing),
        "route_flows_veh_per_h": [a.route_flow(p) for p in range(len(net))],
        "densities_veh_per_km": [list(d) for d in a.densities],
        "route_times_h": list(times),
        "common_travel_time_h": sol.common_travel_time,
        "psi_veh_per_h": sol.psi,
        "psi_interval_veh_per_h": list(sol.psi_interval),
        "u_flow_interval_veh_per_h": list(sol.u_flow_interval) if sol.u_flow_interval else None,
        "residuals_h": list(sol.residuals),
    }
    U = "{" + ",".join(map(str, sorted(idx.U))) + "}"
    table = [
        f"equilibrium          {sol.kind.value}",
        f"indices              k={idx.k}  U={U}  u={idx.u or '-'}  j={idx.j or '-'}",
        f"exogenous flow       {phi:g} veh/h",
        *_route_table(doc.route_labels, a, times),
        f"common travel time   {_min(sol.common_travel_time)} min",
    ]
    lo, hi = sol.psi_interval
    if sol.kind is WardropKind.INTERVAL_FAMILY:
        table.append(f"non-transferred      [{lo:g}, {hi:g}] veh/h over the family; shown member {sol.psi:g}")
    else:
        table.append(f"non-transferred      {sol.psi:g} veh/h")
    table.append(f"residuals            {_vec(r * 60 for r in sol.residuals)} min")
    code = EXIT_OK if sol.psi <= PSI_TOL * phi else EXIT_PARTIAL
    rows = _route_rows(net, doc.route_labels, a.routing, phi, a.densities, times)
    return Report(result, table, ROUTE_HEADER, rows, code)


def _route_table(labels, assignment, times):
    lines = ["route  ratio      flow veh/h  time min  densities veh/km"]
    for p, label in enumerate(labels):
        lines.append(
            f"{label:<6} {assignment.routing[p]:<10.6g} {assignment.route_flow(p):<11.6g} "
            f"{_min(times[p]):<9} {_vec(assignment.densities[p])}"
        )
    return lines


def _poa_fields(game):
    poa = price_of_anarchy(game)
    if isinstance(poa, Undefined):
        return None, str(poa), poa
    return poa, None, poa


def run_optimum(doc: NetworkDocument, args: dict) -> Report:
    net = _parallel(doc)
    phi = _phi(doc, args)
    game = GameInstance(net, phi)
    so = social_optimum(game)
    a = so.assignment
    times = route_times(a)
    poa, reason, raw = _poa_fields(game)
    result = {
        "routes": list(doc.route_labels),
        "routing": list(a.routing),
        "route_flows_veh_per_h": [a.route_flow(p) for p in range(len(net))],
        "densities_veh_per_km": [list(d) for d in a.densities],
        "route_times_h": list(times),
        "total_cost_veh_h": so.total_cost,
        "price_of_anarchy": poa,
        "price_of_anarchy_note": reason,
    }
    table = [
        "social optimum",
        f"exogenous flow       {phi:g} veh/h",
        *_route_table(doc.route_labels, a, times),
        f"total cost           {so.total_cost:.6g} veh*h",
        f"price of anarchy     {raw if reason else f'{poa:.10g}'}",
    ]
    rows = _route_rows(net, doc.route_labels, a.routing, phi, a.densities, times)
    return Report(result, table, ROUTE_HEADER, rows, EXIT_OK)


def run_poa(doc: NetworkDocument, args: dict) -> Report:
    net = _parallel(doc)
    phi = _phi(doc, args)
    game = GameInstance(net, phi)
    sol = wardrop(game)
    so = social_optimum(game)
    poa, reason, raw = _poa_fields(game)
    result = {
        "equilibrium_tag": sol.kind.value,
        "equilibrium_cost_veh_h": total_cost(sol.assignment),
        "optimum_cost_veh_h": so.total_cost,
        "price_of_anarchy": poa,
        "price_of_anarchy_note": reason,
    }
    frac = ""
    if reason is None:
        f = Fraction(poa).limit_denominator(1000)
        if isclose(float(f), poa, 1e-12):
            frac = f"  (= {f})"
    table = [
        f"equilibrium          {sol.kind.value}",
        f"equilibrium cost     {result['equilibrium_cost_veh_h']:.6g} veh*h",
        f"optimum cost         {so.total_cost:.6g} veh*h",
        f"price of anarchy     {raw if reason else f'{poa:.10g}'}{frac}",
    ]
    code = EXIT_OK if sol.psi <= PSI_TOL * phi else EXIT_PARTIAL
    rows = [[sol.kind.value, _num(result["equilibrium_cost_veh_h"]), _num(so.total_cost), "" if poa is None else _num(poa)]]
    return Report(
        result, table, ["we_tag", "equilibrium_cost_veh_h", "optimum_cost_veh_h", "price_of_anarchy"], rows, code
    )


def run_assign(doc: NetworkDocument, args: dict) -> Report:
    net = _parallel(doc)
    phi = _phi(doc, args)
    try:
        routing = RoutingVector.parse(args["ratios"])
    except DomainError as exc:
        raise InputError(str(exc)) from None
    classes = classify_routes(net, phi, routing)
    fam = consistent_density(net, phi, routing)
    transferred, psi = transfer_accounting(net, phi, routing)
    frontiers = []
    for p, rf in enumerate(fam.routes):
        for fr in rf.frontiers:
            frontiers.append(
                {
                    "route": doc.route_labels[p],
                    "link": net.routes[p].links[fr.position].name,
                    "lower_veh_per_km": fr.lower,
                    "upper_veh_per_km": fr.upper,
                }
            )
    result = {
        "routes": list(doc.route_labels),
        "routing": list(routing),
        "classes": [c.label for c in classes],
        "densities_veh_per_km": [list(d) for d in fam.canonical()],
        "frontier_intervals": frontiers,
        "transferred_veh_per_h": transferred,
        "psi_veh_per_h": psi,
    }
    table = [
        f"exogenous flow       {phi:g} veh/h",
        "route  ratio      class  transferred veh/h  densities veh/km",
    ]
    for p, label in enumerate(doc.route_labels):
        table.append(
            f"{label:<6} {routing[p]:<10.6g} {classes[p].label:<6} {transferred[p]:<18.6g} "
            f"{_vec(fam.routes[p].canonical)}"
        )
    for fr in frontiers:
        table.append(
            f"family: route {fr['route']} link {fr['link']} density in "
            f"[{fr['lower_veh_per_km']:.6g}, {fr['upper_veh_per_km']:.6g}] veh/km"
        )
    table.append(f"non-transferred      {psi:g} veh/h")
    if psi > 0:
        table.append(
            "note: non-transferred flow is the excess of nominal over capacity, "
            "summed over saturated routes"
        )
    code = EXIT_PARTIAL if psi > PSI_TOL * max(phi, 1.0) else EXIT_OK
    rows = [
        [label, _num(routing[p]), classes[p].label, _num(transferred[p]),
         ";".join(_num(x) for x in fam.routes[p].canonical)]
        for p, label in enumerate(doc.route_labels)
    ]
    return Report(
        result, table, ["route", "ratio", "class", "transferred_veh_per_h", "densities_veh_per_km"], rows, code
    )


SWEEP_HEADER = [
    "phi", "we_tag", "common_time_min", "psi_min", "psi_max", "poa_or_blank", "k", "u_or_blank", "j_or_blank",
]


def run_sweep(doc: NetworkDocument, args: dict) -> Report:
    net = _parallel(doc)
    lo, hi, steps = args["phi_from"], args["phi_to"], args["steps"]
    if steps < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise InputError("--steps must be at least 1 and --phi-from <= --phi-to")
    phis = [lo] if steps == 1 else [float(v) for v in np.linspace(lo, hi, steps)]
    rows, flagged = [], 0
    for phi in phis:
        try:
            game = GameInstance(net, phi)
        except (AssumptionViolation, DomainError):
            flagged += 1
            rows.append([_num(phi), "assumption-2-violated", "", "", "", "", "", "", ""])
            continue
        sol = wardrop(game)
        poa = price_of_anarchy(game, sol)
        idx = sol.indices
        rows.append([
            _num(phi),
            sol.kind.value,
            _num(sol.common_travel_time * 60),
            _num(sol.psi_interval[0]),
            _num(sol.psi_interval[1]),
            "" if isinstance(poa, Undefined) else _num(poa),
            str(idx.k),
            "" if idx.u is None else str(idx.u),
            "" if idx.j is None else str(idx.j),
        ])
    table = [",".join(SWEEP_HEADER)] + [",".join(r) for r in rows]
    result = {"rows": [dict(zip(SWEEP_HEADER, r)) for r in rows], "flagged_rows": flagged}
    return Report(result, table, SWEEP_HEADER, rows, EXIT_ASSUMPTION if flagged else EXIT_OK)


DIAGRAM_HEADER = ["x_veh_per_km", "supply_veh_per_h", "demand_veh_per_h", "flow_veh_per_h", "travel_time_h"]


def run_diagram(doc: NetworkDocument, args: dict) -> Report:
    link = doc.link(args["link"])
    n = args["samples"]
    if n < 2:
        raise InputError("--samples must be at least 2")
    rows = []
    for i in range(n):
        x = link.jam_density * i / (n - 1)
        s, d = link.supply(x), link.demand(x)
        f = min(s, d)
        rows.append([_num(x), _num(s), _num(d), _num(f), _num(link_travel_time(link, x, f))])
    table = [",".join(DIAGRAM_HEADER)] + [",".join(r) for r in rows]
    result = {"rows": [dict(zip(DIAGRAM_HEADER, r)) for r in rows]}
    return Report(result, table, DIAGRAM_HEADER, rows, EXIT_OK)


def _resolution(text) -> float:
    try:
        value = float(Fraction(str(text)))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"cannot parse resolution {text!r}") from None
    if not 0 < value <= 1:
        raise InputError("--resolution must lie in (0, 1]")
    return value


def run_demo_wheatstone(doc: NetworkDocument, args: dict) -> Report:
    if doc.kind != "general":
        raise InputError("demo-wheatstone needs a network of kind 'general'")
    net = doc.network
    phi = _phi(doc, args)
    if phi < 0:
        raise InputError("--phi must be non-negative")
    h = _resolution(args["resolution"])
    eps = args["eps_min"] / 60
    ranked = search_equilibrium(net, phi, resolution=h, eps=eps, keep_all=True)
    survivors = [c for c in ranked if c.violation <= eps and c.state.converged]
    best = survivors[0] if survivors else ranked[0]
    st = best.state
    result = {
        "routes": list(doc.route_labels),
        "survivors": len(survivors),
        "grid_points": len(ranked),
        "best_is_survivor": bool(survivors),
        "routing": list(best.routing),
        "route_times_h": list(best.times),
        "violation_h": best.violation,
        "densities_veh_per_km": list(st.densities),
        "link_outflows_veh_per_h": list(st.flows),
        "admitted_veh_per_h": list(st.admitted),
        "psi_veh_per_h": st.psi,
        "converged": st.converged,
        "note": MERGE_NOTE,
    }
    table = [
        f"exogenous flow       {phi:g} veh/h",
        f"grid                 {len(ranked)} points, {len(survivors)} within {args['eps_min']:g} min",
        f"{'best survivor' if survivors else 'best candidate (no survivor)':<20} R = ({_vec(best.routing)})",
        "route  ratio      time min",
    ]
    for p, label in enumerate(doc.route_labels):
        table.append(f"{label:<6} {best.routing[p]:<10.6g} {_min(best.times[p])}")
    table += [
        f"link densities       {_vec(st.densities)} veh/km",
        f"non-transferred      {st.psi:.6g} veh/h",
        f"wardrop violation    {_min(best.violation)} min",
        f"note: {MERGE_NOTE}",
    ]
    rows = [
        [label, _num(best.routing[p]), _num(st.admitted[p]), _num(best.times[p])]
        for p, label in enumerate(doc.route_labels)
    ]
    code = EXIT_PARTIAL if st.psi > PSI_TOL * max(phi, 1.0) else EXIT_OK
    return Report(result, table, ["route", "ratio", "admitted_veh_per_h", "travel_time_h"], rows, code)


COMMANDS: dict[str, Callable[[NetworkDocument, dict], Report]] = {
    "wardrop": run_wardrop,
    "optimum": run_optimum,
    "poa": run_poa,
    "assign": run_assign,
    "sweep": run_sweep,
    "diagram": run_diagram,
    "demo-wheatstone": run_demo_wheatstone,
}


# --------------------------------------------------------------------------
# emission


def _json_clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    return obj


def to_json(command: str, doc: NetworkDocument, args: dict, report: Report) -> str:
    payload = {
        "ctmroute_version": __version__,
        "command": command,
        "arguments": args,
        "network": doc.raw,
        "result": _json_clean(report.result),
        "exit_code": report.code,
    }
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(report.csv_header)
    writer.writerows(report.csv_rows)
    return buf.getvalue()


def replay(document: dict) -> tuple[str, int]:
    """Recompute a JSON document emitted by any command; returns the new JSON text."""
    try:
        command = document["command"]
        args = document["arguments"]
        raw = document["network"]
    except (KeyError, TypeError):
        raise InputError("not a ctmroute JSON document") from None
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    doc = load_document(raw)
    report = COMMANDS[command](doc, args)
    return to_json(command, doc, args, report), report.code


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctmroute", description="Selfish routing on cell-transmission-model networks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def network_cmd(name, help_text, formats=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("network", help="network JSON file or bundled name (example1, ..., wheatstone)")
        p.add_argument("--phi", type=float, help="exogenous flow in veh/h (overrides the file)")
        if formats:
            p.add_argument("--format", choices=("table", "json", "csv"), default="table")
        return p

    network_cmd("wardrop", "Wardrop equilibrium")
    network_cmd("optimum", "social optimum and price of anarchy")
    network_cmd("poa", "price of anarchy")
    p = network_cmd("assign", "consistent densities for a routing vector")
    p.add_argument("--ratios", required=True, help="routing ratios, e.g. 0.75,0.25 or 1/3,2/3")

    p = sub.add_parser("sweep", help="equilibrium summary over a range of exogenous flows (CSV)")
    p.add_argument("network")
    p.add_argument("--phi-from", type=float, required=True)
    p.add_argument("--phi-to", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("diagram", help="fundamental diagram and travel time of one link (CSV)")
    p.add_argument("network")
    p.add_argument("--link", required=True, help="link id")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("demo-wheatstone", help="grid search for equilibria on the five-link diamond")
    p.add_argument("--network", default="wheatstone", help="general network file (default: bundled diamond)")
    p.add_argument("--phi", type=float, help="exogenous flow in veh/h (default 1600)")
    p.add_argument("--resolution", default="1/64", help="simplex grid spacing, e.g. 1/64")
    p.add_argument("--eps-min", type=float, default=2.0, help="survivor tolerance in minutes")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")

    p = sub.add_parser("replay", help="recompute a JSON document emitted by another command")
    p.add_argument("document")
    return parser


def _args_dict(ns: argparse.Namespace) -> dict:
    skip = {"command", "network", "format", "out", "document"}
    return {k: v for k, v in vars(ns).items() if k not in skip}


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "replay":
            try:
                with open(ns.document, encoding="utf-8") as fh:
                    document = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read {ns.document}: {exc}") from None
            text, code = replay(document)
            sys.stdout.write(text)
            return code
        doc = parse_network(ns.network)
        args = _args_dict(ns)
        if "phi" in args and args["phi"] is None:
            args["phi"] = doc.exogenous_flow
            if args["phi"] is None and ns.command == "demo-wheatstone":
                args["phi"] = 1600.0
        report = COMMANDS[ns.command](doc, args)
        fmt = getattr(ns, "format", "csv")
        if ns.command in ("sweep", "diagram"):
            _write(to_csv(report), ns.out)
        elif fmt == "json":
            _write(to_json(ns.command, doc, args, report), None)
        elif fmt == "csv":
            _write(to_csv(report), None)
        else:
            _write("\n".join(report.table) + "\n", None)
        return report.code
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except CTMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
