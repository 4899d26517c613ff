"""Command line front end.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 input error,
3 output could not be written.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .gallery import DEMOS, gallery
from .scenario import (OutputError, ScenarioError, emit_report, load_scenario, parse_scenario,
                       run_scenario)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


def _block_spec(source: str) -> tuple[dict, dict]:
    """A gallery name or a JSON file holding ``{"V", "E", "X"}`` and optional ``operators``."""
    if source in gallery():
        return {"gallery": source}, {}
    path = Path(source)
    if not path.exists():
        raise ScenarioError(f"{source}: neither a gallery name ({', '.join(sorted(gallery()))}) "
                            "nor a file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: block file must hold a JSON object")
    ops = data.get("operators", {})
    return {k: data[k] for k in ("V", "E", "X") if k in data}, ops


def _single(name: str, source: str, task: dict, overrides: dict):
    block, ops = _block_spec(source)
    data = {"name": name, "operators": ops, "blocks": {"T": block},
            "tasks": [{"block": "T", **task}]}
    return parse_scenario(data, overrides, source=source)


def _defect(text: str | None):
    if text is None:
        return None
    return "countable" if text == "countable" else int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="identity tolerance for probes")
    common.add_argument("--probe-radius", type=int, help="probe window radius")
    common.add_argument("--seed", type=int, help="seed for random probes")
    common.add_argument("--out", help="output directory (default: $BROWNLIFT_OUT or .)")
    common.add_argument("--csv-regions", metavar="DIR", help="write region boundary CSVs here")
    common.add_argument("--timings", action="store_true",
                        help="add wall-clock seconds per task (reports stop being reproducible)")
    p = argparse.ArgumentParser(prog="brownlift", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("classify", "Brownian-type membership and entry class"),
                           ("power", "block powers and the class condition"),
                           ("extend", "taut entrywise extension by the basic construction"),
                           ("spectrum", "symbolic block spectrum"),
                           ("verify", "extend, then check tautness and the spectral theorems")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("source", help="gallery name or block JSON file")
        if name == "power":
            sp.add_argument("-n", type=int, required=True, help="power")
        if name in ("extend", "verify"):
            sp.add_argument("--defect", help="defect dimension: integer or 'countable'")
        if name == "spectrum":
            sp.add_argument("--operator", choices=("V", "E", "X"), help="one entry only")
            sp.add_argument("--witnesses", action="store_true",
                            help="approximate eigenvectors at sample points (needs --operator)")
    dp = sub.add_parser("demo", parents=[common], help="run a pinned demo")
    dp.add_argument("id", help=f"one of {', '.join(sorted(DEMOS))}")
    rp = sub.add_parser("run", parents=[common], help="run a scenario file")
    rp.add_argument("scenario", help="scenario JSON file")
    return p


def _summary(report: dict) -> str:
    lines = [f"{report['scenario']}: {'PASS' if report['passed'] else 'FAIL'}"]
    for t in report["tasks"]:
        extra = ""
        res = t.get("result", {})
        if t["task"] == "classify" and "label" in res:
            extra = f" label={res['label']}"
        elif t["task"] == "spectrum" and "region_text" in res:
            extra = f" region={res['region_text']}"
        lines.append(f"  [{t['index']}] {t['task']}: {t['status']}{extra}")
    if report["first_failure"] is not None:
        ff = report["first_failure"]
        lines.append(f"  first failure: task {ff['task_index']} ({ff.get('check', ff['task'])})")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    overrides = {"identity_tol": args.tol, "probe_radius": args.probe_radius, "seed": args.seed}
    try:
        if args.command == "run":
            sc = load_scenario(args.scenario, overrides)
        elif args.command == "demo":
            if args.id not in DEMOS:
                raise ScenarioError(f"unknown demo {args.id!r}; known: {', '.join(sorted(DEMOS))}")
            sc = parse_scenario({"name": f"demo-{args.id}",
                                 "tasks": [{"task": "demo", "id": args.id}]}, overrides)
        else:
            task = {"task": {"verify": "verify_extension"}.get(args.command, args.command)}
            if args.command == "power":
                task["n"] = args.n
            if args.command in ("extend", "verify"):
                task["defect"] = _defect(args.defect)
            if args.command == "spectrum":
                if args.operator:
                    task["operator"] = args.operator
                task["witnesses"] = bool(args.witnesses)
            name = f"{args.command}-{Path(args.source).stem}"
            sc = _single(name, args.source, task, overrides)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = run_scenario(sc, timings=args.timings)
    try:
        paths = emit_report(report, args.out, args.csv_regions)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary(report))
    print(f"report: {paths[0]}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
