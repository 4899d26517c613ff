"""Scenario files: parse, run task pipelines and emit reports.

A scenario is a JSON object::

    {"schema": "brownlift.scenario/1", "name": "...",
     "tolerances": {"identity_tol": 1e-10, ...},
     "operators": {"S": {...operator tree...}, ...},
     "blocks": {"T": {"V": {...}, "E": {...}, "X": {...}} | {"gallery": "noistx"}},
     "tasks": [{"task": "classify", "block": "T", "expect": {"label": "Q"}}, ...]}

Operator trees may refer to earlier entries of ``operators`` with
``{"ref": name}``.  Task kinds: ``classify``, ``power`` (``n``), ``extend``
(``defect``), ``spectrum`` (``operator`` optional: one of V, E, X or a
named operator), ``verify_extension`` (``defect``) and ``demo`` (``id``).
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .classify import BlockTriangular, check_brownian_type
from .core.indexsets import StructuralError
from .core.probes import DEFAULT, Check, ToleranceProfile
from .core.serialize import operator_from_json
from .extension import (DefectSpec, basic_construction, build_mne, verify_taut)
from .gallery import DEMOS, gallery
from .powers import block_power, gram_identity_check, power_classS_condition
from .spectra import (SpectrumRegion, block_spectrum_report, extension_spectra_check,
                      filling_holes_check, region_csv_rows, symbolic_spectrum, to_jsonable,
                      witness_sweep)

SCENARIO_SCHEMA = "brownlift.scenario/1"
REPORT_SCHEMA = "brownlift.report/1"
TASKS = ("classify", "power", "extend", "spectrum", "verify_extension", "demo")
CLASS_LETTERS = {"U", "I", "N", "Q", "S", "H"}


class ScenarioError(ValueError):
    """Input error: the scenario does not parse or does not validate."""


@dataclass
class Scenario:
    name: str
    operators: dict
    blocks: dict
    tasks: list
    tolerances: ToleranceProfile = DEFAULT
    raw_blocks: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, overrides, source=str(path))


def _tolerances(data: dict, overrides: dict | None, where: str) -> ToleranceProfile:
    fields = dict(data.get("tolerances") or {})
    fields.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = set(DEFAULT.to_json())
    bad = set(fields) - known
    if bad:
        raise ScenarioError(f"{where}: unknown tolerance fields {sorted(bad)}")
    try:
        return DEFAULT.with_(**fields)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def parse_scenario(data, overrides: dict | None = None, source: str = "$") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: scenario must be a JSON object")
    schema = data.get("schema", SCENARIO_SCHEMA)
    if schema != SCENARIO_SCHEMA:
        raise ScenarioError(f"{source}: unsupported schema {schema!r}")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError(f"{source}: missing scenario name")
    tol = _tolerances(data, overrides, source)
    ops: dict = {}
    for key, tree in (data.get("operators") or {}).items():
        ops[key] = _operator(tree, ops, f"{source}.operators.{key}")
    blocks = {}
    for key, spec in (data.get("blocks") or {}).items():
        blocks[key] = _block(spec, ops, f"{source}.blocks.{key}", key)
    tasks = data.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise ScenarioError(f"{source}: tasks must be a nonempty list")
    checked = [_validate_task(t, blocks, ops, f"{source}.tasks[{i}]") for i, t in enumerate(tasks)]
    return Scenario(name, ops, blocks, checked, tol, dict(data.get("blocks") or {}))


def _operator(tree, ops, where):
    try:
        return operator_from_json(tree, ops, where)
    except StructuralError as exc:
        raise ScenarioError(str(exc)) from None


def _block(spec, ops, where, name) -> BlockTriangular:
    if not isinstance(spec, dict):
        raise ScenarioError(f"{where}: block must be an object")
    if "gallery" in spec:
        g = gallery()
        if spec["gallery"] not in g:
            raise ScenarioError(f"{where}: unknown gallery operator {spec['gallery']!r}; "
                                f"known: {', '.join(sorted(g))}")
        return g[spec["gallery"]]
    missing = [k for k in ("V", "E", "X") if k not in spec]
    if missing:
        raise ScenarioError(f"{where}: missing entries {missing}")
    V, E, X = (_operator(spec[k], ops, f"{where}.{k}") for k in ("V", "E", "X"))
    try:
        return BlockTriangular(V, E, X, name=name)
    except StructuralError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _defect(value, where) -> DefectSpec:
    if value is None:
        return DefectSpec()
    if value == "countable" or (isinstance(value, int) and not isinstance(value, bool)
                                and value >= 0):
        return DefectSpec(value)
    raise ScenarioError(f"{where}: defect must be a nonnegative integer or 'countable'")


def _validate_task(task, blocks, ops, where) -> dict:
    if not isinstance(task, dict) or task.get("task") not in TASKS:
        raise ScenarioError(f"{where}: task must be one of {', '.join(TASKS)}")
    kind = task["task"]
    if kind == "demo":
        if task.get("id") not in DEMOS:
            raise ScenarioError(f"{where}: unknown demo {task.get('id')!r}; known: "
                                f"{', '.join(sorted(DEMOS))}")
        return dict(task)
    if task.get("block") not in blocks:
        raise ScenarioError(f"{where}: unresolved block {task.get('block')!r}")
    out = dict(task)
    if kind == "power":
        n = task.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ScenarioError(f"{where}: power needs an integer n >= 1")
    if kind in ("extend", "verify_extension"):
        out["defect_spec"] = _defect(task.get("defect"), where)
    if kind == "spectrum":
        target = task.get("operator")
        if target is not None and target not in ("V", "E", "X") and target not in ops:
            raise ScenarioError(f"{where}: unknown operator {target!r}")
        if "expect" in task:
            try:
                out["expect_region"] = SpectrumRegion.from_json(task["expect"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"{where}.expect: bad region ({exc})") from None
    if kind == "classify" and "expect" in task:
        exp = task["expect"]
        if not isinstance(exp, dict):
            raise ScenarioError(f"{where}.expect: must be an object")
        if "label" in exp and exp["label"] not in CLASS_LETTERS:
            raise ScenarioError(f"{where}.expect.label: one of {sorted(CLASS_LETTERS)}")
    return out


# ---------------------------------------------------------------------------
# running


def _status(ok) -> str:
    return {True: "pass", False: "fail", None: "unknown"}[ok]


def _first_witness(*checks) -> dict | None:
    for c in checks:
        if isinstance(c, Check) and c.passed is False:
            out = {"check": c.name, "residual": c.residual}
            if c.witness is not None:
                out["witness"] = c.witness.to_json()
            return out
    return None


def _run_classify(T, task, tol, ctx):
    rep = check_brownian_type(T, tol)
    ok = rep.passed
    result = rep.to_json()
    failure = _first_witness(rep.gqb1, rep.gqb2, rep.gqb3)
    exp = task.get("expect") or {}
    if "label" in exp and rep.label_letter != exp["label"]:
        ok = False
        failure = failure or {"check": "expected label", "expected": exp["label"],
                              "observed": rep.label_letter}
    if "contains" in exp:
        missing = set(exp["contains"]) - rep.entry_class
        if missing:
            ok = False
            failure = failure or {"check": "expected entry classes", "missing": sorted(missing)}
    if exp.get("brownian_type") is False:
        ok = not rep.passed
    return ok, result, failure


def _run_power(T, task, tol, ctx):
    n = task["n"]
    pb = block_power(T, n, tol)
    gram = gram_identity_check(T, n, tol)
    checks = [pb.check, gram]
    result = {"block_power": pb.to_json(), "gram_identity": gram.to_json()}
    if n >= 2:
        cond = power_classS_condition(T, n, tol)
        checks.append(cond)
        result["class_S_condition"] = cond.to_json()
    ok = all(c.passed for c in checks)
    return ok, result, _first_witness(*checks)


def _extension(T, task, tol, ctx):
    key = (task["block"], repr(task["defect_spec"]))
    if key not in ctx:
        ctx[key] = basic_construction(T, build_mne(T.X, tol=tol), task["defect_spec"], tol)
    return ctx[key]


def _run_extend(T, task, tol, ctx):
    R = _extension(T, task, tol, ctx)
    checks = list(R.report.values())
    ok = all(c.passed for c in checks if isinstance(c, Check))
    return ok, R.to_json(), _first_witness(*checks)


def _run_verify(T, task, tol, ctx):
    R = _extension(T, task, tol, ctx)
    taut = verify_taut(T, R, tol)
    spec = extension_spectra_check(T, R, tol)
    holes = filling_holes_check(T, R, tol)
    ok = all(c.passed for c in taut.values()) and spec["passed"] is not False \
        and holes["passed"]
    result = {"taut": {k: c.to_json() for k, c in taut.items()},
              "spectra": to_jsonable(spec), "filling_holes": to_jsonable(holes)}
    failure = _first_witness(*taut.values())
    if failure is None and spec["passed"] is False:
        failure = {"check": "extension spectra", "details": to_jsonable(spec["checks"])}
    if failure is None and not holes["passed"]:
        failure = {"check": "filling holes", "details": holes["components"]}
    return ok, result, failure


def _run_spectrum(T, task, tol, ctx):
    target = task.get("operator")
    if target is None:
        rep = block_spectrum_report(T, tol)
        region = rep["sigma"]
        result = {"region": region.to_json(), "region_text": str(region),
                  "mode": rep["mode"], "sigma_V": rep["sigma_V"].to_json(),
                  "sigma_X": rep["sigma_X"].to_json()}
        op = None
    else:
        op = {"V": T.V, "E": T.E, "X": T.X}.get(target) or ctx["__ops__"][target]
        region = symbolic_spectrum(op, tol)
        result = {"region": region.to_json(), "region_text": str(region)}
    ok = True
    failure = None
    if "expect_region" in task:
        ok = region == task["expect_region"]
        if not ok:
            failure = {"check": "expected region", "expected": str(task["expect_region"]),
                       "observed": str(region)}
    if task.get("witnesses") and op is not None:
        sweep = witness_sweep(op, tol=tol)
        result["witnesses"] = sweep
        bad = [w for w in sweep if w["status"] != "pass"]
        if bad:
            ok = False
            failure = failure or {"check": "eigen witnesses", "first": bad[0]}
    ctx.setdefault("__regions__", []).append((task.get("label") or target or "sigma", region))
    return ok, result, failure


def _run_demo(task, tol):
    rep = DEMOS[task["id"]](tol=tol)
    bad = [a for a in rep["assertions"] if not a["passed"]]
    return rep["passed"], to_jsonable(rep), (bad[0] if bad else None)


RUNNERS = {"classify": _run_classify, "power": _run_power, "extend": _run_extend,
           "verify_extension": _run_verify, "spectrum": _run_spectrum}


def run_scenario(sc: Scenario, timings: bool = False) -> dict:
    """Execute tasks in order.  Timings are left out unless requested so that
    reports are byte-for-byte reproducible."""
    ctx: dict = {"__ops__": sc.operators}
    results = []
    first_failure = None
    for i, task in enumerate(sc.tasks):
        t0 = time.perf_counter()
        kind = task["task"]
        try:
            if kind == "demo":
                ok, result, failure = _run_demo(task, sc.tolerances)
            else:
                T = sc.blocks[task["block"]]
                ok, result, failure = RUNNERS[kind](T, task, sc.tolerances, ctx)
        except StructuralError as exc:
            ok, result, failure = False, {"error": str(exc)}, {"check": "structural error",
                                                                 "message": str(exc)}
        entry = {"index": i, "task": kind,
                 **{k: v for k, v in task.items()
                    if k not in ("task", "defect_spec", "expect_region")},
                 "status": _status(ok), "result": result}
        if failure is not None:
            entry["failure"] = failure
            if first_failure is None and not ok:
                first_failure = {"task_index": i, "task": kind, **failure}
        if timings:
            entry["seconds"] = round(time.perf_counter() - t0, 4)
        entry["_regions"] = ctx.pop("__regions__", [])
        results.append(entry)
    passed = all(r["status"] == "pass" for r in results)
    return {"schema": REPORT_SCHEMA, "scenario": sc.name, "seed": sc.tolerances.seed,
            "tolerances": sc.tolerances.to_json(), "passed": passed,
            "first_failure": first_failure, "tasks": results}


# ---------------------------------------------------------------------------
# output


class OutputError(OSError):
    pass


def default_out_dir() -> Path:
    return Path(os.environ.get("BROWNLIFT_OUT", "."))


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def emit_report(report: dict, out_dir=None, csv_dir=None) -> list[Path]:
    """Write the JSON report and, on request, one CSV of boundary samples per region."""
    out_dir = Path(out_dir) if out_dir is not None else default_out_dir()
    written = []
    regions = []
    for entry in report["tasks"]:
        for label, region in entry.pop("_regions", []):
            regions.append((entry["index"], label, region))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{_safe(report['scenario'])}.json"
        path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
        written.append(path)
        if csv_dir is not None:
            csv_dir = Path(csv_dir)
            csv_dir.mkdir(parents=True, exist_ok=True)
            for idx, label, region in regions:
                p = csv_dir / f"{_safe(report['scenario'])}_task{idx}_{_safe(label)}.csv"
                with p.open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["re", "im", "component_id"])
                    for re, im, cid in region_csv_rows(region):
                        w.writerow([repr(float(re)), repr(float(im)), cid])
                written.append(p)
    except OSError as exc:
        raise OutputError(f"cannot write report: {exc}") from None
    return written
