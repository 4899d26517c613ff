import csv
import json
from pathlib import Path

import pytest

from brownlift.cli import EXIT_FAIL, EXIT_INPUT, EXIT_IO, EXIT_OK, main
from brownlift.scenario import ScenarioError, load_scenario, parse_scenario, run_scenario

SCEN = Path(__file__).resolve().parent.parent / "scenarios"


def _run(args, tmp_path):
    return main([*args, "--out", str(tmp_path)])


def test_classify_scenario_passes(tmp_path):
    assert _run(["run", str(SCEN / "noistx_classify.json")], tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "noistx-classify.json").read_text())
    assert rep["schema"] == "brownlift.report/1"
    assert rep["passed"] and rep["first_failure"] is None
    assert rep["tasks"][0]["result"]["brownian_type"]


def test_power_scenario_fails_with_witness(tmp_path):
    assert _run(["run", str(SCEN / "two_atom_power.json")], tmp_path) == EXIT_FAIL
    rep = json.loads(next(tmp_path.glob("*.json")).read_text())
    ff = rep["first_failure"]
    assert ff is not None and ff["task"] == "power"
    assert "witness" in json.dumps(ff)


def test_pipeline_and_demos(tmp_path):
    assert _run(["run", str(SCEN / "two_atom_pipeline.json")], tmp_path) == EXIT_OK
    assert _run(["run", str(SCEN / "demos.json")], tmp_path) == EXIT_OK


def test_seed_gives_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["classify", "two_atom", "--seed", "7", "--out", str(d)]) == EXIT_OK
    fa, fb = sorted(a.iterdir()), sorted(b.iterdir())
    assert [f.name for f in fa] == [f.name for f in fb]
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(fa, fb))


def test_timings_only_on_request(tmp_path):
    main(["classify", "two_atom", "--out", str(tmp_path / "plain")])
    main(["classify", "two_atom", "--timings", "--out", str(tmp_path / "timed")])
    plain = json.loads(next((tmp_path / "plain").glob("*.json")).read_text())
    timed = json.loads(next((tmp_path / "timed").glob("*.json")).read_text())
    assert "seconds" not in plain["tasks"][0]
    assert "seconds" in timed["tasks"][0]


def test_csv_regions(tmp_path):
    csv_dir = tmp_path / "csv"
    code = main(["spectrum", "two_atom_spectral", "--out", str(tmp_path),
                 "--csv-regions", str(csv_dir)])
    assert code == EXIT_OK
    files = sorted(csv_dir.glob("*.csv"))
    assert files
    for f in files:
        rows = list(csv.reader(f.open()))
        assert rows[0] == ["re", "im", "component_id"]
        assert len(rows) > 1


def test_spectrum_single_entry_with_witnesses(tmp_path):
    assert main(["spectrum", "two_atom_spectral", "--operator", "X", "--witnesses",
                 "--out", str(tmp_path)]) == EXIT_OK


@pytest.mark.parametrize("cmd", [["power", "two_atom", "-n", "2"],
                                 ["extend", "two_atom_scaled"],
                                 ["verify", "two_atom_spectral"],
                                 ["demo", "rozwis"]])
def test_subcommands(cmd, tmp_path):
    code = _run(cmd, tmp_path)
    assert code in (EXIT_OK, EXIT_FAIL)
    assert list(tmp_path.glob("*.json"))


def test_power_square_of_two_atom_fails(tmp_path):
    assert _run(["power", "two_atom", "-n", "2"], tmp_path) == EXIT_FAIL


def test_input_errors(tmp_path):
    assert _run(["classify", "no-such-thing"], tmp_path) == EXIT_INPUT
    assert _run(["demo", "nope"], tmp_path) == EXIT_INPUT
    assert main(["bogus"]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text('{"tasks": [')
    assert _run(["run", str(bad)], tmp_path) == EXIT_INPUT


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["classify", "two_atom", "--out", str(blocker / "sub")]) == EXIT_IO


def test_env_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("BROWNLIFT_OUT", str(tmp_path))
    assert main(["classify", "two_atom"]) == EXIT_OK
    assert list(tmp_path.glob("*.json"))


def test_parse_errors_name_the_location(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "tasks": [\n    {"task": }\n  ]\n}')
    with pytest.raises(ScenarioError, match=r"3:\d+"):
        load_scenario(bad)


@pytest.mark.parametrize("data", [
    {"name": "x", "tasks": [{"task": "nope"}]},
    {"tasks": []},
    {"name": "x", "blocks": {"T": {"gallery": "two_atom"}},
     "tasks": [{"task": "classify", "block": "U"}]},
    {"name": "x", "blocks": {"T": {"gallery": "two_atom"}},
     "tasks": [{"task": "power", "block": "T"}]},
    {"name": "x", "schema": "other/9", "tasks": []},
])
def test_invalid_scenarios(data):
    with pytest.raises(ScenarioError):
        parse_scenario(data)


def test_structural_error_is_task_failure():
    sc = parse_scenario({"name": "too-big", "blocks": {"T": {"gallery": "two_atom"}},
                         "tasks": [{"task": "extend", "block": "T", "defect": 5}]})
    rep = run_scenario(sc)
    assert not rep["passed"]
    assert rep["first_failure"]["check"] == "structural error"
