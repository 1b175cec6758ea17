import json

import pytest

from latdual import cli
from latdual.jobs import REGISTRY

SUITES = {"scalar-duality", "em-duality", "boost-region", "mollifier", "schur", "huygens", "fock-ccr", "outer-regularity"}
FAST_JOB = {"module": "fock", "operation": "ccr", "parameters": {"cutoffs": [6, 8], "commutant_cutoffs": [6]}}


def write(tmp_path, config):
    p = tmp_path / "campaign.json"
    p.write_text(json.dumps(config))
    return str(p)


def test_list_suites(capsys):
    assert cli.main(["list-suites"]) == 0
    out = capsys.readouterr().out
    for name in SUITES:
        assert name in out
    assert set(cli.suite_names()) == SUITES


@pytest.mark.parametrize("name", sorted(SUITES))
def test_canned_suites_validate(name):
    assert cli.validate(cli.load_suite(name)) == []


def test_huygens_suite_defaults():
    job = next(j for j in cli.load_suite("huygens")["jobs"] if j["operation"] == "huygens")
    assert job["parameters"]["m"] == 0.0 and job["parameters"]["d"] == 3


def test_schema_lists_every_operation(capsys):
    assert cli.main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    ops = set(schema["properties"]["jobs"]["items"]["properties"]["operation"]["enum"])
    assert ops == {o for _, o in REGISTRY}


def test_empty_campaign(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, {"name": "empty", "jobs": []}), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert (summary["total"], summary["passed"], summary["failed"]) == (0, 0, 0)
    assert summary["failed_jobs"] == []


def test_failing_tolerance_named(tmp_path):
    job = {**FAST_JOB, "name": "too-strict", "tolerances": {"vacuum": 1e-30}}
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, {"name": "c", "jobs": [job, FAST_JOB]}), "--out", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failed_jobs"] == ["too-strict"]
    assert summary["total"] == 2 and summary["passed"] == 1
    report = json.loads((out / "too-strict.json").read_text())
    assert not report["passed"]
    assert (out / "too-strict.weyl_relation.csv").read_text().startswith("K,residual\n")


@pytest.mark.parametrize(
    "config",
    [
        {"jobs": []},
        {"name": "x", "jobs": [{"module": "fock", "operation": "huygens"}]},
        {"name": "x", "jobs": [{"module": "nope", "operation": "ccr"}]},
        {"name": "x", "jobs": [{**FAST_JOB, "tolerances": {"bogus": 1.0}}]},
        {"name": "x", "jobs": [{"module": "geometry", "operation": "predicates", "schedule": [1]}]},
        {"name": "x", "jobs": [], "extra": 1},
    ],
)
def test_schema_violation_exit_2(tmp_path, config):
    assert cli.main(["run", write(tmp_path, config), "--out", str(tmp_path / "o")]) == 2


def test_unparseable_config_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == 2


def test_resource_budget_exit_3(tmp_path):
    job = {**FAST_JOB, "parameters": {"cutoffs": [6, 8], "commutant_cutoffs": [12]}}
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, {"name": "b", "jobs": [job]}), "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["refused_jobs"] == summary["failed_jobs"] == ["00-fock.ccr"]


def test_runtime_error_reported_as_failure(tmp_path):
    job = {"module": "scalar_space", "operation": "mollifier", "parameters": {"radius0": 0.95}}
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, {"name": "w", "jobs": [job]}), "--out", str(out)]) == 1
    report = json.loads((out / "00-scalar_space.mollifier.json").read_text())
    assert report["status"] == "error" and "Wraparound" in report["error"]


def test_seeded_runs_are_byte_identical(tmp_path):
    jobs = [{"module": "geometry", "operation": "predicates", "parameters": {"probes": 2000}}, FAST_JOB]
    cfg = write(tmp_path, {"name": "det", "seed": 7, "jobs": jobs})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["run", cfg, "--out", str(a)]) == 0
    assert cli.main(["run", cfg, "--out", str(b), "--jobs", "2"]) == 0
    assert cli.main(["run", cfg, "--out", str(c), "--seed", "8"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    assert (a / "00-geometry.predicates.json").read_bytes() != (c / "00-geometry.predicates.json").read_bytes()


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
    assert cli.main(["run", write(tmp_path, {"name": "e", "jobs": [], "output_dir": str(tmp_path / "cfg")})]) == 0
    assert (tmp_path / "env" / "summary.json").exists()
    assert not (tmp_path / "cfg").exists()
