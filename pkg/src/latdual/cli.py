"""Command-line runner for verification campaigns.

    latdual run <config.json | suite-name> [--jobs N] [--seed S] [--out DIR]
    latdual list-suites
    latdual schema

A campaign is a JSON document ``{name, seed, jobs: [...]}`` where each job
names a registered ``(module, operation)`` with optional ``parameters``,
``tolerances`` and a refinement ``schedule``.  Reports are written as one
JSON file per job, a ``summary.json`` and CSV files for every series.  The
output directory is ``--out``, else ``$LATDUAL_OUT``, else the config's
``output_dir``, else ``latdual-out``.

Exit codes: 0 all checks passed, 1 a job failed, 2 schema violation,
3 a job was refused for exceeding its resource budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import PreconditionError, ResourceBudgetError
from .jobs import REGISTRY, run_job

log = logging.getLogger("latdual")

ENV_OUT = "LATDUAL_OUT"
EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_BUDGET = 0, 1, 2, 3


def schema() -> dict:
    modules = sorted({m for m, _ in REGISTRY})
    per_module = [
        {
            "if": {"properties": {"module": {"const": m}}},
            "then": {"properties": {"operation": {"enum": sorted(o for mm, o in REGISTRY if mm == m)}}},
        }
        for m in modules
    ]
    job = {
        "type": "object",
        "required": ["module", "operation"],
        "additionalProperties": False,
        "properties": {
            "name": {"type": "string", "minLength": 1},
            "module": {"enum": modules},
            "operation": {"enum": sorted({o for _, o in REGISTRY})},
            "parameters": {"type": "object"},
            "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
            "schedule": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        },
        "allOf": per_module,
    }
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "latdual campaign",
        "type": "object",
        "required": ["name", "jobs"],
        "additionalProperties": False,
        "properties": {
            "name": {"type": "string", "minLength": 1},
            "description": {"type": "string"},
            "criteria": {"type": "array", "items": {"type": "integer"}},
            "seed": {"type": "integer", "minimum": 0},
            "output_dir": {"type": "string"},
            "jobs": {"type": "array", "items": job},
        },
    }


def validate(config) -> list[str]:
    """Schema errors plus registry-level checks on tolerances and schedules."""
    v = jsonschema.Draft202012Validator(schema())
    errors = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in v.iter_errors(config)]
    if errors:
        return sorted(errors)
    names = set()
    for i, j in enumerate(config["jobs"]):
        spec = REGISTRY[(j["module"], j["operation"])]
        extra = set(j.get("tolerances", {})) - set(spec.tolerances)
        if extra:
            errors.append(f"jobs/{i}: unknown tolerances {sorted(extra)}")
        if "schedule" in j and spec.schedule_key is None:
            errors.append(f"jobs/{i}: {j['module']}.{j['operation']} takes no schedule")
        name = job_name(i, j)
        if name in names:
            errors.append(f"jobs/{i}: duplicate job name {name!r}")
        names.add(name)
    return errors


def job_name(index: int, j: dict) -> str:
    return j.get("name") or f"{index:02d}-{j['module']}.{j['operation']}"


def suite_names() -> list[str]:
    root = resources.files("latdual") / "suites"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_suite(name: str) -> dict:
    return json.loads((resources.files("latdual") / "suites" / f"{name}.json").read_text())


def _execute(payload: dict) -> dict:
    """Run one job; exceptions become failed or refused reports."""
    j = payload["job"]
    base = {"name": payload["name"], "module": j["module"], "operation": j["operation"], "seed": payload["seed"]}
    try:
        rep = run_job(
            j["module"],
            j["operation"],
            j.get("parameters"),
            j.get("tolerances"),
            j.get("schedule"),
            seed=payload["seed"],
        )
    except ResourceBudgetError as exc:
        return {**base, "passed": False, "status": "refused", "error": str(exc)}
    except (PreconditionError, ValueError, KeyError, TypeError) as exc:
        return {**base, "passed": False, "status": "error", "error": f"{type(exc).__name__}: {exc}"}
    return {"name": payload["name"], **rep, "status": "passed" if rep["passed"] else "failed"}


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_series(out: Path, name: str, series: dict) -> list[str]:
    files = []
    for key in sorted(series):
        path = out / f"{name}.{key}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(series[key]["columns"])
            w.writerows(series[key]["rows"])
        files.append(path.name)
    return files


def run_campaign(config: dict, out: Path, seed: int | None = None, workers: int = 1) -> int:
    seed = config.get("seed", 0) if seed is None else seed
    payloads = [
        {"name": job_name(i, j), "job": j, "seed": [seed, i]} for i, j in enumerate(config["jobs"])
    ]
    out.mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_execute, payloads))
    else:
        reports = []
        for p in payloads:
            log.info("running %s", p["name"])
            reports.append(_execute(p))
    rows = []
    for rep in reports:
        rep["csv"] = _write_series(out, rep["name"], rep.get("series", {}))
        _dump(out / f"{rep['name']}.json", rep)
        log.info("%s: %s", rep["name"], rep["status"])
        rows.append(
            {
                "name": rep["name"],
                "status": rep["status"],
                "failed_checks": [c["name"] for c in rep.get("checks", []) if not c["passed"]],
            }
        )
    failed = [r["name"] for r in rows if r["status"] != "passed"]
    refused = [r["name"] for r in rows if r["status"] == "refused"]
    summary = {
        "campaign": config["name"],
        "seed": seed,
        "total": len(rows),
        "passed": len(rows) - len(failed),
        "failed": len(failed),
        "failed_jobs": failed,
        "refused_jobs": refused,
        "jobs": rows,
    }
    _dump(out / "summary.json", summary)
    if refused:
        return EXIT_BUDGET
    return EXIT_FAIL if failed else EXIT_OK


def _load_config(target: str) -> dict:
    path = Path(target)
    if path.exists():
        return json.loads(path.read_text())
    if target in suite_names():
        return load_suite(target)
    raise FileNotFoundError(f"no config file or canned suite named {target!r}")


def _cmd_run(args) -> int:
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    errors = validate(config)
    if errors:
        for e in errors:
            print(f"schema: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    out = args.out or os.environ.get(ENV_OUT) or config.get("output_dir") or "latdual-out"
    code = run_campaign(config, Path(out), args.seed, max(1, args.jobs))
    summary = json.loads((Path(out) / "summary.json").read_text())
    print(f"{summary['campaign']}: {summary['passed']}/{summary['total']} passed -> {out}")
    for name in summary["failed_jobs"]:
        print(f"  failed: {name}")
    return code


def _cmd_list(args) -> int:
    for name in suite_names():
        s = load_suite(name)
        crit = ", ".join(str(c) for c in s.get("criteria", []))
        print(f"{name:18s} criteria {crit:8s} {s.get('description', '')}")
    return EXIT_OK


def _cmd_schema(args) -> int:
    print(json.dumps(schema(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latdual", description="Lattice field-theory verification campaigns.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log job progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a campaign config or canned suite")
    run.add_argument("config", help="path to a campaign JSON file or a canned suite name")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--seed", type=int, default=None, help="override the campaign seed")
    run.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT})")
    run.set_defaults(func=_cmd_run)
    sub.add_parser("list-suites", help="list canned campaigns").set_defaults(func=_cmd_list)
    sub.add_parser("schema", help="print the campaign JSON schema").set_defaults(func=_cmd_schema)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
