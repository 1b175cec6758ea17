"""Acceptance suite: one test per criterion, run at the stated tolerances.

Each test runs the registered job(s) with their default (acceptance)
parameters, checks the runtime budget and prints one PASS/FAIL line.
Run directly with ``python tests/test_acceptance.py`` for the lines alone.
"""

import sys
import time

import pytest

from latdual.jobs import run_job

CRITERIA = {
    1: ("propagator identities", [("propagator", "identities")], 10),
    2: ("Huygens suppression", [("propagator", "huygens")], 120),
    3: ("scalar relative duality", [("scalar_space", "duality")], 120),
    4: ("outer regularity", [("scalar_space", "outer_regularity")], 60),
    5: ("mollifier mechanism", [("scalar_space", "mollifier")], 60),
    6: ("diffeomorphism and dilation bounds", [("spectral", "diffeo_bounds")], 120),
    7: ("fractional identity", [("spectral", "fractional_identity")], 180),
    8: ("multiplication operator bounds", [("spectral", "mult_operator")], 300),
    9: ("EM structure and duality", [("em_space", "structure_and_duality")], 180),
    10: ("boost-region duality", [("em_space", "boost_region")], 180),
    11: ("Fock space CCR", [("fock", "ccr")], 120),
    12: ("geometry predicates", [("geometry", "predicates")], 10),
    13: ("massive forward-cone density", [("scalar_space", "forward_cone_density")], 180),
}


def evaluate(number: int) -> tuple[bool, str]:
    title, jobs, budget = CRITERIA[number]
    start = time.perf_counter()
    failed = []
    for module, operation in jobs:
        rep = run_job(module, operation, seed=[0, number])
        failed += [c["name"] for c in rep["checks"] if not c["passed"]]
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        failed.append(f"runtime {elapsed:.1f}s > {budget}s")
    ok = not failed
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title} ({elapsed:.1f}s)"
    if failed:
        line += "  failed: " + "; ".join(failed)
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
