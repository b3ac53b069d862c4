"""Every acceptance criterion at its stated tolerance and runtime limit.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  Criteria are selected with ``-k criterion_04`` and so on.
"""

import pytest

from advflow.suites import SUITES

from .conftest import ACCEPTANCE_LINES

CRITERIA = [
    (1, "coarea exactness", "coarea", 10),
    (2, "submodularity", "submodularity", 30),
    (3, "solver certification", "solver", 120),
    (4, "comparison principle", "comparison", 300),
    (5, "selection principle", "selection", 300),
    (6, "monotonicity", "monotone", 300),
    (7, "cone barrier", "barrier", 300),
    (8, "subgradient consistency", "consistency", 120),
    (9, "flow convergence", "flow", 600),
    (10, "almost-Lipschitz", "lipschitz", 120),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("number, title, suite, limit", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, title, suite, limit):
    res = SUITES[suite]()
    in_time = res.seconds < limit
    ok = res.passed and in_time
    failed = [c for c in res.checks if not c.passed]
    why = "; ".join(f"{c.name}: measured {c.measured:.4g} vs {c.tolerance:.4g} {c.detail}".strip() for c in failed)
    if not in_time:
        why = (why + "; " if why else "") + f"runtime {res.seconds:.1f} s over the {limit} s limit"
    line = f"criterion {number:2d} {title:<24} {'PASS' if ok else 'FAIL'} ({res.seconds:.1f} s)" + (
        f" -- {why}" if why else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    for c in res.checks:
        print(f"    {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.measured:.6g} (tolerance {c.tolerance:.6g}) {c.detail}")
    assert ok, line
