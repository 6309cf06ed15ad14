import itertools
import math

import numpy as np
import pytest

PS = [1, 1.5, 2, 3, math.inf]


def random_instance(rng, m, n, box=10.0):
    return rng.uniform(0, box, (m, 2)), rng.uniform(0, box, (n, 2))


def exact_hdisk_radius(P, h):
    """Smallest radius of any disk holding h points of P, via every disk
    supported by one, two or three points."""
    P = np.asarray(P, dtype=float)
    cands = [(tuple(q), 0.0) for q in P]
    for a, b in itertools.combinations(P, 2):
        c = (a + b) / 2
        cands.append((tuple(c), float(np.hypot(*(a - c)))))
    for a, b, c in itertools.combinations(P, 3):
        d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
        if abs(d) < 1e-12:
            continue
        ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
        uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
        cands.append(((ux, uy), float(np.hypot(a[0] - ux, a[1] - uy))))
    best = math.inf
    for (cx, cy), r in cands:
        inside = np.hypot(P[:, 0] - cx, P[:, 1] - cy) <= r * (1 + 1e-12) + 1e-12
        if inside.sum() >= h:
            best = min(best, r)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """report(criterion, ok, detail) records one PASS/FAIL line."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
