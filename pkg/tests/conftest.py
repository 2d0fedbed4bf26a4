import numpy as np
import pytest

from rispos.scenario import Scenario

ACCEPTANCE_FILE = "test_acceptance.py"
_acceptance = {}


def random_scenario(rng, q=1, n_bs=16, n_ue=16, n_ris=16, n_sub=8, rotate=True, **kw):
    """Small random non-degenerate scenario with the UE in the x > 0 half-space."""
    while True:
        ue = np.array([rng.uniform(10, 60), rng.uniform(-20, 20), rng.uniform(-10, 25)])
        ris = [np.array([rng.uniform(5, 40), rng.uniform(-25, 25), rng.uniform(-5, 10)]) for _ in range(q)]
        ok = all(np.linalg.norm(ue - r) > 3.0 for r in ris)
        # distinct BS-side RIS cosines keep the AoD projector well conditioned
        gs = [r[1] / np.linalg.norm(r) for r in ris]
        vs = [r[2] / np.linalg.norm(r) for r in ris]
        if q > 1:
            ok &= min(abs(a - b) for i, a in enumerate(gs) for b in gs[i + 1:]) > 0.05
            ok &= min(abs(a - b) for i, a in enumerate(vs) for b in vs[i + 1:]) > 0.05
        if ok:
            break
    rot = tuple(rng.uniform(-np.pi, np.pi, 3)) if rotate else (0.0, 0.0, 0.0)
    return Scenario(n_bs=n_bs, n_ue=n_ue, n_ris=n_ris, n_subcarriers=n_sub, ue_position=ue,
                    ris_positions=np.array(ris).reshape(-1, 3), rotation=rot, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def table1():
    return Scenario()


def pytest_runtest_logreport(report):
    if ACCEPTANCE_FILE not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
