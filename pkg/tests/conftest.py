import numpy as np
import pytest

from pushdob.dynamics import ObjectParams, PlanarState, simulate, states_to_arrays
from pushdob.synth import SynthScenario, generate

_ACCEPTANCE = {}


def simulate_plant(total, p=None, dt=1 / 250, start=None):
    """Exact sampled response of the double integrators to a held total wrench (n, 3).

    Returns the pose at the n sample instants; row k is the pose before
    ``total[k]`` acts.
    """
    p = ObjectParams() if p is None else p
    start = PlanarState() if start is None else start
    states = simulate(start, np.asarray(total, dtype=float)[:-1], p, dt)
    pose, _ = states_to_arrays(states)
    return pose


@pytest.fixture(scope="session")
def friction_traj():
    return generate(SynthScenario())


@pytest.fixture(scope="session")
def friction_traj_clean():
    return generate(SynthScenario().noiseless())


@pytest.fixture(scope="session")
def rich_traj():
    return generate(SynthScenario.rich_excitation())


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _ACCEPTANCE[crit] = (outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        outcome, duration = _ACCEPTANCE[crit]
        terminalreporter.write_line(f"criterion {crit}: {outcome} ({duration:.2f} s)")
