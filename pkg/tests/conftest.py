"""Shared fixtures, the solution audit and the acceptance summary.

Every successful planner result produced anywhere in the session is checked
by the independent validator the moment it is returned (see ``AUDIT``).
"""

import numpy as np
import pytest

from kiteplan import mrmp, planner
from kiteplan.dynamics import MODELS, SystemId
from kiteplan.edge_bundle import PAPER_SIZES, KeyIndex, generate_bundle

from audit import AUDIT, audit_multi, audit_single

mrmp.add_solution_observer(audit_multi)
planner.add_plan_observer(audit_single)

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def bundles():
    """Paper-sized bundles, one per system, seed 0."""
    return {sid: generate_bundle(MODELS[sid], PAPER_SIZES[sid], seed=0) for sid in SystemId}


@pytest.fixture(scope="session")
def indexes(bundles):
    return {sid: KeyIndex(b) for sid, b in bundles.items()}


@pytest.fixture(scope="session")
def small_bundles():
    return {sid: generate_bundle(MODELS[sid], 10_000, seed=7) for sid in SystemId}


@pytest.fixture(scope="session")
def small_bundles_subset():
    """2k-edge bundles, small enough for the pure-Python linear-scan oracle."""
    return {sid: generate_bundle(MODELS[sid], 2_000, seed=21) for sid in SystemId}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_collection_modifyitems(session, config, items):
    # the audit gate must see every other test's planner output first
    last = [i for i in items if i.get_closest_marker("audit_gate")]
    rest = [i for i in items if not i.get_closest_marker("audit_gate")]
    items[:] = rest + last


def pytest_configure(config):
    config.addinivalue_line("markers", "audit_gate: runs after every other test")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {msg}")
    tr.write_line(f"solutions audited by the validator: {AUDIT['checked']} "
                  f"({len(AUDIT['failures'])} with violations)")
