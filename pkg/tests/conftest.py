"""Shared fixtures: a small aligned Cantor model and random-case helpers."""

import numpy as np
import pytest

from regpart.diagnostics import generate_cantor_example
from regpart.model import derive_fields
from regpart.regularize import build_singular_structure


@pytest.fixture(scope="session")
def cantor3():
    """Stage-3 worked example with everything derived (384 cells)."""
    coeffs, q_field, funcs = generate_cantor_example(3)
    derived = derive_fields(coeffs)
    structure = build_singular_structure(q_field, derived)
    return {"coeffs": coeffs, "q_field": q_field, "funcs": funcs,
            "derived": derived, "structure": structure}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one line per acceptance criterion after the run."""
    import sys
    module = (sys.modules.get("test_acceptance")
              or sys.modules.get("tests.test_acceptance"))
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        status, text = results[num]
        terminalreporter.write_line("%s criterion %2d: %s"
                                    % (status, num, text))
