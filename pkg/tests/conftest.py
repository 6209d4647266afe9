import os

import hypothesis
import numpy as np
import pytest

from topoprep import experiments
from topoprep.anyons import load_category

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PHI = (1 + 5**0.5) / 2


@pytest.fixture(scope="session")
def lattice():
    return experiments.model_setup("toric").lattice


@pytest.fixture(scope="session")
def toric():
    return experiments.model_setup("toric")


@pytest.fixture(scope="session")
def semion_model():
    return experiments.model_setup("doubled_semion")


@pytest.fixture(scope="session")
def fib_model():
    return experiments.model_setup("doubled_fibonacci")


@pytest.fixture(scope="session", params=experiments.LATTICE_MODELS)
def any_model(request):
    return experiments.model_setup(request.param)


@pytest.fixture(scope="session")
def fib_reference():
    return experiments.reference_state("doubled_fibonacci")


@pytest.fixture(scope="session")
def categories():
    return {name: load_category(name) for name in ("toric_code", "semion", "fibonacci", "doubled_semion", "doubled_fibonacci")}


ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
