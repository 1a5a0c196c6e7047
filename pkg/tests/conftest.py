import json
import random
from pathlib import Path

import pytest

from pjsec.group import get_group
from pjsec.overlay import IdLayout, OverlayId
from pjsec.session import VicinityHead

FIXTURES = Path(__file__).parent / "fixtures"
NOW = 1_600_000_000


@pytest.fixture(scope="session")
def golden():
    return json.loads((FIXTURES / "golden.json").read_text())


@pytest.fixture(scope="session")
def secp():
    return get_group("secp256k1")


@pytest.fixture(scope="session")
def tiny():
    return get_group("modp-101")


@pytest.fixture
def layout():
    return IdLayout(2, 3, 5)


def make_head(group, layout=IdLayout(2, 3, 5), enodeb=1, superpeer=2, seed=0, founders=1):
    id_v = OverlayId.from_fields(layout, enodeb, superpeer, 0)
    return VicinityHead.create(group, id_v, random.Random(seed), founders=founders, now=NOW)


@pytest.fixture
def head(secp, layout):
    return make_head(secp, layout, founders=2)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
