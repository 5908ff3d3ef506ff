import pytest

from cpx.agents import issue_credential
from cpx.registry import CredentialSchema
from cpx.scenario.config import EcosystemConfig, EntityConfig
from cpx.scenario.ecosystem import setup_ecosystem
from cpx.scenario.engine import run_script
from cpx.scenario.script import default_career_script


@pytest.fixture(scope="session")
def career():
    """Default career script run once in the PRODUCTION group (seed 1)."""
    eco = setup_ecosystem(seed=1)
    trace = run_script(eco, default_career_script())
    return eco, trace


SMALL = EcosystemConfig(
    entities=(
        EntityConfig("Uni", ("Issuer",), (CredentialSchema("degree:1", ("name", "dob", "degree")),)),
        EntityConfig(
            "Board", ("Issuer", "Verifier"), (CredentialSchema("license:1", ("name", "number", "status")),)
        ),
        EntityConfig("Clinic", ("Verifier",)),
    ),
    holder="Holder",
).validate()

DEGREE = {"name": "Sam Lee", "dob": "1990-01-02", "degree": "MBChB"}
LICENSE = {"name": "Sam Lee", "number": "1234567", "status": "full"}


@pytest.fixture
def world():
    """Three anchors and a holder in the PRODUCTION group; nothing issued yet."""
    return setup_ecosystem(SMALL, seed=7)


@pytest.fixture
def issued(world):
    """The small world after the holder receives a degree and a licence."""
    issue_credential(world.agent("Uni"), world.holder, "degree:1", DEGREE)
    issue_credential(world.agent("Board"), world.holder, "license:1", LICENSE)
    return world


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them in criterion order."""

    def record(number: int, ok: bool, detail: str) -> None:
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
