from pathlib import Path

from transobs.field import VectorField
from transobs.harness.config import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario(name):
    return load_scenario(SCENARIOS / f"{name}.cfg")


def make_field(*descriptors, T=5.0, T1=None):
    return VectorField.from_descriptors(descriptors, T, T1)

# one line per acceptance criterion, printed in the terminal summary by conftest
ACCEPTANCE: list[str] = []


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok
