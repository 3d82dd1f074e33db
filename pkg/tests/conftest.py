import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dralbsim.core_model import PhysicalHost, ResourceVector

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# per-VM setup: one VM's share of a host
VM_CAP = ResourceVector(1860.0, 4096.0, 500.0, 100.0)


def vectors(max_value=5000.0, min_value=0.0):
    comp = st.floats(min_value=min_value, max_value=max_value,
                     allow_nan=False, allow_infinity=False)
    return st.builds(ResourceVector, comp, comp, comp, comp)


def capacities():
    return vectors(max_value=5000.0, min_value=1.0)


@st.composite
def hosts(draw, n_max=6):
    n = draw(st.integers(1, n_max))
    return [PhysicalHost(i, draw(capacities())) for i in range(n)]


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
