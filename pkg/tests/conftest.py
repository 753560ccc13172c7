import numpy as np
import pytest

from tetradfield.chart import DiffConfig
from tetradfield.lagrangians import LagrangianSpec
from tetradfield.liealg import BreathingFunction, BreathingSpec, breathing_closed_frame, closed_frame, so3, sl2r

GL_SPECS = {
    "f=1": '{"family":"affine_f","f_terms":{"const":1}}',
    "f=1+0.1I1": '{"family":"affine_f","f_terms":{"const":1,"I1":0.1}}',
    "born_infeld": "born_infeld:1,0.3,0.2",
    "split_sqrt": "split_sqrt:1,1,0.3,0.5",
}


@pytest.fixture(params=list(GL_SPECS), ids=list(GL_SPECS))
def gl_spec(request):
    return LagrangianSpec.parse(GL_SPECS[request.param])


@pytest.fixture(scope="session")
def cfg():
    return DiffConfig()


@pytest.fixture(scope="session")
def so3_frame():
    return closed_frame(so3())


@pytest.fixture(scope="session")
def sl2r_frame():
    return closed_frame(sl2r())


@pytest.fixture(scope="session")
def breathing_exp():
    return breathing_closed_frame(BreathingSpec(so3(), BreathingFunction.parse("exp:0.5")))


@pytest.fixture(scope="session")
def breathing_sin():
    return breathing_closed_frame(BreathingSpec(so3(), BreathingFunction.parse("sin:2,0.3")))


def probes(n, dim, seed=0, lo=-0.5, hi=0.5):
    return np.random.default_rng(seed).uniform(lo, hi, size=(n, dim))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
