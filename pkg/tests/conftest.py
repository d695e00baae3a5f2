import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from simverify.bounds import StabilityParams  # noqa: E402
from simverify.dynamics import sgn_cubic  # noqa: E402
from simverify.energy import EnergyForm  # noqa: E402


@pytest.fixture
def sgn():
    return sgn_cubic()


@pytest.fixture
def ref_params():
    return StabilityParams(k=8.0 / 3.0, lam=3.0, r0=1.5)


@pytest.fixture
def unit_form():
    return EnergyForm(np.eye(1), 1.125)


@pytest.fixture(params=["native", "python"])
def backend(request, monkeypatch):
    from simverify import integrate

    if request.param == "native" and not integrate.native_available():
        pytest.skip("native kernel not built")
    monkeypatch.setenv("SIMVERIFY_BACKEND", request.param)
    return request.param
