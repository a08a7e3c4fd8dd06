"""Shared session fixtures: the reference bar and waveguide scenarios.

The heavy geometry assemblies are built once per session and reused by the
module tests and the acceptance suite.
"""

import numpy as np
import pytest

from magnonlab.constants import TWO_PI, yig
from magnonlab import bar as barmod
from magnonlab import waveguide as wgmod

# reference bar: 5 x 30 x 3000 nm, qubits 5 nm above the corner edge
BAR_D = 5e-9
BAR_W = 30e-9
BAR_L = 3000e-9
BAR_P = 5
R1 = (BAR_D + 5e-9, BAR_W, 400e-9)
R2 = (BAR_D + 5e-9, BAR_W, 400e-9 + 2.2e-6)

# reference waveguide: 20 x 120 nm cross-section, qubit 25 nm above the edge
WG_D = 20e-9
WG_W = 120e-9
WG_RHO = (WG_D + 25e-9, WG_W)
DETUNING = TWO_PI * 3e6

T2_STAR = 1e-3
ALPHA = 1e-5


@pytest.fixture(scope="session")
def material():
    return yig(alpha=ALPHA)


@pytest.fixture(scope="session")
def bar_field(material):
    probe = barmod.BarModel(BAR_D, BAR_W, BAR_L, material, h_ext=1e-3,
                            n_trunc=40)
    return barmod.find_resonant_field(probe, BAR_P)


@pytest.fixture(scope="session")
def bar_model(material, bar_field):
    return barmod.BarModel(BAR_D, BAR_W, BAR_L, material, h_ext=bar_field,
                           n_trunc=40)


@pytest.fixture(scope="session")
def bar_spec(bar_model):
    return barmod.bar_spectrum(bar_model)


@pytest.fixture(scope="session")
def bar_coupling_r1(bar_model, bar_spec):
    return barmod.bar_coupling(bar_model, bar_spec, R1)


@pytest.fixture(scope="session")
def bar_coupling_r2(bar_model, bar_spec):
    return barmod.bar_coupling(bar_model, bar_spec, R2)


@pytest.fixture(scope="session")
def small_bar(material):
    """Cheaper truncation for structural/property tests."""
    probe = barmod.BarModel(BAR_D, BAR_W, BAR_L, material, h_ext=1e-3,
                            n_trunc=14)
    h = barmod.find_resonant_field(probe, BAR_P)
    model = barmod.BarModel(BAR_D, BAR_W, BAR_L, material, h_ext=h,
                            n_trunc=14)
    return model, barmod.bar_spectrum(model)


@pytest.fixture(scope="session")
def wg_field(material):
    probe = wgmod.WaveguideModel(WG_D, WG_W, material, h_ext=0.0)
    return wgmod.find_field_for_detuning(probe, DETUNING)


@pytest.fixture(scope="session")
def wg_model(material, wg_field):
    return wgmod.WaveguideModel(WG_D, WG_W, material, h_ext=wg_field)


@pytest.fixture(scope="session")
def wg_curve(wg_model):
    return wgmod.dispersion(wg_model)
