import pytest

from fris_ambc.config import ScenarioConfig


@pytest.fixture
def small_scenario():
    """4x4 grid on a 0.6-wavelength square: fast, still strongly correlated."""
    return ScenarioConfig(aperture_wl=(0.6, 0.6), grid_dims=(4, 4), m_o=4, n_draws=5,
                          gain_scale=1e4)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
