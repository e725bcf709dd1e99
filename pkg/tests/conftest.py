import numpy as np
import pytest

from degmpc.config import load_config


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def plant(cfg):
    return cfg.plant


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def base_dict():
    """Minimal valid configuration as parsed TOML."""
    return {
        "plant": {"I_h": 3e5, "K_h": 2e5, "B_h": 1e4, "C_0": 1.5e-3, "R_0": 1e7, "h_l": 1e-4,
                  "E_bd": 1e8, "E_th": 9e7},
        "radiation": {"A_r": [[-0.8, -0.6], [1.0, 0.0]], "B_r": [[1.0], [0.0]], "C_r": [[25000.0, 0.0]],
                      "Q_r": [[25000.0, 0.0], [0.0, 15000.0]], "S_r": [[20000.0, 0.0], [0.0, 0.0]]},
    }


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
