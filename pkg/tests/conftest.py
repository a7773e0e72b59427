import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from panelpmcmc.models import Family, PanelData, Theta

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_panel(family, P=3, T=2, d1=2, d2=2, m1=0, m2=0, seed=0, scale=0.5):
    """Small random panel; y2 is binary for the probit and continuous otherwise."""
    family = Family.parse(family)
    rng = np.random.default_rng(seed)
    X1 = rng.normal(size=(P, T, d1)) * scale
    X2 = rng.normal(size=(P, T, d2)) * scale
    X1[..., 0] = 1.0
    X2[..., 0] = 1.0
    y1 = (rng.random((P, T)) < 0.5).astype(float)
    if family.binary_y2:
        y2 = (rng.random((P, T)) < 0.5).astype(float)
    else:
        y2 = rng.normal(size=(P, T))
    xbar1 = rng.normal(size=(P, m1)) * scale
    xbar2 = rng.normal(size=(P, m2)) * scale
    return PanelData(y1, y2, X1, X2, xbar1, xbar2)


def random_theta(family, data, seed=0):
    family = Family.parse(family)
    rng = np.random.default_rng(seed + 1000)
    k1 = data.d1 + data.m1
    k2 = data.d2 + data.m2
    if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        dep = rng.uniform(-0.8, 0.8)
    elif family is Family.MIXED_CLAYTON:
        dep = rng.uniform(0.2, 4.0)
    else:
        dep = rng.uniform(1.05, 4.0)
    return Theta(beta1=rng.normal(size=k1) * 0.5, beta2=rng.normal(size=k2) * 0.5, dep=dep,
                 tau1_sq=rng.uniform(0.3, 2.0), tau2_sq=rng.uniform(0.3, 2.0),
                 rho_alpha=rng.uniform(-0.7, 0.7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Remember and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
