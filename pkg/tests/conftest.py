from __future__ import annotations

import math
from pathlib import Path

import pytest

from lpwa_geom.config import load_scenario
from lpwa_geom.model import ChannelModel, EnergyModel, McControls, NetworkConfig, Scenario, TrafficClass

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "lpwa_geom" / "scenarios"

PSD = 10.0 ** (-20.4)  # -174 dBm/Hz
ALPHA2 = 10.0 ** 13.3 / 1000.0 ** 3.83


def golden(name: str, **overrides):
    return load_scenario(SCENARIOS / f"{name}.yaml", overrides or None)


def make_scenario(*, lam=(3.2,), ups=(200.0,), power=(0.126,), n=None, b=None, in_phi=None,
                  lambda_ap=5.5e-8, psd=PSD, delta=3.83, alpha2=None, m=1, codes=1, rejection=0.0,
                  l_max=1, window=20e3, guard=15e3, snapshots=20000, seed=1, sigma=100.0):
    k = len(lam)
    n = n or (1,) * k
    b = b or (1,) * k
    in_phi = in_phi or (False,) * k
    if alpha2 is None:
        alpha2 = ALPHA2 if delta == 3.83 else 10.0 ** 13.3 / 1000.0 ** delta
    classes = tuple(
        TrafficClass(i + 1, lam[i] * 1e-6, ups[i], sigma, 300.0, 0.1, 10e3, n[i], power[i], b[i], in_phi[i])
        for i in range(k)
    )
    return Scenario(
        classes,
        ChannelModel(0.0, alpha2, delta, m, 1.0, psd, 1.0),
        NetworkConfig(100e3, lambda_ap, codes, rejection, l_max),
        tuple(EnergyModel(1000.0, 0.1, 0.2, 0.01, 0.5) for _ in range(k)),
        McControls(window, guard, snapshots, seed),
    )


@pytest.fixture
def table1():
    return make_scenario()


@pytest.fixture
def fig1():
    return golden("fig1_validation")


def rel_err(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


__all__ = ["golden", "make_scenario", "rel_err", "record", "SCENARIOS", "PSD", "ALPHA2", "math"]


# --- acceptance report ------------------------------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, ok: bool, detail: str) -> None:
    """Register one checked part of an acceptance criterion for the end-of-run summary."""
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    print(f"ACC {criterion} [{part}] {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'} ({d})" for name, good, d in parts)
        terminalreporter.write_line(f"ACCEPTANCE {crit}: {'PASS' if ok else 'FAIL'} - {detail}")
