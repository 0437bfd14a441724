"""Domain types, unit conversions and activity-factor arithmetic.

Everything here is SI internally: metres, seconds, watts, hertz, joules and
per-square-metre densities.  Conversions from the configuration units
(dBm, kHz, km, per-km^2) live at the boundary, in :mod:`lpwa_geom.config`.
All types are frozen dataclasses and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, SingularInputError

__all__ = [
    "ActivityFactors",
    "ChannelModel",
    "EnergyModel",
    "McControls",
    "NetworkConfig",
    "Scenario",
    "TrafficClass",
    "activity_factors",
    "code_weight",
    "db_to_linear",
    "dbm_to_watt",
    "from_db_pathloss",
    "linear_to_db",
    "noise_power",
    "pathloss",
    "watt_to_dbm",
]

PER_KM2 = 1e-6


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class TrafficClass:
    """One IoT device type: deployment, traffic timing and radio settings.

    Devices are deployed as a Poisson cluster process with parent density
    ``lambda_parent`` (1/m^2), ``upsilon`` mean daughters per parent and a
    2-D normal scatter of standard deviation ``sigma_scatter`` per axis.
    """

    id: int
    lambda_parent: float
    upsilon: float
    sigma_scatter: float
    report_period: float
    tx_time: float
    signal_bw: float
    replicas: int = 1
    tx_power: float = 0.126
    max_attempts: int = 1
    in_phi: bool = False

    def __post_init__(self):
        _require(self.lambda_parent >= 0, f"class {self.id}: lambda_parent must be >= 0")
        _require(self.upsilon >= 0, f"class {self.id}: upsilon must be >= 0")
        _require(self.sigma_scatter > 0, f"class {self.id}: sigma_scatter must be > 0")
        _require(self.tx_time >= 0, f"class {self.id}: tx_time must be >= 0")
        _require(self.report_period > self.tx_time,
                 f"class {self.id}: report_period must exceed tx_time")
        _require(self.signal_bw > 0, f"class {self.id}: signal_bw must be > 0")
        _require(int(self.replicas) == self.replicas and self.replicas >= 1,
                 f"class {self.id}: replicas must be an integer >= 1")
        _require(int(self.max_attempts) == self.max_attempts and self.max_attempts >= 1,
                 f"class {self.id}: max_attempts must be an integer >= 1")
        _require(self.tx_power > 0, f"class {self.id}: tx_power must be > 0")
        _require(self.time_activity <= 1.0 + 1e-12,
                 f"class {self.id}: replicas*tx_time/report_period exceeds 1")

    @property
    def time_activity(self) -> float:
        return self.replicas * self.tx_time / self.report_period

    def with_(self, **changes) -> "TrafficClass":
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelModel:
    """Path loss ``g(r) = 1/(alpha1 + alpha2 r^delta)`` with Nakagami-m fading."""

    alpha1: float
    alpha2: float
    delta: float
    m: int = 1
    omega: float = 1.0
    noise_psd: float = 0.0
    gamma_th: float = 1.0

    def __post_init__(self):
        _require(self.alpha1 >= 0, "alpha1 must be >= 0")
        _require(self.alpha2 > 0, "alpha2 must be > 0")
        # delta == 2 is admitted only for the simplified optimiser model; every
        # interference integral rejects it (see analytic.require_convergent).
        _require(self.delta >= 2, "pathloss exponent delta must be >= 2")
        _require(int(self.m) == self.m and self.m >= 1, "Nakagami m must be an integer >= 1")
        _require(self.omega > 0, "Nakagami omega must be > 0")
        _require(self.noise_psd >= 0, "noise_psd must be >= 0")
        _require(self.gamma_th > 0, "gamma_th must be > 0")

    def gain(self, r):
        """Vectorised path gain; returns ``inf`` at r=0 when alpha1 is 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return 1.0 / (self.alpha1 + self.alpha2 * r ** self.delta)

    def inverse_gain(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha1 + self.alpha2 * r ** self.delta

    @property
    def pure_power_law(self) -> bool:
        return self.alpha1 == 0.0

    def with_(self, **changes) -> "ChannelModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class NetworkConfig:
    total_bw: float
    lambda_ap: float
    code_count: int = 1
    rejection: float = 0.0
    l_max: int = 1

    def __post_init__(self):
        _require(self.total_bw > 0, "total_bw must be > 0")
        _require(self.lambda_ap >= 0, "lambda_ap must be >= 0")
        _require(int(self.code_count) == self.code_count and self.code_count >= 1,
                 "code_count must be an integer >= 1")
        _require(0.0 <= self.rejection <= 1.0, "rejection must lie in [0, 1]")
        _require(int(self.l_max) == self.l_max and self.l_max >= 1, "l_max must be an integer >= 1")

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class EnergyModel:
    e0: float
    e_static: float
    e_listen: float
    p_circuit: float
    eta: float

    def __post_init__(self):
        _require(self.e0 > 0, "e0 must be > 0")
        _require(self.e_static >= 0 and self.e_listen >= 0 and self.p_circuit >= 0,
                 "energies and circuit power must be >= 0")
        _require(self.eta > 0, "eta must be > 0")

    def with_(self, **changes) -> "EnergyModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class ActivityFactors:
    """Mean number of interfering devices per cluster, same / different code."""

    nu_hat_same: float
    nu_hat_diff: float

    @property
    def total(self) -> float:
        return self.nu_hat_same + self.nu_hat_diff

    def __getitem__(self, j: int) -> float:
        if j == 1:
            return self.nu_hat_same
        if j == 2:
            return self.nu_hat_diff
        raise IndexError(j)


@dataclass(frozen=True)
class McControls:
    window_side: float = 20e3
    guard: float = 5e3
    snapshots: int = 20000
    seed: int = 1
    antithetic: bool = False

    def __post_init__(self):
        _require(self.window_side > 0, "window_side must be > 0")
        _require(self.guard >= 0, "guard must be >= 0")
        _require(int(self.snapshots) == self.snapshots and self.snapshots >= 1,
                 "snapshots must be an integer >= 1")

    @property
    def half_side(self) -> float:
        return 0.5 * self.window_side + self.guard

    @property
    def area(self) -> float:
        return (2.0 * self.half_side) ** 2

    def with_(self, **changes) -> "McControls":
        return replace(self, **changes)


@dataclass(frozen=True)
class Scenario:
    """Everything one experiment needs: classes, channel, network, energy, MC."""

    classes: tuple[TrafficClass, ...]
    channel: ChannelModel
    network: NetworkConfig
    energy: tuple[EnergyModel, ...]
    mc: McControls = field(default_factory=McControls)
    reliability_target: tuple[float, ...] = ()
    interest: int = 1
    name: str = "scenario"
    experiments: Any = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        _require(len(self.classes) >= 1, "a scenario needs at least one traffic class")
        ids = [k.id for k in self.classes]
        _require(len(set(ids)) == len(ids), "traffic class ids must be unique")
        _require(self.interest in ids, f"class of interest {self.interest} is not defined")
        _require(len(self.energy) == len(self.classes), "one energy model per class is required")
        if not self.reliability_target:
            object.__setattr__(self, "reliability_target", tuple(0.01 for _ in self.classes))
        _require(len(self.reliability_target) == len(self.classes),
                 "one reliability target per class is required")
        for t in self.reliability_target:
            _require(0.0 < t <= 1.0, "reliability targets must lie in (0, 1]")
        for k in self.classes:
            _require(k.signal_bw <= self.network.total_bw * (1 + 1e-12),
                     f"class {k.id}: signal_bw exceeds total_bw")
        sigma_max = max(k.sigma_scatter for k in self.classes)
        _require(self.mc.guard >= 5.0 * sigma_max, "MC guard must be at least 5 sigma_max")

    # lookups -----------------------------------------------------------------
    def index(self, class_id: int) -> int:
        for i, k in enumerate(self.classes):
            if k.id == class_id:
                return i
        raise KeyError(class_id)

    def cls(self, class_id: int | None = None) -> TrafficClass:
        return self.classes[self.index(self.interest if class_id is None else class_id)]

    def energy_of(self, class_id: int | None = None) -> EnergyModel:
        return self.energy[self.index(self.interest if class_id is None else class_id)]

    def target_of(self, class_id: int | None = None) -> float:
        return self.reliability_target[self.index(self.interest if class_id is None else class_id)]

    # functional updates --------------------------------------------------------
    def with_class(self, class_id: int, **changes) -> "Scenario":
        i = self.index(class_id)
        classes = list(self.classes)
        classes[i] = classes[i].with_(**changes)
        return replace(self, classes=tuple(classes))

    def with_energy(self, class_id: int, **changes) -> "Scenario":
        i = self.index(class_id)
        energy = list(self.energy)
        energy[i] = energy[i].with_(**changes)
        return replace(self, energy=tuple(energy))

    def with_network(self, **changes) -> "Scenario":
        return replace(self, network=self.network.with_(**changes))

    def with_channel(self, **changes) -> "Scenario":
        return replace(self, channel=self.channel.with_(**changes))

    def with_mc(self, **changes) -> "Scenario":
        return replace(self, mc=self.mc.with_(**changes))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


# operations ------------------------------------------------------------------

def pathloss(dist, ch: ChannelModel):
    """Path gain ``1/(alpha1 + alpha2 * dist**delta)``.

    Raises :class:`SingularInputError` at ``dist == 0`` for a pure power law.
    """
    d = np.asarray(dist, dtype=float)
    if np.any(d < 0):
        raise SingularInputError("distance must be non-negative")
    if ch.alpha1 == 0.0 and np.any(d == 0):
        raise SingularInputError("pathloss is singular at zero distance when alpha1 = 0")
    g = 1.0 / (ch.alpha1 + ch.alpha2 * d ** ch.delta)
    return float(g) if np.ndim(g) == 0 else g


def from_db_pathloss(intercept_db: float, slope_db_per_decade: float,
                     ref_dist: float = 1.0) -> tuple[float, float, float]:
    """Map ``PL(x) = A + B log10(x/x0)`` dB onto ``(alpha1, alpha2, delta)``."""
    if slope_db_per_decade <= 20.0:
        raise ConfigError("dB slope must exceed 20 dB/decade (exponent > 2)")
    if ref_dist <= 0:
        raise ConfigError("reference distance must be positive")
    delta = slope_db_per_decade / 10.0
    alpha2 = 10.0 ** (intercept_db / 10.0 - delta * math.log10(ref_dist))
    return 0.0, alpha2, delta


def activity_factors(k: TrafficClass, net: NetworkConfig) -> ActivityFactors:
    """Time x frequency x code occupancy of one cluster of class ``k``."""
    base = k.upsilon * k.time_activity * (k.signal_bw / net.total_bw)
    if not k.in_phi:
        return ActivityFactors(0.0, base)
    codes = net.code_count
    return ActivityFactors(base / codes, base * (codes - 1) / codes)


def code_weight(k: TrafficClass, j: int, net: NetworkConfig) -> float:
    """Received-power scaling of a class-``k`` interferer with code status ``j``.

    Same-code interferers (j=1) are never rejected.  Different-code interferers
    of a class sharing the semi-orthogonal code set are attenuated by the
    rejection factor; classes outside that set carry no code and are not.
    """
    if j == 1 or not k.in_phi:
        return 1.0
    return net.rejection


def noise_power(ch: ChannelModel, k: TrafficClass) -> float:
    """Receiver noise power, matched to the class signal bandwidth."""
    return ch.noise_psd * k.signal_bw


def interferer_terms(sc: Scenario):
    """Yield ``(k, j, weight, nu_hat)`` for every non-empty interferer group."""
    for k in sc.classes:
        af = activity_factors(k, sc.network)
        for j in (1, 2):
            nu = af[j]
            if nu > 0:
                yield k, j, code_weight(k, j, sc.network), nu


def as_tuple(x: Sequence | None) -> tuple:
    return tuple(x) if x is not None else ()
