"""Reliability-constrained lifetime maximisation over replicas and power.

The constraint ``(1 - P_s(p))^(n B) <= P_o^req`` is inverted into a replica
count ``n(p)`` and a power floor ``P_min``; the lifetime objective is then a
one-dimensional search over transmit power.  The default success model is the
square-law expression below; any callable ``ps(p, n)`` can be plugged in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytic import (
    SuccessModel,
    coverage_prob,
    expected_attempts,
    outage_prob,
    report_energy,
    success_probability,
)
from .errors import InfeasibleError, UnsupportedModelError
from .model import Scenario, activity_factors, noise_power
from .parallel import ordered_map

PsEvaluator = Callable[[float, int], float]


@dataclass(frozen=True)
class OptimizerConfig:
    n_max: int = 8
    p_max: float = 0.126
    p_grid: int = 200
    b: int | None = None
    target: float | None = None
    all_fail: bool = False

    def __post_init__(self):
        if self.p_grid < 2:
            raise ValueError("p_grid must be >= 2")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if self.target is not None and not 0.0 < self.target <= 1.0:
            raise ValueError("target must lie in (0, 1]")
        if self.b is not None and self.b < 1:
            raise ValueError("b must be >= 1")

    def resolve(self, sc: Scenario, interest: int | None) -> tuple[int, float]:
        b = sc.cls(interest).max_attempts if self.b is None else self.b
        target = sc.target_of(interest) if self.target is None else self.target
        return b, target


@dataclass(frozen=True)
class OperatingPoint:
    n: int
    p: float
    lifetime: float
    ps: float
    po: float
    feasible: bool
    beta: float = float("nan")
    objective: float = float("nan")


@dataclass
class OptimizationResult:
    best: OperatingPoint
    p_min: float
    trace: list[OperatingPoint] = field(default_factory=list)


# --- square-law success model -------------------------------------------------------------

def aux_d(sc: Scenario, interest: int | None = None) -> tuple[float, float]:
    """``(D0, D1)`` of the square-law success expression."""
    ch = sc.channel
    me = sc.cls(interest)
    lam_pi = sc.network.lambda_ap * math.pi
    d0 = 0.5 * math.sqrt(math.pi) * lam_pi * math.exp(-activity_factors(me, sc.network).nu_hat_diff)
    d1 = 0.0
    for k in sc.classes:
        nu2 = activity_factors(k, sc.network).nu_hat_diff
        d1 += (k.lambda_parent * nu2 * math.sqrt(k.tx_power * ch.gamma_th / ch.omega)
               * math.pi ** 2 / 2.0 / math.sin(math.pi / 2.0))
    return d0, d1


def _require_square_law(sc: Scenario) -> None:
    ch = sc.channel
    if ch.delta != 2 or ch.alpha1 != 0.0:
        raise UnsupportedModelError("the simplified success model needs g(x) = alpha |x|^-2")


def _noise_coeff(sc: Scenario, interest: int | None) -> float:
    # N gamma / (Omega alpha), alpha = 1/alpha2
    ch = sc.channel
    return noise_power(ch, sc.cls(interest)) * ch.gamma_th * ch.alpha2 / ch.omega


def ps_simplified(p: float, sc: Scenario, interest: int | None = None) -> float:
    """``D0 / (D1/sqrt(p) + lambda_a pi + N gamma/(p Omega alpha))``.

    ``D1`` is fixed by the configured interferer powers; only the own power
    ``p`` is varied.
    """
    _require_square_law(sc)
    if p <= 0:
        raise ValueError("p must be positive")
    d0, d1 = aux_d(sc, interest)
    if d0 == 0:
        return 0.0
    return d0 / (d1 / math.sqrt(p) + sc.network.lambda_ap * math.pi + _noise_coeff(sc, interest) / p)


# --- constraint inversion ----------------------------------------------------------------------

def replicas_for_ps(ps: float, b: int, target: float) -> int:
    """Smallest ``n >= 1`` with ``(1 - ps)^(n b) <= target`` (``inf`` when none exists)."""
    if target >= 1.0 or ps >= 1.0:
        return 1
    if ps <= 0.0:
        return math.inf  # type: ignore[return-value]
    n = max(1, math.ceil(math.log(target ** (1.0 / b)) / math.log1p(-ps)))
    # the log-ratio ceiling can be off by one in floating point
    while n > 1 and (1.0 - ps) ** ((n - 1) * b) <= target:
        n -= 1
    while (1.0 - ps) ** (n * b) > target:
        n += 1
    return n


def replicas_required(p: float, cfg: OptimizerConfig, sc: Scenario, interest: int | None = None,
                      ps_fn: PsEvaluator | None = None) -> int:
    b, target = cfg.resolve(sc, interest)
    ps = ps_simplified(p, sc, interest) if ps_fn is None else ps_fn(p, 1)
    n = replicas_for_ps(ps, b, target)
    if n > cfg.n_max:
        raise InfeasibleError(f"{n if n != math.inf else 'no finite'} replicas needed at p={p:.4g} W "
                              f"(n_max={cfg.n_max})", "noise-limited")
    return n


def p_min(cfg: OptimizerConfig, sc: Scenario, interest: int | None = None) -> float:
    """Smallest power at which ``n_max`` replicas meet the outage target.

    Solves ``D0 y^2 / (D1 y + lambda_a pi y^2 + K) = c`` for ``y = sqrt(p)``,
    ``K = N gamma alpha2 / Omega`` and ``c = 1 - target^(1/(n_max B))``.
    """
    _require_square_law(sc)
    b, target = cfg.resolve(sc, interest)
    if target >= 1.0:
        return 0.0
    d0, d1 = aux_d(sc, interest)
    lam_pi = sc.network.lambda_ap * math.pi
    k_noise = _noise_coeff(sc, interest)
    c = -math.expm1(math.log(target) / (cfg.n_max * b))
    a0 = lam_pi - d0 / c
    if a0 >= 0:
        raise InfeasibleError(
            f"interference floor {d0 / lam_pi if lam_pi else 0.0:.4g} is below the required "
            f"success probability {c:.4g}; add APs or bandwidth", "interference-floor")
    if k_noise == 0.0:
        y = d1 / (-a0)
        return y * y
    disc = d1 * d1 - 4.0 * k_noise * a0
    y = (-d1 - math.sqrt(disc)) / (2.0 * a0)
    return y * y


# --- search ------------------------------------------------------------------------------------

def full_model_evaluator(sc: Scenario, interest: int | None = None,
                         model: SuccessModel | None = None) -> PsEvaluator:
    """``ps(p, n)`` from the per-AP model with own power ``p`` and ``n`` replicas."""
    model = model or SuccessModel()
    cid = sc.interest if interest is None else interest

    def evaluate(p: float, n: int) -> float:
        scn = sc.with_class(cid, tx_power=p, replicas=n)
        return success_probability(scn, cid, model=model)

    return evaluate


def _objective(sc: Scenario, interest, n: int, p: float, beta: float) -> float:
    # static energy excluded: it does not depend on (n, p)
    return report_energy(sc, interest, beta, n=n, p=p) - sc.energy_of(interest).e_static


def evaluate_point(sc: Scenario, interest, cfg: OptimizerConfig, n: int, p: float, ps: float) -> OperatingPoint:
    b, target = cfg.resolve(sc, interest)
    po = outage_prob(ps, n, b)
    beta = expected_attempts(ps, n, b, all_fail=cfg.all_fail)
    denom = report_energy(sc, interest, beta, n=n, p=p)
    k = sc.cls(interest)
    life = sc.energy_of(interest).e0 * k.report_period / denom
    feasible = po <= target and n <= cfg.n_max and p <= cfg.p_max * (1 + 1e-12)
    return OperatingPoint(n, p, life, ps, po, feasible, beta, _objective(sc, interest, n, p, beta))


def power_grid(lo: float, hi: float, count: int) -> np.ndarray:
    if hi <= lo:
        return np.array([hi])
    return np.geomspace(lo, hi, count)


def _better(a: OperatingPoint, b: OperatingPoint | None) -> bool:
    if b is None:
        return True
    if a.objective < b.objective * (1 - 1e-12):
        return True
    if a.objective <= b.objective * (1 + 1e-12):
        return (a.p, a.n) < (b.p, b.n)
    return False


def optimize(cfg: OptimizerConfig, sc: Scenario, interest: int | None = None, *,
             ps_fn: PsEvaluator | None = None, p_floor: float | None = None,
             workers: int | None = None) -> OptimizationResult:
    """Grid search of the energy objective over power, scanning every feasible ``n``.

    Without ``ps_fn`` the square-law model supplies ``P_s`` and ``P_min``.
    With a custom evaluator the grid starts at ``p_floor`` (default
    ``p_max / 1e3``) and infeasible points are simply skipped.
    """
    if ps_fn is None:
        lo = p_min(cfg, sc, interest)
        if lo > cfg.p_max * (1 + 1e-12):
            raise InfeasibleError(f"P_min={lo:.4g} W exceeds P_max={cfg.p_max:.4g} W", "noise-limited")
        lo = max(lo, cfg.p_max * 1e-9) if lo < cfg.p_max else cfg.p_max

        def ps_of(p, n):
            return ps_simplified(p, sc, interest)

        n_dependent = False
    else:
        lo = cfg.p_max / 1e3 if p_floor is None else p_floor
        ps_of = ps_fn
        n_dependent = True

    grid = power_grid(lo, cfg.p_max, cfg.p_grid)
    b, target = cfg.resolve(sc, interest)

    def column(p):
        pts = []
        if n_dependent:
            for n in range(1, cfg.n_max + 1):
                pts.append(evaluate_point(sc, interest, cfg, n, float(p), ps_of(float(p), n)))
        else:
            ps = ps_of(float(p), 1)
            for n in range(1, cfg.n_max + 1):
                pts.append(evaluate_point(sc, interest, cfg, n, float(p), ps))
        return pts

    columns = ordered_map(column, list(grid), workers=workers)
    trace = [pt for col in columns for pt in col]
    best = None
    for pt in trace:
        if pt.feasible and _better(pt, best):
            best = pt
    if best is None:
        raise InfeasibleError("no grid point meets the outage target", "noise-limited")
    return OptimizationResult(best, float(lo), trace)


def brute_force(cfg: OptimizerConfig, sc: Scenario, interest: int | None = None,
                powers=None, ps_fn: PsEvaluator | None = None) -> OperatingPoint:
    """Exhaustive enumeration of the ``(n, p)`` lattice, independent of the grid search."""
    if powers is None:
        lo = p_min(cfg, sc, interest)
        lo = max(lo, cfg.p_max * 1e-9) if lo < cfg.p_max else cfg.p_max
        powers = power_grid(lo, cfg.p_max, cfg.p_grid)
    best = None
    for p in powers:
        for n in range(1, cfg.n_max + 1):
            ps = ps_simplified(float(p), sc, interest) if ps_fn is None else ps_fn(float(p), n)
            pt = evaluate_point(sc, interest, cfg, n, float(p), ps)
            if pt.feasible and _better(pt, best):
                best = pt
    if best is None:
        raise InfeasibleError("no lattice point meets the outage target", "noise-limited")
    return best


def full_model_gap(best: OperatingPoint, cfg: OptimizerConfig, sc: Scenario,
                   interest: int | None = None, model: SuccessModel | None = None) -> dict:
    """Outage of an optimised point re-evaluated with the full coverage model (report only)."""
    model = model or SuccessModel()
    cid = sc.interest if interest is None else interest
    scn = sc.with_class(cid, tx_power=best.p, replicas=best.n)
    b, target = cfg.resolve(sc, interest)
    ps_full = coverage_prob(scn, cid, model=model)
    po_full = outage_prob(ps_full, best.n, b)
    return {"ps_full": ps_full, "po_full": po_full, "target": target, "violates": po_full > target}
