"""The four canonical batch experiments behind the command-line tool.

Each ``run_*`` function takes a loaded :class:`Scenario` plus options and
returns a :class:`Table`; writing files is left to :mod:`lpwa_geom.cli`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .analytic import (
    SuccessModel,
    battery_lifetime,
    expected_attempts,
    outage_prob,
    success_components,
    success_prob_exact,
    success_probability,
)
from .config import parse_density, parse_freq, parse_length, parse_power, scenario_hash
from .errors import ConfigError, LpwaError, NonMonotoneError
from .model import Scenario
from .optimizer import (
    OperatingPoint,
    OptimizerConfig,
    brute_force,
    full_model_evaluator,
    optimize,
)
from .parallel import ordered_map
from .simulator import estimate_coverage, estimate_success_curve

KINDS = ("validate", "sweep", "optimize", "scale")


@dataclass
class ExperimentSpec:
    kind: str
    scenario_path: str
    output_dir: str = "."
    overrides: dict = field(default_factory=dict)
    sweep_axis: tuple[str, list] | None = None
    seed: int | None = None
    mc: bool = False
    brute_force: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    summary: dict = field(default_factory=dict)


def analysis_settings(sc: Scenario) -> tuple[SuccessModel, bool]:
    """Success model and ``all_fail`` flag from the scenario's analysis block."""
    a = (sc.experiments or {}).get("analysis", {})
    try:
        model = SuccessModel(
            method=a.get("success_model", "numerical_eq12"),
            quad_tol=float(a.get("quad_tol", 1e-8)),
            trunc_radius=(parse_length(a["trunc_radius"], "analysis.trunc_radius")
                          if a.get("trunc_radius") is not None else None),
            remark1=bool(a.get("remark1", False)),
            theorem3_variant=a.get("theorem3_variant", "derived"),
        )
    except ValueError as exc:
        raise ConfigError(f"analysis: {exc}") from None
    beta = a.get("beta", "literal")
    if beta not in ("literal", "all_fail"):
        raise ConfigError("analysis.beta: expected 'literal' or 'all_fail'")
    return model, beta == "all_fail"


def _block(sc: Scenario, kind: str) -> dict:
    return dict((sc.experiments or {}).get(kind) or {})


def _provenance(sc: Scenario) -> list:
    return [scenario_hash(sc), __version__]


PROVENANCE = ["scenario_hash", "tool_version"]


# --- validate --------------------------------------------------------------------------------------

def z_grid(sc: Scenario) -> list[float]:
    b = _block(sc, "validate")
    if "z_values" in b:
        return [parse_length(v, "experiments.validate.z_values") for v in b["z_values"]]
    lo = parse_length(b.get("z_min", 50.0), "experiments.validate.z_min")
    hi = parse_length(b.get("z_max", 5000.0), "experiments.validate.z_max")
    n = int(b.get("z_points", 40))
    if not 0 < lo < hi or n < 2:
        raise ConfigError("experiments.validate: need 0 < z_min < z_max and z_points >= 2")
    return [float(z) for z in np.geomspace(lo, hi, n)]


VALIDATE_COLUMNS = ["z_m", "ps_theorem1", "ps_exact_m1", "ps_mc", "ps_mc_stderr",
                    "noise_only", "intra_cluster", "same_class", "cross_class",
                    "mc_noise_only", "mc_intra_cluster", "mc_same_class", "mc_cross_class",
                    "status"] + PROVENANCE


def run_validate(sc: Scenario, *, seed: int | None = None, workers: int | None = None) -> Table:
    model, _ = analysis_settings(sc)
    zs = z_grid(sc)
    curve = estimate_success_curve(zs, sc, snapshots=sc.mc.snapshots, seed=seed, workers=workers)
    prov = _provenance(sc)

    def row(i):
        z = zs[i]
        status = "ok"
        try:
            comp = success_components(z, sc, model=model)
            th1 = comp["noise_only"] * comp["intra_cluster"] * comp["same_class"] * comp["cross_class"]
        except LpwaError as exc:
            comp = dict.fromkeys(("noise_only", "intra_cluster", "same_class", "cross_class"), math.nan)
            th1 = math.nan
            status = f"theorem1: {exc}"
        try:
            exact = success_prob_exact(z, sc, model=model)
        except (LpwaError, ArithmeticError) as exc:
            exact = math.nan
            status = f"exact: {exc}" if status == "ok" else status
        c = curve[i]
        return ([z, th1, exact, c.ps, c.stderr, comp["noise_only"], comp["intra_cluster"],
                 comp["same_class"], comp["cross_class"]]
                + [c.components[k][0] for k in ("noise_only", "intra_cluster", "same_class", "cross_class")]
                + [status] + prov)

    rows = ordered_map(row, list(range(len(zs))), workers=workers)
    valid = [abs(r[1] - r[3]) for r in rows if not math.isnan(r[1])]
    return Table(VALIDATE_COLUMNS, rows, {"max_abs_theorem1_minus_mc": max(valid) if valid else math.nan})


# --- sweep --------------------------------------------------------------------------------------------

SWEEP_AXES = {"replicas": "replicas", "n": "replicas", "tx_power": "tx_power", "p": "tx_power"}


def _sweep_values(axis: str, values) -> list:
    if axis == "replicas":
        out = []
        for v in values:
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"sweep values for replicas must be integers >= 1, got {v!r}")
            out.append(int(v))
        return out
    return [parse_power(v, "sweep.values") for v in values]


def run_sweep(sc: Scenario, *, axis: str | None = None, values=None, mc: bool = False,
              seed: int | None = None, workers: int | None = None) -> Table:
    model, all_fail = analysis_settings(sc)
    b = _block(sc, "sweep")
    axis = axis or b.get("axis", "replicas")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    field_name = SWEEP_AXES[axis]
    values = _sweep_values(field_name, values if values is not None else b.get("values", list(range(1, 9))))
    me = sc.cls()
    cid = me.id
    ids = [k.id for k in sc.classes]
    columns = (["axis", "value", f"lifetime_type{cid}"] + [f"ps_type{i}" for i in ids]
               + ["beta", f"outage_type{cid}", f"reliability_type{cid}"])
    if mc:
        columns += [f"ps_mc_type{cid}", f"ps_mc_stderr_type{cid}"]
    columns += ["status"] + PROVENANCE
    prov = _provenance(sc)

    def row(v):
        scn = sc.with_class(cid, **{field_name: v})
        status = "ok"
        try:
            ps = {i: success_probability(scn, i, model=model) for i in ids}
            k = scn.cls(cid)
            beta = expected_attempts(ps[cid], k.replicas, k.max_attempts, all_fail=all_fail)
            po = outage_prob(ps[cid], k.replicas, k.max_attempts)
            life = battery_lifetime(scn, cid, ps[cid], all_fail=all_fail)
        except (LpwaError, ArithmeticError) as exc:
            ps = dict.fromkeys(ids, math.nan)
            beta = po = life = math.nan
            status = str(exc)
        r = [field_name, v, life] + [ps[i] for i in ids] + [beta, po, 1.0 - po]
        if mc:
            p_hat, se = estimate_coverage(scn, cid, seed=seed, workers=1)
            r += [p_hat, se]
        return r + [status] + prov

    return Table(columns, ordered_map(row, values, workers=workers))


# --- optimize -----------------------------------------------------------------------------------------

TRACE_COLUMNS = ["p_w", "n", "ps", "po", "beta", "lifetime_s", "objective", "feasible"] + PROVENANCE


def optimizer_settings(sc: Scenario) -> tuple[OptimizerConfig, str, float | None]:
    b = _block(sc, "optimize")
    _, all_fail = analysis_settings(sc)
    try:
        cfg = OptimizerConfig(
            n_max=int(b.get("n_max", 8)),
            p_max=parse_power(b.get("p_max", sc.cls().tx_power), "experiments.optimize.p_max"),
            p_grid=int(b.get("p_grid", 200)),
            all_fail=all_fail,
        )
    except ValueError as exc:
        raise ConfigError(f"experiments.optimize: {exc}") from None
    evaluator = b.get("evaluator", "simplified")
    if evaluator not in ("simplified", "full"):
        raise ConfigError("experiments.optimize.evaluator: expected 'simplified' or 'full'")
    p_floor = parse_power(b["p_floor"], "experiments.optimize.p_floor") if "p_floor" in b else None
    return cfg, evaluator, p_floor


def _point_dict(pt: OperatingPoint) -> dict:
    return {"n": pt.n, "p_w": pt.p, "lifetime_s": pt.lifetime, "ps": pt.ps, "po": pt.po,
            "beta": pt.beta, "objective": pt.objective, "feasible": pt.feasible}


def run_optimize(sc: Scenario, *, brute: bool = False, workers: int | None = None) -> Table:
    """Grid search; raises :class:`InfeasibleError` when no point meets the target."""
    model, _ = analysis_settings(sc)
    cfg, evaluator, p_floor = optimizer_settings(sc)
    ps_fn = None if evaluator == "simplified" else full_model_evaluator(sc, model=model)
    if ps_fn is not None:
        ps_fn = _memoize(ps_fn)
    res = optimize(cfg, sc, ps_fn=ps_fn, p_floor=p_floor, workers=workers)
    prov = _provenance(sc)
    rows = [[pt.p, pt.n, pt.ps, pt.po, pt.beta, pt.lifetime, pt.objective, pt.feasible] + prov
            for pt in res.trace]
    summary = {"evaluator": evaluator, "p_min_w": res.p_min, "best": _point_dict(res.best),
               "scenario_hash": prov[0], "tool_version": prov[1]}
    if brute:
        grid = sorted({pt.p for pt in res.trace})
        bf = brute_force(cfg, sc, powers=grid, ps_fn=ps_fn)
        summary["brute_force"] = _point_dict(bf)
        summary["brute_force_matches"] = (bf.n, bf.p) == (res.best.n, res.best.p)
    return Table(TRACE_COLUMNS, rows, summary)


def _memoize(fn: Callable[[float, int], float]) -> Callable[[float, int], float]:
    cache: dict = {}

    def wrapped(p, n):
        key = (p, n)
        if key not in cache:
            cache[key] = fn(p, n)
        return cache[key]

    return wrapped


# --- scale ----------------------------------------------------------------------------------------------

SCALE_AXES = ("power", "replicas", "lambda_ap", "total_bw")
SCALE_COLUMNS = ["axis", "target_reliability", "required_resource", "achieved_reliability", "saturated"] + PROVENANCE

_SCALE_DEFAULTS = {"power": ("1 mW", "1 W"), "lambda_ap": (0.01, 100.0), "total_bw": ("10 kHz", "10 MHz")}


def _scale_parser(axis: str):
    return {"power": parse_power, "lambda_ap": parse_density, "total_bw": parse_freq}[axis]


def apply_resource(sc: Scenario, axis: str, value) -> Scenario:
    if axis == "power":
        return sc.with_class(sc.interest, tx_power=float(value))
    if axis == "replicas":
        return sc.with_class(sc.interest, replicas=int(value))
    if axis == "lambda_ap":
        return sc.with_network(lambda_ap=float(value))
    if axis == "total_bw":
        return sc.with_network(total_bw=float(value))
    raise ConfigError(f"scale axis must be one of {SCALE_AXES}, got {axis!r}")


def reliability_of(sc: Scenario, model: SuccessModel) -> float:
    k = sc.cls()
    ps = success_probability(sc, model=model)
    return 1.0 - outage_prob(ps, k.replicas, k.max_attempts)


def _bisect_log(f, lo, hi, target, rel_tol):
    # smallest x in [lo, hi] with f(x) >= target, f non-decreasing, f(hi) >= target
    if f(lo) >= target:
        return lo
    a, b = math.log(lo), math.log(hi)
    while b - a > rel_tol:
        mid = 0.5 * (a + b)
        if f(math.exp(mid)) >= target:
            b = mid
        else:
            a = mid
    return math.exp(b)


def run_scale(sc: Scenario, *, axis: str | None = None, targets=None,
              workers: int | None = None) -> Table:
    """Required amount of one resource per reliability target.

    Continuous axes are bisected in log scale after a monotonicity probe;
    the replica axis is scanned up to the peak of its rise-then-fall curve.
    Targets above the best achievable reliability are flagged ``saturated``.
    """
    model, _ = analysis_settings(sc)
    b = _block(sc, "scale")
    axis = axis or b.get("axis", "lambda_ap")
    if axis not in SCALE_AXES:
        raise ConfigError(f"scale axis must be one of {SCALE_AXES}, got {axis!r}")
    targets = [float(t) for t in (targets if targets is not None else b.get("targets", [0.5, 0.7, 0.9]))]
    for t in targets:
        if not 0.0 < t < 1.0:
            raise ConfigError(f"scale targets must lie in (0, 1), got {t}")
    tol = float(b.get("tol", 1e-3))
    prov = _provenance(sc)
    cache: dict = {}

    def rel(x):
        if x not in cache:
            cache[x] = reliability_of(apply_resource(sc, axis, x), model)
        return cache[x]

    rows = []
    if axis == "replicas":
        n_max = int(b.get("n_max", 40))
        ns = list(range(1, n_max + 1))
        vals = ordered_map(rel, ns, workers=workers)
        peak = int(np.argmax(vals))
        for t in targets:
            hit = next((n for n, v in zip(ns[:peak + 1], vals[:peak + 1]) if v >= t), None)
            if hit is None:
                rows.append([axis, t, math.nan, vals[peak], True] + prov)
            else:
                rows.append([axis, t, hit, rel(hit), False] + prov)
        return Table(SCALE_COLUMNS, rows, {"peak_replicas": ns[peak], "peak_reliability": vals[peak]})

    parse = _scale_parser(axis)
    lo_default, hi_default = _SCALE_DEFAULTS[axis]
    lo = parse(b.get("lo", lo_default), "experiments.scale.lo")
    hi = parse(b.get("hi", hi_default), "experiments.scale.hi")
    if not 0 < lo < hi:
        raise ConfigError("experiments.scale: need 0 < lo < hi")
    probes_x = list(np.geomspace(lo, hi, 9))
    probes = list(zip(probes_x, ordered_map(rel, probes_x, workers=workers)))
    for (x0, v0), (x1, v1) in zip(probes[:-1], probes[1:]):
        if v1 < v0 - 1e-9:
            raise NonMonotoneError(f"reliability is not monotone in {axis} on [{lo:.4g}, {hi:.4g}]",
                                   [(float(x), float(v)) for x, v in probes])
    ceiling = probes[-1][1]
    for t in targets:
        if ceiling < t:
            rows.append([axis, t, math.nan, ceiling, True] + prov)
            continue
        x = _bisect_log(rel, lo, hi, t, tol)
        rows.append([axis, t, x, rel(x), False] + prov)
    return Table(SCALE_COLUMNS, rows, {"ceiling": ceiling,
                                       "probes": [(float(x), float(v)) for x, v in probes]})


def run(spec: ExperimentSpec, sc: Scenario, workers: int | None = None) -> Table:
    if spec.kind == "validate":
        return run_validate(sc, seed=spec.seed, workers=workers)
    if spec.kind == "sweep":
        axis, values = spec.sweep_axis if spec.sweep_axis else (None, None)
        return run_sweep(sc, axis=axis, values=values, mc=spec.mc, seed=spec.seed, workers=workers)
    if spec.kind == "optimize":
        return run_optimize(sc, brute=spec.brute_force, workers=workers)
    axis, values = spec.sweep_axis if spec.sweep_axis else (None, None)
    return run_scale(sc, axis=axis, targets=values, workers=workers)
