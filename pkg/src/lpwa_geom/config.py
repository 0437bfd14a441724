"""YAML scenario files: unit-suffixed quantities, overrides and content hashing.

Quantities are written as ``"<number> <unit>"``.  Bare numbers are SI, except
densities, which are per km^2 (the convention of the deployment tables).
Overrides use dotted paths into the raw document (``network.lambda_ap``,
``classes.0.tx_power``) or address a class by id (``class2.tx_power``) and
are applied before validation, so ``--set`` and editing the file give the
same scenario.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .model import (
    ChannelModel,
    EnergyModel,
    McControls,
    NetworkConfig,
    Scenario,
    TrafficClass,
    from_db_pathloss,
)

SCHEMA_VERSION = 1

_LENGTH = {"m": 1.0, "km": 1e3}
_TIME = {"s": 1.0, "ms": 1e-3, "min": 60.0, "h": 3600.0, "d": 86400.0}
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6}
_ENERGY = {"j": 1.0, "mj": 1e-3, "kj": 1e3}
_DENSITY = {"/m2": 1.0, "/km2": 1e-6, "1/m2": 1.0, "1/km2": 1e-6, "/m^2": 1.0, "/km^2": 1e-6}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s].*)?$")


def _split(value: Any, path: str) -> tuple[float, str | None]:
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value), None
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a quantity, got {type(value).__name__}")
    m = _QTY.match(value)
    if not m:
        raise ConfigError(f"{path}: cannot parse quantity {value!r}")
    unit = m.group(2)
    return float(m.group(1)), unit.strip() if unit else None


def _scaled(value, path, table, default_scale=1.0) -> float:
    x, unit = _split(value, path)
    if unit is None:
        return x * default_scale
    key = unit.lower().replace(" ", "")
    if key not in table:
        raise ConfigError(f"{path}: unknown unit {unit!r} (allowed: {', '.join(sorted(table))})")
    return x * table[key]


def parse_length(v, path):
    return _scaled(v, path, _LENGTH)


def parse_time(v, path):
    return _scaled(v, path, _TIME)


def parse_freq(v, path):
    return _scaled(v, path, _FREQ)


def parse_energy(v, path):
    return _scaled(v, path, _ENERGY)


def parse_density(v, path):
    """Per-m^2 density; bare numbers are per km^2."""
    return _scaled(v, path, _DENSITY, default_scale=1e-6)


def parse_power(v, path) -> float:
    x, unit = _split(v, path)
    if unit is None:
        return x
    u = unit.lower()
    if u == "w":
        return x
    if u == "mw":
        return x * 1e-3
    if u == "dbm":
        return 10.0 ** ((x - 30.0) / 10.0)
    if u == "dbw":
        return 10.0 ** (x / 10.0)
    raise ConfigError(f"{path}: unknown power unit {unit!r}")


def parse_psd(v, path) -> float:
    x, unit = _split(v, path)
    if unit is None:
        return x
    u = unit.lower().replace(" ", "")
    if u == "w/hz":
        return x
    if u == "dbm/hz":
        return 10.0 ** ((x - 30.0) / 10.0)
    if u == "dbw/hz":
        return 10.0 ** (x / 10.0)
    raise ConfigError(f"{path}: unknown noise PSD unit {unit!r}")


def parse_ratio(v, path) -> float:
    x, unit = _split(v, path)
    if unit is None:
        return x
    if unit.lower() == "db":
        return 10.0 ** (x / 10.0)
    raise ConfigError(f"{path}: unknown ratio unit {unit!r}")


def parse_db(v, path) -> float:
    x, unit = _split(v, path)
    if unit is not None and unit.lower() != "db":
        raise ConfigError(f"{path}: expected dB, got {unit!r}")
    return x


def _int(v, path) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    return int(v)


def _bool(v, path) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true/false, got {v!r}")
    return v


def _float(v, path) -> float:
    x, unit = _split(v, path)
    if unit is not None:
        raise ConfigError(f"{path}: expected a plain number, got unit {unit!r}")
    return x


# --- schema --------------------------------------------------------------------------------------

_CLASS_FIELDS = {
    "id": _int,
    "lambda_parent": parse_density,
    "upsilon": _float,
    "sigma_scatter": parse_length,
    "report_period": parse_time,
    "tx_time": parse_time,
    "signal_bw": parse_freq,
    "replicas": _int,
    "tx_power": parse_power,
    "max_attempts": _int,
    "in_phi": _bool,
}
_ENERGY_FIELDS = {
    "e0": parse_energy,
    "e_static": parse_energy,
    "e_listen": parse_energy,
    "p_circuit": parse_power,
    "eta": _float,
}
_NETWORK_FIELDS = {
    "total_bw": parse_freq,
    "lambda_ap": parse_density,
    "code_count": _int,
    "rejection": _float,
    "l_max": _int,
}
_MC_FIELDS = {
    "window_side": parse_length,
    "guard": parse_length,
    "snapshots": _int,
    "seed": _int,
    "antithetic": _bool,
}
_PATHLOSS_FIELDS = {"intercept_db", "slope_db_per_decade", "ref_dist", "alpha1", "alpha2", "delta"}
_CHANNEL_FIELDS = {"pathloss", "nakagami_m", "nakagami_omega", "noise_psd", "gamma_th"}
_TOP_FIELDS = {"schema_version", "name", "interest", "channel", "network", "classes", "mc",
               "analysis", "experiments"}
_ANALYSIS_FIELDS = {"success_model", "quad_tol", "trunc_radius", "remark1", "beta", "theorem3_variant"}
_EXPERIMENT_FIELDS = {
    "validate": {"z_min", "z_max", "z_points", "z_values"},
    "sweep": {"axis", "values"},
    "optimize": {"n_max", "p_max", "p_grid", "evaluator", "p_floor"},
    "scale": {"axis", "targets", "lo", "hi", "n_max", "tol"},
}


def _check_keys(d: dict, allowed, path: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(sorted(extra))}")


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: required field missing")
    return d[key]


def _build_channel(d: dict) -> ChannelModel:
    _check_keys(d, _CHANNEL_FIELDS, "channel")
    pl = _need(d, "pathloss", "channel")
    _check_keys(pl, _PATHLOSS_FIELDS, "channel.pathloss")
    if "intercept_db" in pl:
        ref = parse_length(pl.get("ref_dist", 1.0), "channel.pathloss.ref_dist")
        a1, a2, delta = from_db_pathloss(parse_db(pl["intercept_db"], "channel.pathloss.intercept_db"),
                                         parse_db(_need(pl, "slope_db_per_decade", "channel.pathloss"),
                                                  "channel.pathloss.slope_db_per_decade"), ref)
    else:
        a1 = _float(pl.get("alpha1", 0.0), "channel.pathloss.alpha1")
        a2 = _float(_need(pl, "alpha2", "channel.pathloss"), "channel.pathloss.alpha2")
        delta = _float(_need(pl, "delta", "channel.pathloss"), "channel.pathloss.delta")
    return ChannelModel(
        alpha1=a1, alpha2=a2, delta=delta,
        m=_int(d.get("nakagami_m", 1), "channel.nakagami_m"),
        omega=_float(d.get("nakagami_omega", 1.0), "channel.nakagami_omega"),
        noise_psd=parse_psd(d.get("noise_psd", 0.0), "channel.noise_psd"),
        gamma_th=parse_ratio(d.get("gamma_th", 1.0), "channel.gamma_th"),
    )


def _build_fields(d: dict, table: dict, path: str, optional=()) -> dict:
    out = {}
    for key, parser in table.items():
        if key in d:
            out[key] = parser(d[key], f"{path}.{key}")
        elif key not in optional:
            raise ConfigError(f"{path}.{key}: required field missing")
    return out


def _build_class(d: dict, i: int) -> tuple[TrafficClass, EnergyModel, float]:
    path = f"classes.{i}"
    _check_keys(d, set(_CLASS_FIELDS) | {"energy", "reliability_target"}, path)
    kw = _build_fields(d, _CLASS_FIELDS, path, optional=("replicas", "tx_power", "max_attempts", "in_phi"))
    energy = _need(d, "energy", path)
    _check_keys(energy, _ENERGY_FIELDS, f"{path}.energy")
    ekw = _build_fields(energy, _ENERGY_FIELDS, f"{path}.energy")
    target = _float(d.get("reliability_target", 0.01), f"{path}.reliability_target")
    try:
        return TrafficClass(**kw), EnergyModel(**ekw), target
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _experiment_block(doc: dict) -> dict:
    exp = doc.get("experiments") or {}
    _check_keys(exp, _EXPERIMENT_FIELDS, "experiments")
    for kind, body in exp.items():
        _check_keys(body or {}, _EXPERIMENT_FIELDS[kind], f"experiments.{kind}")
    analysis = doc.get("analysis") or {}
    _check_keys(analysis, _ANALYSIS_FIELDS, "analysis")
    out = copy.deepcopy(exp)
    out["analysis"] = copy.deepcopy(analysis)
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a raw document and build the SI scenario."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must contain a mapping at top level")
    _check_keys(doc, _TOP_FIELDS, "<root>")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    channel = _build_channel(_need(doc, "channel", "<root>"))
    net = _need(doc, "network", "<root>")
    _check_keys(net, _NETWORK_FIELDS, "network")
    network = NetworkConfig(**_build_fields(net, _NETWORK_FIELDS, "network",
                                            optional=("code_count", "rejection", "l_max")))
    raw_classes = _need(doc, "classes", "<root>")
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ConfigError("classes: expected a non-empty list")
    built = [_build_class(c, i) for i, c in enumerate(raw_classes)]
    mc_raw = doc.get("mc") or {}
    _check_keys(mc_raw, _MC_FIELDS, "mc")
    mc = McControls(**_build_fields(mc_raw, _MC_FIELDS, "mc", optional=tuple(_MC_FIELDS)))
    return Scenario(
        classes=tuple(b[0] for b in built),
        channel=channel,
        network=network,
        energy=tuple(b[1] for b in built),
        mc=mc,
        reliability_target=tuple(b[2] for b in built),
        interest=_int(doc.get("interest", built[0][0].id), "interest"),
        name=str(doc.get("name", "scenario")),
        experiments=_experiment_block(doc),
    )


# --- overrides -----------------------------------------------------------------------------------

def _resolve_container(doc: dict, parts: list[str], key: str):
    node: Any = doc
    for part in parts:
        m = re.fullmatch(r"class(\d+)", part)
        if m and isinstance(node, dict) and "classes" in node and part not in node:
            cid = int(m.group(1))
            matches = [c for c in node["classes"] if isinstance(c, dict) and c.get("id") == cid]
            if not matches:
                raise ConfigError(f"--set {key}: no class with id {cid}")
            node = matches[0]
        elif isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"--set {key}: bad list index {part!r}") from None
        elif isinstance(node, dict):
            if part not in node:
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(f"--set {key}: {part!r} does not name a section")
    return node


def apply_overrides(doc: dict, overrides: dict[str, Any] | list[str]) -> dict:
    """Return a copy of ``doc`` with dotted-path overrides applied.

    Unknown keys are rejected by the subsequent validation, so a typo never
    silently becomes a no-op.
    """
    doc = copy.deepcopy(doc)
    if isinstance(overrides, list):
        overrides = parse_set_args(overrides)
    for key, value in overrides.items():
        parts = key.split(".")
        container = _resolve_container(doc, parts[:-1], key)
        leaf = parts[-1]
        if isinstance(container, list):
            try:
                container[int(leaf)] = value
            except (ValueError, IndexError):
                raise ConfigError(f"--set {key}: bad list index {leaf!r}") from None
        else:
            container[leaf] = value
    return doc


def parse_set_args(items: list[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = yaml.safe_load(raw) if raw.strip() else ""
        except yaml.YAMLError as exc:
            raise ConfigError(f"--set {key}: cannot parse value {raw!r}: {exc}") from None
    return out


# --- loading and hashing ---------------------------------------------------------------------------

def read_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: YAML error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML error: {exc}") from None
    if doc is None:
        raise ConfigError(f"{path}: file is empty")
    return doc


def load_scenario(path: str | Path, overrides: dict[str, Any] | list[str] | None = None) -> Scenario:
    doc = read_document(path)
    if overrides:
        doc = apply_overrides(doc, overrides)
    try:
        return scenario_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolved_params(sc: Scenario) -> dict:
    """Plain-data SI view of a scenario (used for manifests and hashing)."""
    def cls(k):
        return {f: getattr(k, f) for f in _CLASS_FIELDS}

    def en(e):
        return {f: getattr(e, f) for f in _ENERGY_FIELDS}

    ch = sc.channel
    return {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "interest": sc.interest,
        "channel": {"alpha1": ch.alpha1, "alpha2": ch.alpha2, "delta": ch.delta, "m": ch.m,
                    "omega": ch.omega, "noise_psd": ch.noise_psd, "gamma_th": ch.gamma_th},
        "network": {f: getattr(sc.network, f) for f in _NETWORK_FIELDS},
        "classes": [dict(cls(k), energy=en(e), reliability_target=t)
                    for k, e, t in zip(sc.classes, sc.energy, sc.reliability_target)],
        "mc": {f: getattr(sc.mc, f) for f in _MC_FIELDS},
        "experiments": sc.experiments or {},
    }


def _canonical(obj):
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return float(repr(obj))
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def scenario_hash(sc: Scenario) -> str:
    blob = json.dumps(_canonical(resolved_params(sc)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
