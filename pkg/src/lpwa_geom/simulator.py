"""Monte Carlo oracle for the interference, success and lifetime formulas.

Two samplers produce the same law of the *active* interferer field:

``full``
    draws every parent and daughter of every class over the padded window,
    then thins by activity (:func:`sample_snapshot`).  Slow, used for
    distributional tests.
``active``
    draws only clusters that contain at least one active device.  Thinning a
    Poisson(upsilon) cluster independently with probability ``a`` leaves a
    Poisson(nu_hat) active count, so clusters with at least one active member
    form a PPP of density ``lambda (1 - exp(-nu_hat))`` whose counts are
    zero-truncated Poisson.  This is what the estimators use.

Randomness comes from ``SeedSequence(seed, spawn_key=(stream, batch))`` with
a fixed batch size, so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .analytic import expected_attempts
from .model import Scenario, TrafficClass, activity_factors, code_weight, noise_power
from .parallel import ordered_map

BATCH = 2000

# stream ids keep independent experiments on disjoint substreams
STREAM_CURVE = 1
STREAM_LAPLACE = 2
STREAM_COVERAGE = 3
STREAM_LIFETIME = 4
STREAM_SNAPSHOT = 5


def batch_rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, batch)))


def _batches(total: int) -> list[tuple[int, int]]:
    out = []
    start = 0
    idx = 0
    while start < total:
        size = min(BATCH, total - start)
        out.append((idx, size))
        start += size
        idx += 1
    return out


# --- full sampler ------------------------------------------------------------------------------

@dataclass
class Snapshot:
    """One realisation of the device field around an AP at the origin.

    ``status`` is 0 for silent devices, otherwise the code-collision status
    ``j`` of an active device.  ``own`` flags the cluster mates of the probe.
    """

    parents: list[np.ndarray]
    class_ids: np.ndarray
    positions: np.ndarray
    parent_ids: np.ndarray
    status: np.ndarray
    fading: np.ndarray
    own: np.ndarray


def sample_pcp(k: TrafficClass, controls, rng: np.random.Generator, center=(0.0, 0.0)):
    """Parents and daughters of one class over the padded square window."""
    h = controls.half_side
    n_par = rng.poisson(k.lambda_parent * controls.area)
    parents = np.column_stack([rng.uniform(-h, h, n_par), rng.uniform(-h, h, n_par)]) + np.asarray(center)
    counts = rng.poisson(k.upsilon, n_par)
    parent_ids = np.repeat(np.arange(n_par), counts)
    offsets = rng.normal(0.0, k.sigma_scatter, (parent_ids.size, 2))
    daughters = parents[parent_ids] + offsets if parent_ids.size else np.empty((0, 2))
    return parents, daughters, parent_ids


def sample_aps(lambda_ap: float, controls, rng: np.random.Generator) -> np.ndarray:
    h = controls.half_side
    n = rng.poisson(lambda_ap * controls.area)
    return np.column_stack([rng.uniform(-h, h, n), rng.uniform(-h, h, n)])


def activity_thinning(class_ids: np.ndarray, sc: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Code status per device: 0 silent, 1 same code, 2 different code."""
    status = np.zeros(class_ids.size, dtype=np.int8)
    for k in sc.classes:
        sel = np.flatnonzero(class_ids == k.id)
        if sel.size == 0:
            continue
        a = k.time_activity * k.signal_bw / sc.network.total_bw
        active = sel[rng.random(sel.size) < a]
        if k.in_phi:
            same = rng.random(active.size) < 1.0 / sc.network.code_count
            status[active] = np.where(same, 1, 2)
        else:
            status[active] = 2
    return status


def draw_fading(size, ch, rng: np.random.Generator) -> np.ndarray:
    return rng.gamma(ch.m, ch.omega / ch.m, size)


def sample_snapshot(sc: Scenario, rng: np.random.Generator, probe=(0.0, 0.0),
                    interest: int | None = None) -> Snapshot:
    """Full PCP field plus the probe's own cluster mates, thinned and faded."""
    me = sc.cls(interest)
    parents, pos, cids, pids, own = [], [], [], [], []
    offset = 0
    for k in sc.classes:
        par, dau, pid = sample_pcp(k, sc.mc, rng)
        parents.append(par)
        pos.append(dau)
        cids.append(np.full(len(dau), k.id))
        pids.append(pid + offset)
        own.append(np.zeros(len(dau), dtype=bool))
        offset += len(par)
    own_parent = np.asarray(probe, dtype=float) + rng.normal(0.0, me.sigma_scatter, 2)
    n_mates = rng.poisson(me.upsilon)
    mates = own_parent + rng.normal(0.0, me.sigma_scatter, (n_mates, 2))
    pos.append(mates)
    cids.append(np.full(n_mates, me.id))
    pids.append(np.full(n_mates, -1))
    own.append(np.ones(n_mates, dtype=bool))
    class_ids = np.concatenate(cids)
    status = activity_thinning(class_ids, sc, rng)
    fading = np.where(status > 0, draw_fading(class_ids.size, sc.channel, rng), 0.0)
    return Snapshot(parents, class_ids, np.concatenate(pos).reshape(-1, 2), np.concatenate(pids),
                    status, fading, np.concatenate(own))


def snapshot_interference(snap: Snapshot, sc: Scenario, rx=(0.0, 0.0)) -> float:
    ch = sc.channel
    act = snap.status > 0
    if not np.any(act):
        return 0.0
    d = np.hypot(*(snap.positions[act] - np.asarray(rx)).T)
    power = np.array([sc.cls(int(c)).tx_power for c in snap.class_ids[act]])
    weight = np.array([code_weight(sc.cls(int(c)), int(j), sc.network)
                       for c, j in zip(snap.class_ids[act], snap.status[act])])
    return float(np.sum(weight * power * snap.fading[act] * ch.gain(d)))


def probe_success(z: float, sc: Scenario, snap: Snapshot, rng: np.random.Generator,
                  interest: int | None = None) -> bool:
    """SINR test of a probe at ``(z, 0)`` towards the AP at the origin.

    ``snap`` must have been sampled with ``probe=(z, 0)`` so that its own
    cluster surrounds the probe.
    """
    ch = sc.channel
    me = sc.cls(interest)
    h0 = draw_fading(None, ch, rng)
    signal = me.tx_power * h0 * float(ch.gain(z))
    return bool(signal >= ch.gamma_th * (noise_power(ch, me) + snapshot_interference(snap, sc)))


# --- active-interferer sampler --------------------------------------------------------------------

@dataclass
class ActiveField:
    """Active interferers of a batch of snapshots, AP at origin, probe at (z, 0).

    Other-cluster devices carry absolute positions; own-cluster devices carry
    offsets relative to the probe so the same draw serves every ``z``.
    """

    snap: np.ndarray
    xy: np.ndarray
    power: np.ndarray
    group: np.ndarray  # 0 same class, 1 cross class
    own_snap: np.ndarray
    own_dxy: np.ndarray
    own_power: np.ndarray
    n: int


def _ztp_counts(mu: float, size: int, rng: np.random.Generator) -> np.ndarray:
    # inverse-CDF draw from Poisson(mu) conditioned on >= 1
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    u = rng.random(size)
    p0 = math.exp(-mu)
    v = p0 + u * (-math.expm1(-mu))
    return np.maximum(stats.poisson.ppf(v, mu).astype(np.int64), 1)


def _split_codes(k: TrafficClass, sc: Scenario, count: int, rng) -> np.ndarray:
    if not k.in_phi:
        return np.full(count, 2, dtype=np.int8)
    same = rng.random(count) < 1.0 / sc.network.code_count
    return np.where(same, 1, 2).astype(np.int8)


def sample_active_field(sc: Scenario, n: int, rng: np.random.Generator,
                        interest: int | None = None, center=(0.0, 0.0)) -> ActiveField:
    me = sc.cls(interest)
    h = sc.mc.half_side
    snaps, xys, powers, groups = [], [], [], []
    for k in sc.classes:
        nu = activity_factors(k, sc.network).total
        if nu <= 0 or k.lambda_parent <= 0:
            continue
        mean_clusters = k.lambda_parent * sc.mc.area * (-math.expm1(-nu))
        per_snap = rng.poisson(mean_clusters, n)
        total = int(per_snap.sum())
        cl_snap = np.repeat(np.arange(n), per_snap)
        centers = rng.uniform(-h, h, (total, 2)) + np.asarray(center)
        counts = _ztp_counts(nu, total, rng)
        dev_cluster = np.repeat(np.arange(total), counts)
        xy = centers[dev_cluster] + rng.normal(0.0, k.sigma_scatter, (dev_cluster.size, 2))
        codes = _split_codes(k, sc, dev_cluster.size, rng)
        w = np.where(codes == 1, 1.0, code_weight(k, 2, sc.network))
        snaps.append(cl_snap[dev_cluster])
        xys.append(xy)
        powers.append(w * k.tx_power)
        groups.append(np.full(dev_cluster.size, 0 if k.id == me.id else 1, dtype=np.int8))
    nu_me = activity_factors(me, sc.network).total
    own_counts = rng.poisson(nu_me, n)
    parent_off = rng.normal(0.0, me.sigma_scatter, (n, 2))
    own_snap = np.repeat(np.arange(n), own_counts)
    own_dxy = parent_off[own_snap] + rng.normal(0.0, me.sigma_scatter, (own_snap.size, 2))
    codes = _split_codes(me, sc, own_snap.size, rng)
    own_power = np.where(codes == 1, 1.0, code_weight(me, 2, sc.network)) * me.tx_power

    def cat(parts, dtype=float, shape=(0,)):
        return np.concatenate(parts) if parts else np.zeros(shape, dtype=dtype)

    return ActiveField(cat(snaps, np.int64), cat(xys, float, (0, 2)), cat(powers), cat(groups, np.int8),
                       own_snap, own_dxy, own_power, n)


def _sum_by_snap(idx, values, n):
    return np.bincount(idx, weights=values, minlength=n) if idx.size else np.zeros(n)


COMPONENTS = ("noise_only", "intra_cluster", "same_class", "cross_class")


def _curve_batch(sc: Scenario, interest, z_grid, seed: int, batch: int, size: int):
    rng = batch_rng(seed, STREAM_CURVE, batch)
    ch = sc.channel
    me = sc.cls(interest)
    fld = sample_active_field(sc, size, rng, interest)
    h_other = draw_fading(fld.power.size, ch, rng)
    h_own = draw_fading(fld.own_power.size, ch, rng)
    h0 = draw_fading(size, ch, rng)
    if sc.mc.antithetic and ch.m >= 1:
        half = (size + 1) // 2
        u = rng.random(half)
        u = np.concatenate([u, 1.0 - u])[:size]
        h0 = stats.gamma.ppf(u, ch.m, scale=ch.omega / ch.m)
    g_other = ch.gain(np.hypot(fld.xy[:, 0], fld.xy[:, 1])) if fld.power.size else np.zeros(0)
    contrib = fld.power * h_other * g_other
    i_same = _sum_by_snap(fld.snap[fld.group == 0], contrib[fld.group == 0], size)
    i_cross = _sum_by_snap(fld.snap[fld.group == 1], contrib[fld.group == 1], size)
    noise = noise_power(ch, me)
    gam = ch.gamma_th
    out = {key: np.zeros(len(z_grid)) for key in ("full",) + COMPONENTS}
    for iz, z in enumerate(z_grid):
        dx = fld.own_dxy[:, 0] + z
        d = np.hypot(dx, fld.own_dxy[:, 1])
        i_own = _sum_by_snap(fld.own_snap, fld.own_power * h_own * ch.gain(d), size)
        signal = me.tx_power * h0 * float(ch.gain(z))
        out["full"][iz] = np.count_nonzero(signal >= gam * (noise + i_same + i_cross + i_own))
        out["noise_only"][iz] = np.count_nonzero(signal >= gam * noise)
        out["intra_cluster"][iz] = np.count_nonzero(signal >= gam * i_own)
        out["same_class"][iz] = np.count_nonzero(signal >= gam * i_same)
        out["cross_class"][iz] = np.count_nonzero(signal >= gam * i_cross)
    return out


@dataclass
class CurvePoint:
    z: float
    ps: float
    stderr: float
    components: dict


def _binomial(k: float, n: int) -> tuple[float, float]:
    p = k / n
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n)


def estimate_success_curve(z_grid, sc: Scenario, interest: int | None = None, *,
                           snapshots: int | None = None, seed: int | None = None,
                           workers: int | None = None) -> list[CurvePoint]:
    """Monte Carlo success probability per distance, with component curves.

    The same snapshots serve every ``z`` (common random numbers), so the
    curve is smooth and differences between distances are precise.
    """
    n = sc.mc.snapshots if snapshots is None else snapshots
    if n < 100:
        raise ValueError("at least 100 snapshots are required")
    seed = sc.mc.seed if seed is None else seed
    z_grid = [float(z) for z in z_grid]
    parts = ordered_map(lambda b: _curve_batch(sc, interest, z_grid, seed, b[0], b[1]),
                        _batches(n), workers=workers)
    totals = {key: sum(p[key] for p in parts) for key in parts[0]}
    out = []
    for iz, z in enumerate(z_grid):
        ps, se = _binomial(totals["full"][iz], n)
        comps = {key: _binomial(totals[key][iz], n) for key in COMPONENTS}
        out.append(CurvePoint(z, ps, se, comps))
    return out


def _laplace_batch(sc, interest, s_values, z, part, seed, batch, size):
    rng = batch_rng(seed, STREAM_LAPLACE, batch)
    ch = sc.channel
    fld = sample_active_field(sc, size, rng, interest)
    h_other = draw_fading(fld.power.size, ch, rng)
    h_own = draw_fading(fld.own_power.size, ch, rng)
    total = np.zeros(size)
    if part in ("total", "inter"):
        g = ch.gain(np.hypot(fld.xy[:, 0], fld.xy[:, 1])) if fld.power.size else np.zeros(0)
        total += _sum_by_snap(fld.snap, fld.power * h_other * g, size)
    if part in ("total", "intra"):
        d = np.hypot(fld.own_dxy[:, 0] + z, fld.own_dxy[:, 1])
        total += _sum_by_snap(fld.own_snap, fld.own_power * h_own * ch.gain(d), size)
    vals = np.exp(-np.outer(s_values, total))
    return vals.sum(axis=1), (vals ** 2).sum(axis=1)


def estimate_laplace(s_values, sc: Scenario, interest: int | None = None, z: float = 0.0, *,
                     part: str = "total", snapshots: int | None = None, seed: int | None = None,
                     workers: int | None = None) -> list[tuple[float, float, float]]:
    """Empirical ``E[exp(-s I)]`` with standard errors, for ``part`` in total/inter/intra."""
    if part not in ("total", "inter", "intra"):
        raise ValueError("part must be total, inter or intra")
    n = sc.mc.snapshots if snapshots is None else snapshots
    seed = sc.mc.seed if seed is None else seed
    s_values = np.asarray(s_values, dtype=float)
    parts = ordered_map(lambda b: _laplace_batch(sc, interest, s_values, z, part, seed, b[0], b[1]),
                        _batches(n), workers=workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n
    var = np.maximum(s2 / n - mean ** 2, 0.0)
    se = np.sqrt(var / max(n - 1, 1))
    return [(float(s), float(m), float(e)) for s, m, e in zip(s_values, mean, se)]


def _coverage_batch(sc, interest, seed, batch, size):
    rng = batch_rng(seed, STREAM_COVERAGE, batch)
    ch = sc.channel
    me = sc.cls(interest)
    l_max = sc.network.l_max
    fld = sample_active_field(sc, size, rng, interest)
    h = sc.mc.half_side
    n_ap = rng.poisson(sc.network.lambda_ap * sc.mc.area, size)
    ap_snap = np.repeat(np.arange(size), n_ap)
    ap_xy = rng.uniform(-h, h, (ap_snap.size, 2))
    ap_d = np.hypot(ap_xy[:, 0], ap_xy[:, 1])
    # rank APs by distance inside each snapshot
    order = np.lexsort((ap_d, ap_snap))
    ap_snap, ap_xy, ap_d = ap_snap[order], ap_xy[order], ap_d[order]
    first = np.concatenate([[0], np.cumsum(n_ap)[:-1]])
    rank = np.arange(ap_snap.size) - first[ap_snap]
    success = np.zeros(size, dtype=bool)
    noise = noise_power(ch, me)
    for ell in range(l_max):
        sel = rank == ell
        has = np.zeros(size, dtype=bool)
        has[ap_snap[sel]] = True
        target = np.zeros((size, 2))
        target[ap_snap[sel]] = ap_xy[sel]
        dist = np.full(size, np.inf)
        dist[ap_snap[sel]] = ap_d[sel]
        # independent fading on every link to this AP
        h_other = draw_fading(fld.power.size, ch, rng)
        h_own = draw_fading(fld.own_power.size, ch, rng)
        h0 = draw_fading(size, ch, rng)
        rel = fld.xy - target[fld.snap] if fld.power.size else np.zeros((0, 2))
        i_other = _sum_by_snap(fld.snap, fld.power * h_other * ch.gain(np.hypot(rel[:, 0], rel[:, 1])), size)
        rel_own = fld.own_dxy - target[fld.own_snap]
        i_own = _sum_by_snap(fld.own_snap, fld.own_power * h_own *
                             ch.gain(np.hypot(rel_own[:, 0], rel_own[:, 1])), size)
        with np.errstate(divide="ignore"):
            signal = np.where(has, me.tx_power * h0 * ch.gain(np.where(has, dist, 1.0)), 0.0)
        success |= has & (signal >= ch.gamma_th * (noise + i_other + i_own))
    return int(np.count_nonzero(success))


def estimate_coverage(sc: Scenario, interest: int | None = None, *, snapshots: int | None = None,
                      seed: int | None = None, workers: int | None = None) -> tuple[float, float]:
    """Success rate of a device at a random location towards its ``l_max`` nearest APs."""
    n = sc.mc.snapshots if snapshots is None else snapshots
    seed = sc.mc.seed if seed is None else seed
    if sc.network.lambda_ap == 0:
        return 0.0, 0.0
    hits = ordered_map(lambda b: _coverage_batch(sc, interest, seed, b[0], b[1]), _batches(n),
                       workers=workers)
    return _binomial(sum(hits), n)


# --- lifetime ---------------------------------------------------------------------------------------

@dataclass
class LifetimeResult:
    lifetime: float
    lifetime_stderr: float
    attempts_histogram: np.ndarray  # index j-1: reports that used j rounds
    outage_rate: float
    mean_attempts: float
    runs: int


def simulate_lifetime(sc: Scenario, interest: int | None, p: float, rng: np.random.Generator, *,
                      runs: int = 100, n: int | None = None, tx_power: float | None = None) -> LifetimeResult:
    """Event simulation of one device until its battery is exhausted.

    Reports arrive as a Poisson process of rate ``1/T``.  Each report runs up
    to ``B`` rounds of ``n`` replicas; a round succeeds when at least one
    replica gets through (probability ``1 - (1-p)^n``).  Every round costs the
    listening energy plus the replica transmissions.  The device dies at the
    arrival of the report whose energy it cannot pay.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    k = sc.cls(interest)
    e = sc.energy_of(interest)
    n = k.replicas if n is None else n
    tx_power = k.tx_power if tx_power is None else tx_power
    b = k.max_attempts
    round_cost = e.e_listen + n * (e.eta * tx_power + e.p_circuit) * k.tx_time
    q = 1.0 - (1.0 - p) ** n  # per-round success
    mean_cost = e.e_static + expected_attempts(p, n, b, all_fail=True) * round_cost
    chunk = int(math.ceil(1.2 * e.e0 / mean_cost)) + 64
    lifetimes = np.empty(runs)
    hist = np.zeros(b, dtype=np.int64)
    outages = 0
    reports = 0
    for r in range(runs):
        spent = 0.0
        t = 0.0
        while True:
            if q >= 1.0:
                rounds = np.ones(chunk, dtype=np.int64)
            elif q <= 0.0:
                rounds = np.full(chunk, b + 1, dtype=np.int64)
            else:
                rounds = rng.geometric(q, chunk)
            ok = rounds <= b
            used = np.minimum(rounds, b)
            cost = e.e_static + used * round_cost
            gaps = rng.exponential(k.report_period, chunk)
            cum = spent + np.cumsum(cost)
            dead = np.flatnonzero(cum > e.e0)
            stop = dead[0] if dead.size else chunk
            hist += np.bincount(used[:stop] - 1, minlength=b)[:b]
            outages += int(np.count_nonzero(~ok[:stop]))
            reports += int(stop)
            times = t + np.cumsum(gaps)
            if dead.size:
                lifetimes[r] = times[stop]
                break
            spent = float(cum[-1])
            t = float(times[-1])
    mean_attempts = float(np.dot(np.arange(1, b + 1), hist) / max(reports, 1))
    return LifetimeResult(float(lifetimes.mean()), float(lifetimes.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0,
                          hist, outages / max(reports, 1), mean_attempts, runs)
