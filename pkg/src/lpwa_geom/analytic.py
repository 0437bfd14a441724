"""Closed forms and quadratures for reliability and battery lifetime.

The geometry is always the same: an AP at the origin, a probe device of the
class of interest at distance ``z``, and interferers drawn from one Poisson
cluster process per traffic class.  Every two-dimensional integral over the
plane is reduced to radial integrals by isotropy:

* the cluster average of a radial function ``f(|x|)`` over a normal scatter
  centred at distance ``rho`` is a Rice-kernel integral
  ``int f(r) (r/s^2) exp(-(r^2+rho^2)/2s^2) I0(r rho/s^2) dr``;
* everything else is ``2 pi int f(r) r dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import i0e

from .errors import SingularInputError, UnsupportedModelError
from .model import (
    ChannelModel,
    Scenario,
    activity_factors,
    code_weight,
    interferer_terms,
    noise_power,
)
from .special import aux_f, quad, quad_split, quartic_laplace_moment, scaled_tail_moment

METHODS = ("theorem1_per_ap", "numerical_eq12", "theorem3", "simplified_eq19")
THEOREM3_VARIANTS = ("derived", "printed", "printed_exponent_fixed", "printed_limit")

# Normal kernels are integrated over +-KERNEL_SPAN standard deviations.
KERNEL_SPAN = 10.0


@dataclass(frozen=True)
class SuccessModel:
    """Selects how the per-transmission success probability is evaluated.

    ``theorem1_per_ap`` evaluates the per-AP approximation at the cell-edge
    distance ``sqrt(1/(pi lambda_a))``; ``numerical_eq12`` averages it over the
    distance to the nearest ``l_max`` APs; ``theorem3`` uses the error-function
    closed form of that average and ``simplified_eq19`` the square-law
    expression the optimiser is built on.
    """

    method: str = "numerical_eq12"
    quad_tol: float = 1e-8
    trunc_radius: float | None = None
    remark1: bool = False
    exact_laplace: bool = False
    theorem3_variant: str = "derived"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown success model {self.method!r}; choose from {METHODS}")
        if not 0.0 < self.quad_tol <= 1e-2:
            raise ValueError("quad_tol must lie in (0, 1e-2]")
        if self.trunc_radius is not None and self.trunc_radius <= 0:
            raise ValueError("trunc_radius must be positive")
        if self.theorem3_variant not in THEOREM3_VARIANTS:
            raise ValueError(f"unknown closed-form coverage variant {self.theorem3_variant!r}")

    def with_(self, **changes) -> "SuccessModel":
        return replace(self, **changes)


DEFAULT_MODEL = SuccessModel()


@dataclass(frozen=True)
class Theorem3Aux:
    x0: float
    x1: float
    x2: float
    x3: float
    d0: float
    d1: float


def require_convergent(ch: ChannelModel) -> None:
    if ch.delta <= 2.0:
        raise UnsupportedModelError("interference integrals diverge for pathloss exponent <= 2")


# --- fading ------------------------------------------------------------------------

def nakagami_pdf(q, ch: ChannelModel):
    """Density of the Nakagami-m power fading coefficient."""
    q = np.asarray(q, dtype=float)
    m, om = ch.m, ch.omega
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = m * math.log(m / om) + (m - 1) * np.log(q) - m * q / om - math.lgamma(m)
        out = np.exp(logp)
    if m == 1:
        out = np.where(q >= 0, (1.0 / om) * np.exp(-q / om), 0.0)
    out = np.where(q < 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def laplace_fading(s, scale, ch: ChannelModel):
    """``E[exp(-s * scale * h)] = (1 + omega s scale / m)^-m``."""
    x = np.asarray(s, dtype=float) * np.asarray(scale, dtype=float)
    out = (1.0 + ch.omega * x / ch.m) ** (-ch.m)
    return float(out) if np.ndim(out) == 0 else out


def probe_s(z: float, sc: Scenario, interest: int | None = None) -> float:
    """Laplace argument ``gamma m / (omega P_i g(z))`` for a probe at distance ``z``."""
    ch = sc.channel
    k = sc.cls(interest)
    return ch.gamma_th * ch.m * float(ch.inverse_gain(z)) / (ch.omega * k.tx_power)


def _one_minus_u(r: float, c: float, ch: ChannelModel) -> float:
    # 1 - (1 + c g(r))^-m, stable at r=0 where g is infinite for a pure power law
    inv = ch.alpha1 + ch.alpha2 * r ** ch.delta
    if inv == 0.0:
        return 1.0
    x = c / inv
    return -math.expm1(-ch.m * math.log1p(x))


def _rice_kernel(r: float, rho: float, sigma: float) -> float:
    s2 = sigma * sigma
    return (r / s2) * math.exp(-(r - rho) ** 2 / (2.0 * s2)) * float(i0e(r * rho / s2))


def _transition_radius(c: float, ch: ChannelModel) -> float:
    # radius where c g(r) = 1
    if c <= ch.alpha1:
        return 0.0
    return ((c - ch.alpha1) / ch.alpha2) ** (1.0 / ch.delta)


def _cluster_average(groups, rho: float, sigma: float, ch: ChannelModel, tol: float) -> float:
    """``sum_j nu_j * E[1 - u_j(|rho + x|)]`` for a normal scatter ``x``."""
    lo = max(0.0, rho - KERNEL_SPAN * sigma)
    hi = rho + KERNEL_SPAN * sigma
    breaks = [lo]
    for c, _ in groups:
        rt = _transition_radius(c, ch)
        if lo < rt < hi:
            breaks.append(rt)
    if lo < rho < hi:
        breaks.append(rho)
    breaks = sorted(set(breaks)) + [hi]

    def integrand(r):
        acc = 0.0
        for c, nu in groups:
            acc += nu * _one_minus_u(r, c, ch)
        return acc * _rice_kernel(r, rho, sigma)

    return quad_split(integrand, breaks, rel_tol=tol, abs_tol=1e-300)


def _groups_by_class(s: float, sc: Scenario):
    """Map class id -> list of ``(c, nu_hat)`` with ``c = omega s Q P / m``."""
    ch = sc.channel
    out: dict[int, list[tuple[float, float]]] = {}
    for k, j, w, nu in interferer_terms(sc):
        if w == 0.0:
            continue
        c = ch.omega * s * w * k.tx_power / ch.m
        if c > 0:
            out.setdefault(k.id, []).append((c, nu))
    return out


# --- Laplace functionals ----------------------------------------------------------------

def laplace_inter_cluster_exponent(s: float, sc: Scenario, *, class_ids=None,
                                   model: SuccessModel = DEFAULT_MODEL) -> float:
    """Minus the log of the inter-cluster Laplace functional (per-class subset optional)."""
    require_convergent(sc.channel)
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 0.0
    ch = sc.channel
    tol = model.quad_tol
    total = 0.0
    for cid, groups in _groups_by_class(s, sc).items():
        if class_ids is not None and cid not in class_ids:
            continue
        k = sc.cls(cid)
        if k.lambda_parent == 0:
            continue
        sigma = k.sigma_scatter
        r_t = max(_transition_radius(c, ch) for c, _ in groups)

        def outer(rho, groups=groups, sigma=sigma):
            psi = _cluster_average(groups, rho, sigma, ch, tol)
            return -math.expm1(-psi) * rho

        split = r_t + 2.0 * KERNEL_SPAN * sigma
        upper = math.inf if model.trunc_radius is None else model.trunc_radius
        breaks = [0.0]
        for b in (max(r_t - KERNEL_SPAN * sigma, 0.0), r_t, split):
            if breaks[-1] < b < upper:
                breaks.append(b)
        breaks.append(upper)
        integral = quad_split(outer, breaks, rel_tol=tol, abs_tol=0.0)
        total += 2.0 * math.pi * k.lambda_parent * integral
    return total


def laplace_inter_cluster(s: float, sc: Scenario, interest: int | None = None, *,
                          model: SuccessModel = DEFAULT_MODEL) -> float:
    """Laplace functional of the interference from all other clusters.

    ``interest`` only fixes the frame of reference; the value depends on the
    interferer population alone.
    """
    return math.exp(-laplace_inter_cluster_exponent(s, sc, model=model))


def laplace_intra_cluster(s: float, sc: Scenario, interest: int | None = None, z: float = 0.0,
                          *, model: SuccessModel = DEFAULT_MODEL) -> float:
    """Laplace functional of the interference from the probe's own cluster.

    The probe sits at distance ``z`` from the AP, so its parent is normal
    around the probe and the cluster mates are normal around the parent.
    """
    require_convergent(sc.channel)
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 1.0
    ch = sc.channel
    k = sc.cls(interest)
    af = activity_factors(k, sc.network)
    groups = []
    for j in (1, 2):
        w = code_weight(k, j, sc.network)
        if af[j] > 0 and w > 0:
            groups.append((ch.omega * s * w * k.tx_power / ch.m, af[j]))
    if not groups:
        return 1.0
    sigma = k.sigma_scatter
    tol = model.quad_tol

    def integrand(rho):
        psi = _cluster_average(groups, rho, sigma, ch, tol)
        return math.exp(-psi) * _rice_kernel(rho, z, sigma)

    lo = max(0.0, z - KERNEL_SPAN * sigma)
    hi = z + KERNEL_SPAN * sigma
    breaks = sorted({lo, min(max(z, lo), hi), hi})
    return quad_split(integrand, breaks, rel_tol=tol, abs_tol=1e-300)


def laplace_total(s: float, sc: Scenario, interest: int | None = None, z: float = 0.0, *,
                  model: SuccessModel = DEFAULT_MODEL) -> float:
    """Product of the inter- and intra-cluster functionals."""
    return (laplace_inter_cluster(s, sc, interest, model=model)
            * laplace_intra_cluster(s, sc, interest, z, model=model))


# --- H functions -----------------------------------------------------------------------------

def h_function_point(z: float, xi: float, ch: ChannelModel) -> float:
    """Closed form of H(z, 1, xi) for a pure power-law path loss."""
    if ch.delta <= 2:
        raise UnsupportedModelError("H(z, 1, xi) diverges for delta <= 2")
    if ch.alpha1 != 0.0:
        raise UnsupportedModelError("closed form needs a pure power law (alpha1 = 0)")
    if z < 0 or xi < 0:
        raise ValueError("z and xi must be non-negative")
    d = ch.delta
    return z * z * xi ** (2.0 / d) * 2.0 * math.pi ** 2 / (math.sin(2.0 * math.pi / d) * d)


def h_function_cluster(z: float, xi: float, sigma: float, ch: ChannelModel) -> float:
    """Closed form of H(z, f*, xi) for ``g ~ r^-4`` and a normal scatter.

    ``a [ci(a) sin(a) - si(a) cos(a)]`` with ``a = z^2 sqrt(xi) / (4 sigma^2)``, so that
    H grows like ``sqrt(xi)`` exactly as the point-source form does.
    """
    if ch.delta != 4 or ch.alpha1 != 0.0:
        raise UnsupportedModelError("cluster closed form needs g(x) = alpha |x|^-4")
    if z < 0 or sigma <= 0:
        raise ValueError("z must be >= 0 and sigma > 0")
    if xi <= 0:
        raise ValueError("xi must be positive")
    if z == 0:
        return 0.0
    a = z * z * math.sqrt(xi) / (4.0 * sigma * sigma)
    return a * aux_f(a)


def h_function_numeric(z: float, xi: float, ch: ChannelModel, variance: float | None = None,
                       tol: float = 1e-10) -> float:
    """Quadrature of ``int g(x)/(g(x) + g(z)/xi) f*(x) dx``.

    ``variance=None`` takes ``f* = 1``; otherwise ``f*`` is a centred normal
    with the given per-axis variance.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if xi == 0 or z == 0 and ch.alpha1 == 0 and variance is not None:
        # g(z) is infinite: the integrand vanishes almost everywhere
        return 0.0 if xi == 0 or ch.alpha1 == 0 else _h_numeric(z, xi, ch, variance, tol)
    return _h_numeric(z, xi, ch, variance, tol)


def _h_numeric(z, xi, ch, variance, tol):
    lz = float(ch.inverse_gain(z))
    target = xi * lz  # L(r) = target at the transition radius
    r_t = ((target - ch.alpha1) / ch.alpha2) ** (1.0 / ch.delta) if target > ch.alpha1 else 0.0
    if variance is None:
        if ch.delta <= 2:
            raise UnsupportedModelError("H(z, 1, xi) diverges for delta <= 2")

        def integrand(r):
            return r / (1.0 + float(ch.inverse_gain(r)) / target)

        # the tail decays like r^(1-delta), slowly when delta is near 2; in u = log r
        # it decays exponentially and stays finite in log form
        log_a1 = math.log(ch.alpha1) if ch.alpha1 > 0 else -math.inf
        log_a2, log_t = math.log(ch.alpha2), math.log(target)

        def tail(u):
            log_l = np.logaddexp(log_a1, log_a2 + ch.delta * u)
            return math.exp(2.0 * u - np.logaddexp(0.0, log_l - log_t))

        r_tail = max(10.0 * r_t, 1.0)
        breaks = [0.0] + ([r_t] if r_t > 0 else []) + [r_tail]
        head = quad_split(integrand, sorted(set(breaks)), rel_tol=tol)
        return 2.0 * math.pi * (head + quad(tail, math.log(r_tail), math.inf, rel_tol=tol))

    two_v = 2.0 * variance

    def integrand_t(t):
        r = math.sqrt(two_v * t)
        return math.exp(-t) / (1.0 + float(ch.inverse_gain(r)) / target)

    t_t = r_t * r_t / two_v
    breaks = [0.0]
    # geometric breakpoints follow the t^(-delta/2) decay when t_t is small
    b = t_t / 4.0
    while 0.0 < b < 60.0:
        breaks.append(b)
        b *= 4.0
    breaks += [60.0, 800.0]
    return quad_split(integrand_t, sorted(set(breaks)), rel_tol=tol, abs_tol=1e-300)


def z0_threshold(sigma: float, ch: ChannelModel) -> float:
    """Distance beyond which the cluster H-function is close to one."""
    return 2.0 * sigma * ch.omega ** 0.25 / ch.gamma_th ** 0.25


def _h_point_any(z, xi, ch, tol):
    if xi == 0:
        return 0.0
    if ch.alpha1 == 0.0:
        return h_function_point(z, xi, ch)
    return h_function_numeric(z, xi, ch, None, tol)


def _h_cluster_any(z, xi, sigma, ch, tol, remark1=False):
    if xi == 0:
        return 0.0
    if remark1:
        return 1.0
    if z == 0:
        return 0.0
    if ch.delta == 4 and ch.alpha1 == 0.0:
        return h_function_cluster(z, xi, sigma, ch)
    return h_function_numeric(z, xi, ch, 2.0 * sigma * sigma, tol)


# --- success probability ------------------------------------------------------------------

def noise_factor(z: float, sc: Scenario, interest: int | None = None) -> float:
    ch = sc.channel
    k = sc.cls(interest)
    n_pow = noise_power(ch, k)
    if n_pow == 0:
        return 1.0
    return math.exp(-n_pow * ch.gamma_th * float(ch.inverse_gain(z)) / (ch.omega * k.tx_power))


def success_components(z: float, sc: Scenario, interest: int | None = None, *,
                       model: SuccessModel = DEFAULT_MODEL) -> dict[str, float]:
    """Per-impairment factors of the per-AP success approximation.

    Keys: ``noise_only``, ``intra_cluster``, ``same_class`` (other clusters of
    the class of interest) and ``cross_class`` (all other classes).  Their
    product is the success probability.
    """
    ch = sc.channel
    if ch.m != 1:
        raise UnsupportedModelError(
            "the per-AP closed form needs Rayleigh fading (m = 1); use the Monte Carlo "
            "estimator or success_prob_exact for m > 1")
    require_convergent(ch)
    if z <= 0:
        raise ValueError("z must be positive")
    me = sc.cls(interest)
    tol = model.quad_tol
    same = 0.0
    cross = 0.0
    for k, j, w, nu in interferer_terms(sc):
        if k.lambda_parent == 0:
            continue
        xi = w * k.tx_power * ch.gamma_th / (ch.omega * me.tx_power)
        e = k.lambda_parent * nu * _h_point_any(z, xi, ch, tol)
        if k.id == me.id:
            same += e
        else:
            cross += e
    af = activity_factors(me, sc.network)
    intra = 0.0
    for j in (1, 2):
        if af[j] > 0:
            xi = code_weight(me, j, sc.network) * ch.gamma_th / ch.omega
            intra += af[j] * _h_cluster_any(z, xi, me.sigma_scatter, ch, tol, model.remark1)
    return {
        "noise_only": noise_factor(z, sc, interest),
        "intra_cluster": math.exp(-intra),
        "same_class": math.exp(-same),
        "cross_class": math.exp(-cross),
    }


def success_prob_at(z: float, sc: Scenario, interest: int | None = None, *,
                    model: SuccessModel = DEFAULT_MODEL) -> float:
    """Per-AP success probability of a class-``interest`` device at distance ``z`` (m = 1)."""
    comp = success_components(z, sc, interest, model=model)
    return comp["noise_only"] * comp["intra_cluster"] * comp["same_class"] * comp["cross_class"]


def success_prob_exact_m1(z: float, sc: Scenario, interest: int | None = None, *,
                          model: SuccessModel = DEFAULT_MODEL) -> float:
    """Rayleigh success probability from the full Laplace functionals."""
    if sc.channel.m != 1:
        raise UnsupportedModelError("success_prob_exact_m1 requires m = 1")
    return success_prob_exact(z, sc, interest, model=model)


def success_prob_exact(z: float, sc: Scenario, interest: int | None = None, *,
                       model: SuccessModel = DEFAULT_MODEL, fd_step: float = 1e-4) -> float:
    """Success probability for integer Nakagami m.

    For m = 1 this is ``L_I(s) exp(-s N)`` and as accurate as the quadrature.
    For m > 1 the derivatives ``d^v/ds^v [L_I(s) exp(-s N)]`` are taken by
    Richardson-extrapolated central differences (step ``fd_step * s``); treat
    those values as low accuracy (about 1e-3).
    """
    ch = sc.channel
    s = probe_s(z, sc, interest)
    n_pow = noise_power(ch, sc.cls(interest))

    def F(t):
        return laplace_total(t, sc, interest, z, model=model) * math.exp(-t * n_pow)

    if ch.m == 1:
        return F(s)
    fd_model = model.with_(quad_tol=min(model.quad_tol, 1e-11))

    def Ffd(t):
        return laplace_total(t, sc, interest, z, model=fd_model) * math.exp(-t * n_pow)

    total = Ffd(s)
    for nu in range(1, ch.m):
        d = _richardson_derivative(Ffd, s, nu, fd_step * s)
        total += (-s) ** nu / math.factorial(nu) * d
    return min(max(total, 0.0), 1.0)


def _central_derivative(f: Callable[[float], float], x: float, order: int, h: float) -> float:
    acc = 0.0
    for i in range(order + 1):
        acc += (-1) ** i * math.comb(order, i) * f(x + (order / 2.0 - i) * h)
    return acc / h ** order


def _richardson_derivative(f, x, order, h):
    d1 = _central_derivative(f, x, order, h)
    d2 = _central_derivative(f, x, order, h / 2.0)
    return (4.0 * d2 - d1) / 3.0


# --- multi-AP coverage -----------------------------------------------------------------------

def nearest_ap_pdf(r, ell: int, lambda_ap: float):
    """Density of the distance to the ``ell``-th nearest AP of a PPP."""
    r = np.asarray(r, dtype=float)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        u = lambda_ap * math.pi * r * r
        logp = -u + ell * np.log(u) + math.log(2.0) - np.log(r) - math.lgamma(ell)
        out = np.where(r > 0, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def cell_edge_distance(lambda_ap: float) -> float:
    """Equivalent cell-edge distance ``sqrt(1/(pi lambda_a))``."""
    return math.sqrt(1.0 / (math.pi * lambda_ap))


def _ap_average(ps_of_r: Callable[[float], float], ell: int, lambda_ap: float, tol: float,
                extra_u=()) -> float:
    """``int p(r) P_{d_ell}(r) dr`` written in ``u = lambda pi r^2``."""
    scale = lambda_ap * math.pi
    log_norm = math.lgamma(ell)

    def integrand(u):
        if u <= 0:
            return 0.0
        w = math.exp((ell - 1) * math.log(u) - u - log_norm)
        return ps_of_r(math.sqrt(u / scale)) * w

    upper = ell + 40.0 * math.sqrt(ell) + 40.0
    breaks = {0.0, max(ell - 1.0, 0.5), upper}
    for b in extra_u:
        if 0.0 < b < upper:
            breaks.add(b)
    return quad_split(integrand, sorted(breaks), rel_tol=tol, abs_tol=1e-14)


def coverage_prob(sc: Scenario, interest: int | None = None, *, model: SuccessModel = DEFAULT_MODEL,
                  ps_fn: Callable[[float], float] | None = None) -> float:
    """Average success probability from a random point over ``l_max`` nearest APs."""
    lam = sc.network.lambda_ap
    if lam == 0:
        return 0.0
    if ps_fn is None:
        if model.exact_laplace:
            def ps_fn(r):
                return success_prob_exact(r, sc, interest, model=model) if r > 0 else 1.0
        else:
            def ps_fn(r):
                return success_prob_at(r, sc, interest, model=model) if r > 0 else _ps_at_zero(sc, interest, model)
    k = sc.cls(interest)
    sig = k.sigma_scatter
    extra = [lam * math.pi * (f * sig) ** 2 for f in (1.0, 3.0, 10.0)]
    miss = 1.0
    for ell in range(1, sc.network.l_max + 1):
        hit = _ap_average(ps_fn, ell, lam, model.quad_tol, extra)
        miss *= 1.0 - hit
    return 1.0 - miss


def _ps_at_zero(sc, interest, model):
    # z -> 0 limit: no noise penalty, no other-cluster penalty, H(0, f*) = 0 unless the
    # far-field cluster shortcut is on
    if not model.remark1:
        return 1.0
    me = sc.cls(interest)
    af = activity_factors(me, sc.network)
    return math.exp(-sum(af[j] for j in (1, 2) if code_weight(me, j, sc.network) > 0))


# --- closed-form coverage ------------------------------------------------------------------

def _remark1_intra_exponent(sc: Scenario, interest: int | None) -> float:
    me = sc.cls(interest)
    af = activity_factors(me, sc.network)
    return sum(af[j] for j in (1, 2) if af[j] > 0 and code_weight(me, j, sc.network) > 0)


def theorem3_aux(sc: Scenario, interest: int | None = None, ell: int = 1) -> Theorem3Aux:
    """Auxiliary variables of the closed-form coverage (``g = alpha r^-4``, m = 1)."""
    ch = sc.channel
    if ch.m != 1 or ch.delta != 4 or ch.alpha1 != 0.0:
        raise UnsupportedModelError("closed-form coverage needs m = 1 and g(x) = alpha |x|^-4")
    me = sc.cls(interest)
    lam_pi = sc.network.lambda_ap * math.pi
    x0 = lam_pi ** ell / math.factorial(ell - 1) * math.exp(-_remark1_intra_exponent(sc, interest))
    x1 = noise_power(ch, me) * ch.gamma_th * ch.alpha2 / (ch.omega * me.tx_power)
    x2 = lam_pi
    for k, j, w, nu in interferer_terms(sc):
        x2 += (k.lambda_parent * nu * math.sqrt(ch.gamma_th * w * k.tx_power / (ch.omega * me.tx_power))
               * math.pi ** 2 / 2.0 / math.sin(math.pi / 2.0))
    x3 = x2 / (2.0 * math.sqrt(x1)) if x1 > 0 else math.inf
    from .optimizer import aux_d  # circular at import time only

    d0, d1 = aux_d(sc, interest)
    return Theorem3Aux(x0, x1, x2, x3, d0, d1)


def _theorem3_term(aux: Theorem3Aux, ell: int, variant: str) -> float:
    if variant == "derived":
        return aux.x0 * quartic_laplace_moment(ell, aux.x1, aux.x2)
    if aux.x1 == 0:
        raise UnsupportedModelError("printed variants are undefined without noise (X1 = 0)")
    pref = aux.x0 / math.sqrt(aux.x1 ** (ell - 1))
    if variant == "printed_exponent_fixed":
        return pref * scaled_tail_moment(aux.x3, ell)
    log_e = aux.x2 ** 2 / (4.0 * aux.x1 ** 2)
    if variant == "printed":
        expo = log_e - aux.x3 ** 2
        if expo > 700.0:
            return math.inf
        return pref * math.exp(expo) * scaled_tail_moment(aux.x3, ell)
    # printed_limit: lower integration limit X2^2/(2 X1) instead of X3
    lower = aux.x2 ** 2 / (2.0 * aux.x1)

    def integrand(v):
        t = lower + v
        return (t - aux.x3) ** (ell - 1) * math.exp(min(log_e - t * t, 700.0))

    if log_e - lower * lower > 700.0:
        return math.inf
    return pref * quad(integrand, 0.0, math.inf, rel_tol=1e-10)


def coverage_prob_theorem3(sc: Scenario, interest: int | None = None, *,
                           variant: str = "derived") -> float:
    """Error-function closed form of the multi-AP coverage.

    ``variant="derived"`` is the completed-square evaluation that agrees with
    the quadrature; the other variants reproduce alternative readings of the
    printed expression and are kept for the reconciliation report.
    """
    l_max = sc.network.l_max
    miss = 1.0
    for ell in range(1, l_max + 1):
        aux = theorem3_aux(sc, interest, ell)
        miss *= 1.0 - _theorem3_term(aux, ell, variant)
    return 1.0 - miss


# --- reliability and lifetime ----------------------------------------------------------------

def outage_prob(ps: float, n: int, b: int) -> float:
    """All ``n * b`` replica transmissions of a report fail."""
    if not 0.0 <= ps <= 1.0:
        raise ValueError("ps must lie in [0, 1]")
    if n < 1 or b < 1:
        raise ValueError("n and b must be >= 1")
    return (1.0 - ps) ** (n * b)


def attempt_distribution(ps: float, n: int, b: int) -> tuple[np.ndarray, float]:
    """``(P(success at round j) for j = 1..b, P(all rounds fail))``."""
    fail = (1.0 - ps) ** n
    j = np.arange(1, b + 1)
    return (1.0 - fail) * fail ** (j - 1), fail ** b


def expected_attempts(ps: float, n: int, b: int, *, all_fail: bool = False) -> float:
    """Mean number of rounds per report.

    The default sums only over reports that eventually succeed; with
    ``all_fail=True`` the ``b`` rounds spent on a report in outage are added.
    """
    if not 0.0 <= ps <= 1.0:
        raise ValueError("ps must lie in [0, 1]")
    succ, none = attempt_distribution(ps, n, b)
    beta = float(np.sum(np.arange(1, b + 1) * succ))
    if all_fail:
        beta += b * none
    return beta


def report_energy(sc: Scenario, interest: int | None, beta: float, *, n: int | None = None,
                  p: float | None = None) -> float:
    """Energy per reporting period: static + listening + transmissions."""
    k = sc.cls(interest)
    e = sc.energy_of(interest)
    n = k.replicas if n is None else n
    p = k.tx_power if p is None else p
    return e.e_static + beta * e.e_listen + beta * n * (e.eta * p + e.p_circuit) * k.tx_time


def battery_lifetime(sc: Scenario, interest: int | None, ps: float, *, all_fail: bool = False,
                     n: int | None = None, p: float | None = None) -> float:
    """Expected battery lifetime in seconds."""
    k = sc.cls(interest)
    n = k.replicas if n is None else n
    beta = expected_attempts(ps, n, k.max_attempts, all_fail=all_fail)
    denom = report_energy(sc, interest, beta, n=n, p=p)
    if denom <= 0:
        raise ZeroDivisionError("energy per reporting period is zero")
    return sc.energy_of(interest).e0 * k.report_period / denom


# --- dispatcher --------------------------------------------------------------------------------

def success_probability(sc: Scenario, interest: int | None = None, *,
                        model: SuccessModel = DEFAULT_MODEL) -> float:
    """Per-transmission success probability of the class of interest under ``model``."""
    if model.method == "theorem1_per_ap":
        if sc.network.lambda_ap <= 0:
            raise SingularInputError("cell-edge distance needs lambda_ap > 0")
        return success_prob_at(cell_edge_distance(sc.network.lambda_ap), sc, interest, model=model)
    if model.method == "numerical_eq12":
        return coverage_prob(sc, interest, model=model)
    if model.method == "theorem3":
        return coverage_prob_theorem3(sc, interest, variant=model.theorem3_variant)
    from .optimizer import ps_simplified

    return ps_simplified(sc.cls(interest).tx_power, sc, interest)


def reliability(sc: Scenario, interest: int | None = None, *, model: SuccessModel = DEFAULT_MODEL,
                ps: float | None = None) -> float:
    """Probability that a report is delivered within ``max_attempts`` rounds."""
    k = sc.cls(interest)
    if ps is None:
        ps = success_probability(sc, interest, model=model)
    return 1.0 - outage_prob(ps, k.replicas, k.max_attempts)
