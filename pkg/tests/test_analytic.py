import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lpwa_geom import analytic as A
from lpwa_geom.errors import SingularInputError, UnsupportedModelError
from lpwa_geom.model import ChannelModel

from conftest import golden, make_scenario, rel_err

CH4 = ChannelModel(0.0, 1.0, 4.0)


class TestFading:
    def test_pdf_values(self):
        ch = ChannelModel(0.0, 1.0, 4.0)
        assert A.nakagami_pdf(0.0, ch) == 1.0
        assert A.nakagami_pdf(1.0, ch) == pytest.approx(math.exp(-1.0), rel=1e-14)
        assert A.nakagami_pdf(-1.0, ch) == 0.0

    @pytest.mark.parametrize("m,omega", [(2, 1.0), (3, 2.0), (5, 0.5)])
    def test_pdf_normalised(self, m, omega):
        ch = ChannelModel(0.0, 1.0, 4.0, m=m, omega=omega)
        total = integrate.quad(lambda q: A.nakagami_pdf(q, ch), 0.0, np.inf, epsabs=1e-13)[0]
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_laplace_values(self):
        assert A.laplace_fading(0.0, 3.0, CH4) == 1.0
        assert A.laplace_fading(1.0, 1.0, CH4) == 0.5
        ch = ChannelModel(0.0, 1.0, 4.0, m=3, omega=2.0)
        assert A.laplace_fading(1.0, 1.0, ch) == pytest.approx(0.216, rel=1e-12)

    def test_laplace_against_draws(self):
        ch = ChannelModel(0.0, 1.0, 4.0, m=3, omega=2.0)
        h = np.random.default_rng(3).gamma(3, 2.0 / 3, 400_000)
        assert np.mean(np.exp(-h)) == pytest.approx(A.laplace_fading(1.0, 1.0, ch), abs=2e-3)

    def test_laplace_monotone(self):
        s = np.linspace(0, 10, 50)
        v = A.laplace_fading(s, 1.0, CH4)
        assert np.all(np.diff(v) < 0)


class TestHFunctions:
    def test_point_unit(self):
        assert A.h_function_point(1.0, 1.0, CH4) == pytest.approx(math.pi ** 2 / 2, rel=1e-14)
        assert A.h_function_numeric(1.0, 1.0, CH4) == pytest.approx(math.pi ** 2 / 2, rel=1e-6)

    def test_point_scaling_example(self):
        assert A.h_function_point(2.0, 16.0, CH4) == pytest.approx(8 * math.pi ** 2, rel=1e-14)
        assert A.h_function_numeric(2.0, 16.0, CH4) == pytest.approx(8 * math.pi ** 2, rel=1e-6)

    def test_point_trivial(self):
        assert A.h_function_point(0.0, 1.0, CH4) == 0.0
        assert A.h_function_point(3.0, 0.0, CH4) == 0.0
        assert A.h_function_numeric(3.0, 0.0, CH4) == 0.0

    def test_point_rejects(self):
        with pytest.raises(UnsupportedModelError):
            A.h_function_point(1.0, 1.0, ChannelModel(0.0, 1.0, 2.0))
        with pytest.raises(UnsupportedModelError):
            A.h_function_point(1.0, 1.0, ChannelModel(1.0, 1.0, 4.0))

    @given(z=st.floats(1.0, 5e3), xi=st.floats(1e-3, 1e3), c=st.floats(0.1, 10.0), d=st.floats(2.1, 6.0))
    @settings(max_examples=80, deadline=None)
    def test_point_scaling(self, z, xi, c, d):
        ch = ChannelModel(0.0, 1.0, d)
        h = A.h_function_point(z, xi, ch)
        assert A.h_function_point(c * z, xi, ch) == pytest.approx(c * c * h, rel=1e-12)
        assert A.h_function_point(z, c ** d * xi, ch) == pytest.approx(c * c * h, rel=1e-12)

    def test_cluster_trivial(self):
        assert A.h_function_cluster(0.0, 1.0, 100.0, CH4) == 0.0

    def test_cluster_far_is_one(self):
        # a = z^2 / (4 sigma^2 sqrt(xi)) = 20
        z = math.sqrt(20 * 4 * 20.0 ** 2)
        assert A.h_function_cluster(z, 1.0, 20.0, CH4) == pytest.approx(1.0, abs=1e-2)

    def test_cluster_against_numeric(self):
        ref = A.h_function_numeric(300.0, 1.0, CH4, variance=2 * 100.0 ** 2)
        assert A.h_function_cluster(300.0, 1.0, 100.0, CH4) == pytest.approx(ref, rel=1e-4)

    def test_cluster_against_cartesian_quadrature(self):
        # independent 2-D integration over the plane with f* = N(0, 2 sigma^2 I)
        z, xi, sigma = 300.0, 0.7, 100.0
        v = 2 * sigma ** 2

        def f(y, x):
            r4 = (x * x + y * y) ** 2
            return (1.0 / (1.0 + r4 / (xi * z ** 4))) * math.exp(-(x * x + y * y) / (2 * v)) / (2 * math.pi * v)

        lim = 12 * math.sqrt(v)
        ref = 4 * integrate.dblquad(f, 0, lim, 0, lim, epsabs=1e-12, epsrel=1e-10)[0]
        assert A.h_function_cluster(z, xi, sigma, CH4) == pytest.approx(ref, rel=1e-6)

    @given(z=st.floats(20.0, 3e3), xi=st.floats(1e-2, 1e2), sigma=st.floats(20.0, 500.0))
    @settings(max_examples=25, deadline=None)
    def test_cluster_random_against_numeric(self, z, xi, sigma):
        ref = A.h_function_numeric(z, xi, CH4, variance=2 * sigma ** 2)
        assert A.h_function_cluster(z, xi, sigma, CH4) == pytest.approx(ref, rel=1e-4)

    def test_cluster_rejects(self):
        with pytest.raises(UnsupportedModelError):
            A.h_function_cluster(1.0, 1.0, 1.0, ChannelModel(0.0, 1.0, 3.5))

    def test_numeric_general_pathloss(self):
        # alpha1 > 0: check against direct radial quadrature
        ch = ChannelModel(1e3, 2.0, 3.5)
        z, xi = 50.0, 2.0
        gz = float(ch.gain(z))
        ref = 2 * math.pi * integrate.quad(lambda r: float(ch.gain(r)) / (float(ch.gain(r)) + gz / xi) * r,
                                           0, np.inf, limit=400, epsrel=1e-11)[0]
        assert A.h_function_numeric(z, xi, ch) == pytest.approx(ref, rel=1e-6)

    def test_z0(self):
        assert A.z0_threshold(100.0, CH4) == pytest.approx(200.0)


class TestSuccess:
    def test_no_interference_no_noise(self):
        sc = make_scenario(lam=(0.0,), psd=0.0)
        nu = A.activity_factors(sc.cls(), sc.network).nu_hat_diff
        ref = A.h_function_numeric(700.0, 1.0, CH4, variance=2 * 100.0 ** 2)
        assert A.success_prob_at(700.0, sc.with_channel(delta=4.0)) == pytest.approx(math.exp(-nu * ref), rel=1e-9)
        # far from the own cluster every active mate collides
        assert A.success_prob_at(1e6, sc) == pytest.approx(math.exp(-nu), rel=1e-9)
        sc0 = make_scenario(lam=(0.0,), ups=(0.0,), psd=0.0)
        assert A.success_prob_at(700.0, sc0) == 1.0

    def test_noise_only(self):
        sc = make_scenario(lam=(0.0,), ups=(0.0,))
        z = 1500.0
        ch = sc.channel
        expect = math.exp(-ch.noise_psd * 10e3 * ch.gamma_th / (ch.omega * 0.126 * float(ch.gain(z))))
        assert A.success_prob_at(z, sc) == pytest.approx(expect, rel=1e-14)

    def test_rejects_nakagami(self):
        with pytest.raises(UnsupportedModelError):
            A.success_prob_at(100.0, make_scenario(m=2))

    def test_rejects_bad_z(self):
        with pytest.raises(ValueError):
            A.success_prob_at(0.0, make_scenario())

    def test_monotone_in_distance(self, fig1):
        z = np.geomspace(50, 5000, 25)
        ps = [A.success_prob_at(x, fig1) for x in z]
        assert np.all(np.diff(ps) <= 1e-15)

    @pytest.mark.parametrize("change", [
        dict(lam=(6.4,)), dict(ups=(400.0,)), dict(psd=10 ** -19.4),
    ])
    def test_monotone_in_parameters(self, change):
        base = make_scenario()
        worse = make_scenario(**change)
        for z in (200.0, 900.0, 2500.0):
            assert A.success_prob_at(z, worse) <= A.success_prob_at(z, base)

    def test_monotone_in_threshold(self):
        sc = make_scenario()
        hi = sc.with_channel(gamma_th=2.0)
        assert A.success_prob_at(800.0, hi) < A.success_prob_at(800.0, sc)

    def test_own_power_with_fixed_interferers(self, fig1):
        # raise class-1 power while holding class-2 power; same-class power scales too,
        # so only cross-class and noise factors improve
        lo = A.success_components(1500.0, fig1)
        hi = A.success_components(1500.0, fig1.with_class(1, tx_power=0.5))
        assert hi["noise_only"] > lo["noise_only"]
        assert hi["cross_class"] > lo["cross_class"]
        assert hi["same_class"] == pytest.approx(lo["same_class"], rel=1e-12)

    def test_components_multiply(self, fig1):
        c = A.success_components(1000.0, fig1)
        assert A.success_prob_at(1000.0, fig1) == pytest.approx(math.prod(c.values()), rel=1e-14)

    def test_remark1_shortcut(self):
        sc = make_scenario()
        me = A.success_components(5000.0, sc, model=A.SuccessModel(remark1=True))["intra_cluster"]
        exact = A.success_components(5000.0, sc)["intra_cluster"]
        assert me == pytest.approx(exact, rel=1e-4)

    def test_general_delta_numeric_h(self):
        sc = make_scenario(delta=3.5)
        ref = make_scenario(delta=3.5)
        p = A.success_prob_at(600.0, sc)
        assert 0.0 < p < 1.0 and p == A.success_prob_at(600.0, ref)


class TestLaplace:
    def test_zero_s(self, fig1):
        assert A.laplace_inter_cluster(0.0, fig1) == 1.0
        assert A.laplace_intra_cluster(0.0, fig1, None, 500.0) == 1.0
        assert A.laplace_total(0.0, fig1, None, 500.0) == 1.0

    def test_no_interferers(self):
        sc = make_scenario(ups=(0.0,))
        assert A.laplace_inter_cluster(1e13, sc) == 1.0
        assert A.laplace_intra_cluster(1e13, sc, None, 100.0) == 1.0

    def test_product_bound(self, fig1):
        s = A.probe_s(800.0, fig1)
        inter = A.laplace_inter_cluster(s, fig1)
        intra = A.laplace_intra_cluster(s, fig1, None, 800.0)
        tot = A.laplace_total(s, fig1, None, 800.0)
        assert tot == pytest.approx(inter * intra, rel=1e-14)
        assert 0 < tot <= min(inter, intra) <= 1

    def test_log_convex(self, fig1):
        s = A.probe_s(1000.0, fig1) * np.geomspace(0.1, 10.0, 10)
        logs = np.log([A.laplace_total(x, fig1, None, 1000.0) for x in s])
        # convexity of log L in s on an uneven grid: slopes must increase
        slopes = np.diff(logs) / np.diff(s)
        assert np.all(np.diff(slopes) >= -1e-9 * np.max(np.abs(slopes)))

    def test_rejects_square_law(self):
        sc = make_scenario(delta=2.0)
        with pytest.raises(UnsupportedModelError):
            A.laplace_inter_cluster(1.0, sc)

    def test_truncation_radius_converges(self):
        sc = make_scenario()
        s = A.probe_s(1000.0, sc)
        full = A.laplace_inter_cluster(s, sc)
        cut = A.laplace_inter_cluster(s, sc, model=A.SuccessModel(trunc_radius=200e3))
        assert cut == pytest.approx(full, rel=1e-4)
        assert cut >= full

    def test_exact_close_to_theorem1(self, fig1):
        for z in (100.0, 300.0, 700.0, 1500.0, 2000.0):
            assert rel_err(A.success_prob_at(z, fig1), A.success_prob_exact_m1(z, fig1)) <= 0.05

    def test_exact_noise_only(self):
        sc = make_scenario(lam=(0.0,), ups=(0.0,))
        assert A.success_prob_exact(2000.0, sc) == pytest.approx(A.success_prob_at(2000.0, sc), rel=1e-14)

    def test_exact_m1_rejects_m2(self):
        with pytest.raises(UnsupportedModelError):
            A.success_prob_exact_m1(100.0, make_scenario(m=2))


class TestNearestAp:
    def test_first_density(self):
        lam = 5.5e-8
        r = np.linspace(1, 8000, 50)
        expect = 2 * math.pi * lam * r * np.exp(-lam * math.pi * r * r)
        assert np.allclose(A.nearest_ap_pdf(r, 1, lam), expect, rtol=1e-12)
        mode = 1 / math.sqrt(2 * math.pi * lam)
        assert A.nearest_ap_pdf(mode, 1, lam) > A.nearest_ap_pdf(mode * 1.01, 1, lam)
        assert A.nearest_ap_pdf(mode, 1, lam) > A.nearest_ap_pdf(mode * 0.99, 1, lam)

    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_normalised(self, ell):
        lam = 5.5e-8
        total = integrate.quad(lambda r: A.nearest_ap_pdf(r, ell, lam), 0, np.inf, epsabs=1e-13, limit=200)[0]
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_mean(self):
        lam = 5.5e-8
        mean = integrate.quad(lambda r: r * A.nearest_ap_pdf(r, 1, lam), 0, np.inf, epsrel=1e-12)[0]
        assert mean == pytest.approx(1 / (2 * math.sqrt(lam)), rel=1e-9)

    def test_cell_edge(self):
        assert A.cell_edge_distance(1 / math.pi) == 1.0


class TestCoverage:
    def test_constant_success(self, table1):
        assert A.coverage_prob(table1, ps_fn=lambda r: 1.0) == pytest.approx(1.0, abs=1e-12)
        assert A.coverage_prob(table1, ps_fn=lambda r: 0.0) == 0.0

    def test_no_aps(self, table1):
        assert A.coverage_prob(table1.with_network(lambda_ap=0.0)) == 0.0

    def test_more_aps_help(self, table1):
        one = A.coverage_prob(table1)
        two = A.coverage_prob(table1.with_network(l_max=2))
        assert two >= one
        dense = A.coverage_prob(table1.with_network(lambda_ap=2 * 5.5e-8))
        assert dense >= one

    @pytest.mark.slow
    def test_exact_route_close(self, table1):
        a = A.coverage_prob(table1)
        b = A.coverage_prob(table1, model=A.SuccessModel(exact_laplace=True))
        assert abs(a - b) < 0.01

    def test_dispatch(self, table1):
        per_ap = A.success_probability(table1, model=A.SuccessModel(method="theorem1_per_ap"))
        assert per_ap == pytest.approx(A.success_prob_at(A.cell_edge_distance(5.5e-8), table1))
        assert A.success_probability(table1) == pytest.approx(A.coverage_prob(table1))

    def test_per_ap_needs_aps(self, table1):
        with pytest.raises(SingularInputError):
            A.success_probability(table1.with_network(lambda_ap=0.0),
                                  model=A.SuccessModel(method="theorem1_per_ap"))


class TestTheorem3:
    def test_limit_no_interference_no_noise(self):
        sc = make_scenario(lam=(0.0,), psd=0.0, delta=4.0)
        nu = A.activity_factors(sc.cls(), sc.network).nu_hat_diff
        assert A.coverage_prob_theorem3(sc) == pytest.approx(math.exp(-nu), rel=1e-12)

    def test_aux(self):
        sc = make_scenario(delta=4.0)
        aux = A.theorem3_aux(sc)
        assert aux.x1 > 0 and aux.x2 > 0
        assert aux.x3 == pytest.approx(aux.x2 / (2 * math.sqrt(aux.x1)))
        assert aux.d0 > 0 and aux.d1 >= 0

    def test_preconditions(self):
        with pytest.raises(UnsupportedModelError):
            A.coverage_prob_theorem3(make_scenario())
        with pytest.raises(UnsupportedModelError):
            A.coverage_prob_theorem3(make_scenario(delta=4.0, m=2))

    @pytest.mark.parametrize("l_max", [1, 2])
    def test_matches_quadrature(self, l_max):
        sc = make_scenario(delta=4.0, l_max=l_max, lam=(1.0, 2.0), ups=(100.0, 300.0), power=(0.1, 0.3))
        ref = A.coverage_prob(sc, model=A.SuccessModel(remark1=True))
        assert A.coverage_prob_theorem3(sc) == pytest.approx(ref, abs=1e-9)

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            A.SuccessModel(theorem3_variant="guess")


class TestReliabilityFormulas:
    def test_outage(self):
        assert A.outage_prob(1.0, 3, 2) == 0.0
        assert A.outage_prob(0.5, 2, 3) == 0.015625
        assert A.outage_prob(0.0, 4, 4) == 1.0
        with pytest.raises(ValueError):
            A.outage_prob(1.5, 1, 1)

    @given(ps=st.floats(0.01, 0.99), nb=st.integers(1, 20))
    @settings(max_examples=50, deadline=None)
    def test_outage_decreasing(self, ps, nb):
        assert A.outage_prob(ps, nb + 1, 1) < A.outage_prob(ps, nb, 1)

    def test_attempts(self):
        assert A.expected_attempts(1.0, 1, 5) == 1.0
        assert A.expected_attempts(0.5, 1, 2) == 1.0
        assert A.expected_attempts(0.0, 1, 3) == 0.0
        assert A.expected_attempts(0.0, 1, 3, all_fail=True) == 3.0
        assert A.expected_attempts(0.5, 1, 2, all_fail=True) == 1.5

    @given(ps=st.floats(0.0, 1.0), n=st.integers(1, 8), b=st.integers(1, 8))
    @settings(max_examples=80, deadline=None)
    def test_attempt_distribution(self, ps, n, b):
        succ, none = A.attempt_distribution(ps, n, b)
        assert succ.sum() + none == pytest.approx(1.0, abs=1e-12)
        beta = A.expected_attempts(ps, n, b)
        assert 0.0 <= beta <= b
        assert A.expected_attempts(ps, n, b, all_fail=True) == pytest.approx(beta + b * none, abs=1e-12)

    def test_lifetime_hand_value(self, table1):
        life = A.battery_lifetime(table1, 1, 1.0)
        assert life == pytest.approx(1000 * 300 / 0.3073, rel=1e-12)
        assert life / 86400 == pytest.approx(11.3, abs=0.05)

    def test_lifetime_linear_in_battery(self, table1):
        a = A.battery_lifetime(table1, 1, 0.7)
        b = A.battery_lifetime(table1.with_energy(1, e0=2000.0), 1, 0.7)
        assert b == pytest.approx(2 * a, rel=1e-14)

    @pytest.mark.parametrize("field", ["e_static", "e_listen", "p_circuit"])
    def test_lifetime_decreasing_in_costs(self, table1, field):
        base = A.battery_lifetime(table1, 1, 0.8)
        more = A.battery_lifetime(table1.with_energy(1, **{field: getattr(table1.energy_of(1), field) * 2}), 1, 0.8)
        assert more < base

    def test_lifetime_zero_energy(self, table1):
        sc = table1.with_energy(1, e_static=0.0, e_listen=0.0, p_circuit=0.0)
        with pytest.raises(ZeroDivisionError):
            A.battery_lifetime(sc, 1, 0.0)

    def test_reliability(self, table1):
        ps = A.success_probability(table1)
        assert A.reliability(table1, ps=ps) == pytest.approx(ps)


class TestFiniteDifference:
    def test_m2_against_monte_carlo(self):
        from lpwa_geom.simulator import estimate_success_curve

        sc = make_scenario(m=2, snapshots=40000)
        z = 1200.0
        fd = A.success_prob_exact(z, sc)
        mc = estimate_success_curve([z], sc)[0]
        assert abs(fd - mc.ps) < max(4 * mc.stderr, 5e-3)
