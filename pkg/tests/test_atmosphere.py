import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from cvqkd_sat.atmosphere import (
    BeamStats,
    LinkGeometry,
    TurbulenceProfile,
    _lambertw_exp,
    beam_moments,
    beam_stats,
    cn2,
    dump_beam_samples_csv,
    mean_attenuation_db,
    rytov_variance,
    sample_beam,
    sample_beams,
    scintillation_index,
    transmissivity,
)

PAPER_GEOM = LinkGeometry(
    altitude=500e3,
    ground_altitude=0.0,
    zenith=0.0,
    wavelength=795e-9,
    beam_waist=0.06,
    aperture_radius=1.0,
)
PAPER_PROFILE = TurbulenceProfile(wind_speed=6.0, cn2_ground=9.6e-14)


class TestCn2:
    def test_ground_level(self):
        assert cn2(0.0, PAPER_PROFILE) == pytest.approx(9.627e-14, rel=1e-12)

    def test_decays_to_zero(self):
        assert cn2(3e5, PAPER_PROFILE) < 1e-25

    def test_positive_and_continuous(self):
        hs = np.linspace(0.0, 1e5, 100001)
        vals = cn2(hs, PAPER_PROFILE)
        assert np.all(vals > 0.0)
        # steepest log-slope is the 100 m ground layer: 1/100 per meter
        assert np.max(np.abs(np.diff(np.log(vals)))) < 2.0 * (hs[1] - hs[0]) / 100.0


class TestRytovVariance:
    def test_single_exponential_closed_form(self):
        # v, A ~ 0 leaves Cn2 = 2.7e-16 exp(-h/1500); the integral is an
        # incomplete gamma function
        profile = TurbulenceProfile(wind_speed=1e-12, cn2_ground=1e-40)
        got = rytov_variance(PAPER_GEOM, profile)
        b, d = 2.7e-16, 1500.0
        integral = b * d ** (11.0 / 6.0) * float(
            special.gammainc(11.0 / 6.0, PAPER_GEOM.altitude / d) * special.gamma(11.0 / 6.0)
        )
        expected = 2.25 * PAPER_GEOM.wavenumber ** (7.0 / 6.0) * integral
        assert got == pytest.approx(expected, rel=1e-6)

    def test_full_profile_closed_form(self):
        # with h0 = 0 all three Hufnagel-Valley terms reduce to incomplete
        # gamma integrals; mpmath keeps the oracle independent
        geom, prof = PAPER_GEOM, PAPER_PROFILE
        H = mpmath.mpf(geom.altitude)
        p = mpmath.mpf(5) / 6

        def gamma_term(coeff, power, scale):
            return coeff * scale ** (power + 1) * mpmath.gammainc(power + 1, 0, H / scale)

        integral = (
            gamma_term(mpmath.mpf("0.00594") * (prof.wind_speed / 27.0) ** 2 * mpmath.mpf(10) ** -50, 10 + p, 1000)
            + gamma_term(mpmath.mpf("2.7e-16"), p, 1500)
            + gamma_term(mpmath.mpf(prof.cn2_ground), p, 100)
        )
        expected = 2.25 * geom.wavenumber ** (7.0 / 6.0) * float(integral)
        assert rytov_variance(geom, prof) == pytest.approx(expected, rel=1e-6)

    def test_zenith_secant_scaling(self):
        at_zero = rytov_variance(PAPER_GEOM, PAPER_PROFILE)
        geom60 = LinkGeometry(500e3, 0.0, math.radians(60.0), 795e-9, 0.06, 1.0)
        at_sixty = rytov_variance(geom60, PAPER_PROFILE)
        assert at_sixty / at_zero == pytest.approx(2.0 ** (11.0 / 6.0), rel=1e-9)

    def test_non_negative(self):
        assert rytov_variance(PAPER_GEOM, TurbulenceProfile(0.0, 0.0)) >= 0.0


class TestScintillationIndex:
    def test_zero(self):
        assert scintillation_index(0.0) == 0.0

    def test_dual_encoding_at_one(self):
        got = scintillation_index(1.0)
        s = mpmath.mpf(1)
        expected = mpmath.exp(
            mpmath.mpf("0.49") * s / (1 + mpmath.mpf("1.11") * s ** mpmath.mpf("1.2")) ** (mpmath.mpf(7) / 6)
            + mpmath.mpf("0.51") * s / (1 + mpmath.mpf("0.69") * s ** mpmath.mpf("1.2")) ** (mpmath.mpf(5) / 6)
        ) - 1
        assert got == pytest.approx(float(expected), abs=1e-12)

    @given(st.floats(1e-8, 1e-3))
    def test_weak_turbulence_limit(self, s2):
        assert scintillation_index(s2) == pytest.approx(s2, rel=5e-3)


class TestBeamStats:
    def test_no_turbulence_limit(self):
        # diffraction-only: no wandering, no shape noise, ln(1/Omega^2) broadening
        geom = PAPER_GEOM
        omega = geom.wavenumber * geom.beam_waist**2 / (2.0 * geom.path_length)
        var_xy, mean_theta, var_theta, cov_theta = beam_moments(
            geom.beam_waist, omega, 0.0
        )
        assert var_xy == 0.0
        assert var_theta == 0.0
        assert cov_theta == 0.0
        assert mean_theta == pytest.approx(math.log(1.0 / omega**2), abs=1e-15)

    def test_paper_defaults_golden(self):
        # regression lock from the first verified run of this configuration
        stats = beam_stats(PAPER_GEOM, PAPER_PROFILE)
        assert stats.omega == pytest.approx(0.028452159881567934, rel=1e-12)
        assert stats.sigma_r2 == pytest.approx(0.15377816722341486, rel=1e-8)
        assert stats.sigma_i2 == pytest.approx(0.1504535122154507, rel=1e-8)
        assert stats.var_xy == pytest.approx(0.011369751965946797, rel=1e-8)
        assert stats.mean_theta == pytest.approx(7.1373133575010215, rel=1e-8)
        assert stats.var_theta == pytest.approx(0.008845652183816773, rel=1e-8)
        assert stats.cov_theta == pytest.approx(-0.005940872472651702, rel=1e-8)

    def test_theta_covariance_psd(self):
        for zenith in (0.0, 30.0, 60.0, 80.0):
            geom = LinkGeometry(500e3, 0.0, math.radians(zenith), 795e-9, 0.06, 1.0)
            stats = beam_stats(geom, PAPER_PROFILE)
            assert stats.var_theta >= abs(stats.cov_theta)


class TestSpecialFunctions:
    def test_bessel_and_lambert_vs_arbitrary_precision(self):
        mpmath.mp.dps = 40
        points = np.geomspace(1e-3, 600.0, 20)
        for x in points:
            i0e = special.i0e(x)
            i1e = special.i1e(x)
            lw = float(_lambertw_exp(math.log(x)))
            assert i0e == pytest.approx(
                float(mpmath.besseli(0, x) * mpmath.exp(-x)), rel=1e-12
            )
            assert i1e == pytest.approx(
                float(mpmath.besseli(1, x) * mpmath.exp(-x)), rel=1e-12
            )
            assert lw == pytest.approx(float(mpmath.lambertw(x)), rel=1e-12)

    def test_lambert_log_branch_for_huge_arguments(self):
        mpmath.mp.dps = 60
        for log_arg in (700.0, 900.0, 5e3, 1e6):
            got = float(_lambertw_exp(log_arg))
            expected = float(mpmath.lambertw(mpmath.exp(mpmath.mpf(log_arg))))
            assert got == pytest.approx(expected, rel=1e-12)


class TestTransmissivity:
    def test_centered_beam_gives_eta0(self):
        eta = transmissivity(0.0, 0.0, 2.0, 3.0, 0.4, 1.0)
        eta_shifted = transmissivity(1e-30, 0.0, 2.0, 3.0, 0.4, 1.0)
        assert 0.0 < eta < 1.0
        assert eta == pytest.approx(eta_shifted, rel=1e-9)

    def test_circular_reduction_exact(self):
        for w in (0.5, 1.0, 2.0, 10.0):
            eta = transmissivity(0.0, 0.0, w, w, 0.123, 1.0)
            assert eta == pytest.approx(1.0 - math.exp(-2.0 / w**2), abs=1e-12)

    def test_circular_matches_overlap_integral(self):
        # 2-D Gaussian intensity over a circular aperture, Monte Carlo
        w, r0, n = 1.7, 1.0, 10**6
        rng = np.random.default_rng(42)
        pts = rng.normal(0.0, w / 2.0, size=(n, 2))
        hits = np.hypot(pts[:, 0], pts[:, 1]) <= r0
        p = hits.mean()
        se = math.sqrt(p * (1 - p) / n)
        eta = transmissivity(0.0, 0.0, w, w, 0.0, r0)
        assert abs(eta - p) < 3.0 * se

    def test_ellipse_symmetries(self):
        x, y, w1, w2, phi, r0 = 0.4, -0.3, 1.5, 2.5, 0.8, 1.0
        base = transmissivity(x, y, w1, w2, phi, r0)
        swapped = transmissivity(x, y, w2, w1, phi + math.pi / 2.0, r0)
        rotated = transmissivity(x, y, w1, w2, phi + math.pi, r0)
        assert swapped == pytest.approx(base, abs=1e-10)
        assert rotated == pytest.approx(base, abs=1e-10)

    def test_monotone_in_centroid_distance(self):
        distances = np.linspace(0.0, 8.0, 40)
        etas = transmissivity(distances, 0.0, 1.5, 2.0, 0.3, 1.0)
        assert np.all(np.diff(etas) <= 1e-15)
        assert etas[-1] < 1e-6

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(-5.0, 5.0),
        st.floats(-5.0, 5.0),
        st.floats(0.05, 50.0),
        st.floats(0.05, 50.0),
        st.floats(0.0, 2.0 * math.pi),
        st.floats(0.05, 5.0),
    )
    def test_always_in_unit_interval(self, x, y, w1, w2, phi, r0):
        eta = transmissivity(x, y, w1, w2, phi, r0)
        assert 0.0 <= eta <= 1.0

    def test_million_random_samples_in_unit_interval(self):
        rng = np.random.default_rng(7)
        n = 10**6
        x = rng.normal(0.0, 2.0, n)
        y = rng.normal(0.0, 2.0, n)
        w1 = np.exp(rng.normal(0.5, 1.0, n))
        w2 = np.exp(rng.normal(0.5, 1.0, n))
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        eta = transmissivity(x, y, w1, w2, phi, 1.0)
        assert np.all(eta >= 0.0) and np.all(eta <= 1.0)


class TestSampling:
    def test_zero_variance_is_deterministic(self):
        stats = BeamStats(0.0, 1.5, 0.0, 0.0, 0.0, 0.1, 0.0)
        rng = np.random.default_rng(0)
        s = sample_beam(PAPER_GEOM, stats, rng)
        assert (s.x, s.y) == (0.0, 0.0)
        assert s.theta1 == s.theta2 == 1.5
        assert s.w1 == s.w2 == PAPER_GEOM.beam_waist * math.exp(0.75)

    def test_moments_match_statistics(self):
        stats = beam_stats(PAPER_GEOM, PAPER_PROFILE)
        batch = sample_beams(PAPER_GEOM, stats, np.random.default_rng(123), 10**5)
        n = len(batch)
        se_mean = math.sqrt(stats.var_theta / n)
        assert abs(batch.theta1.mean() - stats.mean_theta) < 3 * se_mean
        assert abs(batch.theta2.mean() - stats.mean_theta) < 3 * se_mean
        se_var = stats.var_xy * math.sqrt(2.0 / n)
        assert abs(batch.x.var() - stats.var_xy) < 3 * se_var
        assert abs(batch.y.var() - stats.var_xy) < 3 * se_var
        cov = np.cov(batch.theta1, batch.theta2)[0, 1]
        se_cov = stats.var_theta * math.sqrt(2.0 / n)  # conservative
        assert abs(cov - stats.cov_theta) < 3 * se_cov

    def test_fixed_seed_reproducible(self):
        stats = beam_stats(PAPER_GEOM, PAPER_PROFILE)
        a = sample_beams(PAPER_GEOM, stats, np.random.default_rng(9), 100)
        b = sample_beams(PAPER_GEOM, stats, np.random.default_rng(9), 100)
        assert np.array_equal(a.eta, b.eta)
        assert np.array_equal(a.phi, b.phi)

    def test_phi_range(self):
        stats = beam_stats(PAPER_GEOM, PAPER_PROFILE)
        batch = sample_beams(PAPER_GEOM, stats, np.random.default_rng(5), 1000)
        assert np.all(batch.phi >= 0.0) and np.all(batch.phi < math.pi / 2.0)
        full = sample_beams(
            PAPER_GEOM, stats, np.random.default_rng(5), 1000, phi_max=2.0 * math.pi
        )
        assert np.max(full.phi) > math.pi / 2.0


class TestMeanAttenuation:
    def test_perfect_transmission(self):
        assert mean_attenuation_db([1.0, 1.0, 1.0]) == 0.0

    def test_thirty_db(self):
        assert mean_attenuation_db([0.001] * 10) == pytest.approx(30.0, abs=1e-12)

    def test_mixed_samples(self):
        assert mean_attenuation_db([0.1, 0.001]) == pytest.approx(
            -10.0 * math.log10(0.0505), abs=1e-12
        )
        assert mean_attenuation_db([0.1, 0.001]) == pytest.approx(12.97, abs=0.01)

    def test_all_blocked(self):
        assert mean_attenuation_db([0.0, 0.0]) == math.inf

    def test_delta_distribution_matches_fixed_channel(self):
        eta = 0.0123
        assert mean_attenuation_db([eta] * 50) == pytest.approx(
            -10.0 * math.log10(eta), abs=1e-12
        )

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            mean_attenuation_db([])
        with pytest.raises(ValueError):
            mean_attenuation_db([1.2])


def test_dump_csv_round_trip(tmp_path):
    stats = beam_stats(PAPER_GEOM, PAPER_PROFILE)
    batch = sample_beams(PAPER_GEOM, stats, np.random.default_rng(1), 25)
    path = tmp_path / "samples.csv"
    dump_beam_samples_csv(batch, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,theta1,theta2,phi,W1,W2,eta"
    assert len(lines) == 26
    parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(parsed[:, 7], batch.eta)  # repr round-trips exactly
    assert np.array_equal(parsed[:, 0], batch.x)
