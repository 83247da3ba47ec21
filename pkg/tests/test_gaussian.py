import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd_sat.gaussian import (
    PhysicalityError,
    SupermodeSpectrum,
    TwoModeCM,
    cm_from_dense,
    epr_cm,
    exponential_spectrum,
    flat_spectrum,
    mean_photon_number,
    pdc_state,
    single_mode_spectrum,
    symplectic_eigenvalues,
)

from dense_reference import random_physical_cm, symplectic_moduli


class TestEprCm:
    def test_zero_squeezing_is_two_vacua(self):
        cm = epr_cm(0.0)
        assert (cm.a, cm.b, cm.c) == (1.0, 1.0, 0.0)

    def test_unit_squeezing_values(self):
        cm = epr_cm(1.0)
        assert cm.a == pytest.approx(math.cosh(2.0), abs=1e-12)
        assert cm.b == pytest.approx(math.cosh(2.0), abs=1e-12)
        assert cm.c == pytest.approx(math.sinh(2.0), abs=1e-12)
        # spec quotes these to 5 decimals
        assert round(cm.a, 5) == 3.76220
        assert round(cm.c, 5) == 3.62686

    @pytest.mark.parametrize("r", [0.0, 0.3, 1.0, 2.0, 3.0])
    def test_pure_state_spectrum(self, r):
        spec = symplectic_eigenvalues(epr_cm(r))
        assert spec.nu1 == pytest.approx(1.0, abs=1e-9)
        assert spec.nu2 == pytest.approx(1.0, abs=1e-9)

    def test_negative_squeezing_rejected(self):
        with pytest.raises(ValueError):
            epr_cm(-0.1)

    @given(st.floats(0.0, 3.0))
    def test_determinant_identity(self, r):
        cm = epr_cm(r)
        assert abs(cm.a * cm.b - cm.c**2 - 1.0) < 1e-12 * max(1.0, cm.a**2)


class TestTwoModeCM:
    def test_rejects_subvacuum_variance(self):
        with pytest.raises(PhysicalityError):
            TwoModeCM(0.5, 1.0, 0.0)

    def test_rejects_overcorrelated(self):
        with pytest.raises(PhysicalityError):
            TwoModeCM(2.0, 2.0, 1.999)  # c^2 > ab - 1 - |b-a|

    def test_dense_round_trip(self):
        cm = TwoModeCM(3.0, 2.0, -1.5)
        back = cm_from_dense(cm.dense())
        assert (back.a, back.b, back.c) == (cm.a, cm.b, cm.c)

    def test_from_dense_rejects_non_block(self):
        mat = epr_cm(0.5).dense()
        mat[0, 1] = 0.1
        with pytest.raises(ValueError):
            cm_from_dense(mat)


class TestSymplecticEigenvalues:
    def test_thermal_product(self):
        spec = symplectic_eigenvalues(TwoModeCM(3.0, 3.0, 0.0))
        assert (spec.nu1, spec.nu2) == (3.0, 3.0)

    def test_appendix_ordering(self):
        # nu1 carries +(b - a): for a product state it belongs to mode B
        spec = symplectic_eigenvalues(TwoModeCM(2.0, 5.0, 0.0))
        assert spec.nu1 == pytest.approx(5.0, abs=1e-12)
        assert spec.nu2 == pytest.approx(2.0, abs=1e-12)

    def test_post_channel_example_matches_eigen_oracle(self):
        cm = TwoModeCM(3.76220, 2.40610, 2.56459)
        spec = symplectic_eigenvalues(cm)
        oracle = symplectic_moduli(cm.dense())
        assert sorted([spec.nu1, spec.nu2]) == pytest.approx(list(oracle), abs=1e-10)

    def test_thousand_random_cms_match_eigen_oracle(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            cm = TwoModeCM(*random_physical_cm(rng))
            spec = symplectic_eigenvalues(cm)
            oracle = symplectic_moduli(cm.dense())
            assert sorted([spec.nu1, spec.nu2]) == pytest.approx(
                list(oracle), abs=1e-10 * max(1.0, oracle[-1])
            )


class TestSpectra:
    def test_single_scenario(self):
        spec = single_mode_spectrum(1.0, 5)
        states = pdc_state(spec)
        assert states[0] == epr_cm(1.0)
        for cm in states[1:]:
            assert cm == epr_cm(0.0)

    def test_flat_scenario(self):
        states = pdc_state(flat_spectrum(1.0, 5))
        expected = epr_cm(1.0 / math.sqrt(5.0))
        for cm in states:
            assert cm.a == pytest.approx(expected.a, abs=1e-12)

    def test_exponential_normalization_and_ratio(self):
        delta = 0.7
        spec = exponential_spectrum(1.0, 5, delta)
        assert math.fsum(l * l for l in spec.lambdas) == pytest.approx(1.0, abs=1e-12)
        for k in range(4):
            assert spec.lambdas[k + 1] / spec.lambdas[k] == pytest.approx(
                math.exp(-delta), rel=1e-12
            )
        assert list(spec.lambdas) == sorted(spec.lambdas, reverse=True)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            SupermodeSpectrum((0.5, 0.5), 1.0)

    def test_squeezing_accessor(self):
        spec = exponential_spectrum(2.0, 3, 0.5)
        assert spec.squeezing(1) == pytest.approx(2.0 * spec.lambdas[0])
        assert spec.with_gain(0.5).squeezing(2) == pytest.approx(0.5 * spec.lambdas[1])


class TestMeanPhotonNumber:
    def test_vacuum(self):
        assert mean_photon_number(1.0) == 0.0

    def test_one_photon_thermal(self):
        assert mean_photon_number(3.0) == 1.0

    def test_below_vacuum_rejected(self):
        with pytest.raises(ValueError):
            mean_photon_number(0.9)

    def test_downlink_footnote_scale(self):
        # eta = 1e-3 with squeezing around r = 1.15 gives n_bar ~ 2e-3
        eta, eps, r = 1e-3, 0.05, 1.15
        v = eta * (math.cosh(2 * r) + eps) + (1.0 - eta)
        assert mean_photon_number(v) == pytest.approx(2e-3, rel=0.25)


@settings(max_examples=200)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_pdc_subchannels_independent_of_order(r1, r2):
    # element k is a function of lambda_k alone
    norm = math.hypot(r1, r2)
    if norm < 1e-6:
        return
    lam = (r1 / norm, r2 / norm)
    fwd = pdc_state(SupermodeSpectrum(lam, norm))
    rev = pdc_state(SupermodeSpectrum(lam[::-1], norm))
    assert fwd[0] == rev[1] and fwd[1] == rev[0]
