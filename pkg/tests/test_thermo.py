import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lkqtm.lattice_bands import THETA_KAGOME, THETA_LIEB, BandSpectrum, DomainError, StrainParams, band_spectrum
from lkqtm.thermo import (
    StatisticsMode,
    entropy,
    free_energy,
    internal_energy,
    log_partition,
    thermal_point,
    thermo_table,
)

MODES = list(StatisticsMode)


@pytest.fixture(scope="module")
def spectra():
    return {theta: band_spectrum(StrainParams(theta), 60) for theta in (THETA_LIEB, 1.85, THETA_KAGOME)}


class TestSingleLevel:
    def test_zero_level(self):
        assert log_partition(BandSpectrum.from_levels([0.0]), 0.3) == 0.0

    @given(st.floats(-5, 5), st.floats(0.01, 10))
    def test_closed_forms(self, eps, t):
        s = BandSpectrum.from_levels([eps])
        assert math.isclose(log_partition(s, t), -eps / t, rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(internal_energy(s, t), eps, rel_tol=1e-12, abs_tol=1e-12)
        assert abs(entropy(s, t)) < 1e-10
        assert math.isclose(free_energy(s, t), eps, rel_tol=1e-10, abs_tol=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3, 7])
    def test_degenerate_entropy(self, n):
        s = BandSpectrum.from_levels([0.4] * n)
        assert math.isclose(entropy(s, 0.2), math.log(n), abs_tol=1e-12)

    def test_symmetric_pair_high_temperature(self):
        s = BandSpectrum.from_levels([-1.0, 1.0])
        assert abs(internal_energy(s, 1e6)) < 1e-5

    def test_fermi_single_mode(self):
        s = BandSpectrum.from_levels([0.3])
        t = 0.2
        f = 1 / (1 + math.exp(0.3 / t))
        assert math.isclose(log_partition(s, t, "fermi"), math.log1p(math.exp(-0.3 / t)), rel_tol=1e-13)
        assert math.isclose(internal_energy(s, t, "fermi"), 0.3 * f, rel_tol=1e-13)
        s_exact = -(f * math.log(f) + (1 - f) * math.log(1 - f))
        assert math.isclose(entropy(s, t, "fermi"), s_exact, rel_tol=1e-12)


class TestErrors:
    @pytest.mark.parametrize("t", [0.0, -0.1, float("nan")])
    @pytest.mark.parametrize("fn", [log_partition, internal_energy, entropy, free_energy])
    def test_nonpositive_temperature(self, fn, t):
        with pytest.raises(DomainError):
            fn(BandSpectrum.from_levels([0.0]), t)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            log_partition(BandSpectrum.from_levels([0.0]), 1.0, "bose")


class TestStability:
    def test_no_overflow_at_low_temperature(self):
        s = band_spectrum(StrainParams(THETA_LIEB), 40)
        for mode in MODES:
            p = thermal_point(s, 0.01, mode)
            assert all(np.isfinite([p.ln_z, p.internal_energy, p.entropy, p.free_energy]))

    def test_lieb_quadrature_stability(self):
        p = StrainParams(THETA_LIEB)
        a = log_partition(band_spectrum(p, 200), 0.01)
        b = log_partition(band_spectrum(p, 400), 0.01)
        assert abs(a - b) < 1e-6

    def test_strain_response(self):
        a = log_partition(band_spectrum(StrainParams(THETA_KAGOME), 100), 0.01)
        b = log_partition(band_spectrum(StrainParams(THETA_LIEB), 100), 0.01)
        assert abs(a - b) > 1e-3


class TestIdentities:
    @settings(max_examples=30)
    @given(st.sampled_from([THETA_LIEB, 1.85, THETA_KAGOME]), st.floats(0.01, 5.0), st.sampled_from(MODES))
    def test_free_energy_two_ways(self, spectra, theta, t, mode):
        p = thermal_point(spectra[theta], t, mode)
        assert p.temperature > 0
        assert math.isclose(p.free_energy, p.internal_energy - t * p.entropy, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(p.free_energy, -t * p.ln_z, rel_tol=1e-12)
        # Boltzmann weights are normalized to one, so S is fixed only up to the dropped ln(n_k);
        # over the plain k-sum it is non-negative
        floor = 0.0 if mode is StatisticsMode.FERMI else -math.log(spectra[theta].weights.size)
        assert p.entropy >= floor - 1e-12
        assert p.free_energy <= p.internal_energy - t * floor + 1e-12

    @settings(max_examples=30)
    @given(st.sampled_from([THETA_LIEB, 1.85, THETA_KAGOME]), st.floats(0.01, 5.0), st.sampled_from(MODES))
    def test_energy_is_log_derivative(self, spectra, theta, t, mode):
        s = spectra[theta]
        h = 1e-4 * t
        fd = t * t * (log_partition(s, t + h, mode) - log_partition(s, t - h, mode)) / (2 * h)
        assert math.isclose(internal_energy(s, t, mode), fd, rel_tol=1e-6, abs_tol=1e-9)

    @settings(max_examples=30)
    @given(st.sampled_from([THETA_LIEB, 1.85, THETA_KAGOME]), st.floats(0.01, 5.0), st.sampled_from(MODES))
    def test_entropy_is_minus_free_energy_slope(self, spectra, theta, t, mode):
        s = spectra[theta]
        h = 1e-4 * t
        fd = (free_energy(s, t + h, mode) - free_energy(s, t - h, mode)) / (2 * h)
        assert math.isclose(-fd, entropy(s, t, mode), rel_tol=1e-5, abs_tol=1e-9)

    def test_ln_z_decreasing_in_beta(self, spectra):
        s = spectra[1.85]
        s = s.shifted(0.1 - s.energies.min())
        betas = np.linspace(0.1, 100, 200)
        lz = [log_partition(s, 1 / b) for b in betas]
        assert np.all(np.diff(lz) < 0)

    def test_dilute_limit_agreement(self):
        # with every level far above zero, ln(1 + x) ~ x: the fermi ln Z reduces to the Boltzmann Z itself
        s = band_spectrum(StrainParams(1.85), 30).shifted(40.0)
        t = 2.0
        assert math.isclose(log_partition(s, t, "fermi"), math.exp(log_partition(s, t)), rel_tol=1e-6)

    def test_table(self, spectra):
        rows = thermo_table(spectra[THETA_LIEB], [0.1, 0.2])
        assert [r.temperature for r in rows] == [0.1, 0.2]
        assert rows[0].theta == THETA_LIEB
