import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lkqtm.lattice_bands import THETA_KAGOME, THETA_LIEB, DomainError, StrainParams, band_spectrum
from lkqtm.stirling_cycle import (
    CycleSpec,
    InvariantViolation,
    Mode,
    assemble_cycle,
    carnot_bounds,
    classify_mode,
    engine_efficiency,
    refrigerator_cop,
    run_cycle,
)
from lkqtm.thermo import free_energy, internal_energy, log_partition

angles = st.floats(THETA_LIEB, THETA_KAGOME)
temps = st.floats(0.01, 0.5)

GRID = 40


def cycle(theta1, theta2, th, tc, statistics="boltzmann", grid=GRID):
    return run_cycle(CycleSpec(theta1, theta2, th, tc, statistics=statistics), grid)


class TestClassify:
    def test_table_rows(self):
        assert classify_mode(1, -0.5, -0.5) is Mode.ENGINE
        assert classify_mode(-1, 0.5, 0.5) is Mode.REFRIGERATOR
        assert classify_mode(1, -1.5, 0.5) is Mode.ACCELERATOR
        assert classify_mode(-1, -0.5, 1.5) is Mode.HEATER

    def test_boundary(self):
        assert classify_mode(0, -1, 1, tol=1e-9) is Mode.BOUNDARY
        assert classify_mode(1e-10, -1, 1, tol=1e-9) is Mode.BOUNDARY

    def test_per_quantity_tolerance(self):
        assert classify_mode(1, -0.5, -0.5, tol=(0.1, 0.1, 0.6)) is Mode.BOUNDARY
        assert classify_mode(1, -0.5, -0.5, tol=(0.1, 0.1, 0.1)) is Mode.ENGINE

    @pytest.mark.parametrize("signs", [(1, 1, -2), (-1, 1, -0.5), (-1, -1, -1), (1, 1, 1)])
    def test_forbidden_patterns(self, signs):
        with pytest.raises(InvariantViolation):
            classify_mode(*signs, tol=1e-12)

    def test_negative_tolerance(self):
        with pytest.raises(DomainError):
            classify_mode(1, -0.5, -0.5, tol=-1.0)


class TestPerformance:
    def test_efficiency_and_cop(self):
        assert engine_efficiency(2, -1) == 0.5
        assert refrigerator_cop(3, 1) == 3

    def test_wrong_mode(self):
        with pytest.raises(DomainError):
            engine_efficiency(-1, 1)
        with pytest.raises(DomainError):
            refrigerator_cop(-1, 1)

    def test_carnot(self):
        assert carnot_bounds(0.02, 0.01) == pytest.approx((0.5, 1.0), rel=1e-15)
        assert carnot_bounds(0.05, 0.04) == pytest.approx((0.2, 4.0), rel=1e-12)
        eta, cop = carnot_bounds(1.0 + 1e-9, 1.0)
        assert eta < 1e-8 and cop > 1e8

    @pytest.mark.parametrize("pair", [(0.01, 0.01), (0.01, 0.02), (0.1, 0.0)])
    def test_carnot_domain(self, pair):
        with pytest.raises(DomainError):
            carnot_bounds(*pair)


class TestSpec:
    def test_invalid(self):
        with pytest.raises(DomainError):
            CycleSpec(THETA_KAGOME, THETA_LIEB, 0.01, 0.02)
        with pytest.raises(DomainError):
            CycleSpec(1.0, THETA_LIEB, 0.02, 0.01)
        with pytest.raises(DomainError):
            CycleSpec(THETA_KAGOME, THETA_LIEB, 0.02, 0.0)


class TestCycle:
    def test_equal_angles(self):
        r = cycle(1.8, 1.8, 0.05, 0.02)
        assert r.work == 0 and r.mode is Mode.BOUNDARY
        assert math.isnan(r.performance)

    def test_equal_temperatures(self):
        r = cycle(THETA_KAGOME, THETA_LIEB, 0.05, 0.05)
        assert abs(r.work) < 1e-14
        assert r.mode is Mode.BOUNDARY

    @pytest.mark.parametrize(
        "statistics, frozen", [("boltzmann", 0.46990871695469066), ("fermi", 0.8199378566295261)]
    )
    def test_reference_engine(self, statistics, frozen):
        r = run_cycle(CycleSpec(THETA_KAGOME, THETA_LIEB, 0.02, 0.01, statistics=statistics), 400)
        assert r.mode is Mode.ENGINE
        assert r.performance == pytest.approx(frozen, rel=1e-9)
        eta = engine_efficiency(r.q_hot, r.work)
        assert eta <= carnot_bounds(0.02, 0.01)[0] * (1 + 1e-9)

    @settings(max_examples=25)
    @given(angles, angles, temps, temps, st.sampled_from(["boltzmann", "fermi"]))
    def test_laws_and_bounds(self, t1, t2, a, b, statistics):
        th, tc = max(a, b), min(a, b)
        r = cycle(t1, t2, th, tc, statistics)
        scale = max(1.0, abs(r.q_hot))
        assert abs(r.q_hot + r.q_cold + r.work) <= 1e-10 * scale
        assert abs(r.q_ab + r.q_bc + r.q_cd + r.q_da - r.work) <= 1e-10 * scale
        if r.mode in (Mode.ENGINE, Mode.REFRIGERATOR):
            assert 0 <= r.performance <= 1 + 1e-9

    @settings(max_examples=15)
    @given(angles, angles, temps, temps)
    def test_swap_antisymmetry(self, t1, t2, a, b):
        th, tc = max(a, b), min(a, b)
        w = cycle(t1, t2, th, tc).work
        w_swapped = cycle(t2, t1, th, tc).work
        assert w == pytest.approx(-w_swapped, abs=1e-12)

    @settings(max_examples=15)
    @given(angles, angles, temps, temps)
    def test_free_energy_bookkeeping(self, t1, t2, a, b):
        th, tc = max(a, b), min(a, b)
        s1 = band_spectrum(StrainParams(t1), GRID)
        s2 = band_spectrum(StrainParams(t2), GRID)
        d_f_hot = free_energy(s2, th) - free_energy(s1, th)
        d_f_cold = free_energy(s2, tc) - free_energy(s1, tc)
        assert cycle(t1, t2, th, tc).work == pytest.approx(d_f_hot - d_f_cold, abs=1e-12)

    def test_constant_offsets_cancel(self):
        # a constant added to ln Z (the dropped prefactor) and a uniform band shift (the chemical potential)
        th, tc, shift, offset = 0.1, 0.03, 0.37, 2.5
        s1 = band_spectrum(StrainParams(THETA_KAGOME), GRID)
        s2 = band_spectrum(StrainParams(1.7), GRID)

        def point(s, t, d=0.0, c=0.0):
            s = s.shifted(d)
            return log_partition(s, t) + c, internal_energy(s, t)

        base = assemble_cycle(point(s1, th), point(s2, th), point(s1, tc), point(s2, tc), th, tc)
        moved = assemble_cycle(
            point(s1, th, shift, offset),
            point(s2, th, shift, offset),
            point(s1, tc, shift, offset),
            point(s2, tc, shift, offset),
            th,
            tc,
        )
        for key in ("work", "q_hot", "q_cold"):
            assert getattr(moved, key) == pytest.approx(getattr(base, key), abs=1e-12)
        assert moved.mode is base.mode

    def test_as_dict(self):
        d = cycle(THETA_KAGOME, THETA_LIEB, 0.02, 0.01).as_dict()
        assert d["mode"] == "engine"
        assert set(d) >= {"q_ab", "q_bc", "q_cd", "q_da", "work", "q_hot", "q_cold", "performance"}
        assert cycle(1.8, 1.8, 0.05, 0.02).as_dict()["performance"] is None
