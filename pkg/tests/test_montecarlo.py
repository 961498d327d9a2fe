import itertools
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lkqtm.lattice_bands import THETA_KAGOME, THETA_LIEB, DomainError, StrainParams
from lkqtm.spa_hubbard import (
    AuxFieldConfig,
    MCParams,
    acceptance_probability,
    build_geometry,
    build_h_eff,
    config_action,
    dimer_geometry,
    full_diagonalization_sweep,
    metropolis_sweep,
    run_chain,
    tune_mu_half_filling,
)
from lkqtm.spa_hubbard.montecarlo import (
    density_of,
    solve_mu_for_density,
    sweep_decisions,
    tune_mu_chain,
)

# discrete field states for the exact-enumeration toy
TOY_STATES = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.2, 0.0, 0.0]])
TOY = dict(beta=1.5, u=2.0, mu=0.4, cluster_l=1)


def toy_proposal(rng, m):
    return TOY_STATES[rng.integers(len(TOY_STATES), size=len(m))]


def toy_action(g, states, params):
    f = AuxFieldConfig(TOY_STATES[list(states)], np.zeros(2))
    return config_action(build_h_eff(g, f, params.u, params.mu), params.beta)


def toy_exact(g, params):
    configs = list(itertools.product(range(len(TOY_STATES)), repeat=2))
    a = np.array([toy_action(g, c, params) for c in configs])
    w = np.exp(-(a - a.min()))
    return configs, w / w.sum(), a


def state_index(m):
    return tuple(int(np.flatnonzero(np.all(np.isclose(TOY_STATES, row), axis=1))[0]) for row in m)


class TestParams:
    @pytest.mark.parametrize(
        "kw", [dict(beta=-1.0), dict(u=-1.0), dict(n_meas=-1), dict(cluster_l=0), dict(move_width=0.0), dict(seed=-3)]
    )
    def test_invalid(self, kw):
        base = dict(beta=1.0, u=1.0)
        with pytest.raises(DomainError):
            MCParams(**{**base, **kw})

    def test_cap(self):
        assert MCParams(beta=1.0, u=1.0, m_cap=2.5).cap == 2.5
        assert MCParams(beta=10.0, u=9.0).cap == 4.0
        assert MCParams(beta=0.5, u=0.5).cap == pytest.approx(1 + 6 * math.sqrt(8))
        assert MCParams(beta=0.0, u=1.0).cap == math.inf

    def test_cluster_too_large(self):
        g = build_geometry(2, StrainParams(1.8))
        with pytest.raises(DomainError):
            metropolis_sweep(g, AuxFieldConfig.zeros(g.n_sites), MCParams(beta=1.0, u=1.0, cluster_l=3))


class TestAcceptance:
    def test_rule(self):
        assert acceptance_probability(0.0) == 1.0
        assert acceptance_probability(-3.0) == 1.0
        assert acceptance_probability(0.7) == pytest.approx(math.exp(-0.7))

    def test_zero_change_always_accepted(self):
        # at u = 0 the field does not couple, so every in-cap proposal has dF = 0
        g = build_geometry(4, StrainParams(1.8))
        m = np.zeros((g.n_sites, 3))
        acc = sweep_decisions(g, m, MCParams(beta=3.0, u=0.0, cluster_l=2, move_width=0.3), 0)
        assert acc.all()

    def test_infinite_temperature(self):
        g = build_geometry(4, StrainParams(1.8))
        f = AuxFieldConfig.random(g.n_sites, 5.0, np.random.default_rng(3))
        _, rate = metropolis_sweep(g, f, MCParams(beta=0.0, u=5.0, cluster_l=2, move_width=2.0))
        assert rate == 1.0

    def test_cap_enforced(self):
        g = build_geometry(4, StrainParams(1.8))
        f = AuxFieldConfig.zeros(g.n_sites, 2.0)
        p = MCParams(beta=0.0, u=2.0, cluster_l=2, move_width=3.0, m_cap=1.0)
        for k in range(5):
            f, _ = metropolis_sweep(g, f, p, k)
            assert np.all(np.linalg.norm(f.m, axis=1) <= 1.0)


class TestTravelingCluster:
    @pytest.mark.parametrize("theta, u, beta", [(THETA_KAGOME, 4.0, 2.0), (1.8, 9.0, 10.0), (THETA_LIEB, 1.0, 3.0)])
    def test_whole_lattice_cluster_matches_full_diagonalization(self, theta, u, beta):
        g = build_geometry(2, StrainParams(theta))
        p = MCParams(beta=beta, u=u, cluster_l=2, move_width=0.8, seed=11)
        f_tca = AuxFieldConfig.random(g.n_sites, u, np.random.default_rng(5))
        f_full = f_tca.copy()
        decisions = []
        for k in range(6):
            m_before = f_tca.m.copy()
            acc_tca = sweep_decisions(g, f_tca.m, p, k)
            f_full, acc_full = full_diagonalization_sweep(g, AuxFieldConfig(m_before, f_full.phi_saddle), p, k)
            assert np.array_equal(acc_tca, acc_full)
            assert np.array_equal(f_tca.m, f_full.m)
            decisions.extend(acc_tca)
        # the comparison exercised both outcomes
        assert 0 < sum(decisions) < len(decisions)

    def test_cost_scaling(self):
        g = build_geometry(8, StrainParams(THETA_KAGOME))
        f = AuxFieldConfig.random(g.n_sites, 4.0, np.random.default_rng(0))
        p = MCParams(beta=5.0, u=4.0, cluster_l=4)
        sweep_decisions(g, f.m.copy(), p, 0)  # compile
        t0 = time.perf_counter()
        sweep_decisions(g, f.m.copy(), p, 0)
        t_tca = time.perf_counter() - t0
        t0 = time.perf_counter()
        full_diagonalization_sweep(g, f, p, 0)
        t_full = time.perf_counter() - t0
        assert t_full / t_tca > 5


class TestDetailedBalance:
    def test_transition_matrix_stationary(self):
        g = dimer_geometry(1.0)
        params = MCParams(**TOY)
        configs, pi, action = toy_exact(g, params)
        index = {c: n for n, c in enumerate(configs)}
        k = len(TOY_STATES)
        sweep = np.eye(len(configs))
        for site in (0, 1):
            t = np.zeros((len(configs), len(configs)))
            for c in configs:
                for s in range(k):
                    new = list(c)
                    new[site] = s
                    d = action[index[tuple(new)]] - action[index[c]]
                    p = acceptance_probability(d) / k
                    t[index[c], index[tuple(new)]] += p
                    t[index[c], index[c]] += 1 / k - p
            sweep = sweep @ t
        assert np.allclose(sweep.sum(axis=1), 1.0, atol=1e-14)
        assert np.max(np.abs(pi @ sweep - pi)) < 1e-12

    def test_histogram_matches_exact(self):
        g = dimer_geometry(1.0)
        params = MCParams(**TOY, seed=2024)
        configs, pi, _ = toy_exact(g, params)
        index = {c: n for n, c in enumerate(configs)}
        n_sweeps, n_batches = 100_000, 50
        m = TOY_STATES[[0, 0]].copy()
        visits = np.zeros((n_batches, len(configs)))
        per_batch = n_sweeps // n_batches
        for k in range(n_sweeps):
            sweep_decisions(g, m, params, k, proposal=toy_proposal)
            visits[k // per_batch, index[state_index(m)]] += 1
        freq = visits / per_batch
        est = freq.mean(axis=0)
        err = freq.std(axis=0, ddof=1) / math.sqrt(n_batches)
        assert np.all(np.abs(est - pi) <= 3 * err + 1e-12)


class TestChains:
    def test_seed_determinism(self):
        g = build_geometry(4, StrainParams(THETA_KAGOME))
        p = MCParams(beta=2.0, u=4.0, mu=2.0, n_therm=10, n_meas=10, cluster_l=2, seed=77)
        a = run_chain(g, p, stream=(3,)).observables
        b = run_chain(g, p, stream=(3,)).observables
        assert np.array_equal(a.energy_series, b.energy_series)
        assert np.array_equal(a.structure_factor, b.structure_factor)
        c = run_chain(g, p, stream=(4,)).observables
        assert not np.array_equal(a.energy_series, c.energy_series)

    def test_zero_coupling_pins_field(self):
        g = build_geometry(4, StrainParams(1.8))
        obs = run_chain(g, MCParams(beta=50.0, u=0.0)).observables
        assert np.max(obs.structure_factor) < 0.01

    def test_adaptive_width(self):
        g = build_geometry(4, StrainParams(THETA_KAGOME))
        p = MCParams(beta=5.0, u=4.0, mu=2.0, n_therm=60, n_meas=20, cluster_l=2, move_width=3.0)
        res = run_chain(g, p)
        assert res.move_width < 3.0
        assert 0.2 < res.observables.acceptance_rate < 0.6


class TestChemicalPotential:
    def test_density_monotone(self):
        spectra = np.random.default_rng(0).normal(size=(5, 24))
        shifts = np.linspace(-3, 3, 61)
        n = [density_of(spectra, 4.0, s) for s in shifts]
        assert np.all(np.diff(n) >= 0)

    @given(st.floats(0.1, 1.9), st.floats(0.5, 20))
    @settings(max_examples=30)
    def test_solve_density(self, target, beta):
        spectra = np.random.default_rng(1).normal(size=(3, 16))
        d = solve_mu_for_density(spectra, beta, target)
        assert density_of(spectra, beta, d) == pytest.approx(target, abs=1e-9)

    def test_free_lieb_near_zero(self):
        # A-B/A-C bipartite up to the weak B-C bonds, so mu sits close to zero
        g = build_geometry(8, StrainParams(THETA_LIEB))
        mu = tune_mu_half_filling(g, MCParams(beta=10.0, u=0.0), tol_n=1e-3)
        assert abs(mu) < 0.1

    def test_interacting_self_consistency(self):
        g = build_geometry(4, StrainParams(THETA_KAGOME))
        p = MCParams(beta=10.0, u=4.0, n_therm=60, n_meas=40, cluster_l=2, seed=5)
        mu, res = tune_mu_chain(g, p, tol_n=0.01)
        assert abs(res.observables.density_mean - 1) <= 0.01
        again = run_chain(g, MCParams(**{**p.__dict__, "mu": mu}), stream=(99,), init=res.field)
        assert abs(again.observables.density_mean - 1) <= 0.01
