"""Metropolis sampling of the static auxiliary field with traveling-cluster updates.

Each single-site update is judged on the fermionic free energy of a
``cluster_l x cluster_l`` block of cells around the update site: the block's
``H_eff`` is diagonalized before and after the proposal, so a sweep costs
``O(N * N_c^3)`` instead of ``O(N^4)``.  Sites outside the block are ignored
(open cut).  With ``cluster_l >= l`` the block is the full periodic lattice.

Random numbers for sweep ``k`` of stream ``s`` come from
``default_rng([seed, *s, k])``, so a chain is reproducible sweep by sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numba
import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from ..lattice_bands import DomainError
from .geometry import LatticeGeometry
from .hamiltonian import AuxFieldConfig, build_h_eff, config_action, uniform_ball
from .observables import Observables, measure_observables

logger = logging.getLogger(__name__)

TARGET_ACCEPTANCE = (0.3, 0.5)
M_CAP_DEFAULT = 4.0


@dataclass(frozen=True)
class MCParams:
    beta: float
    u: float
    mu: float = 0.0
    n_therm: int = 200
    n_meas: int = 100
    cluster_l: int = 4
    move_width: float = 0.5
    seed: int = 0
    m_cap: float | None = None
    measure_every: int = 1
    adapt: bool = True

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be finite and >= 0, got {self.beta}")
        if self.u < 0:
            raise DomainError(f"u must be >= 0, got {self.u}")
        if self.n_therm < 0 or self.n_meas < 0 or self.measure_every < 1:
            raise DomainError("sweep counts must be non-negative and measure_every >= 1")
        if self.cluster_l < 1:
            raise DomainError("cluster_l must be >= 1")
        if self.move_width <= 0 or (self.m_cap is not None and self.m_cap <= 0):
            raise DomainError("move_width and m_cap must be positive")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")

    @property
    def cap(self) -> float:
        """Field-norm cap: ``m_cap`` if given, else 4 widened to cover the thermal spread.

        The field weight is at most ``exp(-beta U (|m| - 1)^2 / 4)``, so a cap of
        ``1 + 6 sqrt(2 T / U)`` truncates a negligible tail.
        """
        if self.m_cap is not None:
            return self.m_cap
        if self.u == 0 or self.beta == 0:
            return M_CAP_DEFAULT if self.beta > 0 else math.inf
        return max(M_CAP_DEFAULT, 1.0 + 6.0 * math.sqrt(2.0 / (self.beta * self.u)))

    @property
    def temperature(self) -> float:
        return math.inf if self.beta == 0 else 1.0 / self.beta


def sweep_rng(seed: int, stream, sweep_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *(int(s) for s in stream), int(sweep_index)])


@numba.njit(cache=True)
def _log1pexp(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@numba.njit(cache=True)
def _fermion_action(evals, beta):
    s = 0.0
    for e in evals:
        s -= _log1pexp(-beta * e)
    return s


@numba.njit(cache=True)
def _cluster_matrix(hop, idx, m, u, mu):
    nc = idx.shape[0]
    h = np.zeros((2 * nc, 2 * nc), dtype=np.complex128)
    for a in range(nc):
        ia = idx[a]
        for b in range(nc):
            t = hop[ia, idx[b]]
            if t != 0.0:
                h[2 * a, 2 * b] = t
                h[2 * a + 1, 2 * b + 1] = t
        mx, my, mz = m[ia, 0], m[ia, 1], m[ia, 2]
        h[2 * a, 2 * a] += 0.5 * u - mu - 0.5 * u * mz
        h[2 * a + 1, 2 * a + 1] += 0.5 * u - mu + 0.5 * u * mz
        h[2 * a, 2 * a + 1] += -0.5 * u * (mx - 1j * my)
        h[2 * a + 1, 2 * a] += -0.5 * u * (mx + 1j * my)
    return h


@numba.njit(cache=True)
def _sweep_kernel(hop, clusters, m, proposed, uniforms, beta, u, mu, m_cap):
    n = m.shape[0]
    accepted = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        new = proposed[i]
        if new[0] * new[0] + new[1] * new[1] + new[2] * new[2] > m_cap * m_cap:
            continue
        idx = clusters[i]
        pos = 0
        for a in range(idx.shape[0]):
            if idx[a] == i:
                pos = a
        h = _cluster_matrix(hop, idx, m, u, mu)
        before = _fermion_action(np.linalg.eigvalsh(h), beta)
        old = m[i].copy()
        dmx, dmy, dmz = new[0] - old[0], new[1] - old[1], new[2] - old[2]
        h[2 * pos, 2 * pos] += -0.5 * u * dmz
        h[2 * pos + 1, 2 * pos + 1] += 0.5 * u * dmz
        h[2 * pos, 2 * pos + 1] += -0.5 * u * (dmx - 1j * dmy)
        h[2 * pos + 1, 2 * pos] += -0.5 * u * (dmx + 1j * dmy)
        after = _fermion_action(np.linalg.eigvalsh(h), beta)
        d_stiff = 0.25 * u * (
            new[0] * new[0] + new[1] * new[1] + new[2] * new[2] - old[0] * old[0] - old[1] * old[1] - old[2] * old[2]
        )
        d_action = after - before + beta * d_stiff
        if d_action <= 0.0 or uniforms[i] < math.exp(-d_action):
            m[i, 0], m[i, 1], m[i, 2] = new[0], new[1], new[2]
            accepted[i] = True
    return accepted


def ball_proposal(width: float):
    def propose(rng: np.random.Generator, m: np.ndarray) -> np.ndarray:
        return m + uniform_ball(rng, len(m), width)

    return propose


def acceptance_probability(d_action: float) -> float:
    """Metropolis acceptance ``min(1, exp(-beta dF))`` given ``beta dF``."""
    return 1.0 if d_action <= 0 else math.exp(-d_action)


def sweep_decisions(
    g: LatticeGeometry,
    m: np.ndarray,
    params: MCParams,
    sweep_index: int,
    stream=(),
    proposal=None,
    width: float | None = None,
) -> np.ndarray:
    """One in-place sweep over all sites; returns the per-site accept flags."""
    if params.cluster_l > g.l:
        raise DomainError(f"cluster_l={params.cluster_l} exceeds lattice size l={g.l}")
    rng = sweep_rng(params.seed, stream, sweep_index)
    propose = proposal or ball_proposal(params.move_width if width is None else width)
    proposed = np.ascontiguousarray(propose(rng, m), dtype=float)
    uniforms = rng.random(g.n_sites)
    return _sweep_kernel(
        np.ascontiguousarray(g.hopping_matrix()),
        g.cluster_table(params.cluster_l),
        m,
        proposed,
        uniforms,
        float(params.beta),
        float(params.u),
        float(params.mu),
        float(params.cap),
    )


def metropolis_sweep(
    g: LatticeGeometry, f: AuxFieldConfig, params: MCParams, sweep_index: int = 0, stream=(), proposal=None
) -> tuple[AuxFieldConfig, float]:
    """One traveling-cluster Metropolis pass over all sites; the input config is left untouched."""
    new = f.copy()
    accepted = sweep_decisions(g, new.m, params, sweep_index, stream, proposal)
    return new, float(np.mean(accepted))


def full_diagonalization_sweep(
    g: LatticeGeometry, f: AuxFieldConfig, params: MCParams, sweep_index: int = 0, stream=(), proposal=None
) -> tuple[AuxFieldConfig, np.ndarray]:
    """Reference sweep diagonalizing the whole lattice per update; same random stream as the cluster sweep."""
    rng = sweep_rng(params.seed, stream, sweep_index)
    propose = proposal or ball_proposal(params.move_width)
    cur = f.copy()
    proposed = propose(rng, cur.m)
    uniforms = rng.random(g.n_sites)
    accepted = np.zeros(g.n_sites, dtype=bool)
    action = config_action(build_h_eff(g, cur, params.u, params.mu), params.beta)
    for i in range(g.n_sites):
        if np.dot(proposed[i], proposed[i]) > params.cap**2:
            continue
        trial = cur.copy()
        trial.m[i] = proposed[i]
        trial_action = config_action(build_h_eff(g, trial, params.u, params.mu), params.beta)
        d = trial_action - action
        if d <= 0 or uniforms[i] < math.exp(-d):
            cur, action = trial, trial_action
            accepted[i] = True
    return cur, accepted


@dataclass
class ChainResult:
    observables: Observables
    field: AuxFieldConfig
    move_width: float


def run_chain(
    g: LatticeGeometry,
    params: MCParams,
    stream=(),
    init: AuxFieldConfig | None = None,
    omega: np.ndarray | None = None,
) -> ChainResult:
    """Thermalize (adapting the move width) and measure one Markov chain.

    At ``u = 0`` the field decouples from the fermions and is pinned to zero.
    """
    if params.u == 0.0:
        f = AuxFieldConfig.zeros(g.n_sites)
        obs = measure_observables(g, [f.m], 0.0, params.mu, params.beta, acceptance_rate=1.0, omega=omega)
        return ChainResult(obs, f, params.move_width)

    if init is None:
        f = AuxFieldConfig.random(g.n_sites, params.u, sweep_rng(params.seed, (*stream, 1 << 30), 0))
    else:
        f = init.copy()
    width = params.move_width
    sweep = 0
    for _ in range(params.n_therm):
        rate = float(np.mean(sweep_decisions(g, f.m, params, sweep, stream, width=width)))
        sweep += 1
        if params.adapt:
            if rate < TARGET_ACCEPTANCE[0]:
                width = max(1e-3, 0.8 * width)
            elif rate > TARGET_ACCEPTANCE[1]:
                width = min(params.cap, 1.25 * width)

    samples, rates = [], []
    for k in range(params.n_meas):
        rates.append(float(np.mean(sweep_decisions(g, f.m, params, sweep, stream, width=width))))
        sweep += 1
        if (k + 1) % params.measure_every == 0:
            samples.append(f.m.copy())
    if not samples:
        samples = [f.m.copy()]
    acc = float(np.mean(rates)) if rates else float("nan")
    obs = measure_observables(g, samples, params.u, params.mu, params.beta, acceptance_rate=acc, omega=omega)
    logger.debug("chain T=%.4g u=%.3g mu=%.4f: E=%.5f acc=%.2f", params.temperature, params.u, params.mu, obs.energy_mean, acc)
    return ChainResult(obs, f, width)


def density_of(spectra: np.ndarray, beta: float, shift: float) -> float:
    """Mean filling per site for spectra shifted by ``-shift``; spectra hold both spins."""
    n_sites = spectra.shape[1] / 2
    return float(np.mean(np.sum(expit(-beta * (spectra - shift)), axis=1)) / n_sites)


def solve_mu_for_density(spectra: np.ndarray, beta: float, target: float = 1.0) -> float:
    """Shift ``d`` with ``density(spectra - d) = target``, by bisection with bracket widening."""
    lo, hi = float(spectra.min()) - 1.0, float(spectra.max()) + 1.0
    for _ in range(60):
        if density_of(spectra, beta, lo) < target < density_of(spectra, beta, hi):
            break
        lo, hi = lo - (hi - lo), hi + (hi - lo)
    else:
        raise RuntimeError("could not bracket the chemical potential")
    return bisect(lambda d: density_of(spectra, beta, d) - target, lo, hi, xtol=1e-12)


def tune_mu_chain(
    g: LatticeGeometry, params: MCParams, tol_n: float = 0.01, max_iter: int = 8, stream=(), mu0: float | None = None
) -> tuple[float, ChainResult]:
    """Iterate sample-then-resolve until the measured density is within ``tol_n`` of one.

    Spectra sampled at the current ``mu`` are shifted rigidly to solve for the
    next ``mu``; the chain is then re-run at that value.
    """
    mu = 0.5 * params.u if mu0 is None else mu0
    init = None
    for it in range(max_iter):
        res = run_chain(g, replace(params, mu=mu), stream=(*stream, 7919, it), init=init)
        n = res.observables.density_mean
        logger.debug("mu iteration %d: mu=%.6f density=%.5f", it, mu, n)
        if abs(n - 1.0) <= tol_n:
            return mu, res
        spectra = res.observables.spectra + mu
        mu = solve_mu_for_density(spectra, params.beta)
        init = res.field
    raise RuntimeError(f"half filling not reached after {max_iter} iterations (last density {n:.4f})")


def tune_mu_half_filling(g: LatticeGeometry, params: MCParams, tol_n: float = 0.01, stream=()) -> float:
    return tune_mu_chain(g, params, tol_n=tol_n, stream=stream)[0]
