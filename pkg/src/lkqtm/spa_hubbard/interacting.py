"""Interacting thermodynamics and Stirling cycles from auxiliary-field sampling.

The sampled weight only fixes free-energy *differences*, so absolute ``ln Z`` is
built by thermodynamic integration along a descending temperature path.  A
reference ``ln Z_ref(beta)`` with analytic energy ``U_ref`` absorbs most of the
temperature dependence, and only the residual is integrated (trapezoid rule):

    ln Z(beta) = ln Z_ref(beta) - int_0^{beta} [U - U_ref](beta') dbeta'.

The reference is the free-fermion grand potential of the hopping spectrum shifted
by ``U/2 - mu``, corrected site by site with the exact atomic-limit partition
function of the same field theory.  It is exact at ``U = 0``, in the atomic limit
and at ``beta = 0``, so the residual vanishes there and the first trapezoid panel
runs from ``beta = 0`` to ``1 / T_max`` without a sampled point at infinite
temperature.

Two normalizations of the field measure are supported.  ``"flat"`` uses a
temperature-independent measure ``d^3 m``, so ``Z`` is a mixture of Boltzmann
factors of ``H_eff`` (stiffness included), ``ln Z`` is convex in ``beta`` and
``U = <sum_n E_n f_n + (U/4) sum_i m_i^2>`` (``energy_mean``).  Every field carries
a classical ``3/2 T`` per site in this convention, which makes ``U -> 0+``
differ from the decoupled ``U = 0`` point.  ``"gaussian"`` divides by the
Gaussian norm ``(beta U / 4 pi)^{3/2}`` per site: it is continuous at ``U = 0``
and exact in the high-temperature limit, but the normalization subtracts
``3/2 T`` per site from the energy and can drive the heat capacity negative
at low temperature, where the static approximation is poor.  Its energy is the
virial estimator ``<sum_n E_n f_n + (U/4) sum_i m_i . <sigma_i>>``.  The two
conventions differ by ``(3/2) N ln beta`` in ``ln Z``, which is independent of
the strain angle, so cycle work agrees while heats differ.

All extensive outputs are per unit cell and include both spin species.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

from ..lattice_bands import DomainError, StrainParams
from ..stirling_cycle import (
    CycleResult,
    CycleSpec,
    InvariantViolation,
    Mode,
    assemble_cycle,
    carnot_bounds,
    default_tolerance,
)
from .geometry import LatticeGeometry, build_geometry
from .hamiltonian import AuxFieldConfig
from .montecarlo import MCParams, run_chain, tune_mu_chain
from .observables import Observables, jackknife_stderr

logger = logging.getLogger(__name__)

T_MAX_MIN = 2.0
T_MAX_DEFAULT = 8.0
MEASURES = ("flat", "gaussian")


def temperature_path(targets, t_max: float = T_MAX_DEFAULT, max_dbeta: float = 0.125, rel_dbeta: float = 0.3) -> np.ndarray:
    """Descending temperature path from ``t_max`` through every target temperature.

    Steps in ``beta`` are at most ``max(max_dbeta, rel_dbeta * beta)``: fine at high
    temperature where ``U(beta)`` varies fastest, geometric at low temperature
    where it saturates.
    """
    targets = np.unique(np.asarray(targets, dtype=float))
    if targets.size == 0 or np.any(targets <= 0):
        raise DomainError("target temperatures must be positive")
    t_max = max(float(t_max), float(targets.max()))
    knots = np.unique(np.concatenate([[1.0 / t_max], 1.0 / targets]))
    betas = [knots[0]]
    for b1 in knots[1:]:
        b0 = betas[-1]
        while True:
            step = max(max_dbeta, rel_dbeta * b0)
            if b0 + step >= b1 - 1e-12:
                break
            b0 += step
            betas.append(b0)
        betas.append(b1)
    return 1.0 / np.array(betas)


def _atomic_terms(beta: float, u: float, mu: float) -> tuple[float, float]:
    """Exact single-site ``(ln Z, U)`` of the static-field theory, Gaussian-averaged over ``m``."""
    # the singly occupied sector carries <cosh(beta U |m| / 2)> = (1 + beta U / 2) exp(beta U / 4)
    d = 0.5 * u - mu
    x = 0.5 * beta * u
    exps = np.array([0.0, math.log(2.0) - beta * d + 0.5 * x + math.log1p(x), -2.0 * beta * d])
    energies = np.array([0.0, d - 0.25 * u - 0.5 * u / (1.0 + x), 2.0 * d])
    lz = float(np.logaddexp.reduce(exps))
    return lz, float(np.sum(np.exp(exps - lz) * energies))


def reference_thermo(g: LatticeGeometry, u: float, mu: float, beta: float) -> tuple[float, float]:
    """Reference ``(ln Z, U)`` of the whole lattice (not per cell)."""
    eps = np.linalg.eigvalsh(g.hopping_matrix()) + (0.5 * u - mu)
    d = np.array([0.5 * u - mu])
    occ, occ_at = expit(-beta * eps), expit(-beta * d)
    lz_at, e_at = _atomic_terms(beta, u, mu)
    lz = 2.0 * np.sum(np.logaddexp(0.0, -beta * eps)) + g.n_sites * (lz_at - 2.0 * np.logaddexp(0.0, -beta * d[0]))
    e = 2.0 * np.sum(eps * occ) + g.n_sites * (e_at - 2.0 * d[0] * occ_at[0])
    return float(lz), float(e)


def reference_log_partition(g: LatticeGeometry, u: float, mu: float, beta: float) -> float:
    return reference_thermo(g, u, mu, beta)[0]


def trapezoid_weights(beta: np.ndarray) -> np.ndarray:
    """``W`` with ``(W @ y)[k] = int_{beta_0}^{beta_k} y dbeta`` by the trapezoid rule."""
    n = len(beta)
    w = np.zeros((n, n))
    for k in range(1, n):
        h = beta[k] - beta[k - 1]
        w[k:, k - 1] += 0.5 * h
        w[k:, k] += 0.5 * h
    return w


@dataclass
class InteractingThermo:
    temperatures: np.ndarray
    beta: np.ndarray
    ln_z: np.ndarray
    ln_z_stderr: np.ndarray
    internal_energy: np.ndarray
    internal_energy_stderr: np.ndarray
    energy_mean: np.ndarray
    quadrature_error: np.ndarray
    mu: float
    u: float
    estimator: str
    covariance: np.ndarray
    measure: str = "flat"
    observables: list[Observables] = field(default_factory=list, repr=False)

    def index(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.temperatures, t, rtol=1e-12, atol=0.0))
        if hits.size == 0:
            raise KeyError(f"temperature {t} is not on the path")
        return int(hits[0])

    def point(self, t: float) -> tuple[float, float]:
        k = self.index(t)
        return float(self.ln_z[k]), float(self.internal_energy[k])


def interacting_thermo(
    g: LatticeGeometry,
    params: MCParams,
    t_grid,
    estimator: str = "ti",
    tune_mu: bool = True,
    anneal: bool = False,
    stream=(),
    tol_n: float = 0.01,
    measure: str = "flat",
) -> InteractingThermo:
    """Per-cell ``ln Z`` and ``U`` along a descending temperature path.

    ``params.beta`` is ignored; every temperature gets an independent hot-started
    chain unless ``anneal`` seeds it with the previous temperature's field.  With
    ``tune_mu`` the chemical potential is fixed to half filling at the lowest
    temperature and then held along the path.  ``measure`` selects the field
    normalization (see the module notes); the quenched estimator always uses the
    flat one.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(t <= 0):
        raise DomainError("temperature grid needs at least two positive entries")
    if np.any(np.diff(t) >= 0):
        raise DomainError("temperature grid must be strictly descending")
    if estimator == "ti" and t[0] < T_MAX_MIN:
        raise DomainError(f"integration path must start at T_max >= {T_MAX_MIN}, got {t[0]}")
    if estimator not in ("ti", "quenched"):
        raise DomainError(f"unknown estimator {estimator!r}")
    if measure not in MEASURES:
        raise DomainError(f"unknown field measure {measure!r}")

    beta = 1.0 / t
    mu = params.mu
    tuned: dict[int, Observables] = {}
    if tune_mu:
        mu, res = tune_mu_chain(g, replace(params, beta=float(beta[-1])), tol_n=tol_n, stream=(*stream, 99))
        tuned[len(t) - 1] = res.observables
        logger.info("u=%.3g: half filling at mu=%.6f", params.u, mu)

    obs: list[Observables] = []
    init: AuxFieldConfig | None = None
    for k, b in enumerate(beta):
        if k in tuned and not anneal:
            obs.append(tuned[k])
            continue
        res = run_chain(g, replace(params, beta=float(b), mu=mu), stream=(*stream, k), init=init)
        obs.append(res.observables)
        if anneal:
            init = res.field

    nc = g.n_cells
    e_mean = np.array([o.energy_mean for o in obs]) / nc
    n = len(t)
    if estimator == "quenched":
        u_int = e_mean
        u_err = np.array([o.energy_stderr for o in obs]) / nc
        lz = np.array([-np.mean(o.action_series) for o in obs]) / nc
        lz_err = np.array([jackknife_stderr(o.action_series) for o in obs]) / nc
        cov = np.zeros((2 * n, 2 * n))
        cov[np.arange(n), np.arange(n)] = lz_err**2
        cov[n + np.arange(n), n + np.arange(n)] = u_err**2
        quad = np.zeros(n)
    else:
        # classical field degrees of freedom per cell; none when the field decouples
        dof = 1.5 * g.n_sites / nc if params.u != 0.0 else 0.0
        if measure == "flat":
            u_int = e_mean
            u_err = np.array([o.energy_stderr for o in obs]) / nc
            gauss = u_int - dof * t
        else:
            u_int = np.array([o.thermo_energy_mean for o in obs]) / nc
            u_err = np.array([o.thermo_energy_stderr for o in obs]) / nc
            gauss = u_int
        # augmented grid with the exact anchor resid(beta=0) = 0
        b_aug = np.concatenate([[0.0], beta])
        w = trapezoid_weights(b_aug)[1:, 1:]
        ref = np.array([reference_thermo(g, params.u, mu, float(b)) for b in beta]) / nc
        resid = gauss - ref[:, 1]
        lz = ref[:, 0] - w @ resid
        if measure == "flat":
            lz = lz - dof * np.log(beta)
        jac = np.vstack([-w, np.eye(n)])
        cov = jac @ np.diag(u_err**2) @ jac.T
        spline = CubicSpline(b_aug, np.concatenate([[0.0], resid]))
        quad = np.abs(np.array([spline.integrate(0.0, b) for b in beta]) - w @ resid)
        cov[np.arange(n), np.arange(n)] += quad**2
        lz_err = np.sqrt(np.diag(cov)[:n])
    return InteractingThermo(
        temperatures=t,
        beta=beta,
        ln_z=lz,
        ln_z_stderr=lz_err,
        internal_energy=u_int,
        internal_energy_stderr=u_err,
        energy_mean=e_mean,
        quadrature_error=quad,
        mu=mu,
        u=params.u,
        estimator=estimator,
        covariance=cov,
        measure=measure,
        observables=obs,
    )


def _gradient_sigma(parts) -> float:
    """``sqrt(sum g^T C g)`` over independent blocks ``(g, C)``."""
    return math.sqrt(sum(float(gv @ c @ gv) for gv, c in parts))


def cycle_from_thermo(
    th1: InteractingThermo,
    th2: InteractingThermo,
    t_hot: float,
    t_cold: float,
    nsigma: float = 2.0,
    violation_sigma: float = 4.0,
) -> CycleResult:
    """Stirling bookkeeping from two temperature paths, with propagated standard errors.

    Mode tolerances are ``nsigma`` propagated errors (or the float tolerance if larger).
    A sign pattern forbidden by the second law is reported as a boundary cell when
    the implied entropy decrease of the baths is within ``violation_sigma`` errors,
    and raises :class:`InvariantViolation` otherwise.
    """
    if th1.measure != th2.measure:
        raise DomainError("both paths must use the same field measure")
    pts = [th.point(tt) for th in (th1, th2) for tt in (t_hot, t_cold)]
    (lz1h, u1h), (lz1c, u1c), (lz2h, u2h), (lz2c, u2c) = pts

    def grads(th: InteractingThermo, sign: float):
        n = len(th.temperatures)
        kh, kc = th.index(t_hot), th.index(t_cold)

        def vec(lz_h=0.0, lz_c=0.0, e_h=0.0, e_c=0.0):
            gv = np.zeros(2 * n)
            gv[kh] += lz_h
            gv[kc] += lz_c
            gv[n + kh] += e_h
            gv[n + kc] += e_c
            return gv

        # theta2 enters with sign +1 in the ln Z ratios, theta1 with -1
        work = vec(lz_h=-t_hot * sign, lz_c=t_cold * sign)
        q_hot = vec(lz_h=t_hot * sign, e_h=1.0 if sign > 0 else 0.0, e_c=-1.0 if sign < 0 else 0.0)
        q_cold = vec(lz_c=-t_cold * sign, e_h=-1.0 if sign > 0 else 0.0, e_c=1.0 if sign < 0 else 0.0)
        return work, q_hot, q_cold

    g1 = grads(th1, -1.0)
    g2 = grads(th2, +1.0)
    sig = {
        name: _gradient_sigma([(g1[i], th1.covariance), (g2[i], th2.covariance)])
        for i, name in enumerate(("work", "q_hot", "q_cold"))
    }

    work = -t_hot * (lz2h - lz1h) + t_cold * (lz2c - lz1c)
    q_hot = t_hot * (lz2h - lz1h) + u2h - u1c
    q_cold = -t_cold * (lz2c - lz1c) - u2h + u1c
    base = default_tolerance(q_hot, q_cold, work)
    tol = tuple(max(base, nsigma * sig[k]) for k in ("q_hot", "q_cold", "work"))
    corners = ((lz1h, u1h), (lz2h, u2h), (lz1c, u1c), (lz2c, u2c))
    try:
        res = assemble_cycle(*corners, t_hot, t_cold, tol=tol)
    except InvariantViolation:
        # entropy delivered to the baths, -Q_h/T_h - Q_c/T_c, must not be negative
        produced = -q_hot / t_hot - q_cold / t_cold
        sig_s = _gradient_sigma(
            [(-g[1] / t_hot - g[2] / t_cold, th.covariance) for g, th in ((g1, th1), (g2, th2))]
        )
        if produced < -violation_sigma * sig_s:
            raise
        logger.warning(
            "forbidden sign pattern within noise (entropy change %.3g +- %.2g); cell marked boundary", produced, sig_s
        )
        res = assemble_cycle(*corners, t_hot, t_cold, tol=(math.inf, math.inf, math.inf))

    perf_err = math.nan
    if res.mode is Mode.ENGINE:
        ge = [(-g1[0] / q_hot + work * g1[1] / q_hot**2, th1.covariance), (-g2[0] / q_hot + work * g2[1] / q_hot**2, th2.covariance)]
        perf_err = _gradient_sigma(ge) / carnot_bounds(t_hot, t_cold)[0]
    elif res.mode is Mode.REFRIGERATOR:
        gc = [(g1[2] / work - q_cold * g1[0] / work**2, th1.covariance), (g2[2] / work - q_cold * g2[0] / work**2, th2.covariance)]
        perf_err = _gradient_sigma(gc) / carnot_bounds(t_hot, t_cold)[1]
    return replace(res, stderr={**sig, "performance": perf_err})


def interacting_cycle(
    spec: CycleSpec,
    u: float,
    mc: MCParams,
    l: int = 8,
    t_max: float = T_MAX_DEFAULT,
    estimator: str = "ti",
    tune_mu: bool = True,
    stream=(),
    measure: str = "flat",
) -> CycleResult:
    """Interacting Stirling cycle on an ``l x l`` lattice at Hubbard ``u``."""
    path = temperature_path([spec.t_hot, spec.t_cold], t_max=t_max)
    thermos = []
    for i, theta in enumerate((spec.theta1, spec.theta2)):
        g = build_geometry(l, StrainParams(theta, spec.eta_strain))
        thermos.append(
            interacting_thermo(
                g, replace(mc, u=u), path, estimator=estimator, tune_mu=tune_mu, stream=(*stream, i), measure=measure
            )
        )
    return cycle_from_thermo(thermos[0], thermos[1], spec.t_hot, spec.t_cold)
