"""Measurements on sampled auxiliary-field configurations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from ..lattice_bands import DomainError, reciprocal_vectors
from .geometry import LatticeGeometry
from .hamiltonian import PAULI, fermion_log_trace, h_eff_matrix, stiffness

DOS_WIDTH = 0.05


@dataclass(frozen=True)
class ConfigMeasurement:
    spectrum: np.ndarray
    energy: float
    thermo_energy: float
    density: float
    action: float


def measure_config(g: LatticeGeometry, m: np.ndarray, u: float, mu: float, beta: float) -> ConfigMeasurement:
    """Fermionic observables of one configuration.

    ``energy`` is ``sum_n E_n f(E_n) + stiffness``.  ``thermo_energy`` replaces the
    stiffness by ``(U/4) sum_i m_i . <sigma_i>``; the two differ by the classical
    equipartition of the auxiliary field, and only the latter is ``-d ln Z / d beta``
    for the Gaussian-normalized field measure.
    """
    h = h_eff_matrix(g, m, u, mu)
    evals, evecs = scipy.linalg.eigh(h, driver="evr", check_finite=False)
    occ = expit(-beta * evals)
    band = float(np.sum(evals * occ))
    stiff = stiffness(m, u)
    n = g.n_sites
    if u != 0.0:
        v = evecs.reshape(n, 2, 2 * n)
        rho = np.einsum("iam,ibm->iab", v * occ, v.conj(), optimize=True)
        spin = np.einsum("kab,iba->ik", PAULI, rho).real
        coupling = 0.25 * u * float(np.sum(m * spin))
    else:
        coupling = 0.0
    return ConfigMeasurement(
        spectrum=evals,
        energy=band + stiff,
        thermo_energy=band + coupling,
        density=float(np.sum(occ)) / n,
        action=-fermion_log_trace(evals, beta) + beta * stiff,
    )


def cell_sums(g: LatticeGeometry, m: np.ndarray) -> np.ndarray:
    return m.reshape(g.l, g.l, g.n_basis, 3)


def structure_factor(g: LatticeGeometry, m: np.ndarray) -> np.ndarray:
    """``S(q) = |sum_i m_i exp(i q . R_i)|^2 / N^2`` on the ``l x l`` momentum mesh, ``R_i`` the cell origin."""
    amp = np.fft.fft2(cell_sums(g, m).sum(axis=2), axes=(0, 1))
    return np.sum(np.abs(amp) ** 2, axis=-1) / g.n_sites**2


def sublattice_structure_factor(g: LatticeGeometry, m: np.ndarray) -> np.ndarray:
    """Sublattice-resolved ``S_ab(q)``, shape ``(l, l, nb, nb)``; its sublattice trace sum is ``S(q)``."""
    amp = np.fft.fft2(cell_sums(g, m), axes=(0, 1))
    return np.einsum("xyak,xybk->xyab", amp, amp.conj()).real / g.n_sites**2


def sublattice_peak(series: np.ndarray) -> tuple[tuple[int, int], float, float]:
    """Largest ordering amplitude of per-sample sublattice matrices ``(n, l, l, nb, nb)``.

    At each momentum the largest eigenvalue of the mean ``S_ab(q)`` is the
    structure factor of the best sublattice pattern, which picks up orders whose
    moments cancel inside a cell (e.g. 120 degree states) and are invisible to
    :func:`structure_factor`.  The error comes from projecting every sample on
    the mean eigenvector at the peak.
    """
    series = np.asarray(series)
    lam = np.linalg.eigvalsh(series.mean(axis=0))[..., -1]
    idx = np.unravel_index(int(np.argmax(lam)), lam.shape)
    v = np.linalg.eigh(series.mean(axis=0)[idx])[1][:, -1]
    proj = np.einsum("a,nab,b->n", v.conj(), series[(slice(None), *idx)], v).real
    return (int(idx[0]), int(idx[1])), float(proj.mean()), jackknife_stderr(proj)


def momentum_mesh(g: LatticeGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian ``(qx, qy)`` of the FFT index ``(n1, n2)`` used by :func:`structure_factor`."""
    if g.params is None:
        return np.zeros((g.l, g.l)), np.zeros((g.l, g.l))
    b1, b2 = reciprocal_vectors(g.params.theta)
    n = np.arange(g.l) / g.l
    q = n[:, None, None] * b1 + n[None, :, None] * b2
    return q[..., 0], q[..., 1]


def lorentzian_dos(spectrum: np.ndarray, omega: np.ndarray, gamma: float = DOS_WIDTH) -> np.ndarray:
    """Broadened density of states normalized to one per orbital."""
    x = omega[:, None] - np.asarray(spectrum)[None, :]
    return np.mean(gamma / np.pi / (x * x + gamma * gamma), axis=1)


def jackknife_stderr(samples, n_bins: int = 20) -> float:
    """Jackknife standard error of the mean over contiguous bins (absorbs autocorrelation)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return 0.0
    n_bins = max(2, min(n_bins, x.size))
    usable = (x.size // n_bins) * n_bins
    bins = x[x.size - usable :].reshape(n_bins, -1).mean(axis=1)
    leave_one = (bins.sum() - bins) / (n_bins - 1)
    return float(np.sqrt((n_bins - 1) / n_bins * np.sum((leave_one - leave_one.mean()) ** 2)))


@dataclass
class Observables:
    energy_mean: float
    energy_stderr: float
    thermo_energy_mean: float
    thermo_energy_stderr: float
    density_mean: float
    structure_factor: np.ndarray
    structure_factor_stderr: np.ndarray
    sublattice_structure_factor: np.ndarray
    sublattice_peak: tuple[tuple[int, int], float, float]
    dos_omega: np.ndarray
    dos: np.ndarray
    acceptance_rate: float
    n_samples: int
    spectra: np.ndarray
    energy_series: np.ndarray
    thermo_energy_series: np.ndarray
    action_series: np.ndarray
    mu: float
    beta: float

    def peak(self) -> tuple[tuple[int, int], float, float]:
        """Momentum index, value and error of the largest structure-factor entry."""
        idx = np.unravel_index(int(np.argmax(self.structure_factor)), self.structure_factor.shape)
        return (int(idx[0]), int(idx[1])), float(self.structure_factor[idx]), float(self.structure_factor_stderr[idx])


def default_omega(u: float, n: int = 401) -> np.ndarray:
    w = 6.0 + 0.5 * u
    return np.linspace(-w, w, n)


def measure_observables(
    g: LatticeGeometry,
    samples,
    u: float,
    mu: float,
    beta: float,
    acceptance_rate: float = float("nan"),
    omega: np.ndarray | None = None,
    gamma: float = DOS_WIDTH,
) -> Observables:
    """Average observables over sampled field configurations (each an ``(N, 3)`` array)."""
    samples = [np.asarray(getattr(s, "m", s)) for s in samples]
    if not samples:
        raise DomainError("no samples to measure")
    omega = default_omega(u) if omega is None else np.asarray(omega)
    meas = [measure_config(g, m, u, mu, beta) for m in samples]
    sq = np.stack([structure_factor(g, m) for m in samples])
    sub_series = np.stack([sublattice_structure_factor(g, m) for m in samples])
    energy = np.array([x.energy for x in meas])
    thermo = np.array([x.thermo_energy for x in meas])
    spectra = np.stack([x.spectrum for x in meas])
    return Observables(
        energy_mean=float(energy.mean()),
        energy_stderr=jackknife_stderr(energy),
        thermo_energy_mean=float(thermo.mean()),
        thermo_energy_stderr=jackknife_stderr(thermo),
        density_mean=float(np.mean([x.density for x in meas])),
        structure_factor=sq.mean(axis=0),
        structure_factor_stderr=np.apply_along_axis(jackknife_stderr, 0, sq),
        sublattice_structure_factor=sub_series.mean(axis=0),
        sublattice_peak=sublattice_peak(sub_series),
        dos_omega=omega,
        dos=np.mean([lorentzian_dos(x.spectrum, omega, gamma) for x in meas], axis=0),
        acceptance_rate=acceptance_rate,
        n_samples=len(samples),
        spectra=spectra,
        energy_series=energy,
        thermo_energy_series=thermo,
        action_series=np.array([x.action for x in meas]),
        mu=mu,
        beta=beta,
    )
