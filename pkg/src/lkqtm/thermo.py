"""Equilibrium thermodynamics of a band spectrum (k_B = 1).

Two statistics are available.  ``boltzmann`` treats the band levels as the
spectrum of a single particle, ``Z = sum_k w_k sum_j exp(-e_kj / T)``;
``fermi`` is the grand-canonical trace over independent fermionic modes,
``ln Z = sum_k w_k sum_j ln(1 + exp(-e_kj / T))``.  Constant prefactors of the
Brillouin-zone integral are dropped: only ratios of ``Z`` at equal temperature
and differences of ``U`` enter the cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit, logsumexp, xlogy

from .lattice_bands import BandSpectrum, DomainError


class StatisticsMode(str, Enum):
    BOLTZMANN = "boltzmann"
    FERMI = "fermi"


@dataclass(frozen=True)
class ThermalPoint:
    theta: float | None
    temperature: float
    ln_z: float
    internal_energy: float
    entropy: float
    free_energy: float


def _check(spectrum: BandSpectrum, temperature: float) -> None:
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature!r}")
    if spectrum.energies.size == 0:
        raise DomainError("empty spectrum")


def log_partition(spectrum: BandSpectrum, temperature: float, mode=StatisticsMode.BOLTZMANN) -> float:
    _check(spectrum, temperature)
    mode = StatisticsMode(mode)
    x = -spectrum.energies / temperature
    w = spectrum.weights[:, None]
    if mode is StatisticsMode.BOLTZMANN:
        return float(logsumexp(x, b=np.broadcast_to(w, x.shape)))
    return float(np.sum(w * np.logaddexp(0.0, x)))


def internal_energy(spectrum: BandSpectrum, temperature: float, mode=StatisticsMode.BOLTZMANN) -> float:
    """Thermal average energy, equal to ``T^2 d(ln Z)/dT``."""
    _check(spectrum, temperature)
    mode = StatisticsMode(mode)
    e = spectrum.energies
    w = spectrum.weights[:, None]
    if mode is StatisticsMode.BOLTZMANN:
        boltz = w * np.exp(-(e - e.min()) / temperature)
        return float(np.sum(boltz * e) / np.sum(boltz))
    return float(np.sum(w * e * expit(-e / temperature)))


def entropy(spectrum: BandSpectrum, temperature: float, mode=StatisticsMode.BOLTZMANN) -> float:
    mode = StatisticsMode(mode)
    if mode is StatisticsMode.BOLTZMANN:
        return log_partition(spectrum, temperature, mode) + internal_energy(spectrum, temperature, mode) / temperature
    _check(spectrum, temperature)
    x = spectrum.energies / temperature
    occ, hole = expit(-x), expit(x)
    per_mode = -(xlogy(occ, occ) + xlogy(hole, hole))
    return float(np.sum(spectrum.weights[:, None] * per_mode))


def free_energy(spectrum: BandSpectrum, temperature: float, mode=StatisticsMode.BOLTZMANN) -> float:
    return -temperature * log_partition(spectrum, temperature, mode)


def thermal_point(spectrum: BandSpectrum, temperature: float, mode=StatisticsMode.BOLTZMANN) -> ThermalPoint:
    ln_z = log_partition(spectrum, temperature, mode)
    u = internal_energy(spectrum, temperature, mode)
    s = entropy(spectrum, temperature, mode)
    theta = spectrum.params.theta if spectrum.params is not None else None
    return ThermalPoint(
        theta=theta,
        temperature=float(temperature),
        ln_z=ln_z,
        internal_energy=u,
        entropy=s,
        free_energy=-temperature * ln_z,
    )


def thermo_table(spectrum: BandSpectrum, temperatures, mode=StatisticsMode.BOLTZMANN) -> list[ThermalPoint]:
    return [thermal_point(spectrum, float(t), mode) for t in temperatures]
