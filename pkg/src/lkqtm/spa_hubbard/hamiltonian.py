"""Spin-fermion Hamiltonian in a static auxiliary-field background.

For a configuration ``{m_i}`` the fermions see

    H_eff = sum_ij h_ij c+_i c_j + (U/2 - mu) sum_i n_i - (U/2) sum_i m_i . sigma_i

plus the classical stiffness ``(U/4) sum_i |m_i|^2``.  The charge field sits at its
half-filling saddle point, which is the uniform ``U/2`` shift.  Orbital index of
site ``i`` and spin ``s`` is ``2 i + s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice_bands import DomainError
from .geometry import LatticeGeometry

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass
class AuxFieldConfig:
    m: np.ndarray
    phi_saddle: np.ndarray

    @classmethod
    def zeros(cls, n_sites: int, u: float = 0.0) -> "AuxFieldConfig":
        return cls(np.zeros((n_sites, 3)), np.full(n_sites, 0.5 * u))

    @classmethod
    def random(cls, n_sites: int, u: float, rng: np.random.Generator, radius: float = 1.0) -> "AuxFieldConfig":
        return cls(uniform_ball(rng, n_sites, radius), np.full(n_sites, 0.5 * u))

    def copy(self) -> "AuxFieldConfig":
        return AuxFieldConfig(self.m.copy(), self.phi_saddle.copy())


def uniform_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """``n`` points drawn uniformly from the 3-ball of the given radius."""
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]


@dataclass
class EffectiveHamiltonian:
    matrix: np.ndarray
    spectrum: np.ndarray
    stiffness: float

    @property
    def dimension(self) -> int:
        return len(self.spectrum)


def stiffness(m: np.ndarray, u: float) -> float:
    return 0.25 * u * float(np.sum(m * m))


def zeeman_block(m_i: np.ndarray, u: float) -> np.ndarray:
    """``-(U/2) m_i . sigma`` as a 2x2 matrix."""
    return -0.5 * u * np.tensordot(m_i, PAULI, axes=1)


def h_eff_matrix(g: LatticeGeometry, m: np.ndarray, u: float, mu: float) -> np.ndarray:
    n = g.n_sites
    if m.shape != (n, 3):
        raise DomainError(f"field shape {m.shape} does not match {n} sites")
    h = np.kron(g.hopping_matrix(), np.eye(2)).astype(complex)
    h[np.diag_indices(2 * n)] += 0.5 * u - mu
    blocks = -0.5 * u * np.einsum("ia,abc->ibc", m, PAULI)
    for i in range(n):
        h[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] += blocks[i]
    return h


def build_h_eff(g: LatticeGeometry, f: AuxFieldConfig, u: float, mu: float) -> EffectiveHamiltonian:
    h = h_eff_matrix(g, f.m, u, mu)
    return EffectiveHamiltonian(matrix=h, spectrum=np.linalg.eigvalsh(h), stiffness=stiffness(f.m, u))


def fermion_log_trace(spectrum: np.ndarray, beta: float) -> float:
    """``ln Tr exp(-beta H)`` over independent fermion modes, ``sum_n ln(1 + exp(-beta E_n))``."""
    return float(np.sum(np.logaddexp(0.0, -beta * np.asarray(spectrum))))


def config_free_energy(h: EffectiveHamiltonian, beta: float) -> float:
    """Free energy ``F{m}`` whose Boltzmann factor ``exp(-beta F)`` weights the configuration."""
    if not beta > 0:
        raise DomainError("beta must be positive for a finite free energy")
    return -fermion_log_trace(h.spectrum, beta) / beta + h.stiffness


def config_action(h: EffectiveHamiltonian, beta: float) -> float:
    """``beta F{m}``; finite also at ``beta = 0``."""
    return -fermion_log_trace(h.spectrum, beta) + beta * h.stiffness
