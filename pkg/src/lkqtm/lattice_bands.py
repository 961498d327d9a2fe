"""Strain-parametrized tight-binding bands of the Lieb-kagome line-graph lattice.

The lattice has a three-site basis (A, B, C).  A strain angle ``theta`` moves the
geometry continuously from the Lieb limit (``theta = pi/2``) to the kagome limit
(``theta = 2*pi/3``); the two inequivalent B-C bonds carry exponentially strained
hoppings ``t1_ac`` and ``t2_ac``.

Energies are in units of the nearest-neighbour hopping ``t = 1``.  The chemical
potential is not part of the Bloch matrix: a uniform shift cancels in every
partition-function ratio and energy difference used downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

THETA_LIEB = math.pi / 2
THETA_KAGOME = 2 * math.pi / 3

# float slack so that 2*pi/3 and pi/2 computed in double precision are accepted
_THETA_SLACK = 1e-12
_P_FLOOR = 1e-30


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


@dataclass(frozen=True)
class StrainParams:
    """Strain angle (radians) and strain-decay rate of the line-graph lattice."""

    theta: float
    eta_strain: float = 8.0

    def __post_init__(self):
        theta = float(self.theta)
        if not np.isfinite(theta) or not (
            THETA_LIEB - _THETA_SLACK <= theta <= THETA_KAGOME + _THETA_SLACK
        ):
            raise DomainError(f"theta={theta!r} outside [pi/2, 2pi/3]")
        if not np.isfinite(self.eta_strain) or self.eta_strain <= 0:
            raise DomainError(f"eta_strain must be positive, got {self.eta_strain!r}")


@dataclass(frozen=True)
class HoppingSet:
    t: float
    t1_ac: float
    t2_ac: float


class Momentum(NamedTuple):
    kx: np.ndarray | float
    ky: np.ndarray | float


class BlochEntries(NamedTuple):
    """Off-diagonal entries of the 3x3 Bloch matrix (A-B, A-C, B-C)."""

    a: np.ndarray | float
    b: np.ndarray | float
    c: np.ndarray | float


def strain_hoppings(p: StrainParams) -> HoppingSet:
    """Strained hoppings ``exp[eta (1 - 2 cos(theta/2))]`` and ``exp[eta (1 - 2 sin(theta/2))]``."""
    half = 0.5 * p.theta
    t1 = math.exp(p.eta_strain * (1.0 - 2.0 * math.cos(half)))
    t2 = math.exp(p.eta_strain * (1.0 - 2.0 * math.sin(half)))
    return HoppingSet(t=1.0, t1_ac=t1, t2_ac=t2)


def lattice_vectors(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Direct lattice vectors ``a1 = (1, 0)`` and ``a2 = (-cos theta, sin theta)``."""
    return np.array([1.0, 0.0]), np.array([-math.cos(theta), math.sin(theta)])


def reciprocal_vectors(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Reciprocal vectors with ``a_i . b_j = 2 pi delta_ij``."""
    a1, a2 = lattice_vectors(theta)
    b = 2 * math.pi * np.linalg.inv(np.array([a1, a2])).T
    return b[0], b[1]


def bloch_entries(k, p: StrainParams) -> BlochEntries:
    """Entries of the Bloch Hamiltonian at momentum ``k`` (vectorized over ``k``).

    Every bond of the lattice sits at half a lattice vector, so each entry is a
    cosine of ``k . d / 2`` with ``d`` one of ``a1``, ``a2``, ``a1 - a2``, ``a1 + a2``.
    The B-C entry carries two bonds per direction with hoppings ``t1_ac`` and
    ``t2_ac``, i.e. ``c = -2 t1 cos(k.(a1-a2)/2) - 2 t2 cos(k.(a1+a2)/2)``, the same
    per-bond normalization as the A-B and A-C entries.
    """
    kx, ky = (np.asarray(x, dtype=float) for x in k)
    hop = strain_hoppings(p)
    cos_t, sin_t = math.cos(p.theta), math.sin(p.theta)
    a = -2.0 * np.cos(0.5 * kx)
    b = -2.0 * np.cos(-0.5 * kx * cos_t + 0.5 * ky * sin_t)
    c = -2.0 * hop.t1_ac * np.cos(0.5 * kx * (1 + cos_t) - 0.5 * ky * sin_t) - 2.0 * hop.t2_ac * np.cos(
        0.5 * kx * (1 - cos_t) + 0.5 * ky * sin_t
    )
    return BlochEntries(a, b, c)


def bloch_matrix(e: BlochEntries) -> np.ndarray:
    """Stack of real symmetric matrices ``[[0, a, b], [a, 0, c], [b, c, 0]]``, shape ``(..., 3, 3)``."""
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in e))
    h = np.zeros(a.shape + (3, 3))
    h[..., 0, 1] = h[..., 1, 0] = a
    h[..., 0, 2] = h[..., 2, 0] = b
    h[..., 1, 2] = h[..., 2, 1] = c
    return h


def band_energies_analytic(e: BlochEntries) -> np.ndarray:
    """Closed-form band energies, sorted ascending along the last axis.

    The characteristic polynomial is ``x^3 - P x - Q`` with ``P = a^2 + b^2 + c^2``
    and ``Q = 2abc``; its roots follow from the trigonometric (Viete) solution
    with amplitude ``2 sqrt(P/3)``.  Accuracy is at machine precision except within
    a gap ``g`` of a degeneracy, where root errors grow like ``eps * P / g``
    (``sqrt(eps)`` at an exact double root).
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in e))
    p = a * a + b * b + c * c
    safe_p = np.where(p > _P_FLOOR, p, 1.0)
    arg = 3.0 * math.sqrt(3.0) * a * b * c / safe_p**1.5
    phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    amp = np.where(p > _P_FLOOR, 2.0 * np.sqrt(p / 3.0), 0.0)
    shifts = 2.0 * math.pi * np.arange(3) / 3.0
    roots = amp[..., None] * np.cos(phi[..., None] - shifts)
    return np.sort(roots, axis=-1)


def band_energies_numeric(e: BlochEntries) -> np.ndarray:
    """Band energies from a symmetric eigensolver; independent check of the closed form."""
    return np.linalg.eigvalsh(bloch_matrix(e))


@dataclass(frozen=True)
class BZGrid:
    """Uniform ``m x m`` sampling of the doubled reciprocal cell spanned by ``2 b1, 2 b2``.

    The Bloch matrix has half-vector phases, so its period is ``2 b_i``; the
    doubled cell holds every eigenvalue an equal number of times.
    """

    m: int
    kx: np.ndarray
    ky: np.ndarray
    weights: np.ndarray
    cell_area: float

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.kx, self.ky], axis=-1)


def build_bz_grid(p: StrainParams, m: int) -> BZGrid:
    if int(m) != m or m < 2:
        raise DomainError(f"grid size m must be an integer >= 2, got {m!r}")
    m = int(m)
    b1, b2 = reciprocal_vectors(p.theta)
    u = np.arange(m) / m
    uu, vv = np.meshgrid(u, u, indexing="ij")
    k = 2.0 * (uu[..., None] * b1 + vv[..., None] * b2)
    area = abs(float(np.linalg.det(np.array([2 * b1, 2 * b2]))))
    return BZGrid(
        m=m,
        kx=k[..., 0].ravel(),
        ky=k[..., 1].ravel(),
        weights=np.full(m * m, 1.0 / (m * m)),
        cell_area=area,
    )


@dataclass(frozen=True)
class BandSpectrum:
    """Band energies ``(K, nbands)`` with per-point quadrature weights ``(K,)`` summing to 1."""

    energies: np.ndarray
    weights: np.ndarray
    params: StrainParams | None = None
    grid_m: int | None = None

    def __post_init__(self):
        if self.energies.ndim != 2 or self.energies.shape[0] != self.weights.shape[0]:
            raise DomainError("energies must be (K, nbands) with K matching weights")
        if self.energies.size == 0:
            raise DomainError("empty spectrum")

    @classmethod
    def from_levels(cls, levels, weights=None) -> "BandSpectrum":
        """Spectrum from explicit levels; a 1-D ``levels`` is one k-point carrying all levels."""
        e = np.atleast_1d(np.asarray(levels, dtype=float))
        if e.ndim == 1:
            e = e[None, :]
        w = np.full(e.shape[0], 1.0 / e.shape[0]) if weights is None else np.asarray(weights, float)
        return cls(energies=e, weights=w)

    def shifted(self, delta: float) -> "BandSpectrum":
        return BandSpectrum(self.energies + delta, self.weights, self.params, self.grid_m)


def band_spectrum(p: StrainParams, m: int = 200, method: str = "analytic") -> BandSpectrum:
    """Band energies of all three bands on the ``m x m`` Brillouin-zone grid."""
    grid = build_bz_grid(p, m)
    entries = bloch_entries((grid.kx, grid.ky), p)
    if method == "analytic":
        e = band_energies_analytic(entries)
    elif method == "numeric":
        e = band_energies_numeric(entries)
    else:
        raise DomainError(f"unknown method {method!r}")
    return BandSpectrum(energies=e, weights=grid.weights, params=p, grid_m=m)
