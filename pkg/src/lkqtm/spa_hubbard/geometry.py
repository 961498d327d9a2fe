"""Real-space Lieb-kagome lattice with periodic boundaries.

Site ``i = 3 * (x * l + y) + s`` with cell ``(x, y)`` and sublattice ``s``
(0 = A at the cell origin, 1 = B at ``a1/2``, 2 = C at ``a2/2``).  Every bond joins
sites half a lattice vector apart:

* A-B along ``+-a1/2`` and A-C along ``+-a2/2`` with ``t = 1``;
* B-C along ``+-(a1 - a2)/2`` with ``t1_ac`` and along ``+-(a1 + a2)/2`` with ``t2_ac``.

Hopping matrix elements are ``-t``, so the ``m = 0``, ``U = 0`` spectrum equals the
Bloch bands of :mod:`lkqtm.lattice_bands` on the ``l x l`` momentum mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lattice_bands import DomainError, StrainParams, lattice_vectors, strain_hoppings

SUBLATTICE_LABELS = ("A", "B", "C")


@dataclass(frozen=True)
class LatticeGeometry:
    l: int
    n_basis: int
    sublattice: np.ndarray
    cell: np.ndarray
    positions: np.ndarray
    nn_bonds: np.ndarray
    ac_bonds: np.ndarray
    ac_hoppings: np.ndarray
    params: StrainParams | None = None
    periodic: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return len(self.sublattice)

    @property
    def n_cells(self) -> int:
        return self.n_sites // self.n_basis

    @property
    def cell_positions(self) -> np.ndarray:
        """Unit-cell origin of every site; used for structure factors."""
        if self.params is None:
            return np.zeros((self.n_sites, 2))
        a1, a2 = lattice_vectors(self.params.theta)
        return self.cell[:, :1] * a1 + self.cell[:, 1:] * a2

    def bonds(self):
        """Iterate ``(i, j, t)`` over all bonds, nearest-neighbour first."""
        for i, j in self.nn_bonds:
            yield int(i), int(j), 1.0
        for (i, j), t in zip(self.ac_bonds, self.ac_hoppings):
            yield int(i), int(j), float(t)

    def coordination(self) -> np.ndarray:
        z = np.zeros(self.n_sites, dtype=int)
        for i, j, _ in self.bonds():
            z[i] += 1
            z[j] += 1
        return z

    def hopping_matrix(self) -> np.ndarray:
        if "hop" not in self._cache:
            h = np.zeros((self.n_sites, self.n_sites))
            for i, j, t in self.bonds():
                h[i, j] -= t
                h[j, i] -= t
            h.setflags(write=False)
            self._cache["hop"] = h
        return self._cache["hop"]

    def cluster(self, site: int, cluster_l: int) -> np.ndarray:
        """Sorted site indices of the ``cluster_l x cluster_l`` cells around ``site``.

        With ``cluster_l >= l`` the cluster is the whole lattice in global order.
        """
        if cluster_l >= self.l:
            return np.arange(self.n_sites)
        cx, cy = self.cell[site]
        offsets = np.arange(cluster_l) - (cluster_l - 1) // 2
        xs = (cx + offsets) % self.l
        ys = (cy + offsets) % self.l
        cells = (xs[:, None] * self.l + ys[None, :]).ravel()
        sites = (cells[:, None] * self.n_basis + np.arange(self.n_basis)).ravel()
        return np.sort(sites)

    def cluster_table(self, cluster_l: int) -> np.ndarray:
        key = ("clusters", min(cluster_l, self.l))
        if key not in self._cache:
            self._cache[key] = np.stack([self.cluster(i, cluster_l) for i in range(self.n_sites)])
        return self._cache[key]


def build_geometry(l: int, p: StrainParams) -> LatticeGeometry:
    if int(l) != l or l < 2 or l % 2:
        raise DomainError(f"linear size l must be an even integer >= 2, got {l!r}")
    l = int(l)
    hop = strain_hoppings(p)
    a1, a2 = lattice_vectors(p.theta)

    def idx(x, y, s):
        return 3 * ((x % l) * l + (y % l)) + s

    n = 3 * l * l
    sub = np.tile(np.arange(3), l * l)
    cells = np.repeat(np.array([(x, y) for x in range(l) for y in range(l)]), 3, axis=0)
    offsets = np.array([[0.0, 0.0], 0.5 * a1, 0.5 * a2])
    pos = cells[:, :1] * a1 + cells[:, 1:] * a2 + offsets[sub]

    nn, ac, ac_t = [], [], []
    for x in range(l):
        for y in range(l):
            a = idx(x, y, 0)
            nn += [(a, idx(x, y, 1)), (a, idx(x - 1, y, 1)), (a, idx(x, y, 2)), (a, idx(x, y - 1, 2))]
            b = idx(x, y, 1)
            ac += [(b, idx(x, y, 2)), (b, idx(x + 1, y - 1, 2)), (b, idx(x + 1, y, 2)), (b, idx(x, y - 1, 2))]
            ac_t += [hop.t1_ac, hop.t1_ac, hop.t2_ac, hop.t2_ac]
    assert len(pos) == n
    return LatticeGeometry(
        l=l,
        n_basis=3,
        sublattice=sub,
        cell=cells,
        positions=pos,
        nn_bonds=np.array(nn, dtype=np.int64),
        ac_bonds=np.array(ac, dtype=np.int64),
        ac_hoppings=np.array(ac_t),
        params=p,
    )


def dimer_geometry(t: float = 1.0) -> LatticeGeometry:
    """Two sites joined by one bond in a single cell; a toy for exact-enumeration checks."""
    return LatticeGeometry(
        l=1,
        n_basis=2,
        sublattice=np.array([0, 1]),
        cell=np.zeros((2, 2), dtype=int),
        positions=np.array([[0.0, 0.0], [0.5, 0.0]]),
        nn_bonds=np.zeros((0, 2), dtype=np.int64),
        ac_bonds=np.array([[0, 1]], dtype=np.int64),
        ac_hoppings=np.array([t]),
    )
