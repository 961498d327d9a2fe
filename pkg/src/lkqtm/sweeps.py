"""Parameter sweeps over cycle settings, with deterministic CSV emission.

Every sweep is an ordered map over independent tasks, run serially or in a
process pool; results are gathered in input order before anything is written,
so serial and parallel runs produce identical files.
"""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Iterable

import numpy as np

from .lattice_bands import THETA_KAGOME, THETA_LIEB, DomainError, StrainParams, band_spectrum
from .spa_hubbard.geometry import build_geometry
from .spa_hubbard.interacting import T_MAX_DEFAULT, cycle_from_thermo, interacting_thermo, temperature_path
from .spa_hubbard.montecarlo import MCParams
from .stirling_cycle import CycleResult, CycleSpec, Mode, assemble_cycle
from .thermo import StatisticsMode, internal_energy, log_partition

logger = logging.getLogger(__name__)

CSV_HEADER = "# qtm-grid v1"
STDERR_FIELDS = ("q_hot", "q_cold", "work", "performance")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 2:
            raise DomainError(f"axis {self.name!r} needs at least 2 steps, got {self.steps}")
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or self.max < self.min:
            raise DomainError(f"axis {self.name!r} has an invalid range [{self.min}, {self.max}]")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, int(self.steps))


@dataclass
class SweepGrid:
    """Rectangular grid of cycle results; ``cells[i][j]`` sits at ``(axis1[i], axis2[j])``.

    ``None`` marks a cell outside the physical domain (emitted as ``invalid``).
    """

    axis1: Axis
    axis2: Axis
    fixed: dict
    cells: list = field(repr=False)

    def __post_init__(self):
        if len(self.cells) != self.axis1.steps or any(len(row) != self.axis2.steps for row in self.cells):
            raise DomainError("cell array does not match the axis sizes")

    def items(self):
        """Yield ``(coord1, coord2, result_or_None)`` in row-major order."""
        for x, row in zip(self.axis1.values, self.cells):
            for y, cell in zip(self.axis2.values, row):
                yield float(x), float(y), cell

    def modes(self) -> np.ndarray:
        return np.array([[Mode.INVALID.value if c is None else c.mode.value for c in row] for row in self.cells])

    def mode_counts(self) -> dict[str, int]:
        vals, counts = np.unique(self.modes(), return_counts=True)
        return {str(v): int(c) for v, c in zip(vals, counts)}

    def field_array(self, name: str) -> np.ndarray:
        return np.array([[math.nan if c is None else getattr(c, name) for c in row] for row in self.cells])

    def to_csv(self) -> str:
        with_err = any(c is not None and c.stderr for _, _, c in self.items())
        cols = [self.axis1.name, self.axis2.name, "q_hot", "q_cold", "work", "mode", "performance"]
        if with_err:
            cols += [f"stderr_{k}" for k in STDERR_FIELDS]
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        out.write(",".join(cols) + "\n")
        for x, y, c in self.items():
            if c is None:
                vals = [x, y, math.nan, math.nan, math.nan, Mode.INVALID.value, math.nan]
                err = [math.nan] * len(STDERR_FIELDS)
            else:
                vals = [x, y, c.q_hot, c.q_cold, c.work, c.mode.value, c.performance]
                err = [c.stderr.get(k, math.nan) for k in STDERR_FIELDS]
            out.write(",".join(_fmt(v) for v in vals + (err if with_err else [])) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Ordered map; ``threads > 1`` uses a process pool (``fn`` must be picklable)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def cell_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def _thermal_points(theta: float, eta_strain: float, temps, grid_m: int, statistics) -> list[tuple[float, float]]:
    s = band_spectrum(StrainParams(float(theta), eta_strain), grid_m)
    return [(log_partition(s, t, statistics), internal_energy(s, t, statistics)) for t in temps]


def mode_diagram(
    th: float,
    tc: float,
    steps: int = 61,
    eta_strain: float = 8.0,
    grid_m: int = 200,
    statistics=StatisticsMode.BOLTZMANN,
    threads: int = 1,
) -> SweepGrid:
    """Non-interacting cycles over ``(theta1, theta2)`` in ``[pi/2, 2 pi/3]^2`` at fixed baths."""
    CycleSpec(THETA_KAGOME, THETA_LIEB, th, tc, eta_strain, statistics)
    if not th > tc:
        raise DomainError(f"need th > tc, got {th}, {tc}")
    a1 = Axis("theta1", THETA_LIEB, THETA_KAGOME, steps)
    a2 = Axis("theta2", THETA_LIEB, THETA_KAGOME, steps)
    thetas = a1.values
    pts = parallel_map(
        partial(_thermal_points, eta_strain=eta_strain, temps=(th, tc), grid_m=grid_m, statistics=StatisticsMode(statistics)),
        thetas,
        threads,
    )
    cells = [[assemble_cycle(pts[i][0], pts[j][0], pts[i][1], pts[j][1], th, tc) for j in range(steps)] for i in range(steps)]
    fixed = {"th": th, "tc": tc, "eta_strain": eta_strain, "grid_m": grid_m, "statistics": StatisticsMode(statistics).value}
    return SweepGrid(a1, a2, fixed, cells)


def temp_map(
    theta1: float,
    theta2: float,
    t_range: tuple[float, float],
    steps: int = 61,
    eta_strain: float = 8.0,
    grid_m: int = 200,
    statistics=StatisticsMode.BOLTZMANN,
    threads: int = 1,
) -> SweepGrid:
    """Non-interacting cycles over bath temperatures; cells with ``T_h < T_c`` are invalid."""
    lo, hi = t_range
    if not (lo > 0 and hi > lo):
        raise DomainError(f"temperature range must be positive and increasing, got {t_range}")
    CycleSpec(theta1, theta2, hi, lo, eta_strain, statistics)
    a1 = Axis("th", lo, hi, steps)
    a2 = Axis("tc", lo, hi, steps)
    temps = a1.values
    p1, p2 = parallel_map(
        partial(_thermal_points, eta_strain=eta_strain, temps=temps, grid_m=grid_m, statistics=StatisticsMode(statistics)),
        [theta1, theta2],
        threads,
    )
    cells = [
        [
            assemble_cycle(p1[i], p2[i], p1[j], p2[j], temps[i], temps[j]) if temps[i] >= temps[j] else None
            for j in range(steps)
        ]
        for i in range(steps)
    ]
    fixed = {"theta1": theta1, "theta2": theta2, "eta_strain": eta_strain, "grid_m": grid_m, "statistics": StatisticsMode(statistics).value}
    return SweepGrid(a1, a2, fixed, cells)


def _interacting_path(task, l, eta_strain, mc, path, tune_mu, measure):
    theta, u, seed, stream_index = task
    g = build_geometry(l, StrainParams(theta, eta_strain))
    return interacting_thermo(
        g, replace(mc, u=u, seed=seed), path, tune_mu=tune_mu, stream=(stream_index,), measure=measure
    )


@dataclass(frozen=True)
class USweepRow:
    u: float
    cycle: CycleResult
    efficiency: float
    efficiency_stderr: float
    mu1: float
    mu2: float


U_SWEEP_COLUMNS = (
    "u",
    "q_hot",
    "q_cold",
    "work",
    "mode",
    "efficiency",
    "stderr_efficiency",
    "performance",
    "stderr_performance",
    "stderr_q_hot",
    "stderr_q_cold",
    "stderr_work",
    "mu1",
    "mu2",
)


def u_sweep(
    theta1: float,
    theta2: float,
    th: float,
    tc: float,
    u_values,
    mc: MCParams,
    l: int = 8,
    eta_strain: float = 8.0,
    t_max: float = T_MAX_DEFAULT,
    common_random_numbers: bool = True,
    tune_mu: bool = True,
    threads: int = 1,
    measure: str = "flat",
) -> list[USweepRow]:
    """Interacting engine efficiency versus Hubbard ``U``.

    With ``common_random_numbers`` every ``U`` reuses the same random streams, so
    statistical noise is correlated along the curve and its shape is resolved
    more sharply; otherwise point ``k`` uses seed ``seed ^ k``.
    """
    spec = CycleSpec(theta1, theta2, th, tc, eta_strain)
    u_values = [float(u) for u in u_values]
    if not u_values:
        raise DomainError("u_values is empty")
    path = temperature_path([th, tc], t_max=t_max)
    tasks = []
    for k, u in enumerate(u_values):
        seed = mc.seed if common_random_numbers else cell_seed(mc.seed, k)
        for i, theta in enumerate((spec.theta1, spec.theta2)):
            tasks.append((theta, u, seed, i))
    fn = partial(_interacting_path, l=l, eta_strain=eta_strain, mc=mc, path=path, tune_mu=tune_mu, measure=measure)
    thermos = parallel_map(fn, tasks, threads)
    rows = []
    for k, u in enumerate(u_values):
        t1, t2 = thermos[2 * k], thermos[2 * k + 1]
        cyc = cycle_from_thermo(t1, t2, th, tc)
        eff, eff_err = math.nan, math.nan
        if cyc.mode is Mode.ENGINE:
            eff = -cyc.work / cyc.q_hot
            eff_err = cyc.stderr["performance"] * (1.0 - tc / th)
        rows.append(USweepRow(u, cyc, eff, eff_err, t1.mu, t2.mu))
        logger.info("u=%.3g mode=%s efficiency=%.5g +- %.2g", u, cyc.mode.value, eff, eff_err)
    return rows


def u_sweep_csv(rows: list[USweepRow]) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    out.write(",".join(U_SWEEP_COLUMNS) + "\n")
    for r in rows:
        c = r.cycle
        vals = [
            r.u,
            c.q_hot,
            c.q_cold,
            c.work,
            c.mode.value,
            r.efficiency,
            r.efficiency_stderr,
            c.performance,
            c.stderr.get("performance", math.nan),
            c.stderr.get("q_hot", math.nan),
            c.stderr.get("q_cold", math.nan),
            c.stderr.get("work", math.nan),
            r.mu1,
            r.mu2,
        ]
        out.write(",".join(_fmt(v) for v in vals) + "\n")
    return out.getvalue()


def interacting_mode_diagram(
    theta1: float,
    theta2: float,
    u: float,
    t_range: tuple[float, float],
    mc: MCParams,
    steps: int = 13,
    l: int = 8,
    eta_strain: float = 8.0,
    t_max: float = T_MAX_DEFAULT,
    tune_mu: bool = True,
    threads: int = 1,
    measure: str = "flat",
) -> SweepGrid:
    """Interacting cycles over ``(T_h, T_c)``; one integration path per angle serves every cell."""
    lo, hi = t_range
    if not (lo > 0 and hi > lo):
        raise DomainError(f"temperature range must be positive and increasing, got {t_range}")
    CycleSpec(theta1, theta2, hi, lo, eta_strain)
    a1 = Axis("th", lo, hi, steps)
    a2 = Axis("tc", lo, hi, steps)
    temps = a1.values
    path = temperature_path(temps, t_max=t_max)
    # snap the grid temperatures onto the path values so lookups are exact
    temps = np.array([path[np.argmin(np.abs(path - t))] for t in temps])
    fn = partial(_interacting_path, l=l, eta_strain=eta_strain, mc=mc, path=path, tune_mu=tune_mu, measure=measure)
    th1, th2 = parallel_map(fn, [(theta1, u, mc.seed, 0), (theta2, u, mc.seed, 1)], threads)
    cells = [
        [cycle_from_thermo(th1, th2, temps[i], temps[j]) if temps[i] >= temps[j] else None for j in range(steps)]
        for i in range(steps)
    ]
    fixed = {
        "theta1": theta1,
        "theta2": theta2,
        "u": u,
        "l": l,
        "eta_strain": eta_strain,
        "measure": measure,
        "mu1": th1.mu,
        "mu2": th2.mu,
    }
    return SweepGrid(a1, a2, fixed, cells)


def has_rise_dip_rise(values, errors, nsigma: float = 2.0) -> bool:
    """Whether a curve rises to an interior maximum, dips, then rises again, each step significant.

    Looks for indices ``a < i < j < k`` with ``v[i] - v[a]``, ``v[i] - v[j]`` and
    ``v[k] - v[j]`` all exceeding ``nsigma`` times the combined standard error.
    """
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    n = len(v)

    def up(a, b):
        return v[b] - v[a] > nsigma * math.hypot(e[a], e[b])

    for i in range(1, n - 2):
        if not any(up(a, i) for a in range(i)):
            continue
        for j in range(i + 1, n - 1):
            if up(j, i) and any(up(j, k) for k in range(j + 1, n)):
                return True
    return False
