"""Quantum Stirling cycle: stroke heats, work, operating mode and Carnot-scaled performance.

Stroke sequence: A->B isothermal at ``t_hot`` (theta1 -> theta2), B->C isochoric
thermalization with the cold bath, C->D isothermal at ``t_cold`` (theta2 -> theta1),
D->A isochoric thermalization with the hot bath.  Positive heat flows into the
working medium; positive work is done on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .lattice_bands import THETA_KAGOME, THETA_LIEB, DomainError, StrainParams, band_spectrum
from .thermo import StatisticsMode, internal_energy, log_partition


class InvariantViolation(RuntimeError):
    """A result broke a thermodynamic identity; indicates a numerical bug."""


class Mode(str, Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    ACCELERATOR = "accelerator"
    HEATER = "heater"
    BOUNDARY = "boundary"
    INVALID = "invalid"


@dataclass(frozen=True)
class CycleSpec:
    theta1: float
    theta2: float
    t_hot: float
    t_cold: float
    eta_strain: float = 8.0
    statistics: StatisticsMode = StatisticsMode.BOLTZMANN

    def __post_init__(self):
        # StrainParams does the range checks on both angles
        StrainParams(self.theta1, self.eta_strain)
        StrainParams(self.theta2, self.eta_strain)
        if not (self.t_cold > 0 and self.t_hot >= self.t_cold):
            raise DomainError(f"need t_hot >= t_cold > 0, got {self.t_hot}, {self.t_cold}")
        object.__setattr__(self, "statistics", StatisticsMode(self.statistics))


@dataclass(frozen=True)
class CycleResult:
    q_ab: float
    q_bc: float
    q_cd: float
    q_da: float
    work: float
    q_hot: float
    q_cold: float
    mode: Mode
    performance: float
    stderr: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("q_ab", "q_bc", "q_cd", "q_da", "work", "q_hot", "q_cold")}
        d["mode"] = self.mode.value
        d["performance"] = None if math.isnan(self.performance) else self.performance
        if self.stderr:
            d["stderr"] = dict(self.stderr)
        return d


def default_tolerance(q_hot: float, q_cold: float, work: float) -> float:
    return 1e-12 * (abs(q_hot) + abs(q_cold) + abs(work) + 1.0)


def classify_mode(q_hot: float, q_cold: float, work: float, tol=None) -> Mode:
    """Operating mode from the signs of ``(Q_h, Q_c, W)``.

    ``tol`` is a scalar or a ``(tol_h, tol_c, tol_w)`` triple; a quantity within
    its tolerance of zero makes the cell a boundary.  Sign patterns forbidden by
    the second law raise :class:`InvariantViolation`.
    """
    if tol is None:
        tol = default_tolerance(q_hot, q_cold, work)
    th, tc, tw = (tol, tol, tol) if isinstance(tol, (int, float)) else tol
    if min(th, tc, tw) < 0:
        raise DomainError("tolerance must be non-negative")
    if abs(q_hot) <= th or abs(q_cold) <= tc or abs(work) <= tw:
        return Mode.BOUNDARY
    signs = (q_hot > 0, q_cold > 0, work > 0)
    table = {
        (True, False, False): Mode.ENGINE,
        (False, True, True): Mode.REFRIGERATOR,
        (True, False, True): Mode.ACCELERATOR,
        (False, False, True): Mode.HEATER,
    }
    try:
        return table[signs]
    except KeyError:
        raise InvariantViolation(
            f"sign pattern Q_h={q_hot:.3e}, Q_c={q_cold:.3e}, W={work:.3e} is not an allowed mode"
        ) from None


def engine_efficiency(q_hot: float, work: float) -> float:
    if not (q_hot > 0 and work < 0):
        raise DomainError("engine efficiency needs Q_h > 0 and W < 0")
    return abs(work) / q_hot


def refrigerator_cop(q_cold: float, work: float) -> float:
    if not (q_cold > 0 and work > 0):
        raise DomainError("refrigerator COP needs Q_c > 0 and W > 0")
    return q_cold / abs(work)


def carnot_bounds(t_hot: float, t_cold: float) -> tuple[float, float]:
    """Carnot efficiency ``1 - Tc/Th`` and Carnot COP ``Tc/(Th - Tc)``."""
    if not (t_hot > t_cold > 0):
        raise DomainError(f"need t_hot > t_cold > 0, got {t_hot}, {t_cold}")
    return 1.0 - t_cold / t_hot, t_cold / (t_hot - t_cold)


def scaled_performance(mode: Mode, q_hot: float, q_cold: float, work: float, t_hot: float, t_cold: float) -> float:
    if mode is Mode.ENGINE:
        return engine_efficiency(q_hot, work) / carnot_bounds(t_hot, t_cold)[0]
    if mode is Mode.REFRIGERATOR:
        return refrigerator_cop(q_cold, work) / carnot_bounds(t_hot, t_cold)[1]
    return math.nan


def assemble_cycle(
    hot1: tuple[float, float],
    hot2: tuple[float, float],
    cold1: tuple[float, float],
    cold2: tuple[float, float],
    t_hot: float,
    t_cold: float,
    tol=None,
) -> CycleResult:
    """Cycle bookkeeping from ``(ln Z, U)`` at (theta1, Th), (theta2, Th), (theta1, Tc), (theta2, Tc)."""
    lz1h, u1h = hot1
    lz2h, u2h = hot2
    lz1c, u1c = cold1
    lz2c, u2c = cold2

    q_ab = -(u2h - u1h + t_hot * lz2h - t_hot * lz1h)
    q_cd = -(u1c - u2c + t_cold * lz1c - t_cold * lz2c)
    q_bc = -(u2c - u2h)
    q_da = -(u1h - u1c)

    ratio_h = lz2h - lz1h
    ratio_c = lz2c - lz1c
    work = -t_hot * ratio_h + t_cold * ratio_c
    q_hot = t_hot * ratio_h + u2h - u1c
    q_cold = -t_cold * ratio_c - u2h + u1c

    scale = max(1.0, abs(q_hot), abs(q_cold), abs(work), abs(q_ab), abs(q_cd), abs(q_bc), abs(q_da))
    work_strokes = q_ab + q_bc + q_cd + q_da
    if abs(work_strokes - work) > 1e-10 * scale:
        raise InvariantViolation(f"stroke-sum work {work_strokes!r} != closed form {work!r}")
    if abs(q_hot + q_cold + work) > 1e-10 * scale:
        raise InvariantViolation("first law violated")

    mode = classify_mode(q_hot, q_cold, work, tol)
    perf = scaled_performance(mode, q_hot, q_cold, work, t_hot, t_cold)
    return CycleResult(q_ab, q_bc, q_cd, q_da, work, q_hot, q_cold, mode, perf)


def run_cycle(spec: CycleSpec, grid_m: int = 200) -> CycleResult:
    """Non-interacting Stirling cycle with Brillouin-zone quadrature on an ``grid_m^2`` grid."""
    s1 = band_spectrum(StrainParams(spec.theta1, spec.eta_strain), grid_m)
    s2 = s1 if spec.theta2 == spec.theta1 else band_spectrum(StrainParams(spec.theta2, spec.eta_strain), grid_m)

    def point(s, t):
        return log_partition(s, t, spec.statistics), internal_energy(s, t, spec.statistics)

    return assemble_cycle(
        point(s1, spec.t_hot),
        point(s2, spec.t_hot),
        point(s1, spec.t_cold),
        point(s2, spec.t_cold),
        spec.t_hot,
        spec.t_cold,
    )


__all__ = [
    "THETA_KAGOME",
    "THETA_LIEB",
    "CycleResult",
    "CycleSpec",
    "InvariantViolation",
    "Mode",
    "assemble_cycle",
    "carnot_bounds",
    "classify_mode",
    "engine_efficiency",
    "refrigerator_cop",
    "run_cycle",
]
