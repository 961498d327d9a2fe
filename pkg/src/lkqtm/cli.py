"""Command-line entry point: ``lkqtm <subcommand> ...``.

Exit status is 0 on success, 2 for invalid input or configuration and 3 when a
result breaks a thermodynamic identity.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sweeps
from .lattice_bands import (
    THETA_KAGOME,
    THETA_LIEB,
    DomainError,
    StrainParams,
    band_energies_analytic,
    bloch_entries,
    band_spectrum,
    build_bz_grid,
)
from .spa_hubbard.geometry import build_geometry
from .spa_hubbard.interacting import MEASURES
from .spa_hubbard.montecarlo import MCParams, run_chain, tune_mu_chain
from .spa_hubbard.observables import momentum_mesh
from .stirling_cycle import CycleSpec, InvariantViolation, run_cycle
from .thermo import StatisticsMode, thermo_table

logger = logging.getLogger("lkqtm")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


class ConfigError(ValueError):
    pass


_ANGLE_RE = re.compile(r"^\s*([0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


def angle(text: str) -> float:
    """Angle in radians; also accepts ``lieb``, ``kagome`` and forms like ``2pi/3``."""
    named = {"lieb": THETA_LIEB, "kagome": THETA_KAGOME}
    if text.strip().lower() in named:
        return named[text.strip().lower()]
    m = _ANGLE_RE.match(text.lower())
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else repr(float(v)) for v in r])
    return buf.getvalue()


def _mc_from_args(args) -> MCParams:
    return MCParams(
        beta=1.0,
        u=0.0,
        n_therm=args.n_therm,
        n_meas=args.n_meas,
        cluster_l=args.cluster_l,
        move_width=args.move_width,
        seed=args.seed,
        measure_every=args.measure_every,
    )


def cmd_bands(args) -> None:
    p = StrainParams(args.theta, args.eta)
    grid = build_bz_grid(p, args.grid)
    k = grid.points
    e = band_energies_analytic(bloch_entries((k[:, 0], k[:, 1]), p))
    _emit(_csv_text(["kx", "ky", "e1", "e2", "e3"], np.column_stack([k, e])), args.out)


def cmd_thermo(args) -> None:
    s = band_spectrum(StrainParams(args.theta, args.eta), args.grid)
    temps = np.linspace(args.tmin, args.tmax, args.steps)
    pts = thermo_table(s, temps, StatisticsMode(args.mode))
    rows = [(p.temperature, p.ln_z, p.internal_energy, p.entropy, p.free_energy) for p in pts]
    _emit(_csv_text(["T", "lnZ", "U", "S", "F"], rows), args.out)


def cmd_cycle(args) -> None:
    spec = CycleSpec(args.theta1, args.theta2, args.th, args.tc, args.eta, args.mode)
    res = run_cycle(spec, args.grid)
    _emit(json.dumps(res.as_dict(), indent=2) + "\n", args.out)


def cmd_mode_diagram(args) -> None:
    grid = sweeps.mode_diagram(args.th, args.tc, args.steps, args.eta, args.grid, args.mode, threads=args.threads)
    _emit(grid.to_csv(), args.out)


def cmd_temp_map(args) -> None:
    grid = sweeps.temp_map(
        args.theta1, args.theta2, (args.tmin, args.tmax), args.steps, args.eta, args.grid, args.mode, threads=args.threads
    )
    _emit(grid.to_csv(), args.out)


def _u_values(args) -> list[float]:
    if args.u_list:
        return [float(x) for x in args.u_list.split(",")]
    n = int(round((args.umax - args.umin) / args.ustep)) + 1
    return list(np.round(args.umin + args.ustep * np.arange(n), 12))


def cmd_u_sweep(args) -> None:
    rows = sweeps.u_sweep(
        args.theta1,
        args.theta2,
        args.th,
        args.tc,
        _u_values(args),
        _mc_from_args(args),
        l=args.l,
        eta_strain=args.eta,
        t_max=args.t_max,
        threads=args.threads,
        measure=args.measure,
    )
    _emit(sweeps.u_sweep_csv(rows), args.out)


def cmd_interacting_mode_diagram(args) -> None:
    grid = sweeps.interacting_mode_diagram(
        args.theta1,
        args.theta2,
        args.u,
        (args.tmin, args.tmax),
        _mc_from_args(args),
        steps=args.steps,
        l=args.l,
        eta_strain=args.eta,
        t_max=args.t_max,
        threads=args.threads,
        measure=args.measure,
    )
    _emit(grid.to_csv(), args.out)


SPA_KEYS = {
    "l": int,
    "theta": angle,
    "eta": float,
    "u": float,
    "t_list": lambda s: [float(x) for x in s.split(",") if x.strip()],
    "n_therm": int,
    "n_meas": int,
    "cluster_l": int,
    "seed": int,
    "out_dir": str,
    "mu": float,
    "move_width": float,
    "measure_every": int,
}
SPA_REQUIRED = ("l", "theta", "u", "t_list")


def read_spa_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments allowed)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text()
        parser.read_string("[spa]\n" + text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = {}
    for key, raw in parser["spa"].items():
        if key not in SPA_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            cfg[key] = SPA_KEYS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    missing = [k for k in SPA_REQUIRED if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    return cfg


def cmd_spa_run(args) -> None:
    cfg = read_spa_config(args.config)
    out_dir = Path(args.out or cfg.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    g = build_geometry(cfg["l"], StrainParams(cfg["theta"], cfg.get("eta", 8.0)))
    base = MCParams(
        beta=1.0,
        u=cfg["u"],
        mu=cfg.get("mu", 0.5 * cfg["u"]),
        n_therm=cfg.get("n_therm", 200),
        n_meas=cfg.get("n_meas", 100),
        cluster_l=cfg.get("cluster_l", 4),
        move_width=cfg.get("move_width", 0.5),
        seed=cfg.get("seed", args.seed),
        measure_every=cfg.get("measure_every", 1),
    )
    qx, qy = momentum_mesh(g)
    obs_rows, sq_rows, dos_rows = [], [], []
    for k, t in enumerate(cfg["t_list"]):
        if not t > 0:
            raise ConfigError(f"temperatures must be positive, got {t}")
        params = replace(base, beta=1.0 / t)
        if "mu" in cfg:
            obs = run_chain(g, params, stream=(k,)).observables
        else:
            _, res = tune_mu_chain(g, params, stream=(k,))
            obs = res.observables
        nc = g.n_cells
        obs_rows.append((t, obs.energy_mean / nc, obs.energy_stderr / nc, obs.density_mean, obs.acceptance_rate, obs.mu))
        sq_rows += [(t, x, y, s) for x, y, s in zip(qx.ravel(), qy.ravel(), obs.structure_factor.ravel())]
        dos_rows += [(t, w, r) for w, r in zip(obs.dos_omega, obs.dos)]
    (out_dir / "observables.csv").write_text(
        _csv_text(["T", "energy", "stderr", "density", "acceptance", "mu"], obs_rows)
    )
    (out_dir / "sq.csv").write_text(_csv_text(["T", "qx", "qy", "S"], sq_rows))
    (out_dir / "dos.csv").write_text(_csv_text(["T", "omega", "rho"], dos_rows))


def _add_mc_args(p) -> None:
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--n-therm", type=int, default=150)
    p.add_argument("--n-meas", type=int, default=150)
    p.add_argument("--measure-every", type=int, default=2)
    p.add_argument("--cluster-l", type=int, default=2)
    p.add_argument("--move-width", type=float, default=0.5)
    p.add_argument("--t-max", type=float, default=sweeps.T_MAX_DEFAULT)
    p.add_argument("--measure", choices=MEASURES, default="flat", help="normalization of the auxiliary-field measure")


def _add_global_args(p, default) -> None:
    p.add_argument("--threads", type=int, default=1 if default is None else default, help="worker processes for sweeps")
    p.add_argument("--seed", type=int, default=0 if default is None else default, help="master random seed")
    p.add_argument("--out", default=default, help="output file (directory for spa-run); stdout if omitted")
    p.add_argument("-v", "--verbose", action="store_true", default=False if default is None else default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lkqtm", description="Stirling-cycle thermal machines on the strained Lieb-kagome lattice")
    _add_global_args(ap, None)
    # the same flags are accepted after the subcommand; there they override
    common = argparse.ArgumentParser(add_help=False)
    _add_global_args(common, argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, parents=[common])

    modes = [m.value for m in StatisticsMode]

    p = add("bands", help="band energies on the Brillouin-zone grid")
    p.add_argument("--theta", type=angle, required=True)
    p.add_argument("--eta", type=float, default=8.0)
    p.add_argument("--grid", type=int, default=101)
    p.set_defaults(func=cmd_bands)

    p = add("thermo", help="lnZ, U, S, F versus temperature")
    p.add_argument("--theta", type=angle, required=True)
    p.add_argument("--eta", type=float, default=8.0)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--mode", choices=modes, default="boltzmann")
    p.add_argument("--grid", type=int, default=200)
    p.set_defaults(func=cmd_thermo)

    p = add("cycle", help="one non-interacting Stirling cycle as JSON")
    p.add_argument("--theta1", type=angle, required=True)
    p.add_argument("--theta2", type=angle, required=True)
    p.add_argument("--th", type=float, required=True)
    p.add_argument("--tc", type=float, required=True)
    p.add_argument("--eta", type=float, default=8.0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--mode", choices=modes, default="boltzmann")
    p.set_defaults(func=cmd_cycle)

    p = add("mode-diagram", help="operating modes over (theta1, theta2)")
    p.add_argument("--th", type=float, required=True)
    p.add_argument("--tc", type=float, required=True)
    p.add_argument("--steps", type=int, default=61)
    p.add_argument("--eta", type=float, default=8.0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--mode", choices=modes, default="boltzmann")
    p.set_defaults(func=cmd_mode_diagram)

    p = add("temp-map", help="operating modes over (T_h, T_c)")
    p.add_argument("--theta1", type=angle, default=THETA_KAGOME)
    p.add_argument("--theta2", type=angle, default=THETA_LIEB)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=61)
    p.add_argument("--eta", type=float, default=8.0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--mode", choices=modes, default="boltzmann")
    p.set_defaults(func=cmd_temp_map)

    p = add("u-sweep", help="interacting engine efficiency versus U")
    p.add_argument("--theta1", type=angle, default=THETA_KAGOME)
    p.add_argument("--theta2", type=angle, default=THETA_LIEB)
    p.add_argument("--th", type=float, default=0.5)
    p.add_argument("--tc", type=float, default=0.3)
    p.add_argument("--umin", type=float, default=0.5)
    p.add_argument("--umax", type=float, default=9.0)
    p.add_argument("--ustep", type=float, default=0.5)
    p.add_argument("--u-list", default=None, help="comma-separated U values (overrides the range)")
    p.add_argument("--eta", type=float, default=8.0)
    _add_mc_args(p)
    p.set_defaults(func=cmd_u_sweep)

    p = add("spa-run", help="auxiliary-field Monte Carlo from a key=value config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_spa_run)

    p = add("interacting-mode-diagram", help="interacting operating modes over (T_h, T_c)")
    p.add_argument("--theta1", type=angle, default=THETA_KAGOME)
    p.add_argument("--theta2", type=angle, default=THETA_LIEB)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--tmin", type=float, default=0.05)
    p.add_argument("--tmax", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=13)
    p.add_argument("--eta", type=float, default=8.0)
    _add_mc_args(p)
    p.set_defaults(func=cmd_interacting_mode_diagram)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1 or args.seed < 0:
        logger.error("--threads must be >= 1 and --seed >= 0")
        return EXIT_CONFIG
    try:
        args.func(args)
    except InvariantViolation as exc:
        logger.error("invariant violation: %s", exc)
        return EXIT_INVARIANT
    except (DomainError, ConfigError, ValueError, KeyError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
