"""Command-line front end: ``choquard <command> [--config F] [--seed S] [--out D] [--quiet]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .diagnostics import decay_fit, symmetry_report
from .field import GridError, make_grid
from .fieldio import write_field
from .limit import SolverOptions, dilation_profile, energy_curve, scaling_exponent, solve_ground_state
from .newton import ConvergenceError
from .nonlinearity import Nonlinearity
from .potential import PenalizationSpec, preset
from .riesz import RieszOperator
from .semiclassical import (aggregate_paths, build_initial_guess, default_t_grid,
                            limit_ground_states, make_ansatz, path_profile, profile_distance,
                            solve_penalized, sweep_epsilon)

COMMANDS = ("limit", "curve", "semiclassical", "sweep", "path-profile", "verify")
EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 1, 2, 3

log = logging.getLogger("choquard")


class Context:
    """Model objects resolved from a validated config."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        m = cfg.model
        self.alpha = m.alpha
        self.nl = Nonlinearity.power(m.p) if m.nonlinearity == "power" else Nonlinearity.bl_demo()
        self.nl.validate(m.alpha)
        wells = [vars(w) for w in m.wells] if m.wells else None
        self.pot = preset(m.potential, wells, v_out=m.v_out, bump_power=m.bump_power)
        chk = self.pot.check()
        if not (chk["V1"] and chk["V2"]):
            raise ConfigError(f"model.potential: violates (V1)/(V2): {chk}")
        self.grid = make_grid(cfg.grid.n, cfg.grid.L)
        s = cfg.semiclassical
        self.sc_grid = make_grid(s.n, s.L)
        self.options = SolverOptions(grad_tol=cfg.solver.grad_tol, pohozaev_tol=cfg.solver.pohozaev_tol,
                                     max_iter=cfg.solver.max_iter, tau=cfg.solver.tau)

    def riesz(self, grid) -> RieszOperator:
        m = self.cfg.model
        return RieszOperator(self.alpha, grid, m.zero_mode, m.kappa)

    def local_grid(self):
        """Ground-state window sharing the semiclassical grid spacing."""
        return make_grid(64, 64 * self.sc_grid.spacing / 2)

    def pen(self, epsilon: float) -> PenalizationSpec:
        return PenalizationSpec(epsilon, self.cfg.penalization.mu)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, rows: List[Dict[str, object]]) -> Path:
    with open(path, "w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\r\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: fmt(v) for k, v in row.items()})
    return path


def cmd_limit(ctx: Context, out: Path, seed: int) -> List[Path]:
    cfg = ctx.cfg
    riesz = ctx.riesz(ctx.grid)
    gs = solve_ground_state(cfg.run.a, ctx.nl, riesz, method=cfg.solver.method, options=ctx.options)
    L = ctx.grid.half_length
    fit = decay_fit(gs.U, [(0.0, 0.0, 0.0)], (L / 4, L / 2))
    sym = symmetry_report(gs.U)
    row = {"a": gs.a, "E_a": gs.energy, "pohozaev_resid": gs.pohozaev_resid,
           "grad_resid": gs.grad_resid, "energy_identity_err": gs.energy_identity_error(ctx.alpha),
           "decay_rate": fit.rate, "symmetry_dev": sym.max_deviation, "method": gs.method}
    if gs.pohozaev_resid > cfg.solver.pohozaev_tol:
        raise ConvergenceError(f"Pohozaev residual {gs.pohozaev_resid:.3e} above tolerance")
    log.info("E_a = %.10g, Pohozaev residual %.2e", gs.energy, gs.pohozaev_resid)
    return [write_field(out / "ground_state.chq", gs.U), write_csv(out / "limit.csv", [row])]


def cmd_curve(ctx: Context, out: Path, seed: int) -> List[Path]:
    cfg = ctx.cfg
    curve = energy_curve(cfg.run.a_list, ctx.nl, ctx.riesz(ctx.grid), method=cfg.solver.method,
                         options=ctx.options)
    rows = [{"a": a, "E_a": e} for a, e in curve]
    paths = [write_csv(out / "curve.csv", rows)]
    if ctx.nl.kind == "power" and len(set(cfg.run.a_list)) >= 2:
        a = np.array([r["a"] for r in rows])
        e = np.array([r["E_a"] for r in rows])
        slope = float(np.polyfit(np.log(a), np.log(e), 1)[0])
        expo = scaling_exponent(ctx.nl.p, ctx.alpha)
        paths.append(write_csv(out / "curve_slope.csv", [{"fitted_slope": slope, "exponent": expo,
                                                           "rel_err": abs(slope / expo - 1)}]))
    return paths


def _ansatz(ctx: Context):
    s = ctx.cfg.semiclassical
    gss = limit_ground_states(ctx.pot, ctx.nl, ctx.riesz(ctx.local_grid()), ctx.options)
    return make_ansatz(ctx.pot, gss, s.delta_fraction, s.beta_ratio)


def _t_grid(ctx: Context):
    s = ctx.cfg.semiclassical
    return default_t_grid(s.t_step, s.t_max)


def cmd_semiclassical(ctx: Context, out: Path, seed: int) -> List[Path]:
    cfg = ctx.cfg
    s = cfg.semiclassical
    pen = ctx.pen(cfg.run.epsilon)
    ansatz = _ansatz(ctx)
    profiles = [path_profile(ansatz, pen, i, _t_grid(ctx), ctx.nl, ctx.alpha) for i in range(ctx.pot.k)]
    D, E, E_tilde = aggregate_paths(profiles)
    guess = build_initial_guess(ansatz, pen, ctx.sc_grid)
    sol = solve_penalized(guess, ctx.pot, pen, ctx.nl, ctx.riesz(ctx.sc_grid),
                          grad_tol=cfg.solver.penalized_grad_tol, energy_cap=2 * D,
                          d_ratio=s.d_ratio, decay_annulus=tuple(s.decay_annulus))
    rows = []
    for i in range(ctx.pot.k):
        p = sol.peaks[i]
        px = ["", "", ""] if p is None else list(p)
        rows.append({"epsilon": pen.epsilon, "well": i, "peak_x": px[0], "peak_y": px[1],
                     "peak_z": px[2], "dist_to_M": sol.dist_to_M[i], "gamma": sol.gamma_energy,
                     "Q": sol.q_value, "grad_resid": sol.grad_resid, "decay_rate": sol.decay_rate,
                     "profile_L2_dist": profile_distance(sol, ctx.pot, i, ansatz.ground_states[i])})
    summary = [{"epsilon": pen.epsilon, "gamma": sol.gamma_energy, "D_estimate": D, "E": E,
                "E_tilde": E_tilde, "outside_mass": sol.outside_mass,
                "ansatz_distance": sol.ansatz_distance, "within_d": sol.within_d,
                "peak_count_ok": sol.peak_count_ok}]
    return [write_field(out / "semiclassical.chq", sol.u), write_csv(out / "semiclassical.csv", rows),
            write_csv(out / "semiclassical_summary.csv", summary)]


def cmd_sweep(ctx: Context, out: Path, seed: int) -> List[Path]:
    cfg = ctx.cfg
    s = cfg.semiclassical
    gss = limit_ground_states(ctx.pot, ctx.nl, ctx.riesz(ctx.local_grid()), ctx.options)
    rep = sweep_epsilon(cfg.run.eps_list, ctx.pot, ctx.pen(cfg.run.eps_list[0]), ctx.nl,
                        ctx.riesz(ctx.sc_grid), ground_states=gss,
                        delta_fraction=s.delta_fraction, beta_ratio=s.beta_ratio,
                        t_grid=_t_grid(ctx), decay_annulus=tuple(s.decay_annulus),
                        grad_tol=cfg.solver.penalized_grad_tol, d_ratio=s.d_ratio)
    paths = [write_csv(out / "concentration.csv", rep.rows())]
    summary = [{"epsilon": en.epsilon, "D_estimate": en.D_estimate, "E": rep.E, "E_tilde": rep.E_tilde,
                "gamma": en.solution.gamma_energy if en.solution else "",
                "outside_mass": en.solution.outside_mass if en.solution else "",
                "error": en.error or ""} for en in rep.entries]
    paths.append(write_csv(out / "concentration_summary.csv", summary))
    for en in rep.ok_entries():
        paths.append(write_field(out / f"sweep_eps{en.epsilon:g}.chq", en.solution.u))
    if any(en.solution is None for en in rep.entries):
        raise ConvergenceError("some sweep entries failed; see concentration_summary.csv")
    return paths


def cmd_path_profile(ctx: Context, out: Path, seed: int) -> List[Path]:
    cfg = ctx.cfg
    pen = ctx.pen(cfg.run.epsilon)
    ansatz = _ansatz(ctx)
    profiles = [path_profile(ansatz, pen, i, _t_grid(ctx), ctx.nl, ctx.alpha) for i in range(ctx.pot.k)]
    D, E, E_tilde = aggregate_paths(profiles)
    p = profiles[cfg.run.well]
    rows = [{"t": t, "gamma": v} for t, v in zip(p.t, p.values)]
    summary = [{"well": q.well, "epsilon": q.epsilon, "T": q.T, "C_estimate": q.C_estimate,
                "t_at_max": q.t_at_max, "E_m": q.limit_energy, "D_estimate": D, "E": E,
                "E_tilde": E_tilde} for q in profiles]
    return [write_csv(out / "path_profile.csv", rows), write_csv(out / "path_summary.csv", summary)]


def cmd_verify(ctx: Context, out: Path, seed: int) -> List[Path]:
    from .verify import run_checks

    rows = run_checks(ctx, seed)
    path = write_csv(out / "verify.csv", rows)
    failed = [r["check"] for r in rows if r["status"] != "pass"]
    if failed:
        log.error("failed checks: %s", ", ".join(failed))
        raise ConvergenceError(f"{len(failed)} verification checks failed")
    return [path]


HANDLERS = {"limit": cmd_limit, "curve": cmd_curve, "semiclassical": cmd_semiclassical,
            "sweep": cmd_sweep, "path-profile": cmd_path_profile, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choquard", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="TOML run configuration")
    ap.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides solver.seed)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--quiet", action="store_true", help="only report errors")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else RunConfig().validate()
        if args.seed is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, seed=args.seed))
            cfg.validate()
        ctx = Context(cfg)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (ConfigError, GridError, ValueError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_VALIDATION
    seed = cfg.solver.seed
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        manifest = {"tool": "choquard", "version": __version__, "command": args.command,
                    "seed": seed, "config": cfg.to_dict()}
        status = 0
        try:
            outputs = HANDLERS[args.command](ctx, args.out, seed)
        except ConvergenceError as exc:
            log.error("%s", exc)
            status, outputs = EXIT_CONVERGENCE, []
        except (GridError, ValueError) as exc:
            log.error("%s", exc)
            status, outputs = EXIT_VALIDATION, []
        manifest["outputs"] = sorted(p.name for p in outputs)
        manifest["exit_status"] = status
        with open(args.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    if not args.quiet and status == 0:
        for p in outputs:
            print(args.out / p.name)
    return status


if __name__ == "__main__":
    sys.exit(main())
