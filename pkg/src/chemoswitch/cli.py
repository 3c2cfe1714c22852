"""Command-line entry point.

    chemoswitch <mode> --config <path> [--out <dir>] [--seed <u64>]

Exit status: 0 on success, 2 on a configuration error, 3 when a solver
aborts (blowup threshold crossed or linear solver failure). In
``blowup-probe`` mode saturation and aborts are results, not failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .config import MODES, ConfigError, RunConfig, build_initial, parse_config, target_mass
from .core import StateLimit
from .experiments import (
    BlowupConfig,
    RescaleConfig,
    SweepConfig,
    full_stepper,
    limit_stepper,
    rescale_refinement,
    run_blowup_probe,
    run_gamma_sweep,
)
from .full import BlowupAbort, equilibrated_full_state
from .functionals import critical_mass, diag_record
from .linsolve import SolverError
from .output import SnapshotError, append_diag, fmt, snapshot_name, write_manifest, write_snapshot, write_table
from .timeloop import advance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3

SWEEP_COLUMNS = ("gamma", "err_n_l2t", "err_w_w12_sup", "err_e_l2t", "liapunov_c2")
BLOWUP_COLUMNS = ("gamma", "sup_l2_u", "sup_l2_v", "event")
RESCALE_COLUMNS = ("dt", "max_res_u", "max_res_v")


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _manifest(cfg: RunConfig, out: Path, seed: int, extra: list[str]) -> list[str]:
    return [f"chemoswitch {_version()}", f"out = {out}", f"seed = {seed}", *cfg.echo(), *extra]


def _fields(state) -> dict:
    if isinstance(state, StateLimit):
        return {"n": state.n, "w": state.w}
    return {"u": state.u, "v": state.v, "w": state.w}


def _write_fields(state, out: Path, index: int) -> None:
    for name, f in _fields(state).items():
        write_snapshot(f, state.t, out / snapshot_name(name, index))


def _run_single(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list[str]]:
    n0, w0 = build_initial(cfg, seed)
    params = cfg.params
    if cfg.mode == "run-full":
        state = equilibrated_full_state(n0, w0, params)
        stepper = full_stepper
    else:
        state = StateLimit(0.0, n0, w0)
        stepper = limit_stepper(cfg.limit_scheme)
    diag_path = out / "diag.csv"
    diag_path.unlink(missing_ok=True)
    rows = [0]
    last = [state]

    def on_diag(s, _steps):
        k = rows[0]
        append_diag(diag_record(s, params), diag_path)
        if k == 0 or (cfg.snapshot_every and k % cfg.snapshot_every == 0):
            _write_fields(s, out, k)
        rows[0] += 1
        last[0] = s

    try:
        outcome = advance(state, stepper, params, on_diag=on_diag, blowup_threshold=cfg.blowup_threshold)
    except BlowupAbort as exc:
        _write_fields(exc.state, out, rows[0])
        return EXIT_ABORT, ["event = blowup_abort", f"t_abort = {fmt(exc.state.t)}", f"max_n = {fmt(exc.max_n)}"]
    except SolverError as exc:
        _write_fields(last[0], out, rows[0])
        return EXIT_ABORT, ["event = solver_error", f"message = {exc}"]
    final = rows[0] - 1
    if final > 0 and not (cfg.snapshot_every and final % cfg.snapshot_every == 0):
        _write_fields(outcome.state, out, final)
    return EXIT_OK, ["event = completed", f"steps = {outcome.steps}", f"diag_rows = {rows[0]}"]


def _mass_fraction(cfg: RunConfig) -> float:
    return target_mass(cfg.ic, cfg.params) / critical_mass(cfg.params)


def _run_sweep(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    g = cfg.grid
    sc = SweepConfig(
        nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly, params=cfg.params, gammas=cfg.gammas,
        mass_fraction=_mass_fraction(cfg), width=cfg.ic.width, center=cfg.ic.center,
        limit_scheme=cfg.limit_scheme, self_compare=cfg.self_compare, workers=cfg.workers,
    )
    rep = run_gamma_sweep(sc)
    rows = zip(rep.gammas, rep.err_n_l2t, rep.err_w_w12_sup, rep.err_e_l2t, rep.liapunov_c2)
    write_table(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return EXIT_OK, ["event = completed", f"fitted_order = {fmt(rep.fitted_order)}", f"diag_rows = {len(rep.times)}"]


def _run_probe(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    g = cfg.grid
    bc = BlowupConfig(
        nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly, params=cfg.params, gammas=cfg.gammas,
        mass_fraction=_mass_fraction(cfg), width=cfg.ic.width, center=cfg.ic.center,
        saturation_factor=cfg.saturation_factor, threshold_factor=cfg.threshold_factor,
        t_factor=cfg.t_factor, max_steps=cfg.max_steps, limit_scheme=cfg.limit_scheme,
    )
    rep = run_blowup_probe(bc)
    write_table(out / "blowup.csv", BLOWUP_COLUMNS, zip(rep.gammas, rep.sup_l2_u, rep.sup_l2_v, rep.events))
    t_sat = "none" if rep.t_saturation is None else fmt(rep.t_saturation)
    return EXIT_OK, [
        f"event = {rep.limit_event}",
        f"mass = {fmt(rep.mass)}",
        f"critical_mass = {fmt(rep.crit)}",
        f"t_saturation = {t_sat}",
        f"initial_linf_n = {fmt(rep.initial_linf_n)}",
        f"max_linf_n = {fmt(rep.max_linf_n)}",
        f"t_full = {fmt(rep.t_full)}",
    ]


def _run_rescale(cfg: RunConfig, out: Path) -> tuple[int, list[str]]:
    g = cfg.grid
    rc = RescaleConfig(
        nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly, params=cfg.params,
        mass_fraction=_mass_fraction(cfg), width=cfg.ic.width, center=cfg.ic.center, levels=cfg.levels,
    )
    dts, reports = rescale_refinement(rc)
    write_table(out / "rescale.csv", RESCALE_COLUMNS, ((dt, r.max_res_u, r.max_res_v) for dt, r in zip(dts, reports)))
    ratios = [a.max_res_u / b.max_res_u if b.max_res_u > 0 else math.inf for a, b in zip(reports, reports[1:])]
    return EXIT_OK, ["event = completed", "ratios_u = " + ",".join(fmt(r) for r in ratios)]


EXPERIMENTS = {"gamma-sweep": _run_sweep, "blowup-probe": _run_probe, "rescale-check": _run_rescale}


def _seed(text: str) -> int:
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemoswitch", description="Fast-switching chemotaxis simulator.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="key=value configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=_seed, default=0, help="seed for initial-condition noise")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.mode)
        out = Path(args.out if args.out is not None else cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.mode in EXPERIMENTS:
            code, extra = EXPERIMENTS[cfg.mode](cfg, out)
        else:
            code, extra = _run_single(cfg, out, args.seed)
    except (ConfigError, SnapshotError, OSError) as exc:
        print(f"chemoswitch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowupAbort, SolverError) as exc:
        print(f"chemoswitch: solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_manifest(out / "manifest.txt", _manifest(cfg, out, args.seed, extra))
    if code != EXIT_OK:
        print(f"chemoswitch: solver abort ({extra[0]})", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
