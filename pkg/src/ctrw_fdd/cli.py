"""Command-line entry point: ``ctrw-fdd <command> [options]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a verify check failed.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from .errors import ConfigError, CtrwError, DomainError, HorizonError, IntegrationError, ParameterError, \
    UnsupportedModelError
from .io import COMMANDS, RunConfig, load_config, write_table

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


def _model(cfg: RunConfig):
    from .renewal_kernels import ModelSpec
    if cfg.model == "pure-drift":
        return ModelSpec.pure_drift()
    return ModelSpec.example1(cfg.beta) if cfg.model == "example1" else ModelSpec.example2(cfg.beta)


def _need_axes(cfg: RunConfig, names):
    missing = [n for n in names if cfg.axis(n) is None]
    if missing:
        raise ConfigError(f"grid: need axes {', '.join(names)} (missing {', '.join(missing)})")
    return [cfg.axis(n).values() for n in names]


def _one_time(cfg: RunConfig):
    if len(cfg.times) != 1:
        raise ConfigError(f"times: {cfg.command} takes exactly one time")
    return cfg.times[0]


def _density(cfg):
    from .stable_core import StableParams, stable_pdf
    (t,) = _need_axes(cfg, ["t"])
    p = StableParams(cfg.beta)
    rows = [(ti, u, gi) for u in cfg.times for ti, gi in zip(t, stable_pdf(p, t, u))]
    return ("t", "u", "density"), rows, {}


def _inverse_density(cfg):
    from .stable_core import StableParams, inverse_stable_pdf
    (x,) = _need_axes(cfg, ["x"])
    p = StableParams(cfg.beta)
    rows = [(t, xi, fi) for t in cfg.times for xi, fi in zip(x, inverse_stable_pdf(p, t, x))]
    return ("t", "x", "density"), rows, {}


def _kernel_rows(law, cfg):
    """Atoms first (value = weight), then the density on the grid of its free coordinates."""
    from .fdd import mass_report
    rows = [("atom", *map(float, a.location), float(a.weight)) for a in law.atoms]
    meta = {"atom_mass": law.atom_mass}
    if law.part is not None:
        axes = _need_axes(cfg, law.part.free)
        dens = law.on_grid(*axes)
        pts = law.support_points(*axes)
        for idx in np.ndindex(dens.shape):
            rows.append(("density", *(float(pts[c][idx]) for c in law.coords), float(dens[idx])))
        window = {n: (float(a[0]), float(a[-1])) for n, a in zip(law.part.free, axes)}
        full = mass_report(law, rel_tol=cfg.tol_rel)
        inside = mass_report(law, grid=window, rel_tol=cfg.tol_rel)
        meta.update(free_coordinates=list(law.part.free), total_mass=full.total,
                    grid_mass=inside.total, truncated_mass=full.total - inside.total,
                    mass_converged=bool(full.converged))
    else:
        meta.update(total_mass=law.atom_mass, truncated_mass=0.0)
    return ("kind", *law.coords, "value"), rows, meta


def _kernel_p(cfg):
    from .fdd import StateXV, p_kernel
    law = p_kernel(_model(cfg), _one_time(cfg), StateXV(*cfg.start))
    return _kernel_rows(law, cfg)


def _kernel_q(cfg):
    from .fdd import StateYR, q_kernel
    law = q_kernel(_model(cfg), _one_time(cfg), StateYR(*cfg.start))
    return _kernel_rows(law, cfg)


def _joint_xyvr(cfg):
    from .fdd import joint_xyvr
    law = joint_xyvr(_model(cfg), cfg.start[0], cfg.start[1], _one_time(cfg))
    return _kernel_rows(law, cfg)


def _joint2(cfg):
    from .fdd import joint_inverse_two_times
    from .stable_core import StableParams
    if len(cfg.times) != 2:
        raise ConfigError("times: joint2 takes exactly two times")
    x, y = _need_axes(cfg, ["x", "y"])
    g = joint_inverse_two_times(StableParams(cfg.beta), cfg.times[0], cfg.times[1], x, y,
                                rel_tol=cfg.tol_rel)
    rows = [("diagonal", x[i], x[i + 1], x[i], x[i + 1], float(g.diagonal_cells[i]), float("nan"))
            for i in range(x.size - 1)]
    m = g.cell_masses
    for i in range(x.size - 1):
        for j in range(y.size - 1):
            rows.append(("cell", x[i], x[i + 1], y[j], y[j + 1], float(m[i, j]), float(g.values[i, j])))
    meta = {"diagonal_mass": g.diagonal_atom, "total_mass": g.total_mass(), "truncated_mass": g.truncated_mass,
            "flagged_cells": int(np.sum(g.flagged)) if g.flagged is not None else 0}
    return ("kind", "x_lo", "x_hi", "y_lo", "y_hi", "mass", "density"), rows, meta


def _simulate(cfg):
    from .mc_sim import CtrwConfig, simulate_ctrw, simulate_renewal
    model = _model(cfg)
    chi, tau = cfg.start
    if cfg.scale is None:
        s = simulate_renewal(model, cfg.times, cfg.paths, cfg.seed, du=cfg.du, chi=chi, tau=tau,
                             workers=cfg.workers)
        x, y, v, r = s.x(), s.y(), s.v(), s.r()
        rows = [(p, float(t), x[p, i], y[p, i], v[p, i], r[p, i])
                for p in range(s.n_paths) for i, t in enumerate(s.times)]
        return ("path", "t", "x", "y", "v", "r"), rows, {"process": "scaling limit", "du": cfg.du}
    s = simulate_ctrw(model, CtrwConfig(cfg.scale), cfg.times, cfg.seed, cfg.paths, chi=chi, tau=tau,
                      workers=cfg.workers)
    rows = [(p, float(t), s.x[p, 0, i], s.y[p, 0, i]) for p in range(cfg.paths) for i, t in enumerate(s.times)]
    return ("path", "t", "x", "y"), rows, {"process": "ctrw", "scale": cfg.scale}


def _verify(cfg):
    from .checks import COLUMNS, VerifyConfig, rows_of, run_checks
    vcfg = VerifyConfig.make(quick=cfg.quick, seed=cfg.seed, workers=cfg.workers)

    def report(r):
        status = "PASS" if r.passed else "FAIL"
        over = "" if r.seconds <= r.budget else f" (over the {r.budget:g} s budget)"
        print(f"{r.key} {status} {r.title}: {len(r.rows) - len(r.failures)}/{len(r.rows)} rows within "
              f"tolerance, {r.seconds:.1f} s{over}", file=sys.stderr)
        for f in r.failures[:10]:
            print(f"    {f[1]}: value {f[2]:.6g} reference {f[3]:.6g} error {f[4]:.3g} > {f[5]:.3g}",
                  file=sys.stderr)
        if r.notes:
            print(f"    {r.notes}", file=sys.stderr)

    results = run_checks(vcfg, progress=report)
    meta = {"quick": cfg.quick, "checks": {r.key: r.passed for r in results}}
    return COLUMNS, rows_of(results), meta, all(r.passed for r in results)


HANDLERS = {"density": _density, "inverse-density": _inverse_density, "kernel-p": _kernel_p,
            "kernel-q": _kernel_q, "joint2": _joint2, "joint-xyvr": _joint_xyvr, "simulate": _simulate}


def run(cfg: RunConfig) -> int:
    """Execute one command and write its table; returns the exit status."""
    from .mc_sim import worker_count
    cfg.workers = worker_count(cfg.workers)
    ok = True
    if cfg.command == "verify":
        columns, rows, meta, ok = _verify(cfg)
    else:
        columns, rows, meta = HANDLERS[cfg.command](cfg)
    meta = {"seed": cfg.seed, "command": cfg.command, "config": cfg.to_dict(), **meta}
    write_table(rows, columns, meta, cfg.format, cfg.output)
    return EXIT_OK if ok else EXIT_VERIFY


def _origin(exc: BaseException) -> str:
    mods = [f.filename for f in traceback.extract_tb(exc.__traceback__) if "ctrw_fdd" in f.filename]
    if not mods:
        return "ctrw_fdd"
    path = mods[-1].replace(os.sep, "/")
    return "ctrw_fdd." + path.split("ctrw_fdd/", 1)[1].removesuffix(".py").replace("/", ".")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctrw-fdd", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file of key-value settings; flags override it")
    ap.add_argument("--model", choices=("example1", "example2", "pure-drift"))
    ap.add_argument("--beta", type=float)
    ap.add_argument("--times", help="comma-separated, strictly increasing")
    ap.add_argument("--grid", action="append", help="axis as name:min:max:points (repeatable)")
    ap.add_argument("--start", help="starting state as position,time (x0,v0 / y0,r0 / chi,tau)")
    ap.add_argument("--tol-rel", type=float, dest="tol_rel")
    ap.add_argument("--tol-abs", type=float, dest="tol_abs")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--scale", type=float, help="CTRW scale c for simulate (omit for the scaling limit)")
    ap.add_argument("--du", type=float)
    ap.add_argument("--output", "-o")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--workers", type=int)
    ap.add_argument("--quick", action="store_const", const=True, default=None)
    return ap


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("config")
    try:
        cfg = load_config(path, **args)
        return run(cfg)
    except (ConfigError, ParameterError, DomainError, UnsupportedModelError) as e:
        print(f"error [{_origin(e)}]: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationError, HorizonError) as e:
        print(f"numerical failure [{_origin(e)}]: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except CtrwError as e:
        print(f"error [{_origin(e)}]: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
