"""Command-line front end: ``reactive-blobs run <experiment> key=value ... [--config FILE] [--out DIR]``.

Configuration files hold one ``key = value`` per line (``#`` starts a
comment); command-line pairs override them.  Lists are comma separated.
Exit status: 0 success, 2 configuration error, 3 solver did not converge,
4 unphysical result (non-positive mean concentration).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as ex
from .grid import PERIODIC, Dirichlet, GridSpec, ScalarField, write_field_csv
from .io import FormatError, read_blobs, write_blobs, write_report
from .kernels import KernelKind
from .krylov import KrylovConfig
from .multigrid import SolvabilityError
from .packing import SaturationError
from .solvers import (
    DIAGONAL,
    SCHUR,
    ReactionSystem,
    solve_saddle,
    solve_steady_finite_kappa,
    step_backward_euler,
)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_UNPHYSICAL = 0, 2, 3, 4

log = logging.getLogger("reactive_blobs")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# value parsers


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _kernel(text):
    return KernelKind.parse(text)


def _precond(text):
    t = text.strip().lower()
    if t not in (SCHUR, DIAGONAL):
        raise ValueError(f"precond must be {SCHUR} or {DIAGONAL}")
    return t


def _boundary(text):
    t = text.strip().lower()
    if t not in ("periodic", "dirichlet"):
        raise ValueError("boundary must be periodic or dirichlet")
    return t


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


COMMON = {
    "kernel": (_kernel, KernelKind.FOUR_POINT),
    "precond": (_precond, SCHUR),
    "m": (int, 5),
    "n": (int, 1),
    "restart": (int, 30),
    "rtol": (float, 1e-9),
    "max_cycles": (int, 2000),
    "seed": (int, 0),
    "chi": (float, 1.0),
    "field": (_bool, False),
}

SCHEMAS = {
    "calibrate-radius": {"L": (_ints, [32, 48, 64]), "offset": (_floats, [0.0, 0.0, 0.0])},
    "cubic-beta0": {"phi": (_floats, [0.02, 0.05, 0.1, 0.15]), "a": (_optional_float, None)},
    "random-beta0": {"phi": (_floats, [0.05, 0.1, 0.2, 0.3]), "L": (int, 64),
                     "a": (_optional_float, None), "realizations": (int, 1),
                     "write_packings": (_bool, False)},
    "finite-p": {"L": (int, 64), "P": (_floats, [0.01, 0.1, 1.0, 10.0]), "a": (_optional_float, None)},
    "decay-profile": {"L": (int, 64), "c_inf": (float, 1.0), "a": (_optional_float, None),
                      "r_min": (float, 3.0), "r_max": (_optional_float, None), "dr": (float, 0.5)},
    "precond-bench": {"L": (int, 16), "blobs_per_axis": (int, 0), "steady": (_bool, False)},
    "solve": {"blobs": (str, None), "L": (_ints, None), "boundary": (_boundary, "periodic"),
              "c_b": (float, 1.0), "beta": (float, 0.0), "dt": (_optional_float, None),
              "source": (float, 0.0), "c0": (float, 0.0)},
}
REQUIRED = {"solve": ("blobs", "L")}


def read_config_file(path) -> dict[str, tuple[str, str]]:
    """``key -> (raw value, location)`` from a flat ``key = value`` file."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = (v.strip(), f"{path}:{lineno}")
    return out


def parse_pairs(pairs) -> dict[str, tuple[str, str]]:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError(f"argument {p!r}: expected key=value")
        k, v = p.split("=", 1)
        out[k.strip()] = (v.strip(), f"argument {p!r}")
    return out


def resolve(experiment: str, raw: dict[str, tuple[str, str]]) -> dict:
    """Typed settings for ``experiment`` from raw strings, with defaults filled in."""
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(SCHEMAS)}")
    schema = {**COMMON, **SCHEMAS[experiment]}
    out = {k: default for k, (_, default) in schema.items()}
    for key, (value, where) in raw.items():
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r} for {experiment}")
        try:
            out[key] = schema[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
    for key in REQUIRED.get(experiment, ()):
        if out[key] is None:
            raise ConfigError(f"{experiment} needs {key}=...")
    if out["m"] < 1 or out["n"] < 1:
        raise ConfigError("m and n must be >= 1")
    return out


def _krylov(cfg) -> KrylovConfig:
    try:
        return KrylovConfig(restart=cfg["restart"], rtol=cfg["rtol"], max_cycles=cfg["max_cycles"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# experiments


@dataclass
class Outcome:
    table: ex.ExperimentResult
    metric: tuple[str, float]
    report: list = field(default_factory=list)
    dump: ScalarField | None = None
    extra_tables: dict = field(default_factory=dict)
    packings: list = field(default_factory=list)


def _report_row(name, L, N, precond, m, n, sol):
    return {"experiment": name, "L": L, "N": N, "precond": precond, "m": m, "n": n,
            "outer_iters": sol.iterations, "total_cycles": sol.history.total_cycles,
            "final_residual": sol.history.final_residual}


def run_calibrate_radius(cfg) -> Outcome:
    cal = ex.calibrate_radius(cfg["kernel"], cfg["L"], tuple(cfg["offset"]), cfg["chi"], _krylov(cfg))
    return Outcome(cal.table, ("a_over_h", cal.a))


def run_cubic_beta0(cfg) -> Outcome:
    res = ex.cubic_beta0(cfg["kernel"], cfg["phi"], cfg["a"], cfg["chi"], _krylov(cfg))
    return Outcome(res, ("max_rel_error", float(np.max(np.abs(res.column("rel_error"))))))


def run_random_beta0(cfg) -> Outcome:
    packings = []
    res = ex.random_beta0(cfg["kernel"], cfg["phi"], cfg["L"], cfg["a"], cfg["seed"],
                          cfg["realizations"], cfg["chi"], _krylov(cfg), packings)
    b = res.column("beta0")
    return Outcome(res, ("beta0_max", float(b.max())),
                   packings=packings if cfg["write_packings"] else [])


def run_finite_p(cfg) -> Outcome:
    res = ex.measure_omega(cfg["L"], cfg["kernel"], cfg["P"], cfg["a"], cfg["chi"], _krylov(cfg))
    return Outcome(res, ("slope", res.metadata["slope"]))


def run_decay_profile(cfg) -> Outcome:
    res, sol = ex.decay_profile(cfg["L"], cfg["kernel"], cfg["c_inf"], cfg["a"], cfg["r_min"],
                                cfg["r_max"], cfg["dr"], cfg["chi"], _krylov(cfg))
    profile = ex.ExperimentResult("profile", ["r_over_h", "c_over_c_inf", "theory", "direction"],
                                  rows=res.rows)
    return Outcome(res, ("max_rel_error", float(np.max(np.abs(res.column("rel_error"))))),
                   dump=sol.c, extra_tables={"profile.csv": profile})


def run_precond_bench(cfg) -> Outcome:
    res, sol = ex.precond_bench(cfg["L"], cfg["blobs_per_axis"] or None, cfg["precond"], cfg["m"],
                                cfg["n"], cfg["steady"], cfg["restart"], cfg["rtol"],
                                cfg["max_cycles"], cfg["seed"], cfg["kernel"])
    return Outcome(res, ("total_cycles", float(sol.history.total_cycles)), res.rows, sol.c)


def run_solve(cfg) -> Outcome:
    try:
        bf = read_blobs(cfg["blobs"])
    except OSError as exc:
        raise ConfigError(f"cannot read blob file {cfg['blobs']}: {exc.strerror}") from None
    shape = cfg["L"] * bf.dim if len(cfg["L"]) == 1 else cfg["L"]
    if len(shape) != bf.dim:
        raise ConfigError(f"L has {len(shape)} entries for a {bf.dim}-D blob file")
    boundary = PERIODIC if cfg["boundary"] == "periodic" else Dirichlet(cfg["c_b"])
    grid = GridSpec(tuple(shape), bf.h, boundary)
    beta = cfg["beta"] if cfg["dt"] is None else 1.0 / cfg["dt"]
    blobs = bf.blobs
    sys_ = ReactionSystem(grid, blobs, cfg["chi"], beta, cfg["source"])
    kcfg = _krylov(cfg)
    table = ex.ExperimentResult("solve", ["N", "diffusion_limited", "mean_concentration",
                                          "total_strength"])
    if blobs.diffusion_limited:
        g = sys_.source_values + beta * cfg["c0"]
        sol = solve_saddle(sys_, g, precond=cfg["precond"], m=cfg["m"], n=cfg["n"], config=kcfg)
        total = float(np.sum(sol.strengths))
        report = [_report_row("solve", shape[0], len(blobs), cfg["precond"], cfg["m"], cfg["n"], sol)]
    elif blobs.any_diffusion_limited:
        raise ConfigError("mixing finite and infinite kappa in one solve is not supported")
    else:
        if sys_.steady:
            sol = solve_steady_finite_kappa(sys_, cfg["n"], kcfg)
        else:
            sol = step_backward_euler(sys_, ScalarField.constant(grid, cfg["c0"]), cfg["n"], kcfg)
        total = float(np.sum(blobs.kappa * sys_.stencil.interpolate(sol.c.values)))
        report = [_report_row("solve", shape[0], len(blobs), "multigrid", 0, cfg["n"], sol)]
    cbar = float(sol.c.values.mean())
    driven = cfg["source"] != 0 or not grid.periodic and cfg["c_b"] != 0
    table.record(sol.history, sol.converged, cbar if driven else None)
    table.add(N=len(blobs), diffusion_limited=blobs.diffusion_limited, mean_concentration=cbar,
              total_strength=total)
    return Outcome(table, ("mean_concentration", cbar), report, sol.c)


RUNNERS = {
    "calibrate-radius": run_calibrate_radius,
    "cubic-beta0": run_cubic_beta0,
    "random-beta0": run_random_beta0,
    "finite-p": run_finite_p,
    "decay-profile": run_decay_profile,
    "precond-bench": run_precond_bench,
    "solve": run_solve,
}


# --------------------------------------------------------------------------
# outputs


def write_convergence(path, histories):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solve", "cycles", "relative_residual"])
        for i, h in enumerate(histories):
            for c, r in h:
                w.writerow([i, c, f"{r:.16e}"])


def write_outputs(out: Path, result: Outcome):
    out.mkdir(parents=True, exist_ok=True)
    if result.report and result.table.name == "solve":
        write_report(out / "results.csv", result.report)
        result.table.write_csv(out / "summary.csv")
    else:
        result.table.write_csv(out / "results.csv")
    for name, table in result.extra_tables.items():
        table.write_csv(out / name)
    write_convergence(out / "convergence.csv", result.table.histories)
    for i, p in enumerate(result.packings):
        write_blobs(out / f"packing_{i:03d}.txt", ex.random_blobs(p, result.table.metadata["kernel"]))


def run(experiment: str, raw: dict, out: Path, stream=None) -> int:
    t0 = time.perf_counter()
    try:
        cfg = resolve(experiment, raw)
        result = RUNNERS[experiment](cfg)
    except (ConfigError, FormatError, SolvabilityError, SaturationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: invalid setup: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(out, result)
    if cfg["field"] and result.dump is not None:
        write_field_csv(result.dump, out / "field.csv")
    name, value = result.metric
    cycles = result.table.total_cycles
    print(f"{experiment}: {name}={value:.6g} cycles={cycles} time={time.perf_counter() - t0:.2f}s",
          file=stream or sys.stdout)
    if not result.table.converged:
        print("error: solver did not reach the requested tolerance", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not result.table.physical or math.isnan(value):
        print("error: unphysical result", file=sys.stderr)
        return EXIT_UNPHYSICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reactive-blobs", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", help=", ".join(SCHEMAS))
    r.add_argument("settings", nargs="*", metavar="key=value")
    r.add_argument("--config", help="flat key = value file; command-line settings win")
    r.add_argument("--out", default=".", help="output directory (default: current)")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    # key=value pairs may follow options, which argparse leaves unparsed
    args, extra = parser.parse_known_args(argv)
    stray = [e for e in extra if "=" not in e or e.startswith("-")]
    if stray:
        parser.error(f"unrecognized arguments: {' '.join(stray)}")
    args.settings = list(args.settings) + extra
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = read_config_file(args.config) if args.config else {}
        raw.update(parse_pairs(args.settings))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.experiment, raw, Path(args.out))


if __name__ == "__main__":
    sys.exit(main())
