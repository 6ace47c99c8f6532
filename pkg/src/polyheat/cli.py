"""Config parsing, run orchestration, and CSV/JSON emission.

The config format is deliberately line-oriented so that runs diff cleanly:

    # comment
    [polynomial]
    model = p1:2          # |z|^(2m); or p2:m for (Re z)^(2m)
    2 2 0.375 0.0         # or explicit terms: j k re im (one per line)

    [operator]
    tau = 1.0
    L = 6.0
    n = 193

    [solver]
    dt = 1e-3
    rel_dt = 0.02
    schedule = 0.25 0.5 1.0
    w0 = 0.0 0.0
    s_max = 10.0          # gfield horizon

    [mc]
    n_paths = 20000
    n_t = 256
    seed = 1234
    x = 0.5 0.0
    y = 0.0 0.0
    s = 0.25

    [geom]
    box = 2.0
    n = 5
    delta = 1.0

    [rho]
    L = 3.0
    n = 193
    0.5 0.0 1.5 0.0       # bare pair lines: z_re z_im w_re w_im

    [verify]
    suite = all

Parsing reports *every* syntax error with its line number, then validation
reports *every* semantic violation, rather than stopping at the first.
Artifacts land in the output directory: ``manifest.json`` carries the full
provenance (config hash, parameters, output checksums) and its creation
timestamp is the only nondeterministic byte in a run.

tau = 0 violates the standing subharmonicity hypotheses but is the
solver's primary convergence oracle, so it is accepted only behind
``--oracle-mode``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .box_operator import Grid2D
from .errors import (ConfigParseError, ConfigValidationError, PolyheatError)
from .feynman_kac import mc_kernel
from .geometry import (lambda_fn, mu_fn, rho_closed_form, rho_metric,
                       build_metric_grid, sobolev_radius)
from .heat_solver import fundamental_solution, kernel_column
from .polynomial import (PolynomialSpec, make_polynomial, model_p1, model_p2,
                         poly_id)
from .verifier import SUITE_NAMES, run_suite

FLOAT_FMT = "%.17g"

_SECTIONS = {
    "polynomial": {"model"},
    "operator": {"tau", "L", "n"},
    "solver": {"dt", "rel_dt", "schedule", "w0", "s_max"},
    "mc": {"n_paths", "n_t", "seed", "x", "y", "s"},
    "geom": {"box", "n", "delta"},
    "rho": {"L", "n"},
    "verify": {"suite"},
}
_BARE_SECTIONS = {"polynomial", "rho"}   # sections that accept bare rows


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters with documented defaults filled in."""

    poly: PolynomialSpec
    model: Optional[str]            # "p1"/"p2" when a model was named
    model_m: Optional[int]
    tau: float = 1.0
    L: float = 6.0
    n: int = 193
    dt: float = 1e-3
    rel_dt: Optional[float] = 0.02
    schedule: Tuple[float, ...] = (0.25, 0.5, 1.0)
    w0: complex = 0.0 + 0.0j
    s_max: Optional[float] = None
    mc_n_paths: int = 20000
    mc_n_t: int = 256
    mc_seed: int = 1234
    mc_x: complex = 0.5 + 0.0j
    mc_y: complex = 0.0 + 0.0j
    mc_s: float = 0.25
    geom_box: float = 2.0
    geom_n: int = 5
    geom_delta: float = 1.0
    rho_L: float = 3.0
    rho_n: int = 193
    rho_pairs: Tuple[Tuple[complex, complex], ...] = ()
    suite: Tuple[str, ...] = ("all",)
    config_sha256: str = ""


def _parse_floats(value: str, count: int, what: str) -> List[float]:
    parts = value.replace(",", " ").split()
    if count and len(parts) != count:
        raise ValueError(f"{what} needs {count} numbers, got {len(parts)}")
    return [float(x) for x in parts]


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; collect all problems before raising."""
    syntax: List[str] = []
    problems: List[str] = []
    section = None
    raw: Dict[str, Dict[str, Tuple[int, str]]] = {}
    coeff_rows: List[Tuple[int, str]] = []
    pair_rows: List[Tuple[int, str]] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                syntax.append(f"line {lineno}: unterminated section header")
                section = None
                continue
            name = body[1:-1].strip()
            if name not in _SECTIONS:
                syntax.append(f"line {lineno}: unknown section [{name}]")
                section = None
                continue
            section = name
            raw.setdefault(section, {})
            continue
        if section is None:
            syntax.append(f"line {lineno}: content before any [section]")
            continue
        if "=" in body:
            key, _, value = body.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _SECTIONS[section]:
                syntax.append(
                    f"line {lineno}: unknown key {key!r} in [{section}]")
                continue
            if key in raw[section]:
                syntax.append(
                    f"line {lineno}: duplicate key {key!r} in [{section}]")
                continue
            raw[section][key] = (lineno, value)
            continue
        # bare row
        if section not in _BARE_SECTIONS:
            syntax.append(
                f"line {lineno}: bare row not allowed in [{section}]")
            continue
        if section == "polynomial":
            coeff_rows.append((lineno, body))
        else:
            pair_rows.append((lineno, body))

    # format the bare rows while we still know the line numbers
    coeffs: Dict[Tuple[int, int], complex] = {}
    for lineno, body in coeff_rows:
        parts = body.split()
        try:
            if len(parts) != 4:
                raise ValueError(f"expected 'j k re im', got {len(parts)} fields")
            j, k = int(parts[0]), int(parts[1])
            c = complex(float(parts[2]), float(parts[3]))
        except ValueError as e:
            syntax.append(f"line {lineno}: bad coefficient row ({e})")
            continue
        if (j, k) in coeffs:
            syntax.append(f"line {lineno}: duplicate term ({j},{k})")
            continue
        coeffs[(j, k)] = c
    pairs: List[Tuple[complex, complex]] = []
    for lineno, body in pair_rows:
        try:
            v = _parse_floats(body, 4, "pair row")
        except ValueError as e:
            syntax.append(f"line {lineno}: bad pair row ({e})")
            continue
        pairs.append((complex(v[0], v[1]), complex(v[2], v[3])))

    if syntax:
        syntax.sort(key=lambda m: int(m.split()[1].rstrip(":")))
        raise ConfigParseError("config syntax errors:\n  "
                               + "\n  ".join(syntax))

    # ---- semantic extraction, collecting every violation ----
    def get(section: str, key: str) -> Optional[str]:
        entry = raw.get(section, {}).get(key)
        return entry[1] if entry is not None else None

    def number(section: str, key: str, cast, default, check=None, why=""):
        s = get(section, key)
        if s is None:
            return default
        try:
            v = cast(s)
        except ValueError:
            problems.append(f"[{section}] {key} = {s!r} is not a number")
            return default
        if check is not None and not check(v):
            problems.append(f"[{section}] {key} = {v} invalid: {why}")
            return default
        return v

    model_name: Optional[str] = None
    model_m: Optional[int] = None
    model_spec = get("polynomial", "model")
    poly: Optional[PolynomialSpec] = None
    if model_spec is not None and coeffs:
        problems.append("[polynomial] gives both model = ... and "
                        "coefficient rows; use one")
    if model_spec is not None:
        parts = model_spec.split(":")
        if len(parts) != 2 or parts[0] not in ("p1", "p2"):
            problems.append(f"[polynomial] model = {model_spec!r}; "
                            "expected p1:m or p2:m")
        else:
            try:
                model_m = int(parts[1])
                model_name = parts[0]
                maker = model_p1 if model_name == "p1" else model_p2
                poly = maker(model_m)
            except (ValueError, PolyheatError) as e:
                problems.append(f"[polynomial] model = {model_spec!r}: {e}")
    elif coeffs:
        try:
            poly = make_polynomial(coeffs)
        except PolyheatError as e:
            problems.append(f"[polynomial] coefficients rejected: {e}")
    else:
        problems.append("no polynomial given: add [polynomial] with "
                        "model = p1:m (or p2:m) or coefficient rows")

    tau = number("operator", "tau", float, 1.0,
                 check=lambda v: v >= 0,
                 why="tau < 0 is out of scope (the operator loses "
                     "positivity; only tau >= 0 is supported)")
    L = number("operator", "L", float, 6.0, check=lambda v: v > 0,
               why="grid half-width must be positive")
    n = number("operator", "n", int, 193,
               check=lambda v: v >= 33 and v % 2 == 1,
               why="grid needs odd n >= 33")
    dt = number("solver", "dt", float, 1e-3, check=lambda v: v > 0,
                why="time step must be positive")
    rel_dt = number("solver", "rel_dt", float, 0.02,
                    check=lambda v: 0 < v < 1,
                    why="relative step must sit in (0, 1)")
    s_max = number("solver", "s_max", float, None, check=lambda v: v > 0,
                   why="horizon must be positive")

    schedule: Tuple[float, ...] = (0.25, 0.5, 1.0)
    s = get("solver", "schedule")
    if s is not None:
        try:
            vals = _parse_floats(s, 0, "schedule")
            if not vals:
                raise ValueError("schedule is empty")
            if any(v <= 0 for v in vals) or any(
                    b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("schedule must be positive and ascending")
            schedule = tuple(vals)
        except ValueError as e:
            problems.append(f"[solver] schedule: {e}")

    w0 = 0.0 + 0.0j
    s = get("solver", "w0")
    if s is not None:
        try:
            v = _parse_floats(s, 2, "w0")
            w0 = complex(v[0], v[1])
        except ValueError as e:
            problems.append(f"[solver] w0: {e}")

    n_paths = number("mc", "n_paths", int, 20000, check=lambda v: v >= 1000,
                     why="Monte Carlo needs >= 1000 paths")
    n_t = number("mc", "n_t", int, 256, check=lambda v: v >= 64,
                 why="bridges need >= 64 time nodes")
    seed = number("mc", "seed", int, 1234)
    mc_s = number("mc", "s", float, 0.25, check=lambda v: v > 0,
                  why="time must be positive")
    mc_x, mc_y = 0.5 + 0.0j, 0.0 + 0.0j
    for key, default in (("x", mc_x), ("y", mc_y)):
        s = get("mc", key)
        if s is not None:
            try:
                v = _parse_floats(s, 2, key)
                default = complex(v[0], v[1])
            except ValueError as e:
                problems.append(f"[mc] {key}: {e}")
        if key == "x":
            mc_x = default
        else:
            mc_y = default

    geom_box = number("geom", "box", float, 2.0, check=lambda v: v > 0,
                      why="sample box must be positive")
    geom_n = number("geom", "n", int, 5, check=lambda v: v >= 1,
                    why="need at least one sample per axis")
    geom_delta = number("geom", "delta", float, 1.0, check=lambda v: v > 0,
                        why="delta must be positive")
    rho_L = number("rho", "L", float, 3.0, check=lambda v: v > 0,
                   why="metric grid half-width must be positive")
    rho_n = number("rho", "n", int, 193, check=lambda v: v >= 3,
                   why="metric grid needs n >= 3")

    suite: Tuple[str, ...] = ("all",)
    s = get("verify", "suite")
    if s is not None:
        names = tuple(s.replace(",", " ").split())
        bad = [x for x in names if x != "all" and x not in SUITE_NAMES]
        if bad:
            problems.append(f"[verify] suite: unknown checks {bad}; "
                            f"choose from {('all',) + SUITE_NAMES}")
        else:
            suite = names

    if problems:
        raise ConfigValidationError("config validation errors:\n  "
                                    + "\n  ".join(problems))
    assert poly is not None
    return RunConfig(
        poly=poly, model=model_name, model_m=model_m, tau=tau, L=L, n=n,
        dt=dt, rel_dt=rel_dt, schedule=schedule, w0=w0, s_max=s_max,
        mc_n_paths=n_paths, mc_n_t=n_t, mc_seed=seed, mc_x=mc_x, mc_y=mc_y,
        mc_s=mc_s, geom_box=geom_box, geom_n=geom_n, geom_delta=geom_delta,
        rho_L=rho_L, rho_n=rho_n, rho_pairs=tuple(pairs), suite=suite,
        config_sha256=hashlib.sha256(text.encode()).hexdigest(),
    )


# ----------------------------------------------------------------------
# artifact helpers


def _write_csv(path: Path, header: Sequence[str],
               rows: Sequence[Sequence[float]]) -> None:
    with path.open("w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with path.open("w") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(out: Path, command: str, cfg: RunConfig,
              params: Dict[str, object], outputs: List[Path]) -> None:
    obj = {
        "command": command,
        "config_sha256": cfg.config_sha256,
        "polynomial_id": poly_id(cfg.poly),
        "params": params,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    _write_json(out / "manifest.json", obj)


def _field_rows(grid: Grid2D, values: np.ndarray) -> List[List[float]]:
    X, Y = grid.mesh()
    return [[X[i, j], Y[i, j],
             values[i, j].real, values[i, j].imag, abs(values[i, j])]
            for i in range(grid.n) for j in range(grid.n)]


# ----------------------------------------------------------------------
# subcommand bodies


def _run_geom(cfg: RunConfig, out: Path) -> int:
    c = np.linspace(-cfg.geom_box, cfg.geom_box, cfg.geom_n)
    rows = []
    for x2 in c:
        for x1 in c:
            z = complex(x1, x2)
            lam = lambda_fn(cfg.poly, z, cfg.geom_delta)
            mu = mu_fn(cfg.poly, z, cfg.geom_delta)
            rt = (sobolev_radius(cfg.poly, cfg.tau, z)
                  if cfg.tau > 0 else float("inf"))
            rows.append([z.real, z.imag, cfg.geom_delta, lam, mu, rt])
    path = out / "geom.csv"
    _write_csv(path, ["z_re", "z_im", "delta", "lambda", "mu", "R_taup"], rows)
    _manifest(out, "geom", cfg,
              {"box": cfg.geom_box, "n": cfg.geom_n,
               "delta": cfg.geom_delta, "tau": cfg.tau}, [path])
    print(f"geom: {len(rows)} points -> {path}")
    return 0


def _run_rho(cfg: RunConfig, out: Path) -> int:
    if cfg.model is None:
        raise ConfigValidationError(
            "rho needs a named model (model = p1:m or p2:m) for the "
            "closed-form comparison")
    if not cfg.rho_pairs:
        raise ConfigValidationError(
            "rho needs at least one bare pair row in [rho]")
    mg = build_metric_grid(cfg.poly, L=cfg.rho_L, n=cfg.rho_n)
    rows = []
    for z, w in cfg.rho_pairs:
        rg = rho_metric(cfg.poly, z, w, mg).value
        rc = rho_closed_form(cfg.model, cfg.model_m, z, w)
        ratio = rg / rc if rc > 0 else float("nan")
        rows.append([z.real, z.imag, w.real, w.imag, rg, rc, ratio])
    path = out / "rho.csv"
    _write_csv(path, ["z_re", "z_im", "w_re", "w_im",
                      "rho_grid", "rho_closed", "ratio"], rows)
    _manifest(out, "rho", cfg,
              {"L": cfg.rho_L, "n": cfg.rho_n,
               "n_pairs": len(cfg.rho_pairs)}, [path])
    print(f"rho: {len(rows)} pairs -> {path}")
    return 0


def _run_kernel(cfg: RunConfig, out: Path) -> int:
    grid = Grid2D(L=cfg.L, n=cfg.n)
    col = kernel_column(cfg.poly, cfg.tau, grid, cfg.w0, cfg.schedule,
                        dt=cfg.dt, rel_dt=cfg.rel_dt)
    paths = []
    for i, (s, snap) in enumerate(zip(col.times, col.snapshots)):
        path = out / f"kernel_{i:03d}.csv"
        _write_csv(path, ["x1", "x2", "re", "im", "abs"],
                   _field_rows(grid, snap.values))
        paths.append(path)
    _manifest(out, "kernel", cfg,
              {"tau": cfg.tau, "L": cfg.L, "n": cfg.n, "dt": cfg.dt,
               "rel_dt": cfg.rel_dt, "w0": [cfg.w0.real, cfg.w0.imag],
               "w0_snapped": [col.source.real, col.source.imag],
               "schedule": list(map(float, col.times)),
               "solver_stats": col.meta.get("solver")}, paths)
    print(f"kernel: {len(paths)} snapshots -> {out}")
    return 0


def _run_mc(cfg: RunConfig, out: Path) -> int:
    res = mc_kernel(cfg.poly, cfg.tau, cfg.mc_x, cfg.mc_y, cfg.mc_s,
                    n_paths=cfg.mc_n_paths, n_t=cfg.mc_n_t, seed=cfg.mc_seed)
    path = out / "mc.json"
    _write_json(path, {
        "estimate_re": res.estimate.real,
        "estimate_im": res.estimate.imag,
        "stderr": res.stderr,
        "free_factor": res.free_factor,
        "params": {
            "x": [cfg.mc_x.real, cfg.mc_x.imag],
            "y": [cfg.mc_y.real, cfg.mc_y.imag],
            "s": cfg.mc_s, "tau": cfg.tau, "n_paths": cfg.mc_n_paths,
            "n_t": cfg.mc_n_t, "seed": cfg.mc_seed,
        },
    })
    _manifest(out, "mc", cfg, {"s": cfg.mc_s, "tau": cfg.tau,
                               "n_paths": cfg.mc_n_paths}, [path])
    print(f"mc: H ~ {res.estimate:.6g} (stderr {res.stderr:.2g}) -> {path}")
    return 0


def _run_gfield(cfg: RunConfig, out: Path) -> int:
    grid = Grid2D(L=cfg.L, n=cfg.n)
    s_max = cfg.s_max
    if s_max is None:
        if cfg.tau <= 0:
            raise ConfigValidationError(
                "gfield at tau = 0 needs an explicit s_max")
        s_max = 10.0 * mu_fn(cfg.poly, cfg.w0, 1.0 / cfg.tau) ** 2
    G = fundamental_solution(cfg.poly, cfg.tau, grid, cfg.w0, s_max=s_max,
                             dt=None, rel_dt=cfg.rel_dt or 0.02)
    path = out / "gfield.csv"
    _write_csv(path, ["x1", "x2", "re", "im", "abs"],
               _field_rows(grid, G.field.values))
    _manifest(out, "gfield", cfg,
              {"tau": cfg.tau, "L": cfg.L, "n": cfg.n, "s_max": s_max,
               "w0": [G.source.real, G.source.imag],
               "tail_estimate": G.tail_estimate,
               "fitted_rate": G.fitted_rate,
               "near_diag_value": G.near_diag_value}, [path])
    print(f"gfield: s_max {s_max:g}, tail {G.tail_estimate:.3g} -> {path}")
    return 0


def _run_verify(cfg: RunConfig, out: Path) -> int:
    reports = run_suite(cfg.suite, progress=True)
    paths = []
    for rep in reports:
        path = out / f"verify_{rep.name}.json"
        _write_json(path, rep.to_dict())
        paths.append(path)
    _manifest(out, "verify", cfg, {"suite": list(cfg.suite)}, paths)
    width = max(len(r.name) for r in reports)
    print(f"{'check':<{width}}  verdict  worst margin  threshold")
    for r in reports:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':7s}  "
              f"{r.worst_margin:<12.4g}  {r.threshold:.4g}")
    return 0 if all(r.passed for r in reports) else 1


# ----------------------------------------------------------------------
# entry point


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="polyheat",
        description="heat kernels of weighted dbar Laplacians for "
                    "subharmonic polynomial weights",
    )
    parser.add_argument("command",
                        choices=("geom", "rho", "kernel", "mc", "gfield",
                                 "verify"))
    parser.add_argument("config", help="path to a line-oriented config file")
    parser.add_argument("--out", default="polyheat_out",
                        help="output directory (default: polyheat_out)")
    parser.add_argument("--oracle-mode", action="store_true",
                        help="allow tau = 0 (free-kernel oracle runs)")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 2

    try:
        cfg = parse_config(text)
        if cfg.tau == 0 and not args.oracle_mode:
            raise ConfigValidationError(
                "tau = 0 violates the subharmonic-weight hypotheses; "
                "pass --oracle-mode to run the free-kernel oracle")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        runner = {
            "geom": _run_geom, "rho": _run_rho, "kernel": _run_kernel,
            "mc": _run_mc, "gfield": _run_gfield, "verify": _run_verify,
        }[args.command]
        return runner(cfg, out)
    except PolyheatError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
