"""Command-line interface.

Subcommands::

    verify     order-condition residuals of the tabulated and variable methods
    stability  root locus samples (theta, Re z, Im z)
    angle      A(phi)-stability angle in degrees
    matstab    running norm of the stability-matrix product along a trace
    converge   fixed-step convergence study with fitted slopes
    solve      one adaptive run, optionally with a per-step trace
    wpd        work-precision sweep over methods and tolerances

Global flags ``--config``, ``--out``, ``--seed`` and ``--threads`` may be
given before or after the subcommand.  Options given on the command line
override the JSON configuration.  Every CSV has a header row and floats
are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .coeffs import (
    FAMILIES,
    MAX_ORDER,
    canonical_family,
    condition_residuals,
    fixed_coefficients,
    random_admissible_fractions,
    uniform_fractions,
    variable_coefficients,
)
from .errors import LimmError
from .integrate import (
    SolverOptions,
    integrate_adaptive,
    integrate_fixed,
    reference_solution,
    relative_error,
)
from .linalg import LinearSolveConfig
from .problems import make_problem
from .stability import product_norm, root_locus, stability_angle
from .trace import fmt, read_trace_csv, write_trace_csv

VERIFY_TOL = 1e-8
DEFAULT_CONFIG = {
    "problem": "dahlquist",
    "params": {},
    "family": "LIMM",
    "rtol": 1e-6,
    "atol": 1e-6,
    "k_max": MAX_ORDER,
    "linear": {"mode": "direct"},
    "jacobian_reuse": 1,
    "trace": False,
}


@dataclass(frozen=True)
class WorkPrecisionRecord:
    method: str
    tolerance: float
    final_error: float
    n_accepted: int
    n_rejected: int
    n_f_evals: int
    n_jac_evals: int
    n_linear_solves: int
    wall_seconds: float
    n_newton_iters: int = 0
    status: str = "ok"


# --------------------------------------------------------------------------
# configuration


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("configuration must be a JSON object")
    return cfg


def solver_options(cfg: dict) -> SolverOptions:
    """:class:`SolverOptions` from a run configuration.

    An explicit ``linear.gmres_tol`` switches off the ``0.1 * rtol`` rule.
    """
    for key in ("rtol", "atol"):
        v = cfg.get(key, DEFAULT_CONFIG[key])
        if not 0 < v < 1:
            raise ValueError(f"{key} must lie in (0, 1), got {v}")
    lin = dict(cfg.get("linear") or {})
    explicit_gmres_tol = "gmres_tol" in lin
    linear = LinearSolveConfig(**{k: lin[k] for k in ("mode", "gmres_tol", "restart", "max_iterations") if k in lin})
    opts = {
        "rtol": cfg.get("rtol", DEFAULT_CONFIG["rtol"]),
        "atol": cfg.get("atol", DEFAULT_CONFIG["atol"]),
        "k_max": cfg.get("k_max", MAX_ORDER),
        "linear": linear,
        "gmres_tol_from_rtol": not explicit_gmres_tol,
        "jacobian_reuse": cfg.get("jacobian_reuse", 1),
        "trace": bool(cfg.get("trace", False)),
    }
    for key in ("h0", "h_min", "h_max"):
        if cfg.get(key) is not None:
            opts[key] = float(cfg[key])
    return SolverOptions(**opts)


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(path, header, rows) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def _families(value) -> list[str]:
    if value is None:
        return list(FAMILIES)
    if isinstance(value, str):
        value = value.split(",")
    return [canonical_family(v) for v in value]


def _map(fn, items, threads: int):
    """Apply ``fn`` to independent work items; results keep the input order."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# reference solutions


def _spectral_estimate(problem, iters: int = 30) -> float:
    """Rough ``||J||`` at the initial point by power iteration on ``J v``."""
    rng = np.random.default_rng(0)
    v = rng.normal(size=problem.dimension)
    v /= np.linalg.norm(v)
    t0 = problem.t_span[0]
    lam = 0.0
    for _ in range(iters):
        w = problem.jvp(t0, problem.y0, v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(lam)


def reference_steps(problem, minimum: int = 2000) -> int:
    """RK4 step count with a stability margin from the Jacobian estimate."""
    span = problem.t_span[1] - problem.t_span[0]
    return int(max(minimum, math.ceil(span * _spectral_estimate(problem) / 2.0)))


def cached_reference(problem_name: str, params: dict, cache_dir: Path | None, n_steps: int | None = None):
    """Final state from a tiny-step RK4 run, cached under a content hash.

    Returns ``(state, n_steps, path)``; ``path`` is ``None`` without a cache.
    """
    problem = make_problem(problem_name, params)
    n = n_steps or reference_steps(problem)
    key = json.dumps({"problem": problem_name, "params": params, "method": "rk4", "n": n, "v": __version__}, sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref-{digest}.npy"
        if path.exists():
            return np.load(path), n, path
    y = reference_solution(problem, n)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, y)
    return y, n, path


# --------------------------------------------------------------------------
# commands


def cmd_verify(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    families = _families(args.family or cfg.get("family_list"))
    orders = [args.k] if args.k else list(range(1, MAX_ORDER + 1))
    n_random = args.n_random if args.n_random is not None else cfg.get("n_random", 100)
    rows, bad = [], []
    for family in families:
        for k in orders:
            samples = [("uniform", uniform_fractions(k))]
            samples += [(f"random{j}", random_admissible_fractions(rng, k)) for j in range(n_random)]
            for label, c in samples:
                m = fixed_coefficients(family, k) if label == "uniform" else variable_coefficients(family, k, c)
                if args.perturb_alpha0:
                    alpha = m.alpha.copy()
                    alpha[1] += args.perturb_alpha0
                    m = dataclasses.replace(m, alpha=alpha)
                for name, ell, value in condition_residuals(m, c):
                    row = (family, k, label, " ".join(fmt(x) for x in c.c[2 : k + 1]), name, ell, float(abs(value)))
                    rows.append(row)
                    if abs(value) > VERIFY_TOL:
                        bad.append(row)
    header = ["family", "k", "sample", "c", "condition", "ell", "residual"]
    _write_rows(args.out, header, rows)
    if bad:
        worst = max(bad, key=lambda r: r[-1])
        print(f"FAIL {len(bad)} residuals above {VERIFY_TOL:g}; worst {worst}", file=sys.stderr)
        return 1
    print(f"OK {len(rows)} residuals <= {VERIFY_TOL:g}", file=sys.stderr)
    return 0


def cmd_stability(args, cfg) -> int:
    m = fixed_coefficients(args.family, args.k)
    loc = root_locus(m, args.samples)
    _write_rows(args.out, ["theta", "re", "im"], zip(loc.theta.tolist(), loc.z.real.tolist(), loc.z.imag.tolist()))
    return 0


def cmd_angle(args, cfg) -> int:
    phi = stability_angle(fixed_coefficients(args.family, args.k))
    if args.out:
        _write_rows(args.out, ["family", "k", "angle_deg"], [(canonical_family(args.family), args.k, phi)])
    print(f"{phi:.6f}")
    return 0


def cmd_matstab(args, cfg) -> int:
    trace = read_trace_csv(args.trace)
    norms = product_norm(trace, args.family, args.lam, resample=args.resample)
    _write_rows(args.out, ["step", "norm"], ((i + 1, float(v)) for i, v in enumerate(norms)))
    return 0


def _fit_slope(hs, errs) -> float:
    hs, errs = np.asarray(hs), np.asarray(errs)
    ok = np.isfinite(errs) & (errs > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0])


def convergence_study(problem_name, params, families, orders, h_list, ref, threads: int = 1):
    """Rows ``(family, order, h, error)`` and a slope per ``(family, order)``."""
    problem = make_problem(problem_name, params)
    cells = [(f, k, h) for f in families for k in orders for h in h_list]

    def run(cell):
        f, k, h = cell
        try:
            y = integrate_fixed(problem, f, k, h).final_state
            return float(np.linalg.norm(y - ref))
        except (LimmError, ValueError, FloatingPointError):
            return math.nan

    errs = _map(run, cells, threads)
    rows = [(f, k, float(h), e) for (f, k, h), e in zip(cells, errs)]
    slopes = {}
    for f in families:
        for k in orders:
            sel = [(h, e) for (ff, kk, h, e) in rows if ff == f and kk == k]
            slopes[(f, k)] = _fit_slope(*zip(*sel))
    return rows, slopes


def cmd_converge(args, cfg) -> int:
    name = args.problem or cfg.get("problem", "lorenz96")
    params = cfg.get("params", {})
    families = _families(args.family or cfg.get("families") or ["LIMM-W"])
    orders = args.orders or cfg.get("orders") or list(range(1, MAX_ORDER + 1))
    h_list = args.h or cfg.get("h_list") or [2.0**-j for j in range(5, 12)]
    ref, _, _ = cached_reference(name, params, _cache_dir(args, cfg), cfg.get("reference_steps"))
    rows, slopes = convergence_study(name, params, families, orders, h_list, ref, args.threads)
    _write_rows(args.out, ["family", "order", "h", "error"], rows)
    for (f, k), s in slopes.items():
        print(f"slope {f} k={k}: {s:.4f}", file=sys.stderr)
    return 0


def cmd_solve(args, cfg) -> int:
    cfg = {**DEFAULT_CONFIG, **cfg}
    if args.problem:
        cfg["problem"] = args.problem
    if args.family:
        cfg["family"] = args.family
    for key in ("rtol", "atol"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.trace:
        cfg["trace"] = True
    problem = make_problem(cfg["problem"], cfg.get("params"))
    opts = solver_options(cfg)
    report = integrate_adaptive(problem, cfg["family"], opts)
    if opts.trace:
        with _open_out(args.out) as fh:
            write_trace_csv(fh, report.trace, problem.dimension)
    else:
        header = ["t"] + [f"y{i}" for i in range(problem.dimension)]
        _write_rows(args.out, header, [[report.final_time] + report.final_state.tolist()])
    summary = {k: v for k, v in dataclasses.asdict(report).items() if k not in ("trace", "final_state")}
    print(json.dumps(summary), file=sys.stderr)
    return 0


def work_precision(problem_name, params, methods, tolerances, ref, base_cfg=None, threads: int = 1):
    """One :class:`WorkPrecisionRecord` per ``(method, tolerance)`` cell.

    A failing cell is recorded with ``final_error = nan`` and its error
    message; the sweep continues.
    """
    base_cfg = dict(base_cfg or {})
    cells = [(canonical_family(m), float(tol)) for m in methods for tol in tolerances]

    def run(cell):
        family, tol = cell
        problem = make_problem(problem_name, params)
        opts = solver_options({**base_cfg, "rtol": tol, "atol": tol, "trace": False})
        start = time.monotonic()
        try:
            r = integrate_adaptive(problem, family, opts)
        except LimmError as exc:
            return WorkPrecisionRecord(family, tol, math.nan, 0, 0, 0, 0, 0, time.monotonic() - start, 0, f"failed: {exc}")
        return WorkPrecisionRecord(
            family,
            tol,
            relative_error(r.final_state, ref),
            r.n_accepted,
            r.n_rejected,
            r.n_f_evals,
            r.n_jac_evals,
            r.n_linear_solves,
            r.wall_seconds,
            r.n_newton_iters,
        )

    return _map(run, cells, threads)


def cmd_wpd(args, cfg) -> int:
    name = args.problem or cfg.get("problem", "grayscott")
    params = cfg.get("params", {"n": 32} if name.replace("_", "").lower() == "grayscott" else {})
    methods = _families(args.methods or cfg.get("methods"))
    tolerances = args.tolerances or cfg.get("tolerances") or [10.0**-j for j in range(2, 7)]
    ref, n_ref, _ = cached_reference(name, params, _cache_dir(args, cfg), cfg.get("reference_steps"))
    check_tol = cfg.get("reference_check_tol")
    if check_tol:
        problem = make_problem(name, params)
        tight = integrate_adaptive(problem, "LIMM", SolverOptions(rtol=check_tol, atol=check_tol))
        print(f"reference cross-check: RK4({n_ref}) vs LIMM({check_tol:g}) rel diff "
              f"{relative_error(tight.final_state, ref):.3e}", file=sys.stderr)
    records = work_precision(name, params, methods, tolerances, ref, cfg, args.threads)
    header = [f.name for f in dataclasses.fields(WorkPrecisionRecord)]
    _write_rows(args.out, header, (dataclasses.astuple(r) for r in records))
    return 0


def _cache_dir(args, cfg):
    if getattr(args, "cache_dir", None):
        return Path(args.cache_dir)
    if cfg.get("cache_dir"):
        return Path(cfg["cache_dir"])
    base = Path(args.out).parent if args.out not in (None, "-") else Path.cwd()
    return base / ".limm_cache"


# --------------------------------------------------------------------------
# argument parsing


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _global_flags(parser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON run configuration")
    parser.add_argument("--out", default=d, help="output file (default: stdout)")
    parser.add_argument("--seed", type=int, default=d if suppress else 20240601, help="RNG seed")
    parser.add_argument("--threads", type=int, default=d if suppress else 1, help="concurrent sweep cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="limm", description="Linearly implicit multistep methods toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("verify", cmd_verify, "check order conditions at uniform and random fractions")
    p.add_argument("--family", help="comma-separated families (default: all)")
    p.add_argument("--k", type=int)
    p.add_argument("--n-random", type=int)
    p.add_argument("--perturb-alpha0", type=float, default=0.0, help="add to alpha_0 to exercise the failure path")

    p = add("stability", cmd_stability, "root locus samples")
    p.add_argument("family")
    p.add_argument("k", type=int)
    p.add_argument("--samples", type=int, default=8192)

    p = add("angle", cmd_angle, "A(phi)-stability angle in degrees")
    p.add_argument("family")
    p.add_argument("k", type=int)

    p = add("matstab", cmd_matstab, "stability-matrix product norm along a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--family", default="LIMM")
    p.add_argument("--resample", action="store_true")

    p = add("converge", cmd_converge, "fixed-step convergence study")
    p.add_argument("--problem")
    p.add_argument("--family", help="comma-separated families")
    p.add_argument("--orders", type=_int_list, help="e.g. 1..5")
    p.add_argument("--h", type=_float_list, help="comma-separated step sizes")
    p.add_argument("--cache-dir")

    p = add("solve", cmd_solve, "one adaptive run")
    p.add_argument("--problem")
    p.add_argument("--family")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--trace", action="store_true")

    p = add("wpd", cmd_wpd, "work-precision sweep")
    p.add_argument("--problem")
    p.add_argument("--methods", help="comma-separated families")
    p.add_argument("--tolerances", type=_float_list)
    p.add_argument("--cache-dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (LimmError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
