"""Command-line interface: ``influxion {precompute,solve,converge,cond}``.

Exit codes: 0 success, 2 invalid arguments or input files, 3 quadrature or
solver failure, 4 cache missing or inconsistent with the request.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import re
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, cache
from .bench import (
    SourceSpec,
    conditioning_study,
    convergence_study,
    relative_error,
    source_field,
)
from .estimator import CoupledPoissonSolver
from .exterior import build_basis
from .influence import assemble, condition_number
from .interior import Geometry
from .quadrature import DEFAULT_TOL
from .validation import QuadratureError, SolverError

logger = logging.getLogger("influxion")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_CACHE = 4

RHO_HEADER = re.compile(r"^#\s*cheb-coeffs\s+K=(\d+)\s+L=(\d+)\s+H=(\S+)\s*$")


class UsageError(ValueError):
    """Invalid flag value or malformed input file."""


def fmt(value) -> str:
    """Round-trip decimal representation (17 significant digits)."""
    if value is None:
        return ""
    return f"{float(value):.17g}"


def parse_range(text: str) -> list[int]:
    """Inclusive ``"a..b"`` or ``"a..b,step"``; a single integer is also accepted."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*(?:,\s*(\d+)\s*)?)?", text)
    if not m:
        raise UsageError(f"malformed range {text!r}; expected a..b[,step]")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) else lo
    step = int(m.group(3)) if m.group(3) else 1
    if step < 1 or hi < lo:
        raise UsageError(f"empty range {text!r}")
    return list(range(lo, hi + 1, step))


def parse_grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m or int(m.group(1)) < 2 or int(m.group(2)) < 2:
        raise UsageError(f"malformed grid {text!r}; expected AxB with A, B >= 2")
    return int(m.group(1)), int(m.group(2))


def read_rho_file(path) -> tuple[np.ndarray, dict]:
    """Coefficient CSV with a ``# cheb-coeffs K=.. L=.. H=..`` header line."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read rho file: {exc}") from exc
    if not lines or not RHO_HEADER.match(lines[0]):
        raise UsageError("rho file must start with '# cheb-coeffs K=<K> L=<L> H=<H>'")
    m = RHO_HEADER.match(lines[0])
    header = {"K": int(m.group(1)), "L": int(m.group(2)), "H": float(m.group(3))}
    rows = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=float)
    except ValueError as exc:
        raise UsageError(f"rho file has a non-numeric entry: {exc}") from exc
    if data.shape != (header["K"] + 1, header["L"] + 1):
        raise UsageError(f"rho file holds {data.shape} coefficients, header declares {(header['K'] + 1, header['L'] + 1)}")
    if not np.all(np.isfinite(data)):
        raise UsageError("rho file contains non-finite values")
    return data, header


def write_rho_file(path, coeffs, H) -> None:
    coeffs = np.asarray(coeffs, dtype=float)
    buf = io.StringIO()
    buf.write(f"# cheb-coeffs K={coeffs.shape[0] - 1} L={coeffs.shape[1] - 1} H={fmt(H)}\n")
    for row in coeffs:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    cache.atomic_write_text(path, buf.getvalue())


def emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        cache.atomic_write_text(out, text)


def _geometry(args) -> Geometry:
    L = args.K if args.L is None else args.L
    return Geometry(args.H, args.K, L, getattr(args, "allow_degenerate", False))


def _build(geom, mode, tol, threads, dropped=None):
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        basis = build_basis(geom, tol, workers=threads)
        return assemble(geom, basis, mode=mode, dropped=dropped)


def obtain_system(geom, mode, tol, threads):
    """Influence system from ``INFLUXION_CACHE_DIR`` when set, building it if needed."""
    if not os.environ.get(cache.CACHE_ENV):
        return _build(geom, mode, tol, threads)
    path = cache.default_cache_path(geom, mode, tol)
    if path.exists():
        try:
            doc = cache.read_document(path)
            if cache.matches(doc, geom, mode, tol):
                return cache.system_from_dict(doc)
        except (OSError, ValueError, KeyError):
            logger.warning("ignoring unreadable cache %s", path)
    sys_ = _build(geom, mode, tol, threads)
    cache.save_system(sys_, path)
    return sys_


def cmd_precompute(args) -> int:
    geom = _geometry(args)
    out = Path(args.out) if args.out else cache.default_cache_path(geom, args.collocation, args.tol)
    if out.exists() and not args.force:
        try:
            doc = cache.read_document(out)
        except (OSError, ValueError):
            doc = None
        if doc is not None and cache.matches(doc, geom, args.collocation, args.tol) and (
            args.dropped is None or doc.get("dropped") == args.dropped
        ):
            print(f"cache up to date: {out}")
            return EXIT_OK
    t0 = time.perf_counter()
    sys_ = _build(geom, args.collocation, args.tol, args.threads, args.dropped)
    cache.save_system(sys_, out)
    print(
        f"wrote {out}: {sys_.size}x{sys_.size} influence matrix, dropped rank {sys_.dropped}, "
        f"condition number {fmt(condition_number(sys_))}, {time.perf_counter() - t0:.2f} s"
    )
    return EXIT_OK


def _load_basis(path) -> CoupledPoissonSolver:
    path = Path(path)
    if not path.exists() and not path.is_absolute():
        candidate = cache.cache_dir() / path
        path = candidate if candidate.exists() else path
    try:
        system = cache.load_system(path)
    except FileNotFoundError as exc:
        raise cache.CacheMismatchError(f"basis cache not found: {path}") from exc
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise cache.CacheMismatchError(f"unreadable basis cache {path}: {exc}") from exc
    return CoupledPoissonSolver.from_system(system)


def cmd_solve(args) -> int:
    nx, ny = parse_grid(args.grid)
    spec = None
    if args.source is not None:
        try:
            spec = SourceSpec.parse(args.source)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    else:
        rho, header = read_rho_file(args.rho_file)
    if args.reference == "analytic" and spec is None:
        raise UsageError("--reference analytic needs --source")
    t0 = time.perf_counter()
    est = _load_basis(args.basis)
    geom = est.geometry_
    t_load = time.perf_counter() - t0
    if spec is not None:
        rho = source_field(spec, geom)
    elif (header["K"], header["L"]) != (geom.K, geom.L) or header["H"] != geom.H:
        raise cache.CacheMismatchError(
            f"rho file declares K={header['K']} L={header['L']} H={fmt(header['H'])}, "
            f"cache has K={geom.K} L={geom.L} H={fmt(geom.H)}"
        )
    t1 = time.perf_counter()
    sol = est.solve(rho)
    t_solve = time.perf_counter() - t1
    xs = np.linspace(-geom.H, geom.H, nx)
    ys = np.linspace(-1.0, 1.0, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    phi = est.evaluate(sol.field, X.ravel(), Y.ravel())
    buf = io.StringIO()
    buf.write("x,y,phi\n")
    for x, y, p in zip(X.ravel(), Y.ravel(), phi):
        buf.write(f"{fmt(x)},{fmt(y)},{fmt(p)}\n")
    summary = {
        "version": __version__,
        "geometry": {"H": geom.H, "K": geom.K, "L": geom.L},
        "collocation": est.system_.collocation.mode,
        "dropped": est.system_.dropped,
        "source": args.source if spec is not None else str(args.rho_file),
        "grid": [nx, ny],
        "c_norm": float(np.linalg.norm(sol.coefficients)),
        "neumann_residual": sol.neumann_residual(est.system_),
        "condition_number": est.condition_number_,
        "timings": {"load": t_load, "solve": t_solve},
    }
    if args.reference == "analytic":
        summary["relative_error"] = relative_error(sol.field, spec, geom)
    cache.atomic_write_text(args.out, buf.getvalue())
    summary_path = args.summary or f"{args.out}.summary.json"
    cache.atomic_write_text(summary_path, json.dumps(summary, indent=2) + "\n")
    print(f"wrote {args.out} and {summary_path}")
    return EXIT_OK


def _cached_systems(n_list, H, mode, tol, threads):
    return {N: obtain_system(Geometry(H, N, N), mode, tol, threads) for N in n_list}


def cmd_converge(args) -> int:
    if args.delta is not None and args.delta2 is not None:
        raise UsageError("give only one of --delta / --delta2")
    if args.delta is None and args.delta2 is None:
        raise UsageError("one of --delta / --delta2 is required")
    delta = args.delta if args.delta is not None else math.sqrt(args.delta2)
    spec = SourceSpec(args.m, delta)
    n_list = parse_range(args.N)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        systems = _cached_systems(n_list, args.H, args.collocation, args.tol, args.threads)
        rows = convergence_study(spec, n_list, args.H, args.collocation, args.tol, args.threads, systems)
    buf = io.StringIO()
    buf.write("N,E,E_self,cond,seconds\n")
    for r in rows:
        e_self = 0.0 if r.N == n_list[-1] else r.E_self
        buf.write(f"{r.N},{fmt(r.E)},{fmt(e_self)},{fmt(r.cond)},{fmt(r.seconds)}\n")
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_cond(args) -> int:
    n_list = parse_range(args.N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        systems = _cached_systems(n_list, args.H, args.collocation, args.tol, args.threads)
        study = conditioning_study(n_list, args.H, args.collocation, args.tol, args.threads, systems)
    buf = io.StringIO()
    buf.write("N,cond,sv1,sv2,sv3,sv4,sv5\n")
    for N, c, sv in zip(study.N, study.cond, study.smallest):
        buf.write(",".join([str(N), fmt(c)] + [fmt(v) for v in sv]) + "\n")
    if study.fit is None:
        buf.write("# fit omitted: warning, at least 3 values of N are needed for a quadratic fit\n")
    else:
        a, b, c = study.fit
        buf.write(f"# fit a={fmt(a)} b={fmt(b)} c={fmt(c)}\n")
        buf.write(f"# loglog slope={fmt(study.slope)}\n")
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="influxion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, geometry=True):
        if geometry:
            p.add_argument("--H", type=float, default=1.0, help="rectangle half-width (>= 1)")
        p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL, help="quadrature tolerance")
        p.add_argument("--collocation", choices=("lobatto", "gauss"), default="lobatto")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")

    p = sub.add_parser("precompute", help="build and cache the exterior basis and influence matrix")
    common(p)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--L", type=int, default=None, help="defaults to K")
    p.add_argument("--dropped", type=int, default=None, help="override the dropped singular rank")
    p.add_argument("--allow-degenerate", action="store_true", help="accept H = 2")
    p.add_argument("--force", action="store_true", help="rebuild even if the cache is up to date")
    p.add_argument("--out", help=f"cache path (default: under ${cache.CACHE_ENV})")
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("solve", help="solve for one source using a cached basis")
    p.add_argument("--basis", required=True, help="cache file from precompute")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--source", help='"m=<int>,delta=<float>[,rot=<deg>]"')
    src.add_argument("--rho-file", help="CSV of source Chebyshev coefficients")
    p.add_argument("--grid", default="101x101", help="output grid AxB")
    p.add_argument("--reference", choices=("none", "analytic"), default="none")
    p.add_argument("--out", required=True, help="field CSV (x,y,phi)")
    p.add_argument("--summary", help="summary JSON (default: <out>.summary.json)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="error table over a range of N")
    common(p)
    p.add_argument("--m", type=int, required=True, choices=(0, 1, 2))
    p.add_argument("--delta", type=_positive_float)
    p.add_argument("--delta2", type=_positive_float)
    p.add_argument("--N", required=True, help="range a..b[,step]")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("cond", help="condition numbers over a range of N")
    common(p)
    p.add_argument("--N", required=True, help="range a..b[,step]")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_cond)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except cache.CacheMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except (QuadratureError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
