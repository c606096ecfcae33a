"""Command-line front end: ``isokle {solve,convergence,bench,sample}``.

Options come from three layers, later ones winning: built-in defaults, a
flat ``key = value`` config file given with ``--config``, and command-line
flags. Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import resource
import sys
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .eigensolver import (
    KleSpectrum,
    LanczosConfig,
    LanczosNotConverged,
    eigenfunctions_on_grid,
    sample_realizations,
    solve_spectrum,
)
from .geometry import SingularGeometryError, TensorPatch, load_geometry, map_grid
from .kernels import CovarianceKernel, kernel_families
from .operator import STAGES, assemble_dense_ibq, build_operator
from .quadrature import FactorizationError
from .reference import (
    assemble_dense_galerkin,
    kernel_interpolation_error,
    operator_error_norms,
    sweep_rate,
)
from .splines import BSplineBasis, SplineError, derive_space

log = logging.getLogger("isokle")

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    geometry: str = "unit_interval"
    kernel: str = "exponential"
    sigma2: float = 1.0
    corrlen: float = 1.0
    gauss_denom: float = 1.0
    trial_degree: list[int] = field(default_factory=lambda: [2])
    trial_subdivisions: list[int] = field(default_factory=lambda: [64])
    trial_continuity: list[int] | None = None
    interp_degree: list[int] = field(default_factory=lambda: [2])
    interp_subdivisions: list[int] = field(default_factory=lambda: [128])
    interp_continuity: list[int] | None = None
    interp_split_c0: bool = True
    num_modes: int = 20
    krylov_dim: int | None = None
    tol: float = 1e-10
    max_restarts: int = 300
    seed: int = 0
    threads: int = 1
    out: str = "kle_out"
    # solve
    vtk: bool = False
    plot_res: int = 33
    vtk_batch: int = 10
    # convergence
    levels: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    dense_cap: int = 2048
    # bench
    thread_list: list[int] = field(default_factory=lambda: [1, 2, 4])
    repeats: int = 3
    bench_solve: bool = True
    # sample
    count: int = 10
    mean: float = 0.0

    def validate(self) -> "RunConfig":
        if self.kernel not in kernel_families():
            raise ConfigError("kernel", f"unknown family {self.kernel!r}; choose from {kernel_families()}")
        for name in ("sigma2", "corrlen", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be positive, got {getattr(self, name)}")
        if self.gauss_denom not in (1.0, 2.0):
            raise ConfigError("gauss_denom", f"must be 1 or 2, got {self.gauss_denom}")
        for name in ("trial_degree", "interp_degree"):
            if any(p < 0 for p in getattr(self, name)):
                raise ConfigError(name, "degrees must be nonnegative")
        for name in ("trial_subdivisions", "interp_subdivisions", "levels", "thread_list"):
            vals = getattr(self, name)
            if not vals:
                raise ConfigError(name, "must not be empty")
            if any(v < 1 for v in vals):
                raise ConfigError(name, f"entries must be >= 1, got {vals}")
        for name in ("num_modes", "threads", "plot_res", "repeats", "vtk_batch", "max_restarts"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.plot_res < 2:
            raise ConfigError("plot_res", "need at least 2 lattice points per direction")
        if self.count < 0:
            raise ConfigError("count", f"must be >= 0, got {self.count}")
        if self.krylov_dim is not None and self.krylov_dim <= self.num_modes:
            raise ConfigError("krylov_dim", f"must exceed num_modes ({self.num_modes})")
        return self

    def kernel_spec(self) -> CovarianceKernel:
        return CovarianceKernel(self.kernel, self.sigma2, self.corrlen, self.gauss_denom)


_LISTS = {f.name for f in fields(RunConfig) if "list" in str(f.type)}
_BOOLS = {f.name for f in fields(RunConfig) if str(f.type) == "bool"}
_INTS = {"num_modes", "krylov_dim", "max_restarts", "seed", "threads", "plot_res", "vtk_batch", "dense_cap", "repeats", "count"}
_FLOATS = {"sigma2", "corrlen", "gauss_denom", "tol", "mean"}


def _coerce(name: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if name in _LISTS:
            if text.lower() in ("", "none"):
                return None if name.endswith("continuity") else []
            return [int(v) for v in text.replace(" ", "").strip("[]").split(",") if v]
        if name in _BOOLS:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if name in _INTS:
            return None if text.lower() == "none" else int(text)
        if name in _FLOATS:
            return float(text)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None
    return text.strip("'\"")


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Flat ``key = value`` pairs; ``#`` starts a comment."""
    known = {f.name for f in fields(RunConfig)}
    out: dict[str, Any] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError("config", str(exc)) from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(key, f"unknown key in {path} line {lineno}")
        out[key] = _coerce(key, value)
    return out


def _broadcast(values: list[int] | None, d: int, name: str) -> list[int] | None:
    if values is None:
        return None
    if len(values) == 1:
        return values * d
    if len(values) != d:
        raise ConfigError(name, f"expected 1 or {d} entries, got {len(values)}")
    return list(values)


def build_spaces(cfg: RunConfig, patch: TensorPatch, interp_subdivisions: list[int] | None = None):
    d = patch.dim
    tp = _broadcast(cfg.trial_degree, d, "trial_degree")
    ts = _broadcast(cfg.trial_subdivisions, d, "trial_subdivisions")
    tc = _broadcast(cfg.trial_continuity, d, "trial_continuity") or [None] * d
    ip = _broadcast(cfg.interp_degree, d, "interp_degree")
    isub = _broadcast(interp_subdivisions or cfg.interp_subdivisions, d, "interp_subdivisions")
    ic = _broadcast(cfg.interp_continuity, d, "interp_continuity") or [None] * d
    try:
        trial = [derive_space(b, p, s, c) for b, p, s, c in zip(patch.bases, tp, ts, tc)]
    except SplineError as exc:
        raise ConfigError("trial_continuity", str(exc)) from None
    try:
        interp = [derive_space(b, p, s, c, split_c0=cfg.interp_split_c0) for b, p, s, c in zip(patch.bases, ip, isub, ic)]
    except SplineError as exc:
        raise ConfigError("interp_continuity", str(exc)) from None
    return trial, interp


def physical_mesh_size(patch: TensorPatch, bases: Sequence[BSplineBasis]) -> float:
    """Largest element diameter, estimated from the images of element corners."""
    breaks = [b.element_boundaries() for b in bases]
    x = map_grid(patch, breaks).reshape([len(b) for b in breaks[::-1]] + [patch.dim])
    d = patch.dim
    h = 0.0
    for corner in range(1, 2**d):
        for other in range(corner):
            sl_a, sl_b = [], []
            for k in range(d):
                a, b = (corner >> k) & 1, (other >> k) & 1
                sl_a.append(slice(a, x.shape[d - 1 - k] - 1 + a))
                sl_b.append(slice(b, x.shape[d - 1 - k] - 1 + b))
            diff = x[tuple(sl_a[::-1])] - x[tuple(sl_b[::-1])]
            h = max(h, float(np.sqrt((diff**2).sum(-1)).max()))
    return h


def _space_info(patch, bases, corrlen):
    h = physical_mesh_size(patch, bases)
    return {
        "degrees": [b.degree for b in bases],
        "elements": [b.num_elements for b in bases],
        "num_elements": int(np.prod([b.num_elements for b in bases])),
        "dofs_per_direction": [b.n for b in bases],
        "dofs": int(np.prod([b.n for b in bases])),
        "knots": [list(map(float, b.knots)) for b in bases],
        "mesh_size": h,
        "mesh_size_over_corrlen": h / corrlen,
    }


def _max_rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _lattice(d: int, res: int) -> list[np.ndarray]:
    return [np.linspace(0.0, 1.0, res) for _ in range(d)]


def write_vtk(path: Path, points: np.ndarray, dims: Sequence[int], arrays: dict[str, np.ndarray], title: str) -> None:
    """Legacy ASCII VTK structured grid; ``points`` ordered first index fastest."""
    pts = np.zeros((points.shape[0], 3))
    pts[:, : points.shape[1]] = points
    dims3 = list(dims) + [1] * (3 - len(dims))
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:250] + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {dims3[0]} {dims3[1]} {dims3[2]}\n")
        fh.write(f"POINTS {pts.shape[0]} double\n")
        np.savetxt(fh, pts, fmt="%.17g")
        fh.write(f"POINT_DATA {pts.shape[0]}\n")
        for name, vals in arrays.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, np.asarray(vals).reshape(-1, 1), fmt="%.17g")


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


def _write_eigen_csv(path: Path, spec: KleSpectrum) -> None:
    with open(path, "w") as fh:
        fh.write("mode,eigenvalue,residual\n")
        for i, (lam, res) in enumerate(zip(spec.eigenvalues, spec.residuals), 1):
            fh.write(f"{i},{lam:.17g},{res:.17g}\n")


def _setup(cfg: RunConfig):
    patch = load_geometry(cfg.geometry)
    trial, interp = build_spaces(cfg, patch)
    return patch, trial, interp


def _solve(cfg: RunConfig, patch, trial, interp, threads: int):
    t0 = time.perf_counter()
    op = build_operator(patch, trial, interp, cfg.kernel_spec(), threads=threads)
    t_setup = time.perf_counter() - t0
    lcfg = LanczosConfig(cfg.num_modes, cfg.krylov_dim, cfg.tol, cfg.max_restarts, cfg.seed)
    timings: dict = {}
    t1 = time.perf_counter()
    try:
        spec = solve_spectrum(op, lcfg, timings)
    finally:
        op.close()
    t_solve = time.perf_counter() - t1
    return op, spec, t_setup, t_solve, timings


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    patch, trial, interp = _setup(cfg)
    op, spec, t_setup, t_solve, timings = _solve(cfg, patch, trial, interp, cfg.threads)
    _write_eigen_csv(out / "eigenvalues.csv", spec)
    calls = timings.pop("calls", 0)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": "solve",
        "geometry": cfg.geometry,
        "kernel": {"family": cfg.kernel, "variance": cfg.sigma2, "corrlen": cfg.corrlen, "gauss_denom": cfg.gauss_denom},
        "trial_space": _space_info(patch, trial, cfg.corrlen),
        "interpolation_space": _space_info(patch, interp, cfg.corrlen),
        "lanczos": {
            "num_modes": cfg.num_modes,
            "krylov_dim": LanczosConfig(cfg.num_modes, cfg.krylov_dim).resolved_krylov_dim(op.N),
            "tol": cfg.tol,
            "seed": cfg.seed,
            "matvecs": spec.iterations,
            "restarts": spec.restarts,
        },
        "threads": cfg.threads,
        "eigenvalues": spec.eigenvalues.tolist(),
        "residuals": spec.residuals.tolist(),
        "jacobian_floored_points": op.grid.floored,
        "timings": {
            "setup_s": t_setup,
            "solve_s": t_solve,
            "apply_calls": calls,
            "stages_s": {k: timings.get(k, 0.0) for k in STAGES},
        },
        "max_rss_mb": _max_rss_mb(),
    }
    _write_json(out / "spectrum.json", doc)
    if cfg.vtk:
        params = _lattice(patch.dim, cfg.plot_res)
        pts = map_grid(patch, params)
        phi = eigenfunctions_on_grid(spec, params) * np.sqrt(spec.eigenvalues)[None, :]
        for s in range(0, spec.num_modes, cfg.vtk_batch):
            e = min(s + cfg.vtk_batch, spec.num_modes)
            arrays = {f"mode_{i + 1:03d}": phi[:, i] for i in range(s, e)}
            write_vtk(out / f"modes_{s + 1:03d}-{e:03d}.vtk", pts, [cfg.plot_res] * patch.dim, arrays,
                      "sqrt(lambda_i) * phi_i on a uniform parameter lattice")
    log.info("solve: %d modes written to %s", spec.num_modes, out)
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    if len(cfg.levels) < 3:
        raise ConfigError("levels", f"a convergence sweep needs at least 3 levels, got {len(cfg.levels)}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    patch = load_geometry(cfg.geometry)
    kernel = cfg.kernel_spec()
    trial, _ = build_spaces(cfg, patch)
    N = int(np.prod([b.n for b in trial]))
    dense_ok = N <= cfg.dense_cap
    if not dense_ok:
        warnings.warn(f"trial dimension {N} exceeds dense cap {cfg.dense_cap}: operator error column skipped", RuntimeWarning)
    A = assemble_dense_galerkin(patch, trial, kernel, cap=cfg.dense_cap).A if dense_ok else None

    rows, spectra = [], []
    for level in cfg.levels:
        _, interp = build_spaces(cfg, patch, [level])
        n_interp = int(np.prod([b.n for b in interp]))
        h = max(1.0 / (b.num_elements) for b in interp)
        kerr = kernel_interpolation_error(patch, interp, kernel) if n_interp <= cfg.dense_cap * 4 else float("nan")
        op = build_operator(patch, trial, interp, kernel, threads=cfg.threads)
        opnorm = float("nan")
        if dense_ok:
            opnorm = operator_error_norms(A, assemble_dense_ibq(op, cap=cfg.dense_cap, standard_form=False))[0]
        spec = solve_spectrum(op, LanczosConfig(cfg.num_modes, cfg.krylov_dim, cfg.tol, cfg.max_restarts, cfg.seed))
        op.close()
        spectra.append(spec.eigenvalues)
        rows.append({"level": level, "mesh_size": h, "interp_dofs": n_interp, "kernel_interp_error": kerr, "operator_2norm_error": opnorm})
    ref = spectra[-1]
    for r, lam in zip(rows, spectra):
        r["eigenvalue_error"] = float(np.max(np.abs(lam / ref - 1.0)))

    cols = ["level", "mesh_size", "interp_dofs", "kernel_interp_error", "operator_2norm_error", "eigenvalue_error"]
    with open(out / "convergence.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[c]:.17g}" if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n")
    hs = [r["mesh_size"] for r in rows]
    rates = {}
    for c in ("kernel_interp_error", "operator_2norm_error"):
        vals = [r[c] for r in rows]
        rates[c] = sweep_rate(hs, vals) if all(np.isfinite(vals)) and min(vals) > 0 else None
    # the densest level is the reference for eigenvalues, so leave it out
    ev = [r["eigenvalue_error"] for r in rows[:-1]]
    rates["eigenvalue_error"] = sweep_rate(hs[:-1], ev) if len(ev) >= 2 and min(ev) > 0 else None
    _write_json(out / "convergence_rates.json", {"schema_version": SCHEMA_VERSION, "rates": rates, "levels": cfg.levels})
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    patch, trial, interp = _setup(cfg)
    base = build_operator(patch, trial, interp, cfg.kernel_spec(), threads=1)
    v = np.random.default_rng(cfg.seed).standard_normal(base.N)
    results = []
    for t in cfg.thread_list:
        op = base.with_threads(t)
        op.apply(v)  # warm-up (thread pool, compiled kernels)
        timings: dict = {}
        t0 = time.perf_counter()
        for _ in range(cfg.repeats):
            op.apply(v, timings)
        per_apply = (time.perf_counter() - t0) / cfg.repeats
        stages = {k: timings[k] / cfg.repeats for k in STAGES}
        entry = {
            "threads": t,
            "apply_s": per_apply,
            "stages_s": stages,
            "stage5_share": stages["5_kernel"] / sum(stages.values()),
        }
        if cfg.bench_solve:
            t1 = time.perf_counter()
            spec = solve_spectrum(op, LanczosConfig(cfg.num_modes, cfg.krylov_dim, cfg.tol, cfg.max_restarts, cfg.seed))
            entry["solve_s"] = time.perf_counter() - t1
            entry["matvecs"] = spec.iterations
        op.close()
        results.append(entry)
    ref = results[0]
    for r in results:
        r["apply_speedup"] = ref["apply_s"] / r["apply_s"]
        if cfg.bench_solve:
            r["solve_speedup"] = ref["solve_s"] / r["solve_s"]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "bench",
        "geometry": cfg.geometry,
        "N": base.N,
        "N_interp": base.N_interp,
        "cpu_count": os.cpu_count(),
        "results": results,
        "max_rss_mb": _max_rss_mb(),
    }
    _write_json(out / "bench.json", doc)
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": "sample",
        "count": cfg.count,
        "seed": cfg.seed,
        "mean": cfg.mean,
        "num_modes": cfg.num_modes,
        "random_variables": "independent standard normal",
        "lattice_resolution": cfg.plot_res,
        "files": [],
    }
    if cfg.count > 0:
        patch, trial, interp = _setup(cfg)
        _, spec, *_ = _solve(cfg, patch, trial, interp, cfg.threads)
        real = sample_realizations(spec, cfg.mean, cfg.count, cfg.seed)
        params = _lattice(patch.dim, cfg.plot_res)
        fields_ = real.evaluate(spec, params)
        pts = map_grid(patch, params)
        header = ",".join([f"x{k + 1}" for k in range(patch.dim)] + [f"sample_{i + 1}" for i in range(cfg.count)])
        np.savetxt(out / "samples.csv", np.column_stack([pts, fields_.T]), fmt="%.17g", delimiter=",", header=header, comments="")
        np.savetxt(out / "coefficients.csv", real.coefficients, fmt="%.17g", delimiter=",")
        manifest["files"] = ["samples.csv", "coefficients.csv"]
        if cfg.vtk:
            arrays = {f"sample_{i + 1:04d}": fields_[i] for i in range(cfg.count)}
            write_vtk(out / "samples.vtk", pts, [cfg.plot_res] * patch.dim, arrays, "random field realizations")
            manifest["files"].append("samples.vtk")
        manifest["eigenvalues"] = spec.eigenvalues.tolist()
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "bench": cmd_bench, "sample": cmd_sample}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isokle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--config", help="flat key = value file; flags override it")
    add("--geometry", help="built-in name or geometry JSON path")
    add("--kernel", help=f"kernel family ({', '.join(kernel_families())})")
    add("--sigma2", help="variance")
    add("--corrlen", help="correlation length bL (absolute)")
    add("--gauss-denom", help="Gaussian exponent denominator, 1 or 2")
    add("--trial-degree", help="degree, one value or one per direction")
    add("--trial-subdivisions", help="uniform splits of each geometry element")
    add("--trial-continuity", help="continuity of new knots (default p-1)")
    add("--interp-degree")
    add("--interp-subdivisions")
    add("--interp-continuity")
    add("--interp-split-c0", help="make geometry C0 lines C-1 in the interpolation space")
    add("--num-modes")
    add("--krylov-dim")
    add("--tol")
    add("--max-restarts")
    add("--seed")
    add("--threads", help="stage-5 worker threads (default $KLE_THREADS or 1)")
    add("--out", help="output directory")
    add("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="compute the truncated spectrum")
    p.add_argument("--vtk", nargs="?", const="true", help="write modes as VTK structured grids")
    p.add_argument("--plot-res", help="lattice points per direction (default 33)")
    p.add_argument("--vtk-batch", help="modes per VTK file")
    p = sub.add_parser("convergence", parents=[common], help="interpolation-space refinement sweep")
    p.add_argument("--levels", help="comma-separated interpolation subdivisions")
    p.add_argument("--dense-cap")
    p = sub.add_parser("bench", parents=[common], help="apply() and solve timings per thread count")
    p.add_argument("--thread-list", help="comma-separated thread counts")
    p.add_argument("--repeats")
    p.add_argument("--bench-solve")
    p = sub.add_parser("sample", parents=[common], help="draw field realizations")
    p.add_argument("--count")
    p.add_argument("--mean")
    p.add_argument("--plot-res")
    p.add_argument("--vtk", nargs="?", const="true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    env_threads = os.environ.get("KLE_THREADS")
    if env_threads:
        values["threads"] = _coerce("threads", env_threads)
    if args.config:
        values.update(read_config_file(args.config))
    known = {f.name for f in fields(RunConfig)}
    for key, raw in vars(args).items():
        if key in known and raw is not None:
            values[key] = _coerce(key, raw)
    for key in ("trial_degree", "trial_subdivisions", "interp_degree", "interp_subdivisions", "levels", "thread_list",
                "trial_continuity", "interp_continuity"):
        if isinstance(values.get(key), int):
            values[key] = [values[key]]
    return RunConfig(**values).validate()


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _report("config", str(exc), field=exc.field)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        if isinstance(exc, (np.linalg.LinAlgError, SingularGeometryError)):
            _report("numerical", str(exc))
            return EXIT_NUMERICAL
        _report("config", str(exc))
        return EXIT_CONFIG
    except LanczosNotConverged as exc:
        _report("numerical", str(exc), eigenvalues=exc.spectrum.eigenvalues.tolist(), residuals=exc.spectrum.residuals.tolist())
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FactorizationError, FloatingPointError) as exc:
        _report("numerical", str(exc))
        return EXIT_NUMERICAL


def _report(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
