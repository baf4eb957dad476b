"""Command-line experiment runner.

``conilay <experiment> --config <path> [--out <dir>] [--workers N]``

The configuration is a JSON object; angles are given in degrees and
converted once here. Every CSV starts with ``#`` comment lines carrying the
experiment name, a hash of the effective configuration and the package
versions, so that reruns with the same configuration are byte-identical.

Exit status: 0 on success, 2 when a verification fails, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import asymptotics as asy
from . import experiments as ex
from . import potential1d, verify
from .geometry import to_cylindrical, write_mesh

log = logging.getLogger("conilay")

__all__ = [
    "Experiment",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
    "run_sweep_theta",
    "run_counting",
    "run_potential",
    "run_modes",
    "run_semiclassical",
    "run_agmon",
    "run_verify",
    "main",
]

# Apertures above this are rejected: the lowest eigenvalue then sits so close
# to the threshold that no admissible truncation resolves it.
MAX_THETA_DEG = 89.0


class Experiment(str, Enum):
    SWEEP_THETA = "SweepTheta"
    COUNTING = "Counting"
    POTENTIAL = "Potential"
    MODES = "Modes"
    SEMICLASSICAL = "Semiclassical"
    AGMON = "Agmon"
    VERIFY = "Verify"


class ConfigError(ValueError):
    """A configuration value violates the preconditions of the module it drives."""


@dataclass
class ExperimentConfig:
    experiment: Experiment
    theta_deg: list[float] = field(default_factory=lambda: [2.5])
    h: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05])
    k: int = 6
    tol: float = 1e-10
    shift: float | None = None
    degree: int = 2
    mesh: dict | None = None
    decades: int = 9
    x_range: tuple[float, float] = (-4.0, 50.0)
    n_points: int = 1000
    agmon: dict = field(default_factory=dict)
    criteria: list[int] | None = None
    out: str = "out"
    raw: dict = field(default_factory=dict)

    @property
    def thetas(self) -> list[float]:
        return [math.radians(t) for t in self.theta_deg]

    def mesh_config(self, default: ex.MeshConfig) -> ex.MeshConfig:
        if not self.mesh:
            return default
        try:
            return ex.MeshConfig.from_dict({**default.__dict__, **self.mesh})
        except TypeError as exc:
            raise ConfigError(f"bad mesh parameters: {exc}") from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


_KEYS = {
    "experiment", "theta_deg", "h", "k", "tol", "shift", "degree", "mesh", "decades",
    "x_range", "n_points", "agmon", "criteria", "out",
}


def load_config(source, experiment: str | None = None) -> ExperimentConfig:
    """Parse and validate a JSON configuration (path, JSON text or dict)."""
    if isinstance(source, dict):
        raw = dict(source)
    elif source is None:
        raw = {}
    else:
        raw = json.loads(Path(source).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if experiment is not None:
        raw["experiment"] = experiment
    if "experiment" not in raw:
        raise ConfigError("no experiment given")
    try:
        exp = Experiment(raw["experiment"])
    except ValueError:
        raise ConfigError(f"unknown experiment {raw['experiment']!r}") from None
    cfg = ExperimentConfig(exp, raw=raw, **{k: v for k, v in raw.items() if k != "experiment"})
    if isinstance(cfg.theta_deg, (int, float)):
        cfg.theta_deg = [cfg.theta_deg]
    if isinstance(cfg.h, (int, float)):
        cfg.h = [cfg.h]
    for t in cfg.theta_deg:
        if not 0.0 < float(t) <= MAX_THETA_DEG:
            raise ConfigError(f"aperture {t} deg outside (0, {MAX_THETA_DEG}] deg")
    for h in cfg.h:
        if not float(h) > 0.0:
            raise ConfigError(f"semiclassical parameter must be positive, got {h}")
    if not int(cfg.k) >= 1:
        raise ConfigError("k must be >= 1")
    if cfg.degree not in (1, 2):
        raise ConfigError("element degree must be 1 or 2")
    a, b = cfg.x_range
    if not -potential1d.SQRT2PI < a < b:
        raise ConfigError("x_range must satisfy -pi*sqrt(2) < a < b")
    return cfg


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def _header(cfg: ExperimentConfig, extra: list[str] | None = None) -> list[str]:
    return [
        f"experiment {cfg.experiment.value}",
        f"config_sha256 {cfg.digest()}",
        f"versions conilay={__version__} numpy={np.__version__} scipy={scipy.__version__}",
    ] + list(extra or [])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], columns: list[str], rows, footer: list[str] | None = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        for line in footer or []:
            fh.write(f"# {line}\n")
    return path


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def _sweep_one(args):
    theta, k, mesh_cfg, degree, tol = args
    try:
        sol = ex.solve_meridian(theta, k, mesh_cfg, degree=degree, tol=tol)
        return theta, sol.values, None
    except Exception as exc:  # per-aperture failures are logged and the sweep continues
        return theta, None, f"{type(exc).__name__}: {exc}"


def run_sweep_theta(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """``theta_deg, n, mu_n`` for every aperture, plus the zero-aperture limit rows."""
    mesh_cfg = cfg.mesh_config(ex.meridian_config())
    jobs = [(t, cfg.k, mesh_cfg, cfg.degree, cfg.tol) for t in cfg.thetas]
    results = _map(_sweep_one, jobs, workers)
    limit = asy.expansion_coefficients(1).beta0
    rows = [(0.0, n, limit) for n in range(1, cfg.k + 1)]
    failures = []
    for (theta, vals, err), deg in zip(results, cfg.theta_deg):
        if err is not None:
            log.error("aperture %s deg failed: %s", deg, err)
            failures.append(f"failed theta_deg={deg}: {err}")
            continue
        rows += [(float(deg), n + 1, v) for n, v in enumerate(vals)]
    header = _header(cfg, ["rows with theta_deg=0 hold the common zero-aperture limit j^2/pi^2"])
    return write_csv(out / "sweep_theta.csv", header, ["theta_deg", "n", "mu_n"], rows, failures)


def run_counting(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """Staircase ``log10E, N, asymptote`` per aperture, with a slope summary."""
    paths = []
    for theta, deg in zip(cfg.thetas, cfg.theta_deg):
        spec, dofs = verify.counting_spectrum(theta, cfg.mesh_config(ex.counting_config()), cfg.decades)
        mu = spec.values[: cfg.k]
        E_min = 1.0 - mu[-1] if len(mu) else 0.5
        grid = np.geomspace(min(0.5, E_min / 2.0), 0.99, 200)[::-1]
        N = asy.staircase(mu, grid)
        A = asy.counting_asymptote(theta, grid)
        rows = [(math.log10(e), n, a) for e, n, a in zip(grid, N, A)]
        footer = [f"eigenvalues {len(mu)} of {len(spec.values)} found below 1 ({dofs} dofs)"]
        if len(mu) >= 2:
            slope = asy.staircase_slope(mu)
            target = asy.counting_constant(theta)
            footer.append(f"slope {float(slope)!r} target {float(target)!r} relative_error {float(abs(slope / target - 1.0))!r}")
        footer += [f"jump E_{j + 1} {float(e)!r}" for j, e in enumerate(asy.jump_energies(mu))]
        paths.append(write_csv(out / f"counting_{deg:g}.csv", _header(cfg, [f"theta_deg {deg}"]), ["log10E", "N", "asymptote"], rows, footer))
    return paths[-1] if paths else out


def run_potential(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """Effective potential table ``x, v, residual``."""
    a, b = cfg.x_range
    xs = np.linspace(a, b, cfg.n_points)
    path = out / "potential.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = [
        f"v_min {float(potential1d.v_min())!r}",
        f"log_constant {float(potential1d.log_constant())!r}",
        f"x1 {float(potential1d.verified_x1())!r}",
    ]
    potential1d.write_potential_csv(path, xs, _header(cfg, extra))
    return path


def run_modes(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """Per-mode nodal files ``x y psi`` (``x = z``, ``y = r``) and a manifest."""
    theta = cfg.thetas[0]
    sol = ex.solve_meridian(theta, cfg.k, cfg.mesh_config(ex.meridian_config()), degree=cfg.degree, tol=cfg.tol)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(sol.mesh, out / "mesh.txt")
    rz = to_cylindrical(sol.dofs.coords, theta)
    rows = []
    for n in range(len(sol.values)):
        full = np.zeros(sol.dofs.n_dofs)
        full[sol.free] = sol.result.vectors[:, n]
        # fix the sign so that the largest nodal value is positive
        if full[np.argmax(np.abs(full))] < 0.0:
            full = -full
        write_csv(
            out / f"mode_{n + 1}.csv",
            _header(cfg, [f"theta_deg {cfg.theta_deg[0]}", f"mode {n + 1}", f"mu {float(sol.values[n])!r}", "one row per dof in dof order"]),
            ["x", "y", "psi"],
            zip(rz[:, 1], rz[:, 0], full),
        )
        mass_neg = _mass_fraction_z_negative(sol, n)
        rows.append((n + 1, sol.values[n], sol.result.residuals[n], mass_neg))
    return write_csv(out / "modes.csv", _header(cfg, [f"dofs {sol.n_dofs}"]), ["n", "mu", "residual", "mass_z_negative"], rows)


def _mass_fraction_z_negative(sol: ex.FiberSolution, n: int) -> float:
    """Weighted mass of mode ``n`` in ``z < 0`` (element-midpoint classification)."""
    from .assembly import triangle_rule, evaluate

    pts, wts = triangle_rule(5)
    mesh = sol.mesh
    T = mesh.n_triangles
    full = np.zeros(sol.dofs.n_dofs)
    full[sol.free] = sol.result.vectors[:, n]
    elems = np.repeat(np.arange(T), len(pts))
    val, _ = evaluate(mesh, sol.dofs, full, elems, np.tile(pts, (T, 1)))
    p = mesh.nodes[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    xq = (p[:, 0][:, None, :] + np.einsum("tij,qj->tqi", J, pts)).reshape(-1, 2)
    rz = to_cylindrical(xq, sol.problem.theta)
    dens = val**2 * rz[:, 0] * np.repeat(det, len(pts)) * np.tile(wts, T)
    return float(np.sum(dens[rz[:, 1] < 0.0]) / np.sum(dens))


def run_semiclassical(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """``h, n, lambda, lambda_delta, expansion, epsilon_bo`` for every ``h``."""
    rows = []
    for h in cfg.h:
        mcfg = cfg.mesh_config(ex.scaled_config(h))
        guide = ex.solve_scaled(h, cfg.k, ex.scaled_mesh(mcfg), degree=cfg.degree, tol=cfg.tol)
        tri = ex.solve_scaled(h, cfg.k, ex.scaled_mesh(mcfg, triangle=True), degree=cfg.degree, tol=cfg.tol)
        bo = potential1d.solve_1d(potential1d.Model1DProblem.born_oppenheimer(h), cfg.k).values
        for n in range(cfg.k):
            rows.append((h, n + 1, guide.values[n], tri.values[n], asy.lambda_delta_expansion(n + 1, h), bo[n]))
    return write_csv(
        out / "semiclassical.csv",
        _header(cfg),
        ["h", "n", "lambda", "lambda_delta", "expansion", "epsilon_bo"],
        rows,
    )


def run_agmon(cfg: ExperimentConfig, out: Path, workers: int = 1) -> Path:
    """``h, agmon_ratio, clamped``; leakage abscissae go to a companion file."""
    params = asy.AgmonWeightParams(**{"x1": potential1d.verified_x1(), **cfg.agmon})
    rows, leak = [], []
    for h in cfg.h:
        sol = ex.solve_scaled(h, 1, ex.scaled_mesh(cfg.mesh_config(ex.scaled_config(h))), degree=cfg.degree, tol=cfg.tol)
        vec = sol.result.vectors[:, 0]
        r = asy.agmon_ratio(vec, sol.mesh, h, params, sol.dofs, sol.free)
        rows.append((h, r.ratio, r.clamped))
        leak.append((h, asy.leakage_abscissa(vec, sol.mesh, sol.dofs, sol.free), h * math.sqrt(abs(math.log(h)))))
    extra = [f"eta0 {params.eta0} eta1 {params.eta1} eta2 {params.eta2} x1 {float(params.x1)!r}"]
    write_csv(out / "leakage.csv", _header(cfg, extra), ["h", "x_leak", "h_sqrt_log"], leak)
    return write_csv(out / "agmon.csv", _header(cfg, extra), ["h", "agmon_ratio", "clamped"], rows)


def run_verify(cfg: ExperimentConfig, out: Path, workers: int = 1) -> tuple[Path, bool]:
    """Run the acceptance criteria; writes ``verify.json`` and returns (path, all passed)."""
    wanted = set(cfg.criteria or range(1, len(verify.ALL_CHECKS) + 1))
    results = []
    for number, check in enumerate(verify.ALL_CHECKS, start=1):
        if number not in wanted:
            continue
        try:
            res = check()
        except Exception as exc:
            res = verify.CriterionResult(number, check.__name__, False, "", "", {}, f"error {type(exc).__name__}: {exc}")
        log.info(res.line())
        print(res.line(), flush=True)
        results.append(res)
    report = dict(
        config_sha256=cfg.digest(),
        versions=dict(conilay=__version__, numpy=np.__version__, scipy=scipy.__version__),
        passed=all(r.passed for r in results),
        criteria=[r.as_dict() for r in results],
    )
    verdict = next((r.measured.get("verdict") for r in results if r.number == 5), None)
    report["coefficient_verdict"] = verdict
    special = next((r.measured for r in results if r.number == 8), None)
    if special is not None:
        report["special_function_digest"] = special
    out.mkdir(parents=True, exist_ok=True)
    path = out / "verify.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path, report["passed"]


_RUNNERS = {
    Experiment.SWEEP_THETA: run_sweep_theta,
    Experiment.COUNTING: run_counting,
    Experiment.POTENTIAL: run_potential,
    Experiment.MODES: run_modes,
    Experiment.SEMICLASSICAL: run_semiclassical,
    Experiment.AGMON: run_agmon,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="conilay", description="Spectral experiments on conical layers.")
    parser.add_argument("experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", help="output directory (overrides the configuration)")
    parser.add_argument("--workers", type=int, default=1, help="concurrent per-aperture solves")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment)
        out = Path(args.out or cfg.out)
        if cfg.experiment is Experiment.VERIFY:
            path, ok = run_verify(cfg, out, args.workers)
            print(path)
            return 0 if ok else 2
        path = _RUNNERS[cfg.experiment](cfg, out, args.workers)
        print(path)
        return 0
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
