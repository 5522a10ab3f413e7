"""Command-line experiments: ``simwave {spectrum,evolve,resolvent,project,selfcheck}``.

Every run resolves a :class:`RunConfig` (defaults < ``--config`` file < flags),
hashes it, and stamps the hash on every output: a ``# config_hash=...`` line
at the top of CSV files and a ``config_hash`` key in JSON summaries.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import specfun
from .evolve import (CFLError, EvolutionConfig, EvolutionError, evolve, fit_growth_rate,
                     fit_linf_decay, write_trajectory_csv)
from .freeop import (SingularEndpointError, eigenfunction_from_profile, free_eigenprofile,
                     PencilSolver)
from .grid import (RhoGrid, StateVector, _atomic_write, hardy_ratio, l2_norm,
                   random_smooth_function, random_smooth_state)
from .pertop import (NonlinearityConfig, apply_l, gauge_eigenvalue, gauge_mode_profile,
                     locate_root_shooting, quantization_roots)
from .spectral import (Contour, SpectralProjector, default_contour, resolvent_l,
                       resolvent_norm_scan, write_scan_csv)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
EVOLVE_MODES = ("free_random", "free_mode", "gauge", "stable_projected", "perturbed_random")
METHOD_AGREEMENT = 1e-4
SELFCHECK_N = 257


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: int = 3
    grid_n: int = 1025
    dtau: float | None = None          # None: largest stable step fitting tau_final
    tau_final: float = 10.0
    contour_radius: float | None = None  # None: min(0.5, 1/(p-1))
    contour_nodes: int = 64
    output_dir: str = "."
    seed: int = 0
    mode: str = "free_random"
    lam: complex = 0.0
    kappa: float = 0.75
    omegas: tuple = (0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0)
    tolerance_scale: float = 1.0

    def validate(self) -> None:
        if isinstance(self.p, bool) or self.p < 3 or self.p % 2 == 0:
            raise UsageError(f"p must be an odd integer > 1, got {self.p}")
        if self.grid_n < 16:
            raise UsageError(f"grid_n must be >= 16, got {self.grid_n}")
        if self.dtau is not None and not self.dtau > 0:
            raise UsageError("dtau must be positive")
        if not self.tau_final > 0:
            raise UsageError("tau_final must be positive")
        if self.contour_radius is not None and not 0 < self.contour_radius < 1:
            raise UsageError("contour_radius must lie in (0, 1)")
        if self.contour_nodes < 16 or self.contour_nodes % 2:
            raise UsageError("contour_nodes must be even and >= 16")
        if self.seed < 0:
            raise UsageError("seed must be nonnegative")
        if self.mode not in EVOLVE_MODES:
            raise UsageError(f"mode must be one of {', '.join(EVOLVE_MODES)}")
        if not self.tolerance_scale > 0:
            raise UsageError("tolerance_scale must be positive")

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")   # where results go does not change them
        d["lam"] = [complex(self.lam).real, complex(self.lam).imag]
        d["omegas"] = [float(w) for w in self.omegas]
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def nonlinearity(self) -> NonlinearityConfig:
        return NonlinearityConfig(self.p)

    @property
    def grid(self) -> RhoGrid:
        return RhoGrid(self.grid_n)

    @property
    def contour(self) -> Contour:
        cfg = self.nonlinearity
        if self.contour_radius is None:
            return default_contour(cfg, self.contour_nodes)
        return Contour(gauge_eigenvalue(cfg), self.contour_radius, self.contour_nodes)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


# ---------------------------------------------------------------------------
# config parsing

def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def _parse_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"cannot parse list of reals {text!r}") from None


def _parse_optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


_CONVERTERS = {
    "p": int, "grid_n": int, "dtau": _parse_optional_float, "tau_final": float,
    "contour_radius": _parse_optional_float, "contour_nodes": int, "output_dir": str,
    "seed": int, "mode": str, "lam": _parse_complex, "kappa": float,
    "omegas": _parse_list, "tolerance_scale": float,
}


def read_config_file(path) -> dict:
    """key = value lines; '#' starts a comment; '-' in keys is read as '_'."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "out":
            key = "output_dir"
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults stay None so that only flags actually given override the file
    common.add_argument("--p", type=int, default=None, help="odd nonlinearity exponent (default 3)")
    common.add_argument("--grid-n", dest="grid_n", type=int, default=None)
    common.add_argument("--dtau", type=float, default=None)
    common.add_argument("--tau-final", dest="tau_final", type=float, default=None)
    common.add_argument("--contour-radius", dest="contour_radius", type=float, default=None)
    common.add_argument("--contour-nodes", dest="contour_nodes", type=int, default=None)
    common.add_argument("--out", dest="output_dir", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="key=value file; flags override it")

    parser = argparse.ArgumentParser(prog="simwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="point spectrum by Gamma poles and shooting")
    ev = sub.add_parser("evolve", parents=[common], help="time evolution and growth fit")
    ev.add_argument("--mode", choices=EVOLVE_MODES, default=None)
    ev.add_argument("--lam", type=_parse_complex, default=None,
                    help="eigenvalue for --mode free_mode, e.g. 0.25 or 0.4+1j")
    rs = sub.add_parser("resolvent", parents=[common], help="resolvent norm scan along Re lambda = kappa")
    rs.add_argument("--kappa", type=float, default=None)
    rs.add_argument("--omegas", type=_parse_list, default=None, help="comma-separated Im lambda values")
    sub.add_parser("project", parents=[common], help="spectral projection of random data")
    sc = sub.add_parser("selfcheck", parents=[common], help="invariant suite at reduced resolution")
    sc.add_argument("--tolerance-scale", dest="tolerance_scale", type=float, default=None,
                    help="multiply every tolerance (values << 1 must make the check fail)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output helpers

def _header(cfg: RunConfig, command: str) -> list[str]:
    return [f"config_hash={cfg.config_hash}", f"command={command}"]


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def write_json(path, payload: dict, cfg: RunConfig) -> None:
    payload = {"config_hash": cfg.config_hash, "config": cfg.canonical(), **payload}
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    _atomic_write(path, lambda fh: fh.write(text))


def _write_rows(path, header: list[str], rows, comments: list[str]) -> None:
    def write(fh):
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    _atomic_write(path, write)


# ---------------------------------------------------------------------------
# commands

def cmd_spectrum(cfg: RunConfig) -> int:
    nl = cfg.nonlinearity
    lam0 = gauge_eigenvalue(nl)
    rows, found = [], []
    disagreement = 0.0
    for rep in quantization_roots(nl):
        lam = rep.lam.real
        half = min(0.05, 0.5 * (lam - 1.0)) if lam > 1 else min(0.05, 0.5 * (lam - 0.5))
        shot = locate_root_shooting(nl, lam - half, lam + half)
        gap = abs(shot.lam - rep.lam)
        disagreement = max(disagreement, gap)
        for r in (rep, shot):
            rows.append([r.method, repr(r.lam.real), repr(r.lam.imag), repr(r.residual)])
        found.append({"gamma_pole": rep.lam.real, "shooting": shot.lam.real, "difference": gap})
    _write_rows(cfg.out / "eigenvalues.csv", ["method", "re_lambda", "im_lambda", "residual"],
                rows, _header(cfg, "spectrum"))
    ok = disagreement <= METHOD_AGREEMENT
    write_json(cfg.out / "spectrum.json", {
        "lambda0": lam0, "roots": found, "max_method_disagreement": disagreement,
        "agreement_tolerance": METHOD_AGREEMENT, "ok": ok}, cfg)
    if not ok:
        print(f"error: Gamma-pole and shooting eigenvalues disagree by {disagreement:.3e}",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"lambda0 = {lam0!r}; {len(found)} eigenvalue(s) in Re lambda > 1/2")
    return EXIT_OK


def initial_state(cfg: RunConfig, grid: RhoGrid):
    """(initial state, generator config or None) for the configured evolve mode."""
    nl = cfg.nonlinearity
    rng = np.random.default_rng(cfg.seed)
    if cfg.mode == "free_random":
        return random_smooth_state(grid, rng), None
    if cfg.mode == "free_mode":
        try:
            u = free_eigenprofile(cfg.lam, grid)
        except SingularEndpointError as exc:
            raise UsageError(str(exc)) from None
        phi = eigenfunction_from_profile(u, cfg.lam)
        return phi / l2_norm(phi), None
    if cfg.mode == "gauge":
        phi = gauge_mode_profile(nl, grid)
        return phi / l2_norm(phi), nl
    if cfg.mode == "perturbed_random":
        return random_smooth_state(grid, rng), nl
    # stable_projected: project with the resolvent of the discrete generator
    # the stepper actually uses, so its own unstable mode is removed
    proj = SpectralProjector(cfg.contour, nl, grid, "semidiscrete")
    return proj.stable_part(random_smooth_state(grid, rng)), nl


def cmd_evolve(cfg: RunConfig) -> int:
    grid = cfg.grid
    phi0, gen = initial_state(cfg, grid)
    try:
        ecfg = EvolutionConfig(grid, cfg.tau_final, gen, cfg.dtau)
    except CFLError as exc:
        raise UsageError(str(exc)) from None
    ecfg = EvolutionConfig(grid, cfg.tau_final, gen, ecfg.dtau,
                           record_every=max(1, ecfg.steps // 2000))
    traj = evolve(ecfg, phi0)
    write_trajectory_csv(traj, cfg.out / "trajectory.csv", _header(cfg, "evolve"))
    fit = fit_growth_rate(traj)
    linf = fit_linf_decay(traj)
    write_json(cfg.out / "growth_fit.json", {
        "mode": cfg.mode, "mu": fit.mu, "window": list(fit.window), "rmse": fit.rmse,
        "linf_exponent": linf.mu, "dtau": ecfg.dtau, "steps": ecfg.steps}, cfg)
    print(f"mu = {fit.mu:.6f} on tau in [{fit.window[0]:.3g}, {fit.window[1]:.3g}]")
    return EXIT_OK


def cmd_resolvent(cfg: RunConfig) -> int:
    if not cfg.kappa > 0.5:
        raise UsageError("kappa must exceed 1/2")
    scan = resolvent_norm_scan(cfg.nonlinearity, cfg.kappa, cfg.omegas, cfg.grid, cfg.seed)
    write_scan_csv(scan, cfg.out / "resolvent_scan.csv", _header(cfg, "resolvent"))
    good = [n for n in scan.norms if math.isfinite(n)]
    write_json(cfg.out / "resolvent_scan.json", {
        "kappa": cfg.kappa, "max_norm": max(good) if good else None,
        "failures": int(sum(scan.failed)), "messages": [m for m in scan.messages if m]}, cfg)
    print(f"{len(scan.norms)} points, {sum(scan.failed)} failed, max norm "
          f"{max(good) if good else float('nan'):.4g}")
    return EXIT_OK


def cmd_project(cfg: RunConfig) -> int:
    nl, grid = cfg.nonlinearity, cfg.grid
    proj = SpectralProjector(cfg.contour, nl, grid)
    f = random_smooth_state(grid, np.random.default_rng(cfg.seed))
    pf = proj(f)
    stable = f - pf
    gauge = gauge_mode_profile(nl, grid)
    rows = [[repr(float(r))] + [repr(float(x)) for x in (a.real, a.imag, b.real, b.imag)]
            for r, a, b in zip(grid.nodes, stable.comp1.values, stable.comp2.values)]
    _write_rows(cfg.out / "stable_part.csv", ["rho", "re1", "im1", "re2", "im2"], rows,
                _header(cfg, "project"))
    nf = l2_norm(f)
    coef = pf.comp2.values[0] / gauge.comp2.values[0]
    write_json(cfg.out / "projection.json", {
        "norm_f": nf, "norm_pf": l2_norm(pf),
        "idempotence": l2_norm(proj(pf) - pf) / nf,
        "stable_gauge_component": l2_norm(proj(stable)) / nf,
        "pf_off_gauge_line": l2_norm(pf - gauge * coef) / max(l2_norm(pf), 1e-300),
        "contour": {"center": complex(cfg.contour.center), "radius": cfg.contour.radius,
                    "nodes": cfg.contour.nodes}}, cfg)
    print(f"||Pf||/||f|| = {l2_norm(pf) / nf:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selfcheck

def _selfcheck_suite(cfg: RunConfig):
    """Yield (name, error, tolerance): each invariant passes iff error <= tolerance."""
    nl = cfg.nonlinearity
    grid = RhoGrid(min(cfg.grid_n, SELFCHECK_N))
    rng = np.random.default_rng(cfg.seed)
    lam0 = gauge_eigenvalue(nl)

    yield "gamma_half", abs(specfun.gamma_complex(0.5) - math.sqrt(math.pi)), 1e-10
    z = 0.3 + 0.7j
    yield "gamma_reflection", abs(specfun.gamma_complex(z) * specfun.gamma_complex(1 - z)
                                  - math.pi / np.sin(math.pi * z)), 1e-10

    roots = quantization_roots(nl)
    yield "single_unstable_eigenvalue", (abs(len(roots) - 1) + abs(roots[0].lam - lam0)
                                         if roots else 1.0), 1e-10
    shot = locate_root_shooting(nl, lam0 - min(0.05, (lam0 - 1) / 2), lam0 + 0.05)
    yield "shooting_matches_gamma_pole", abs(shot.lam - lam0), 1e-4

    phi = gauge_mode_profile(nl, grid)
    yield "gauge_mode_residual", l2_norm(apply_l(nl, phi) - phi * lam0) / l2_norm(phi), 1e-2

    f = random_smooth_state(grid, rng)
    u = resolvent_l(4.0, nl, f)
    yield "resolvent_residual", l2_norm(u * 4.0 - apply_l(nl, u) - f), 1e-2

    g = random_smooth_function(grid, rng)
    yield "hardy_inequality", max(hardy_ratio(g - g.values[0]) - 4.0, 0.0), 1e-6

    traj = evolve(EvolutionConfig(grid, 10.0, record_every=10), random_smooth_state(grid, rng))
    yield "free_growth_bound", max(fit_growth_rate(traj).mu - 0.5, 0.0), 0.05

    traj = evolve(EvolutionConfig(grid, 10.0, nl, record_every=10), phi / l2_norm(phi))
    yield "gauge_growth_rate", abs(fit_growth_rate(traj).mu - lam0), 0.05

    proj = SpectralProjector(cfg.contour, nl, grid)
    h = random_smooth_state(grid, rng)
    ph = proj(h)
    yield "projection_idempotence", l2_norm(proj(ph) - ph) / l2_norm(h), 1e-6


def cmd_selfcheck(cfg: RunConfig) -> int:
    report, first_fail = [], None
    for name, err, tol in _selfcheck_suite(cfg):
        limit = tol * cfg.tolerance_scale
        ok = bool(err <= limit)
        report.append({"name": name, "error": float(err), "tolerance": limit, "passed": ok})
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {float(err):.3e} (tolerance {limit:.1e})")
        if not ok and first_fail is None:
            first_fail = name
    write_json(cfg.out / "selfcheck.json", {
        "checks": report, "passed": first_fail is None, "first_failure": first_fail}, cfg)
    if first_fail is not None:
        print(f"selfcheck failed: {first_fail}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "evolve": cmd_evolve, "resolvent": cmd_resolvent,
            "project": cmd_project, "selfcheck": cmd_selfcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, EvolutionError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
