"""Resolvent of L = L_0 + L', norm estimates and the Riesz projection onto
the gauge eigenspace.

Two discretizations of R_L(lam) are available:

* ``"pencil"`` -- the scalar reduction (t_0(lam) - p c_0) u = B(lam) f solved by
  finite differences, then u_1 = rho u' + (lam - 1) u - int f_2, u_2 = u'.
* ``"semidiscrete"`` -- the exact inverse of lam minus the method-of-lines
  generator used by :mod:`simwave.evolve`.  Projecting with it removes the
  discrete gauge mode of the time stepper itself, which is what a long
  stable-subspace evolution needs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal

import numpy as np

from .evolve import SemiDiscreteGenerator
from .freeop import NearSingularError, PencilSolver
from .grid import (RhoGrid, StateVector, _atomic_write, cumtrapz, l2_norm,
                   random_smooth_function)
from .pertop import NonlinearityConfig, gauge_eigenvalue

Method = Literal["pencil", "semidiscrete"]

N_PROBES = 20
N_REFINE = 5


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Contour:
    center: complex
    radius: float
    nodes: int = 64

    def __post_init__(self):
        if not 0 < self.radius < 1:
            raise ValueError("contour radius must lie in (0, 1)")
        if self.nodes < 16 or self.nodes % 2:
            raise ValueError("contour needs an even number of nodes >= 16")

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes lambda_k and trapezoid weights for (1/2 pi i) int d lambda."""
        theta = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        z = self.radius * np.exp(1j * theta)
        return complex(self.center) + z, z / self.nodes


def default_contour(cfg: NonlinearityConfig, nodes: int = 64) -> Contour:
    return Contour(gauge_eigenvalue(cfg), min(0.5, 1.0 / (cfg.p - 1)), nodes)


def check_contour(contour: Contour, cfg: NonlinearityConfig) -> None:
    """Reject contours that miss lambda_0 or reach lambda = 1 or Re lambda <= 1/2."""
    lam0 = gauge_eigenvalue(cfg)
    c, r = complex(contour.center), contour.radius
    if abs(c - lam0) >= r:
        raise ValueError("contour does not enclose the gauge eigenvalue")
    if abs(c - 1.0) <= r:
        raise ValueError("contour reaches lambda = 1")
    if c.real - r <= 0.5:
        raise ValueError("contour reaches the half-plane Re lambda <= 1/2")


def _solver(grid: RhoGrid, cfg: NonlinearityConfig, lam, method: Method):
    if method == "pencil":
        return PencilSolver(grid, lam, cfg.pc0)
    if method == "semidiscrete":
        return SemiDiscreteGenerator(grid, cfg.pc0).resolvent(lam)
    raise ValueError(f"unknown resolvent method {method!r}")


def resolvent_l(lam, cfg: NonlinearityConfig, f: StateVector, method: Method = "pencil") -> StateVector:
    """R_L(lam) f for Re lam > 1/2 away from the gauge eigenvalue."""
    return _solver(f.grid, cfg, lam, method).resolvent(f)


def lprime_resolvent_bound(lam, cfg: NonlinearityConfig) -> float:
    lam = complex(lam)
    return cfg.pc0 / abs(lam - 1.0) * (2.0 / (lam.real - 0.5) + 1.0)


# ---------------------------------------------------------------------------
# operator norms by random probing


def _random_probes(grid: RhoGrid, rng: np.random.Generator, k: int):
    f1 = np.array([random_smooth_function(grid, rng).values for _ in range(k)])
    f2 = np.array([random_smooth_function(grid, rng).values for _ in range(k)])
    w = grid.simpson_weights
    norms = np.sqrt(np.abs(f1) ** 2 @ w + np.abs(f2) ** 2 @ w)
    return f1 / norms[:, None], f2 / norms[:, None]


def _norms(grid: RhoGrid, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    w = grid.simpson_weights
    return np.sqrt(np.abs(v1) ** 2 @ w + np.abs(v2) ** 2 @ w)


def estimate_operator_norm(apply: Callable, grid: RhoGrid, rng: np.random.Generator,
                           probes: int = N_PROBES, refine: int = N_REFINE) -> float:
    """Lower estimate of ||A|| on L^2(0,1)^2.

    ``apply(f1, f2) -> (g1, g2)`` acts on stacked rows.  ``probes`` random
    smooth unit inputs are tried; the best one is then fed back through A
    ``refine`` times (power-iteration style).  Returns the largest observed
    ||A x|| / ||x||.
    """
    f1, f2 = _random_probes(grid, rng, probes)
    g1, g2 = apply(f1, f2)
    ratios = _norms(grid, g1, g2)
    best = int(np.argmax(ratios))
    est = float(ratios[best])
    x1, x2 = g1[best], g2[best]
    for _ in range(refine):
        nx = _norms(grid, x1[None], x2[None])[0]
        if nx == 0:
            break
        x1, x2 = x1 / nx, x2 / nx
        y1, y2 = apply(x1[None], x2[None])
        ny = float(_norms(grid, y1, y2)[0])
        est = max(est, ny)
        x1, x2 = y1[0], y2[0]
    return est


def lprime_resolvent_norm(lam, cfg: NonlinearityConfig, grid: RhoGrid,
                          rng: np.random.Generator | None = None) -> tuple[float, float]:
    """(probe estimate of ||L' R_{L_0}(lam)||, the bound p c_0 / |lam-1| (2/(Re lam - 1/2) + 1))."""
    rng = np.random.default_rng(0) if rng is None else rng
    lam = complex(lam)
    if lam.real <= 0.5 or lam == 1.0:
        raise ValueError("needs Re lambda > 1/2 and lambda != 1")
    solver = PencilSolver(grid, lam)
    rho, h = grid.nodes, grid.spacing

    def apply(f1, f2):
        u = solver.solve_array(f1 + rho * f2 + lam * cumtrapz(f2, h))
        return cfg.pc0 * u, np.zeros_like(u)

    return estimate_operator_norm(apply, grid, rng), lprime_resolvent_bound(lam, cfg)


def resolvent_norm_estimate(lam, cfg: NonlinearityConfig, grid: RhoGrid,
                            rng: np.random.Generator, method: Method = "pencil") -> float:
    solver = _solver(grid, cfg, lam, method)
    return estimate_operator_norm(solver.resolvent_arrays, grid, rng)


@dataclass
class ResolventScan:
    lambdas: list[complex]
    norms: list[float]
    failed: list[bool] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)


def resolvent_norm_scan(cfg: NonlinearityConfig, kappa: float, omegas: Iterable[float],
                        grid: RhoGrid, seed: int = 0, method: Method = "pencil") -> ResolventScan:
    """Probe estimates of ||R_L(kappa + i omega)||; failures are recorded per point."""
    if kappa <= 0.5:
        raise ValueError("kappa must exceed 1/2")
    scan = ResolventScan([], [], [], [])
    for om in omegas:
        lam = complex(kappa, om)
        rng = np.random.default_rng([seed, len(scan.lambdas)])
        scan.lambdas.append(lam)
        try:
            est = resolvent_norm_estimate(lam, cfg, grid, rng, method)
            scan.norms.append(est)
            scan.failed.append(False)
            scan.messages.append("")
        except (NearSingularError, ArithmeticError) as exc:
            scan.norms.append(math.nan)
            scan.failed.append(True)
            scan.messages.append(str(exc))
    return scan


def write_scan_csv(scan: ResolventScan, path, comments: Iterable[str] = ()) -> None:
    def write(fh):
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_lambda", "im_lambda", "norm_estimate", "failed"])
        for lam, nrm, bad in zip(scan.lambdas, scan.norms, scan.failed):
            w.writerow([repr(lam.real), repr(lam.imag), repr(float(nrm)), int(bad)])

    _atomic_write(path, write)


# ---------------------------------------------------------------------------
# Riesz projection


class SpectralProjector:
    """P = (1 / 2 pi i) int_Gamma R_L(lam) d lam by the trapezoid rule on a circle.

    The resolvent factorizations at the contour nodes are built once and
    reused for every input.  Each application also evaluates the half-node
    rule (every other node) and raises :class:`QuadratureError` if the two
    differ by more than ``qtol`` relative.
    """

    def __init__(self, contour: Contour, cfg: NonlinearityConfig, grid: RhoGrid,
                 method: Method = "pencil", qtol: float = 1e-6):
        check_contour(contour, cfg)
        self.contour, self.cfg, self.grid, self.method = contour, cfg, grid, method
        self.qtol = qtol
        lams, self._weights = contour.points()
        self._solvers = [_solver(grid, cfg, lam, method) for lam in lams]

    def apply_arrays(self, f1: np.ndarray, f2: np.ndarray):
        f1 = np.asarray(f1, dtype=complex)
        f2 = np.asarray(f2, dtype=complex)
        acc1 = np.zeros(f1.shape, dtype=complex)
        acc2 = np.zeros(f2.shape, dtype=complex)
        half1 = np.zeros_like(acc1)
        half2 = np.zeros_like(acc2)
        # fixed node order keeps the sum reproducible
        for k, (wk, solver) in enumerate(zip(self._weights, self._solvers)):
            u1, u2 = solver.resolvent_arrays(f1, f2)
            acc1 += wk * u1
            acc2 += wk * u2
            if k % 2 == 0:
                half1 += 2.0 * wk * u1
                half2 += 2.0 * wk * u2
        if self.qtol is not None:
            g = self.grid
            full = _norms(g, np.atleast_2d(acc1), np.atleast_2d(acc2))
            diff = _norms(g, np.atleast_2d(acc1 - half1), np.atleast_2d(acc2 - half2))
            scale = _norms(g, np.atleast_2d(f1), np.atleast_2d(f2))
            bad = diff > self.qtol * np.maximum(np.maximum(full, scale), 1e-300)
            if np.any(bad):
                raise QuadratureError(
                    f"contour quadrature not converged: halving nodes changes Pf by "
                    f"{float(np.max(diff / np.maximum(full, 1e-300))):.2e} relative")
        return acc1, acc2

    def __call__(self, f: StateVector) -> StateVector:
        return StateVector.from_arrays(f.grid, *self.apply_arrays(f.comp1.values, f.comp2.values))

    def stable_part(self, f: StateVector) -> StateVector:
        return f - self(f)


def spectral_projection(contour: Contour, cfg: NonlinearityConfig, f: StateVector,
                        method: Method = "pencil") -> StateVector:
    return SpectralProjector(contour, cfg, f.grid, method)(f)


def project_stable(contour: Contour, cfg: NonlinearityConfig, f: StateVector,
                   method: Method = "pencil") -> StateVector:
    """(I - P) f: the part of f in the stable subspace N."""
    return SpectralProjector(contour, cfg, f.grid, method).stable_part(f)


def gauge_component(projector: SpectralProjector, f: StateVector) -> float:
    """||P f|| / ||f||."""
    nf = l2_norm(f)
    return l2_norm(projector(f)) / nf if nf else 0.0
