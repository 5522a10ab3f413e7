"""The linearization L = L_0 + L' around the self-similar blowup solution.

For the focusing equation chi_tt - Laplace chi = chi^p the ODE blowup
profile carries c_0 = 2 (p + 1) / (p - 1)^2, and the perturbation
L' u = (p c_0 int_0^rho u_2, 0) is a compact addition to the free generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from . import specfun
from .freeop import apply_l0, eigenfunction_from_profile
from .grid import GridFunction, RhoGrid, StateVector, cumtrapz
from .specfun import DegenerateCaseError, HypergeometricParams

K_MAX = 50
SHOOT_EPS = 1e-6


@dataclass(frozen=True)
class NonlinearityConfig:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or isinstance(self.p, bool):
            raise ValueError(f"p must be an integer, got {self.p!r}")
        if self.p < 3 or self.p % 2 == 0:
            raise ValueError(f"p must be an odd integer > 1, got {self.p}")

    @property
    def c0_exact(self) -> Fraction:
        return Fraction(2 * (self.p + 1), (self.p - 1) ** 2)

    @property
    def c0(self) -> float:
        return float(self.c0_exact)

    @property
    def pc0(self) -> float:
        return float(self.p * self.c0_exact)


def make_config(p: int) -> NonlinearityConfig:
    return NonlinearityConfig(int(p) if float(p) == int(p) else p)


@dataclass(frozen=True)
class EigenvalueReport:
    lam: complex
    method: Literal["gamma_pole", "shooting"]
    residual: float


def apply_lprime(cfg: NonlinearityConfig, phi: StateVector) -> StateVector:
    g = phi.grid
    first = cfg.pc0 * cumtrapz(phi.comp2.values, g.spacing)
    return StateVector.from_arrays(g, first, np.zeros(g.n))


def apply_l(cfg: NonlinearityConfig, phi: StateVector) -> StateVector:
    return apply_l0(phi) + apply_lprime(cfg, phi)


def hypergeom_params(lam, cfg: NonlinearityConfig) -> HypergeometricParams:
    return specfun.wave_params(lam, cfg.pc0)


def gauge_eigenvalue_exact(cfg: NonlinearityConfig) -> Fraction:
    return 1 + Fraction(2, cfg.p - 1)


def gauge_eigenvalue(cfg: NonlinearityConfig) -> float:
    """lambda_0 = 1 + 2 / (p - 1), generated by shifting the blowup time."""
    return float(gauge_eigenvalue_exact(cfg))


def quantization_roots(cfg: NonlinearityConfig, half_plane_cut: float = 0.5,
                       k_max: int = K_MAX) -> list[EigenvalueReport]:
    """Roots of a + 1 - c = -k or b + 1 - c = -k (k = 0..k_max) with Re lambda > cut.

    The residual is |1/Gamma(a + 1 - c) * 1/Gamma(b + 1 - c)| evaluated at the
    returned lambda: the factor of c_1 that vanishes on the quantized set.
    """
    root = math.sqrt(1.0 + 4.0 * cfg.pc0)
    found = []
    for k in range(k_max + 1):
        # a + 1/2 = -k  and  b + 1/2 = -k, solved for lambda
        for lam in (0.5 * (root - 1.0) - 2.0 * k, 0.5 * (-root - 1.0) - 2.0 * k):
            if lam > half_plane_cut:
                pr = hypergeom_params(lam, cfg)
                res = abs(specfun.reciprocal_gamma(pr.a + 1.0 - pr.c)
                          * specfun.reciprocal_gamma(pr.b + 1.0 - pr.c))
                found.append(EigenvalueReport(complex(lam), "gamma_pole", float(res)))
    found.sort(key=lambda r: -r.lam.real)
    return found


def _check_shoot_lambda(lam: complex):
    if lam.real <= 0.5:
        raise ValueError("shooting is set up for Re lambda > 1/2")
    if abs(lam - 1.0) < specfun.DEGENERATE_BAND:
        raise DegenerateCaseError("lambda = 1 is the logarithmic case")


def _shoot_ode(lam: complex, pc0: float, eps: float) -> complex:
    # analytic solution at rho = 1 normalized by u(1) = 1; Taylor data from the
    # equation evaluated at the singular point and its first derivative there
    q = lam * (lam - 1.0) - pc0
    d1 = -q / (2.0 * lam)
    d2 = -(2.0 * lam + q) * d1 / (2.0 + 2.0 * lam)
    u_start = 1.0 - eps * d1 + 0.5 * eps**2 * d2
    du_start = d1 - eps * d2

    def rhs(rho, y):
        u, du = y
        return [du, (2.0 * lam * rho * du + q * u) / (1.0 - rho * rho)]

    sol = solve_ivp(rhs, (1.0 - eps, 0.0), [complex(u_start), complex(du_start)],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise specfun.ConvergenceError(f"shooting integration failed: {sol.message}")
    return complex(sol.y[0, -1])


def shoot_mismatch(lam, cfg: NonlinearityConfig,
                   method: Literal["hypergeometric", "ode"] = "hypergeometric",
                   eps: float = SHOOT_EPS) -> complex:
    """Value at rho = 0 of the solution of (t_0(lam) - p c_0) u = 0 that is
    analytic at rho = 1 with u(1) = 1.  Zero exactly on the point spectrum
    in Re lam > 1/2.

    ``hypergeometric`` sums 2F1(a, b; a + b + 1 - c; 1); ``ode`` integrates
    the equation inward from rho = 1 - eps.
    """
    lam = complex(lam)
    _check_shoot_lambda(lam)
    if method == "hypergeometric":
        pr = hypergeom_params(lam, cfg)
        return specfun.hyp2f1(HypergeometricParams(pr.a, pr.b, pr.a + pr.b + 1.0 - pr.c), 1.0)
    if method == "ode":
        return _shoot_ode(lam, cfg.pc0, eps)
    raise ValueError(f"unknown method {method!r}")


def locate_root_shooting(cfg: NonlinearityConfig, lo: float, hi: float,
                         xtol: float = 1e-10) -> EigenvalueReport:
    """Bisect the real ODE mismatch on [lo, hi] (a sign change is required)."""
    f = lambda x: shoot_mismatch(x, cfg, "ode").real
    lam = optimize.brentq(f, lo, hi, xtol=xtol)
    return EigenvalueReport(complex(lam), "shooting", abs(shoot_mismatch(lam, cfg, "ode")))


def shooting_roots(cfg: NonlinearityConfig, lo: float = 0.5 + 1e-3, hi: float = 12.0,
                   step: float = 0.01) -> list[EigenvalueReport]:
    """All sign changes of the ODE mismatch along [lo, hi] on the real axis."""
    xs = np.arange(lo, hi + step / 2, step)
    xs = xs[np.abs(xs - 1.0) > 1e-3]
    vals = np.array([shoot_mismatch(x, cfg, "ode").real for x in xs])
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        if xs[i] < 1.0 < xs[i + 1]:
            continue
        out.append(locate_root_shooting(cfg, xs[i], xs[i + 1]))
    return out


def gauge_mode_profile(cfg: NonlinearityConfig, grid: RhoGrid) -> StateVector:
    """Eigenfunction of L at lambda_0 built from the analytic-at-1 solution
    u = 2F1(a, b; a + b + 1 - c; 1 - rho^2); normalized to comp2(0) = 1."""
    lam0 = gauge_eigenvalue(cfg)
    pr = hypergeom_params(lam0, cfg)
    shifted = HypergeometricParams(pr.a, pr.b, pr.a + pr.b + 1.0 - pr.c)
    rho = grid.nodes
    u = np.array([specfun.hyp2f1(shifted, 1.0 - r * r) for r in rho[1:]])
    u = np.concatenate([[0.0], u])
    phi = eigenfunction_from_profile(GridFunction(grid, u), lam0)
    return phi / phi.comp2.values[0]


def perturbed_eigenfunction(lam, cfg: NonlinearityConfig, grid: RhoGrid) -> StateVector:
    """Eigenfunction of L at lam with Re lam < 1/2 (non-integer lam).

    The profile rho 2F1(a + 1/2, b + 1/2; 3/2; rho^2) vanishes at rho = 0 and
    behaves like (1 - rho)^(1 - lam) at rho = 1, which is square integrable
    after differentiation exactly when Re lam < 1/2.
    """
    lam = complex(lam)
    if lam.real >= 0.5:
        raise ValueError("only Re lambda < 1/2 gives an eigenfunction in the energy space")
    pr = hypergeom_params(lam, cfg)
    odd = HypergeometricParams(pr.a + 0.5, pr.b + 0.5, 1.5)
    rho = grid.nodes
    u = np.array([r * specfun.hyp2f1(odd, r * r) for r in rho])
    return eigenfunction_from_profile(GridFunction(grid, u), lam)
