"""The free generator L_0 and its scalar pencil T_0(lambda).

L_0 u = (-rho u_1' + u_2', u_1' - rho u_2') with u_1(0) = 0.  Spectral
questions about L_0 reduce to the second-order expression

    t_0(lambda) u = -(1 - rho^2) u'' + 2 lambda rho u' + lambda (lambda - 1) u

with u(0) = 0 and regularity at the singular endpoint rho = 1.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridFunction, RhoGrid, StateVector, cumtrapz, diff, l2_norm

COND_LIMIT = 1e10


class NearSingularError(ArithmeticError):
    """The discrete pencil is (numerically) singular: lambda is at or near an eigenvalue."""

    def __init__(self, lam, cond):
        super().__init__(f"pencil near-singular at lambda={complex(lam):.6g} "
                         f"(condition estimate {cond:.3e})")
        self.lam = lam
        self.cond = cond


class SingularEndpointError(ValueError):
    pass


def _lam(lam) -> complex:
    lam = complex(lam)
    if not np.isfinite(lam):
        raise ValueError("spectral parameter must be finite")
    return lam


def apply_l0(phi: StateVector) -> StateVector:
    rho = phi.grid.nodes
    h = phi.grid.spacing
    d1 = diff(phi.comp1.values, h)
    d2 = diff(phi.comp2.values, h)
    return StateVector.from_arrays(phi.grid, -rho * d1 + d2, d1 - rho * d2)


def free_eigenprofile(lam, grid: RhoGrid) -> GridFunction:
    """u_0(rho) = (1 - rho)^(1 - lam) - (1 + rho)^(1 - lam)."""
    lam = _lam(lam)
    if lam.real >= 1.0:
        raise SingularEndpointError(f"(1 - rho)^(1 - lambda) is singular at rho = 1 for Re lambda = {lam.real:g} >= 1")
    rho = grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.power((1.0 - rho).astype(complex), 1.0 - lam)
    left[-1] = 0.0
    u = left - np.power((1.0 + rho).astype(complex), 1.0 - lam)
    u[0] = 0.0
    return GridFunction(grid, u)


def eigenfunction_from_profile(u: GridFunction, lam) -> StateVector:
    """(rho u' + (lam - 1) u, u') -- an eigenfunction whenever u spans ker T_0(lam)."""
    lam = _lam(lam)
    rho = u.grid.nodes
    du = diff(u.values, u.grid.spacing)
    u1 = rho * du + (lam - 1.0) * u.values
    u1[0] = 0.0
    return StateVector.from_arrays(u.grid, u1, du)


def is_free_eigenvalue(lam) -> bool:
    return _lam(lam).real < 0.5


def _apply_B(lam: complex, f1: np.ndarray, f2: np.ndarray, rho: np.ndarray, h: float):
    return f1 + rho * f2 + lam * cumtrapz(f2, h)


def apply_B(lam, f: StateVector) -> GridFunction:
    """B(lam) f = f_1 + rho f_2 + lam int_0^rho f_2."""
    g = f.grid
    return GridFunction(g, _apply_B(_lam(lam), f.comp1.values, f.comp2.values, g.nodes, g.spacing))


class PencilSolver:
    """Factorized second-order finite-difference discretization of t_0(lam) - shift.

    Unknowns are u_1..u_{n-1} (u_0 = 0).  At rho = 1 the equation itself is
    imposed; there the u'' coefficient vanishes, leaving the Frobenius
    relation 2 lam u'(1) + (lam (lam - 1) - shift) u(1) = g(1), with a
    second-order backward difference for u'(1).
    """

    def __init__(self, grid: RhoGrid, lam, shift: float = 0.0, check: bool = True):
        self.grid = grid
        self.lam = lam = _lam(lam)
        self.shift = shift
        n, h = grid.n, grid.spacing
        rho = grid.nodes
        m = n - 1
        q = lam * (lam - 1.0) - shift

        j = np.arange(1, n - 1)
        a = (1.0 - rho[j] ** 2) / h**2
        rows = [j - 1, j - 1, j[1:] - 1]
        cols = [j - 1, j, j[1:] - 2]
        vals = [2.0 * a + q, -a + lam * rho[j] / h, (-a - lam * rho[j] / h)[1:]]
        last = m - 1
        rows.append(np.array([last, last, last]))
        cols.append(np.array([m - 1, m - 2, m - 3]))
        vals.append(np.array([3.0 * lam / h + q, -4.0 * lam / h, lam / h]))
        mat = sp.csc_matrix(
            (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, m),
        )
        self.matrix = mat
        try:
            self._lu = spla.splu(mat)
        except RuntimeError as exc:  # exactly singular factor
            raise NearSingularError(lam, np.inf) from exc
        self.cond = self.condition_estimate() if check else float("nan")
        if check and not self.cond < COND_LIMIT:
            raise NearSingularError(lam, self.cond)

    def condition_estimate(self) -> float:
        lu = self._lu
        m = self.matrix.shape[0]
        inv = spla.LinearOperator(
            (m, m),
            matvec=lambda x: lu.solve(np.asarray(x, dtype=complex)),
            rmatvec=lambda x: lu.solve(np.asarray(x, dtype=complex), trans="H"),
            dtype=complex,
        )
        inv_norm = spla.onenormest(inv)
        return float(spla.norm(self.matrix, 1) * inv_norm)

    def solve_array(self, g: np.ndarray) -> np.ndarray:
        """Solve for right-hand sides stacked along the last axis: shape (n,) or (k, n)."""
        g = np.asarray(g, dtype=complex)
        rhs = g[..., 1:].T
        sol = self._lu.solve(np.ascontiguousarray(rhs))
        out = np.zeros(g.shape, dtype=complex)
        out[..., 1:] = sol.T
        return out

    def solve(self, g: GridFunction) -> GridFunction:
        return GridFunction(self.grid, self.solve_array(g.values))

    def resolvent_arrays(self, f1: np.ndarray, f2: np.ndarray):
        """(u_1, u_2) for the shifted pencil: u = T^{-1} B f, u_1 = rho u' + (lam-1) u - int f_2, u_2 = u'."""
        grid, lam = self.grid, self.lam
        rho, h = grid.nodes, grid.spacing
        F2 = cumtrapz(f2, h)
        u = self.solve_array(f1 + rho * f2 + lam * F2)
        du = diff(u, h)
        u1 = rho * du + (lam - 1.0) * u - F2
        return u1, du

    def resolvent(self, f: StateVector) -> StateVector:
        u1, u2 = self.resolvent_arrays(f.comp1.values, f.comp2.values)
        return StateVector.from_arrays(self.grid, u1, u2)


def solve_T0(lam, g: GridFunction, pc0_shift: float = 0.0) -> GridFunction:
    """Solve (t_0(lam) - pc0_shift) u = g with u(0) = 0 and regularity at rho = 1."""
    return PencilSolver(g.grid, lam, pc0_shift).solve(g)


def resolvent_l0(lam, f: StateVector) -> StateVector:
    """R_{L_0}(lam) f via the scalar pencil, Re lam > 1/2."""
    return PencilSolver(f.grid, lam).resolvent(f)


def resolvent_bound_l0(lam) -> float:
    """1 / (Re lam - 1/2), the bound implied by the growth bound exp(tau/2)."""
    return 1.0 / (_lam(lam).real - 0.5)


def estimate_T0_bound(lam, f: StateVector) -> tuple[float, float]:
    """(||T_0^{-1}(lam) B(lam) f||, (2/(Re lam - 1/2) + 1) ||f|| / |lam - 1|)."""
    lam = _lam(lam)
    if lam.real <= 0.5:
        raise ValueError("the estimate is stated for Re lambda > 1/2")
    if lam == 1.0:
        raise ValueError("the estimate excludes lambda = 1")
    grid = f.grid
    fnorm = l2_norm(f)
    rhs = (2.0 / (lam.real - 0.5) + 1.0) * fnorm / abs(lam - 1.0)
    if fnorm == 0.0:
        return 0.0, 0.0
    u = solve_T0(lam, apply_B(lam, f))
    lhs = float(np.sqrt(grid.simpson_weights @ np.abs(u.values) ** 2))
    return lhs, float(rhs)
