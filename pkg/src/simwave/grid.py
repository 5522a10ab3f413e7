"""Uniform rho-grid on [0, 1], grid functions and the basic functionals.

Everything in the package lives on a :class:`RhoGrid`; fields are complex
samples at its nodes.  Quadrature is composite trapezoid for running
integrals (the value at rho = 0 is exactly zero) and composite Simpson for
integrals over the whole interval.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.polynomial import chebyshev
from scipy import integrate

MIN_NODES = 16
DEFAULT_NODES = 1025


@dataclass(frozen=True)
class RhoGrid:
    """Uniform grid ``rho_j = j / (n - 1)``, ``j = 0..n-1``."""

    n: int = DEFAULT_NODES

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise ValueError(f"grid needs an integer n >= {MIN_NODES}, got {self.n!r}")

    @cached_property
    def nodes(self) -> np.ndarray:
        rho = np.linspace(0.0, 1.0, self.n)
        rho.flags.writeable = False
        return rho

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)

    @cached_property
    def simpson_weights(self) -> np.ndarray:
        n, h = self.n, self.spacing
        if n % 2 == 1:
            w = np.full(n, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            w *= h / 3.0
        else:
            # scipy's even-n Simpson rule is linear in the samples
            w = integrate.simpson(np.eye(n), dx=h, axis=0)
        w.flags.writeable = False
        return w

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def constant(self, c: complex) -> "GridFunction":
        return GridFunction(self, np.full(self.n, c, dtype=complex))


class GridFunction:
    """Complex samples of a scalar field on a :class:`RhoGrid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: RhoGrid, values):
        vals = np.array(values, dtype=complex)
        if vals.ndim == 0:
            vals = np.full(grid.n, vals, dtype=complex)
        if vals.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    def __repr__(self):
        return f"GridFunction(n={self.grid.n})"

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return GridFunction(self.grid, self.values / c)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


class StateVector:
    """The pair (phi_1, phi_2) evolved on the cylinder."""

    __slots__ = ("comp1", "comp2")

    def __init__(self, comp1: GridFunction, comp2: GridFunction):
        _check_same_grid(comp1, comp2)
        self.comp1 = comp1
        self.comp2 = comp2

    @classmethod
    def from_arrays(cls, grid: RhoGrid, v1, v2) -> "StateVector":
        return cls(GridFunction(grid, v1), GridFunction(grid, v2))

    @classmethod
    def from_stacked(cls, grid: RhoGrid, x) -> "StateVector":
        x = np.asarray(x)
        return cls.from_arrays(grid, x[: grid.n], x[grid.n :])

    @property
    def grid(self) -> RhoGrid:
        return self.comp1.grid

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.comp1.values, self.comp2.values])

    def is_regular(self, atol: float = 0.0) -> bool:
        """True if comp1 vanishes at rho = 0 (domain of the generators)."""
        return abs(self.comp1.values[0]) <= atol

    def __repr__(self):
        return f"StateVector(n={self.grid.n})"

    def __add__(self, other: "StateVector"):
        return StateVector(self.comp1 + other.comp1, self.comp2 + other.comp2)

    def __sub__(self, other: "StateVector"):
        return StateVector(self.comp1 - other.comp1, self.comp2 - other.comp2)

    def __mul__(self, c):
        return StateVector(self.comp1 * c, self.comp2 * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return StateVector(self.comp1 / c, self.comp2 / c)

    def __neg__(self):
        return StateVector(-self.comp1, -self.comp2)


def _check_same_grid(f: GridFunction, g: GridFunction):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")


# ---------------------------------------------------------------------------
# array kernels (shared with the solvers, which work on raw arrays)


def cumtrapz(values: np.ndarray, h: float) -> np.ndarray:
    """Running trapezoid integral along the last axis, starting at exactly 0."""
    values = np.asarray(values)
    out = np.zeros(values.shape, dtype=np.result_type(values, float))
    np.cumsum(0.5 * h * (values[..., 1:] + values[..., :-1]), axis=-1, out=out[..., 1:])
    return out


_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def diff(values: np.ndarray, h: float) -> np.ndarray:
    """d/drho along the last axis: five-point central stencil, one-sided
    five-point stencils on the two nodes nearest each end (fourth order)."""
    v = np.asarray(values)
    out = np.empty(v.shape, dtype=np.result_type(v, float))
    out[..., 2:-2] = (v[..., :-4] - 8.0 * v[..., 1:-3] + 8.0 * v[..., 3:-1] - v[..., 4:]) / (12.0 * h)
    head = v[..., :5]
    tail = v[..., :-6:-1]
    out[..., 0] = head @ _EDGE0 / h
    out[..., 1] = head @ _EDGE1 / h
    out[..., -1] = -(tail @ _EDGE0) / h
    out[..., -2] = -(tail @ _EDGE1) / h
    return out


# ---------------------------------------------------------------------------
# operations


def cumulative_integral(f: GridFunction) -> GridFunction:
    """rho -> int_0^rho f."""
    return GridFunction(f.grid, cumtrapz(f.values, f.grid.spacing))


def derivative(f: GridFunction) -> GridFunction:
    if f.grid.n < 3:
        raise ValueError("derivative needs at least 3 nodes")
    return GridFunction(f.grid, diff(f.values, f.grid.spacing))


def integral(f: GridFunction) -> complex:
    """Simpson quadrature of f over [0, 1]."""
    return complex(f.grid.simpson_weights @ f.values)


def l2_norm(phi: StateVector) -> float:
    w = phi.grid.simpson_weights
    s = w @ (np.abs(phi.comp1.values) ** 2 + np.abs(phi.comp2.values) ** 2)
    return float(np.sqrt(max(s, 0.0)))


def reconstruct_phi(phi2: GridFunction, tau: float) -> GridFunction:
    """The field phi(tau, rho) = exp(-tau) int_0^rho phi_2."""
    return cumulative_integral(phi2) * np.exp(-tau)


def _phi_over_rho(phi2: GridFunction, tau: float) -> np.ndarray:
    # phi / rho with the removable singularity at rho = 0 filled by its limit
    rho = phi2.grid.nodes
    phi = reconstruct_phi(phi2, tau).values
    out = np.empty_like(phi)
    out[1:] = phi[1:] / rho[1:]
    out[0] = np.exp(-tau) * phi2.values[0]
    return out


def energy(phi: StateVector, tau: float) -> float:
    """Energy of the original field inside the backward lightcone.

    E(tau) = exp(-tau) int_0^1 |phi_1|^2 + |phi_2 - exp(tau) phi / rho|^2.
    """
    q = _phi_over_rho(phi.comp2, tau)
    dens = np.abs(phi.comp1.values) ** 2 + np.abs(phi.comp2.values - np.exp(tau) * q) ** 2
    return float(np.exp(-tau) * max(phi.grid.simpson_weights @ dens, 0.0))


def hardy_ratio(phi2: GridFunction, tau: float = 0.0) -> float:
    """int |phi/rho|^2 divided by exp(-2 tau) ||phi_2||^2.

    Bounded by the Hardy constant 4 for every phi_2.
    """
    w = phi2.grid.simpson_weights
    den = w @ np.abs(phi2.values) ** 2
    if den <= 0.0:
        raise ValueError("hardy_ratio is undefined for phi2 = 0")
    q = _phi_over_rho(phi2, tau)
    return float((w @ np.abs(q) ** 2) / (np.exp(-2.0 * tau) * den))


# ---------------------------------------------------------------------------
# random smooth data


def random_smooth_function(grid: RhoGrid, rng: np.random.Generator, degree: int = 8,
                           real: bool = False) -> GridFunction:
    """Chebyshev series on [0, 1] with geometrically damped random coefficients."""
    k = np.arange(degree + 1)
    coef = rng.standard_normal(degree + 1)
    if not real:
        coef = coef + 1j * rng.standard_normal(degree + 1)
    coef = coef * 0.7**k
    return GridFunction(grid, chebyshev.chebval(2.0 * grid.nodes - 1.0, coef))


def random_smooth_state(grid: RhoGrid, rng: np.random.Generator, degree: int = 8,
                        real: bool = False) -> StateVector:
    """Unit-norm smooth random state with comp1(0) = 0."""
    f1 = random_smooth_function(grid, rng, degree, real)
    f2 = random_smooth_function(grid, rng, degree, real)
    state = StateVector(f1 * grid.nodes, f2)
    return state / l2_norm(state)


# ---------------------------------------------------------------------------
# CSV serialization: columns rho,re,im (optionally prefixed by tau)


def _atomic_write(path: Path, write):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        write(fh)
    os.replace(tmp, path)


def write_gridfunction_csv(f: GridFunction, path, comments: Iterable[str] = ()) -> None:
    def write(fh):
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "re", "im"])
        for r, v in zip(f.grid.nodes, f.values):
            w.writerow([repr(float(r)), repr(float(v.real)), repr(float(v.imag))])

    _atomic_write(path, write)


def read_gridfunction_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or list(reader.fieldnames)[-3:] != ["rho", "re", "im"]:
        raise ValueError(f"{path}: expected header ending in rho,re,im")
    data = [(float(r["rho"]), float(r["re"]) + 1j * float(r["im"])) for r in reader]
    rho = np.array([d[0] for d in data])
    grid = RhoGrid(len(rho))
    if not np.allclose(rho, grid.nodes, rtol=0, atol=1e-12):
        raise ValueError(f"{path}: nodes are not a uniform grid on [0, 1]")
    return GridFunction(grid, [d[1] for d in data])


def write_snapshots_csv(snapshots, path, comments: Iterable[str] = ()) -> None:
    """Write [(tau, GridFunction), ...] with columns tau,rho,re,im."""

    def write(fh):
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "rho", "re", "im"])
        for tau, f in snapshots:
            for r, v in zip(f.grid.nodes, f.values):
                w.writerow([repr(float(tau)), repr(float(r)), repr(float(v.real)),
                            repr(float(v.imag))])

    _atomic_write(path, write)
