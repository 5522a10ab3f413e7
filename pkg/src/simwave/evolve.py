"""Method-of-lines evolution on the cylinder (tau, rho) in [0, inf) x [0, 1].

The system d_tau Phi = [[-rho, 1], [1, -rho]] d_rho Phi (+ p c_0 (int_0^rho phi_2, 0))
diagonalizes in w+- = phi_1 +- phi_2:

    d_tau w+ =  (1 - rho) d_rho w+      (moves toward rho = 0, frozen at rho = 1)
    d_tau w- = -(1 + rho) d_rho w-      (moves toward rho = 1, outflow there)

Each family is differenced upwind with second-order one-sided stencils.  The
only boundary condition is phi_1(0) = 0, i.e. w-(0) = -w+(0); the ghost value
w-(-h) = -w+(h) follows from the parity of phi_1 (odd) and phi_2 (even).
Time stepping is classical RK4.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (GridFunction, RhoGrid, StateVector, _atomic_write, cumtrapz,
                   energy, l2_norm)
from .pertop import NonlinearityConfig

DEFAULT_CFL = 0.5
MIN_FIT_SAMPLES = 20
MIN_FIT_TAU = 5.0


class CFLError(ValueError):
    pass


class EvolutionError(ArithmeticError):
    pass


def characteristic_split(phi: StateVector) -> tuple[GridFunction, GridFunction]:
    return phi.comp1 + phi.comp2, phi.comp1 - phi.comp2


def characteristic_merge(wplus: GridFunction, wminus: GridFunction) -> StateVector:
    return StateVector((wplus + wminus) * 0.5, (wplus - wminus) * 0.5)


class SemiDiscreteGenerator:
    """Discrete generator acting on stacked characteristic variables (w+, w-).

    ``pc0 = 0`` is the free operator.  The transport part is a sparse matrix;
    the nonlocal part p c_0 int_0^rho phi_2 is a trapezoid running sum added
    to both w+ and w-.
    """

    def __init__(self, grid: RhoGrid, pc0: float = 0.0):
        self.grid = grid
        self.pc0 = float(pc0)
        n, h = grid.n, grid.spacing
        rho = grid.nodes
        a, b = 1.0 - rho, 1.0 + rho
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(np.atleast_1d(r))
            cols.append(np.atleast_1d(c))
            vals.append(np.atleast_1d(v).astype(float))

        # w+ rows: a_j * forward second-order stencil; first order at n-2; zero at n-1
        j = np.arange(n - 2)
        put(j, j, -3.0 * a[j] / (2 * h))
        put(j, j + 1, 4.0 * a[j] / (2 * h))
        put(j, j + 2, -1.0 * a[j] / (2 * h))
        put(n - 2, n - 2, -a[n - 2] / h)
        put(n - 2, n - 1, a[n - 2] / h)
        # w- rows (offset n): -b_j * backward second-order stencil
        j = np.arange(2, n)
        put(n + j, n + j, -3.0 * b[j] / (2 * h))
        put(n + j, n + j - 1, 4.0 * b[j] / (2 * h))
        put(n + j, n + j - 2, -1.0 * b[j] / (2 * h))
        # row 1 uses the ghost w-(-h) = -w+(h)
        put(n + 1, n + 1, -3.0 * b[1] / (2 * h))
        put(n + 1, n, 4.0 * b[1] / (2 * h))
        put(n + 1, 1, b[1] / (2 * h))
        # row 0 keeps w-(0) = -w+(0): its rate is minus the w+(0) rate
        put(n, 0, 3.0 * a[0] / (2 * h))
        put(n, 1, -4.0 * a[0] / (2 * h))
        put(n, 2, 1.0 * a[0] / (2 * h))
        self.transport = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * n, 2 * n),
        )

    def apply(self, w: np.ndarray) -> np.ndarray:
        """d_tau of stacked (w+, w-)."""
        out = self.transport @ w
        if self.pc0:
            n, h = self.grid.n, self.grid.spacing
            s = self.pc0 * cumtrapz(0.5 * (w[:n] - w[n:]), h)
            out[:n] += s
            out[n + 1:] += s[1:]
        return out

    def resolvent(self, lam) -> "SemiDiscreteResolvent":
        return SemiDiscreteResolvent(self, lam)

    def to_w(self, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
        return np.concatenate([phi1 + phi2, phi1 - phi2], axis=-1)

    def to_phi(self, w: np.ndarray):
        n = self.grid.n
        return 0.5 * (w[..., :n] + w[..., n:]), 0.5 * (w[..., :n] - w[..., n:])


class SemiDiscreteResolvent:
    """(lam - L_h)^{-1} for the discrete generator, solved as a sparse system
    with the running integral S as auxiliary unknowns."""

    def __init__(self, gen: SemiDiscreteGenerator, lam):
        self.gen = gen
        self.lam = lam = complex(lam)
        n, h = gen.grid.n, gen.grid.spacing
        top = lam * sp.identity(2 * n, format="csr") - gen.transport
        blocks = [[top, None], [None, None]]
        # coupling of S into the w rows (row n is the constraint row, S_0 = 0 anyway)
        coup = sp.lil_matrix((2 * n, n))
        if gen.pc0:
            idx = np.arange(n)
            coup[idx, idx] = -gen.pc0
            coup[n + idx[1:], idx[1:]] = -gen.pc0
        blocks[0][1] = coup.tocsr()
        # S_j - S_{j-1} - h/4 (w+_j - w-_j + w+_{j-1} - w-_{j-1}) = 0, S_0 = 0
        srows = sp.lil_matrix((n, 2 * n))
        j = np.arange(1, n)
        srows[j, j] = -h / 4
        srows[j, j - 1] = -h / 4
        srows[j, n + j] = h / 4
        srows[j, n + j - 1] = h / 4
        blocks[1][0] = srows.tocsr()
        sdiag = sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], format="lil")
        blocks[1][1] = sdiag.tocsr()
        mat = sp.bmat(blocks, format="csc").astype(complex)
        self._lu = spla.splu(mat)
        self._n = n

    def resolvent_arrays(self, f1: np.ndarray, f2: np.ndarray):
        n = self._n
        f1 = np.asarray(f1, dtype=complex)
        f2 = np.asarray(f2, dtype=complex)
        rhs = np.concatenate([f1 + f2, f1 - f2, np.zeros(f1.shape, dtype=complex)], axis=-1)
        x = self._lu.solve(np.ascontiguousarray(rhs.T)).T
        w = x[..., : 2 * n]
        return self.gen.to_phi(w)

    def resolvent(self, f: StateVector) -> StateVector:
        u1, u2 = self.resolvent_arrays(f.comp1.values, f.comp2.values)
        return StateVector.from_arrays(f.grid, u1, u2)


@dataclass(frozen=True)
class EvolutionConfig:
    grid: RhoGrid
    tau_final: float
    generator: NonlinearityConfig | None = None   # None: free evolution
    dtau: float | None = None
    cfl_factor: float = DEFAULT_CFL
    scheme: str = "upwind2_rk4"
    record_every: int = 1
    snapshot_every: int | None = None
    tau0: float = 0.0

    def __post_init__(self):
        if self.scheme != "upwind2_rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.tau_final > 0:
            raise ValueError("tau_final must be positive")
        limit = self.cfl_factor * self.grid.spacing / 2.0
        if self.dtau is None:
            steps = math.ceil(self.tau_final / limit - 1e-9)
            object.__setattr__(self, "dtau", self.tau_final / steps)
        elif not 0 < self.dtau <= limit * (1 + 1e-12):
            raise CFLError(f"dtau={self.dtau:g} violates dtau <= cfl*h/2 = {limit:g}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.tau_final / self.dtau))

    @property
    def pc0(self) -> float:
        return 0.0 if self.generator is None else self.generator.pc0

    @cached_property
    def operator(self) -> SemiDiscreteGenerator:
        return SemiDiscreteGenerator(self.grid, self.pc0)


@dataclass
class Trajectory:
    taus: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    sup_phi: np.ndarray          # max_rho |phi(tau, rho)| (reconstructed field)
    boundary: np.ndarray         # |phi_1(tau, 0)|
    snapshots: list = field(default_factory=list)   # [(tau, StateVector)]
    final: StateVector | None = None


@dataclass(frozen=True)
class GrowthFit:
    mu: float
    window: tuple[float, float]
    rmse: float


def _rk4(gen: SemiDiscreteGenerator, w: np.ndarray, dt: float) -> np.ndarray:
    k1 = gen.apply(w)
    k2 = gen.apply(w + 0.5 * dt * k1)
    k3 = gen.apply(w + 0.5 * dt * k2)
    k4 = gen.apply(w + dt * k3)
    return w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(cfg: EvolutionConfig, phi: StateVector) -> StateVector:
    gen = cfg.operator
    w = _rk4(gen, gen.to_w(phi.comp1.values, phi.comp2.values), cfg.dtau)
    return StateVector.from_arrays(phi.grid, *gen.to_phi(w))


def _sup_phi(phi2: np.ndarray, tau: float, h: float) -> float:
    return float(np.exp(-tau) * np.max(np.abs(cumtrapz(phi2, h))))


def evolve(cfg: EvolutionConfig, phi0: StateVector) -> Trajectory:
    """Integrate to tau_final, recording norm, energy and sup |phi| every
    ``record_every`` steps (and at the end)."""
    grid = cfg.grid
    if phi0.grid != grid:
        raise ValueError("initial state lives on a different grid")
    if not phi0.is_regular(atol=1e-12 * max(l2_norm(phi0), 1e-300)):
        raise ValueError("initial state must satisfy phi_1(0) = 0")
    gen = cfg.operator
    h = grid.spacing
    w = gen.to_w(phi0.comp1.values.copy(), phi0.comp2.values.copy())
    w[grid.n] = -w[0]
    rec = {k: [] for k in ("taus", "norms", "energies", "sup_phi", "boundary")}
    snaps = []

    def record(k, w):
        tau = cfg.tau0 + k * cfg.dtau
        p1, p2 = gen.to_phi(w)
        state = StateVector.from_arrays(grid, p1, p2)
        rec["taus"].append(k * cfg.dtau)
        rec["norms"].append(l2_norm(state))
        rec["energies"].append(energy(state, tau))
        rec["sup_phi"].append(_sup_phi(p2, tau, h))
        rec["boundary"].append(abs(p1[0]))
        return state

    nsteps = cfg.steps
    state = record(0, w)
    if cfg.snapshot_every:
        snaps.append((0.0, state))
    for k in range(1, nsteps + 1):
        w = _rk4(gen, w, cfg.dtau)
        rec_now = k % cfg.record_every == 0 or k == nsteps
        snap_now = bool(cfg.snapshot_every) and (k % cfg.snapshot_every == 0 or k == nsteps)
        if rec_now or snap_now:
            if not np.all(np.isfinite(w)):
                raise EvolutionError(f"non-finite state at tau={k * cfg.dtau:.6g} (step {k})")
            state = record(k, w)
            if not math.isfinite(rec["norms"][-1]) or rec["norms"][-1] > 1e300:
                raise EvolutionError(f"norm overflow at tau={k * cfg.dtau:.6g}")
            if snap_now:
                snaps.append((k * cfg.dtau, state))
    arrays = {k: np.asarray(v) for k, v in rec.items()}
    return Trajectory(snapshots=snaps, final=state, **arrays)


def _fit_line(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, icpt = np.polyfit(t, y, 1)
    rmse = float(np.sqrt(np.mean((slope * t + icpt - y) ** 2)))
    return float(slope), rmse


def fit_log_slope(taus, values, tail_fraction: float = 0.5,
                  underflow: float = 1e-13) -> GrowthFit:
    """Least-squares slope of log(values) over the trailing window."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("values must be finite and nonnegative")
    ok = values > underflow * values.max()
    if not ok.all():
        if not ok[0]:
            raise ValueError("trajectory vanished from the start")
        last = int(np.argmin(ok))
        warnings.warn(f"norm decayed to roundoff at tau={taus[last]:.3g}; "
                      "fitting the pre-underflow part", RuntimeWarning)
        taus, values = taus[:last], values[:last]
    t_hi = taus[-1]
    t_lo = taus[0] + (1.0 - tail_fraction) * (t_hi - taus[0])
    m = taus >= t_lo - 1e-12
    if m.sum() < MIN_FIT_SAMPLES:
        raise ValueError(f"need >= {MIN_FIT_SAMPLES} samples in the fit window, got {m.sum()}")
    mu, rmse = _fit_line(taus[m], np.log(values[m]))
    return GrowthFit(mu=mu, window=(float(taus[m][0]), float(t_hi)), rmse=rmse)


def fit_growth_rate(traj: Trajectory, tail_fraction: float = 0.5) -> GrowthFit:
    """Exponent mu in ||Phi(tau)|| ~ C exp(mu tau) over the trailing window."""
    if traj.taus[-1] < MIN_FIT_TAU - 1e-9:
        raise ValueError(f"rate fits need tau_final >= {MIN_FIT_TAU}")
    return fit_log_slope(traj.taus, traj.norms, tail_fraction)


def fit_linf_decay(traj: Trajectory, tail_fraction: float = 0.5) -> GrowthFit:
    """Exponent of max_rho |phi(tau, rho)| over the trailing window."""
    return fit_log_slope(traj.taus, traj.sup_phi, tail_fraction)


def energy_trajectory_check(traj: Trajectory, mu: float, factor: float = 10.0) -> bool:
    """True iff E(tau) exp(-2 (mu - 1/2) tau) stays below factor * E(0)."""
    e = np.asarray(traj.energies)
    t = np.asarray(traj.taus)
    scaled = e * np.exp(-2.0 * (mu - 0.5) * t)
    return bool(np.all(scaled <= factor * e[0] + 1e-300))


def write_trajectory_csv(traj: Trajectory, path, comments: Iterable[str] = ()) -> None:
    def write(fh):
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "norm", "energy"])
        for row in zip(traj.taus, traj.norms, traj.energies):
            w.writerow([repr(float(x)) for x in row])

    _atomic_write(path, write)
