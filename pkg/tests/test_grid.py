import numpy as np
import pytest
from hypothesis import given, strategies as st

from simwave.grid import (GridFunction, RhoGrid, StateVector, cumtrapz, derivative, diff,
                          energy, hardy_ratio, integral, l2_norm, random_smooth_function,
                          random_smooth_state, read_gridfunction_csv, reconstruct_phi,
                          write_gridfunction_csv, write_snapshots_csv)


def test_grid_rejects_small_n():
    with pytest.raises(ValueError):
        RhoGrid(8)


def test_nodes_are_uniform_and_readonly():
    g = RhoGrid(33)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert g.spacing == pytest.approx(1 / 32)
    with pytest.raises(ValueError):
        g.nodes[3] = 1.0


@pytest.mark.parametrize("n", [33, 64, 1025])
def test_simpson_integrates_cubics(n):
    g = RhoGrid(n)
    f = g.function(1 + 2 * g.nodes - 3 * g.nodes**2 + 4 * g.nodes**3)
    tol = 1e-13 if n % 2 else 1e-6
    assert integral(f) == pytest.approx(1 + 1 - 1 + 1, abs=tol)


def test_cumtrapz_starts_at_zero_and_converges():
    g = RhoGrid(1025)
    out = cumtrapz(np.cos(g.nodes), g.spacing)
    assert out[0] == 0.0
    assert np.max(np.abs(out - np.sin(g.nodes))) < 1e-7


def test_diff_is_fourth_order():
    errs = []
    for n in (65, 129, 257):
        g = RhoGrid(n)
        errs.append(np.max(np.abs(diff(np.exp(2 * g.nodes), g.spacing) - 2 * np.exp(2 * g.nodes))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.7)


def test_diff_exact_on_quartics():
    g = RhoGrid(40)
    x = g.nodes
    assert np.allclose(diff(x**4 - x, g.spacing), 4 * x**3 - 1, atol=1e-10)


def test_diff_acts_on_stacked_rows():
    g = RhoGrid(50)
    rows = np.array([g.nodes**2, np.sin(g.nodes)])
    out = diff(rows, g.spacing)
    assert np.allclose(out[0], diff(rows[0], g.spacing))
    assert np.allclose(out[1], diff(rows[1], g.spacing))


def test_gridfunction_rejects_bad_values():
    g = RhoGrid(20)
    with pytest.raises(ValueError):
        GridFunction(g, np.ones(19))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(20, np.nan))


def test_grid_mismatch_raises():
    a, b = RhoGrid(20), RhoGrid(21)
    with pytest.raises(ValueError):
        a.constant(1) + b.constant(1)


def test_l2_norm_of_known_state():
    g = RhoGrid(101)
    phi = StateVector(g.function(g.nodes), g.constant(1.0))
    assert l2_norm(phi) == pytest.approx(np.sqrt(1 / 3 + 1), rel=1e-12)


def test_reconstruct_phi():
    g = RhoGrid(513)
    phi = reconstruct_phi(g.function(np.cos(g.nodes)), tau=1.0)
    assert np.allclose(phi.values, np.exp(-1) * np.sin(g.nodes), atol=1e-7)


def test_energy_of_free_stationary_state_is_zero():
    # phi_2 = const, phi_1 = 0: phi = e^{-tau} rho c, so phi_2 = e^tau phi / rho
    g = RhoGrid(65)
    phi = StateVector(g.zeros(), g.constant(-2.0))
    assert energy(phi, 3.0) == pytest.approx(0.0, abs=1e-24)


def test_hardy_ratio_rejects_zero():
    with pytest.raises(ValueError):
        hardy_ratio(RhoGrid(20).zeros())


def test_hardy_ratio_tau_scaling():
    g = RhoGrid(257)
    f = g.function(np.cos(3 * g.nodes))
    assert hardy_ratio(f, 0.7) == pytest.approx(hardy_ratio(f, 0.0), rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), degree=st.integers(0, 14))
def test_hardy_inequality(seed, degree):
    g = RhoGrid(257)
    f = random_smooth_function(g, np.random.default_rng(seed), degree)
    assert hardy_ratio(f) <= 4.0 + 1e-6


@given(k=st.floats(0.05, 0.45))
def test_hardy_near_extremal_powers(k):
    # rho^{-k} approaches the sharp constant 4 as k -> 1/2 but never reaches it
    g = RhoGrid(2049)
    v = np.empty(g.n)
    v[1:] = g.nodes[1:] ** (-k)
    v[0] = v[1]
    assert hardy_ratio(g.function(v)) <= 4.0 + 1e-6


@given(seed=st.integers(0, 2**32 - 1))
def test_random_state_is_unit_and_regular(seed):
    g = RhoGrid(129)
    phi = random_smooth_state(g, np.random.default_rng(seed))
    assert l2_norm(phi) == pytest.approx(1.0, rel=1e-12)
    assert phi.is_regular()


def test_random_state_reproducible():
    g = RhoGrid(129)
    a = random_smooth_state(g, np.random.default_rng(7))
    b = random_smooth_state(g, np.random.default_rng(7))
    assert np.array_equal(a.stacked(), b.stacked())


def test_derivative_wrapper():
    g = RhoGrid(257)
    assert np.allclose(derivative(g.function(g.nodes**3)).values, 3 * g.nodes**2, atol=1e-10)


def test_csv_roundtrip(tmp_path):
    g = RhoGrid(33)
    f = g.function(np.exp(1j * g.nodes) / 3)
    path = tmp_path / "f.csv"
    write_gridfunction_csv(f, path, ["config_hash=abc"])
    assert path.read_text().startswith("# config_hash=abc\nrho,re,im\n")
    back = read_gridfunction_csv(path)
    assert np.array_equal(back.values, f.values)
    assert not list(tmp_path.glob("*.tmp"))


def test_csv_rejects_nonuniform(tmp_path):
    path = tmp_path / "bad.csv"
    rows = "\n".join(f"{x!r},0.0,0.0" for x in np.linspace(0, 1, 20) ** 2)
    path.write_text("rho,re,im\n" + rows + "\n")
    with pytest.raises(ValueError):
        read_gridfunction_csv(path)


def test_snapshot_csv(tmp_path):
    g = RhoGrid(17)
    path = tmp_path / "s.csv"
    write_snapshots_csv([(0.0, g.constant(1)), (0.5, g.constant(2j))], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tau,rho,re,im" and len(lines) == 1 + 2 * 17
    assert lines[-1] == "0.5,1.0,0.0,2.0"


def test_hardy_ratio_converges_to_power_value():
    # for phi_2 = rho^(-k) the ratio is exactly 1 / (1 - k)^2
    k, exact = 0.2, 1 / 0.8**2
    errs = []
    for n in (513, 2049, 8193):
        g = RhoGrid(n)
        v = np.empty(g.n)
        v[1:] = g.nodes[1:] ** (-k)
        v[0] = v[1]
        errs.append(exact - hardy_ratio(g.function(v)))
    assert 0 < errs[2] < errs[1] < errs[0] < 0.05
