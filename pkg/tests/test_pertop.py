from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simwave.grid import RhoGrid, StateVector, l2_norm, random_smooth_state
from simwave.pertop import (NonlinearityConfig, apply_l, apply_lprime, gauge_eigenvalue,
                            gauge_eigenvalue_exact, gauge_mode_profile, hypergeom_params,
                            locate_root_shooting, make_config, perturbed_eigenfunction,
                            quantization_roots, shoot_mismatch, shooting_roots)
from simwave.specfun import DegenerateCaseError

G = RhoGrid(1025)


@pytest.mark.parametrize("p", [4, 1, -3, 2])
def test_config_rejects_even_or_small(p):
    with pytest.raises(ValueError):
        NonlinearityConfig(p)


def test_config_rejects_non_integer():
    with pytest.raises(ValueError):
        make_config(3.5)
    assert make_config(5.0).p == 5


@pytest.mark.parametrize("p,c0,lam0", [(3, Fraction(2), 2), (5, Fraction(3, 4), Fraction(3, 2)),
                                       (7, Fraction(4, 9), Fraction(4, 3))])
def test_constants(p, c0, lam0):
    cfg = make_config(p)
    assert cfg.c0_exact == c0
    assert gauge_eigenvalue_exact(cfg) == lam0
    assert cfg.pc0 == pytest.approx(float(p * c0))


def test_apply_lprime(cfg3):
    rho = G.nodes
    phi = StateVector.from_arrays(G, rho, np.ones(G.n))
    out = apply_lprime(cfg3, phi)
    assert np.allclose(out.comp1.values, 6 * rho)
    assert np.all(out.comp2.values == 0)


@pytest.mark.parametrize("p", [3, 5, 7, 9, 11])
def test_single_quantized_root(p):
    cfg = make_config(p)
    roots = quantization_roots(cfg)
    assert [r.lam for r in roots] == [complex(gauge_eigenvalue(cfg))]
    assert roots[0].residual == 0.0


def test_quantization_lower_cut():
    # p = 3, s = 5: branches 2 - 2k and -3 - 2k
    roots = quantization_roots(make_config(3), half_plane_cut=-5)
    lams = sorted(r.lam.real for r in roots)
    assert lams == [-4.0, -3.0, -2.0, 0.0, 2.0]
    assert all(r.residual == 0.0 for r in roots)


@pytest.mark.parametrize("lam", [0.7, 1.4 + 0.8j, 3 - 2j, 6.0])
@pytest.mark.parametrize("p", [3, 5])
def test_mismatch_routes_agree(lam, p):
    cfg = make_config(p)
    a = shoot_mismatch(lam, cfg, "hypergeometric")
    b = shoot_mismatch(lam, cfg, "ode")
    assert abs(a - b) <= 1e-7 * max(1, abs(a))


def test_mismatch_vanishes_at_gauge(cfg3):
    assert abs(shoot_mismatch(2.0, cfg3)) < 1e-12
    assert abs(shoot_mismatch(2.0, cfg3, "ode")) < 1e-8


def test_mismatch_domain(cfg3):
    with pytest.raises(ValueError):
        shoot_mismatch(0.4, cfg3)
    with pytest.raises(DegenerateCaseError):
        shoot_mismatch(1.0, cfg3)
    with pytest.raises(ValueError):
        shoot_mismatch(2.5, cfg3, "magic")


@pytest.mark.parametrize("p", [3, 5, 7])
def test_shooting_relocates_root(p):
    cfg = make_config(p)
    lam0 = gauge_eigenvalue(cfg)
    rep = locate_root_shooting(cfg, lam0 - 0.05, lam0 + 0.05)
    assert abs(rep.lam - lam0) < 1e-8 and rep.method == "shooting"


def test_shooting_scan_finds_only_gauge(cfg3):
    roots = shooting_roots(cfg3, hi=6.0, step=0.05)
    assert len(roots) == 1 and abs(roots[0].lam - 2.0) < 1e-8


@given(re=st.floats(0.55, 6), im=st.floats(-10, 10))
def test_no_other_zero_in_right_half_plane(re, im):
    lam = complex(re, im)
    if abs(lam - 1) < 1e-3:
        return
    cfg = make_config(3)
    if abs(lam - 2) > 1e-2:
        assert abs(shoot_mismatch(lam, cfg)) > 1e-6


@pytest.mark.parametrize("p", [3, 5, 7, 9])
def test_gauge_mode_residual(p):
    cfg = make_config(p)
    phi = gauge_mode_profile(cfg, G)
    lam0 = gauge_eigenvalue(cfg)
    assert l2_norm(apply_l(cfg, phi) - phi * lam0) / l2_norm(phi) < 1e-3
    assert phi.comp2.values[0] == pytest.approx(1.0)


@pytest.mark.parametrize("p", [3, 5, 7])
def test_gauge_mode_closed_form(p):
    # the time-translation mode: u = rho, Phi = (lambda0 rho, 1)
    cfg = make_config(p)
    phi = gauge_mode_profile(cfg, G)
    assert np.max(np.abs(phi.comp1.values - gauge_eigenvalue(cfg) * G.nodes)) < 1e-10
    assert np.max(np.abs(phi.comp2.values - 1)) < 1e-10


def test_hypergeom_params_at_gauge(cfg3):
    pr = hypergeom_params(2.0, cfg3)
    assert pr.a + 0.5 == pytest.approx(0.0)


@pytest.mark.parametrize("lam", [0.3, -0.4 + 2j, 0.1 - 1j])
def test_perturbed_eigenfunction(lam, cfg3):
    # the derivative behaves like (1 - rho)^(-lam): measure away from the endpoint;
    # the residual is the O(h^2) error of the running integral in L'
    errs = []
    for n in (257, 513, 1025):
        g = RhoGrid(n)
        phi = perturbed_eigenfunction(lam, cfg3, g)
        assert phi.is_regular()
        res = apply_l(cfg3, phi) - phi * lam
        w = g.simpson_weights * (g.nodes < 0.9)
        num = w @ (np.abs(res.comp1.values) ** 2 + np.abs(res.comp2.values) ** 2)
        den = w @ (np.abs(phi.comp1.values) ** 2 + np.abs(phi.comp2.values) ** 2)
        errs.append(np.sqrt(num / den))
    assert errs[-1] < 5e-6
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.8)


def test_perturbed_eigenfunction_domain(cfg3):
    with pytest.raises(ValueError):
        perturbed_eigenfunction(0.6, cfg3, G)


def test_lprime_is_bounded(cfg3, rng):
    # ||L' f|| <= p c0 ||f_2|| by Cauchy-Schwarz on int_0^rho
    for _ in range(5):
        f = random_smooth_state(G, rng)
        assert l2_norm(apply_lprime(cfg3, f)) <= cfg3.pc0 * l2_norm(f)
