import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullcone.background import BackgroundModel
from nullcone.geometry import CrossSection
from nullcone.identities import (apriori_report, codazzi_residual, gauss_residual, gauss_residual_closed,
                                 jacobi_consistency, simon_contracted_coefficients, simon_full_residual,
                                 simon_residual, weighted_norm)
from nullcone.sphere import get_grid

SCHW = BackgroundModel.schwarzschild(1.0)


def surface(seed, L=32, degree=6, amp=0.5, model=SCHW, base=20.0):
    g = get_grid(L)
    f = g.random_field(np.random.default_rng(seed), degree, decay=1.0)
    f *= amp / np.max(np.abs(f))
    return CrossSection(g, base + f, model, degree=degree)


@pytest.fixture(scope="module")
def wobbly():
    return surface(1)


def test_gauss(wobbly):
    assert gauss_residual(wobbly).relative < 1e-10
    assert gauss_residual_closed(wobbly).relative < 1e-10


def test_codazzi(wobbly):
    full, contracted = codazzi_residual(wobbly)
    assert full.relative < 1e-10
    assert contracted.relative < 1e-10


def test_simon_full(wobbly):
    assert simon_full_residual(wobbly).relative < 1e-10


def test_contracted_simon_rederived_vs_printed(wobbly):
    exact = simon_residual(wobbly, "contracted")
    printed = simon_residual(wobbly, "contracted_printed")
    assert exact.relative < 1e-10
    # the printed coefficient leaves an O(1/rho^2) remainder
    assert printed.relative > 1e3 * exact.relative


def test_simon_unknown_form(wobbly):
    with pytest.raises(ValueError):
        simon_residual(wobbly, "bogus")


def test_coefficients_agree_in_pure_schwarzschild_up_to_h2():
    g = get_grid(8)
    s = CrossSection.round(g, 10.0, SCHW)
    c = simon_contracted_coefficients(s)
    h2 = s.hvals[2]
    w = s.omega
    assert np.max(np.abs(c["exact"] - c["printed"] - 8 * h2 / w**2)) < 1e-15


def test_round_sphere_passes_everything():
    s = CrossSection.round(get_grid(16), 10.0, SCHW)
    reps = [gauss_residual(s), *codazzi_residual(s), simon_full_residual(s), simon_residual(s, "contracted")]
    assert all(r.relative < 1e-12 for r in reps)


@settings(max_examples=5)
@given(st.integers(0, 2**32 - 1))
def test_identities_generalized_model(seed):
    s = surface(seed, L=24, degree=4, model=BackgroundModel.generalized(1.0, 2.0))
    assert gauss_residual(s).relative < 1e-9
    assert max(r.relative for r in codazzi_residual(s)) < 1e-9
    assert simon_residual(s, "contracted").relative < 1e-9


def test_residuals_shrink_with_resolution():
    lo = surface(1, L=16)
    hi = surface(1, L=32)
    assert simon_full_residual(hi).relative < 1e-3 * simon_full_residual(lo).relative


def test_jacobi_consistency_second_order():
    s = surface(2, L=16, degree=5)
    u = s.grid.random_field(np.random.default_rng(3), 5)
    errs = [jacobi_consistency(s, u, eps)[0].max_residual for eps in (0.01, 0.005, 0.0025)]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, abs=0.2)


def test_jacobi_consistency_step_bounds():
    s = surface(2, L=12, degree=3)
    with pytest.raises(ValueError):
        jacobi_consistency(s, np.ones(s.grid.shape), 1.0)
    with pytest.raises(ValueError):
        jacobi_consistency(s, np.ones(s.grid.shape), 0.0)


def test_apriori_round_member():
    rep = apriori_report(CrossSection.round(get_grid(12), 20.0, SCHW), 20.0)
    assert rep.member and rep.dev == 0.0
    assert rep.acirc < 1e-10 and rep.grad_acirc < 1e-10
    assert rep.c3 == pytest.approx(1.0, rel=1e-14)


def test_apriori_large_perturbation_not_member():
    assert not apriori_report(surface(2, L=16, degree=5), 20.0).member


def test_weighted_norms_round():
    g = get_grid(12)
    assert weighted_norm(np.ones(g.shape), None, grid=g) == pytest.approx(math.sqrt(4 * math.pi), rel=1e-14)
    expected = math.sqrt(4 * math.pi / 3) + math.sqrt(8 * math.pi / 3)
    assert weighted_norm(g.x[2], None, grid=g, k=1) == pytest.approx(expected, rel=1e-13)
    assert weighted_norm(np.full(g.shape, -3.0), None, grid=g, p=math.inf) == 3.0


def test_weighted_norm_scaling_on_round_leaf():
    g = get_grid(12)
    f = g.ylm(2, 1)
    s = CrossSection.round(g, 7.0, SCHW)
    for k in (0, 1, 2):
        assert weighted_norm(f, s, k=k) == pytest.approx(7.0 * weighted_norm(f, None, grid=g, k=k), rel=1e-12)


def test_weighted_norm_errors():
    g = get_grid(8)
    with pytest.raises(ValueError):
        weighted_norm(np.ones(g.shape), None, grid=g, k=4)
    with pytest.raises(ValueError):
        weighted_norm(np.ones(g.shape), None)
