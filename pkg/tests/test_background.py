import itertools
import math

import numpy as np
import pytest
import sympy as sp

from nullcone.background import (PRINTED_DRM_SNNL, BackgroundModel, decay_order_estimate,
                                 model_from_dict, parse_pattern)
from nullcone.sphere import get_grid


def test_profile_values(schw):
    assert schw.h_eval(10.0) == pytest.approx((0.8, 0.02, -0.004), abs=1e-15)


def test_background_quantities(schw):
    ult, th, H2 = schw.background_quantities(10.0)
    assert (ult, th, H2) == pytest.approx((0.2, 0.16, 0.032), abs=1e-15)


def test_generalized_profile():
    model = BackgroundModel.generalized(1.0, 1.0)
    assert model.h_eval(10.0)[0] == pytest.approx(0.81, abs=1e-15)


def test_validation():
    with pytest.raises(ValueError):
        BackgroundModel(-1.0)
    with pytest.raises(ValueError):
        BackgroundModel.schwarzschild(1.0, r_min=1.5)
    with pytest.raises(ValueError):
        BackgroundModel(1.0, 0.0, "minkowski")
    with pytest.raises(ValueError):
        BackgroundModel.schwarzschild(1.0).h_eval(2.0)


def test_model_from_dict():
    assert model_from_dict({"type": "minkowski"}).is_flat
    m = model_from_dict({"type": "generalized", "mass": 2.0, "q_coeff": 0.5})
    assert (m.mass, m.q_coeff) == (2.0, 0.5)


def test_pattern_aliases():
    assert parse_pattern("ul_L L_r ul_L L_r", 4) == ("n", "l", "n", "l")
    assert parse_pattern(["I", "n", "J", "l"], 4) == ("S", "n", "S", "l")
    with pytest.raises(ValueError):
        parse_pattern("n l n", 4)
    with pytest.raises(ValueError):
        parse_pattern("n l n x?", 4)


def test_listed_components(schw):
    r = 10.0
    assert schw.curvature_component("n l n l", r) == pytest.approx(-0.008, abs=1e-15)
    assert schw.curvature_component("I n J l", r) == pytest.approx(-0.2, abs=1e-15)
    assert schw.curvature_component("I J K M", r) == pytest.approx(20.0, abs=1e-12)


def test_symmetries_and_zeros(schw):
    r = 12.0
    alphabet = ("S", "n", "l")
    for pat in itertools.product(alphabet, repeat=4):
        v = schw.curvature_component(pat, r)
        a, b, c, d = pat
        if a != b:
            # equal letters carry the sign in the ghat structure, not the coefficient
            assert schw.curvature_component((b, a, c, d), r) == pytest.approx(-v)
        assert schw.curvature_component((c, d, a, b), r) == pytest.approx(v)
    for pat in (("S", "n", "S", "n"), ("S", "l", "S", "l"), ("n", "n", "n", "l"), ("S", "S", "n", "l")):
        assert schw.curvature_component(pat, r) == 0.0


def test_flat_model_vanishes(mink):
    for pat in itertools.product(("S", "n", "l"), repeat=4):
        assert mink.curvature_component(pat, 7.0) == 0.0
    for pat in itertools.product(("S", "n", "l"), repeat=5):
        assert mink.deriv_curvature_component(pat, 7.0) == 0.0


def test_printed_derivative_entry_differs(schw):
    r = 10.0
    h, h1, h2 = schw.h_eval(r)
    assert schw.deriv_curvature_component("A B n n l", r) == pytest.approx(0.06, abs=1e-15)
    assert PRINTED_DRM_SNNL(r, h, h1, h2) == pytest.approx(-0.02, abs=1e-15)


def test_riemann_tensor_symmetries_and_bianchi(schw):
    g = get_grid(6)
    r = 10.0 + 0.5 * g.x[2]
    R = schw.riemann_tensor(r, g.proj)
    assert np.max(np.abs(R + np.swapaxes(R, 0, 1))) < 1e-14
    assert np.max(np.abs(R - np.transpose(R, (2, 3, 0, 1, 4, 5)))) < 1e-14
    bianchi = R + np.transpose(R, (0, 2, 3, 1, 4, 5)) + np.transpose(R, (0, 3, 1, 2, 4, 5))
    assert np.max(np.abs(bianchi)) < 1e-13


def test_ricci_closed_forms_flat_for_pure_schwarzschild(schw):
    r = np.array([5.0, 10.0, 40.0])
    cf = schw.ricci_closed_forms(r)
    assert np.max(np.abs(cf["RicLL"])) < 1e-15
    assert np.max(np.abs(cf["Rbar"])) < 1e-15


def test_ricci_from_tensor_matches_closed_forms():
    model = BackgroundModel.generalized(1.0, 3.0)
    g = get_grid(6)
    r = 9.0 + 0.3 * g.x[0]
    R = model.riemann_tensor(r, g.proj)
    G = model.inverse_metric(r, g.proj)
    ric = np.einsum("ac...,abcd...->bd...", G, R)
    cf = model.ricci_closed_forms(r)
    assert np.max(np.abs(ric[3, 4] - cf["RicLL"])) < 1e-14
    assert np.max(np.abs(ric[3, 3])) < 1e-15
    rbar = np.einsum("bd...,bd...->...", G, ric)
    assert np.max(np.abs(rbar - cf["Rbar"])) < 1e-14


def test_decay_order_estimate():
    r = np.array([10.0, 20.0, 40.0, 80.0])
    assert decay_order_estimate(r, 3.0 / r**2) == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(ValueError):
        decay_order_estimate(r[:2], r[:2])


# ---------------------------------------------------------------------- symbolic oracle

@pytest.fixture(scope="module")
def symbolic_curvature():
    """Riemann tensor and its covariant derivative for ds^2 = -h du^2 - 2 du dr + r^2 dOmega^2."""
    u, r, th, ph = sp.symbols("u r theta phi")
    h = sp.Function("h")(r)
    X = [u, r, th, ph]
    g = sp.diag(-h, 0, r**2, r**2 * sp.sin(th) ** 2)
    g[0, 1] = g[1, 0] = -1
    gi = g.inv()
    n = 4
    Gam = [[[sp.simplify(sum(gi[a, d] * (sp.diff(g[d, b], X[c]) + sp.diff(g[d, c], X[b]) - sp.diff(g[b, c], X[d]))
                              for d in range(n)) / 2)
             for c in range(n)] for b in range(n)] for a in range(n)]

    def Rup(a, b, c, d):
        return (sp.diff(Gam[a][d][b], X[c]) - sp.diff(Gam[a][c][b], X[d])
                + sum(Gam[a][c][e] * Gam[e][d][b] - Gam[a][d][e] * Gam[e][c][b] for e in range(n)))

    # Rm(X, Y, W, Z) = g(R(X, Y) Z, W)
    Rl = {}
    for c, d, w, z in itertools.product(range(n), repeat=4):
        Rl[(c, d, w, z)] = sp.simplify(sum(g[w, a] * Rup(a, z, c, d) for a in range(n)))

    def DR(a, b, c, d, e):
        val = sp.diff(Rl[(b, c, d, e)], X[a])
        for f in range(n):
            val -= (Gam[f][a][b] * Rl[(f, c, d, e)] + Gam[f][a][c] * Rl[(b, f, d, e)]
                    + Gam[f][a][d] * Rl[(b, c, f, e)] + Gam[f][a][e] * Rl[(b, c, d, f)])
        return val

    m, cq, r0, th0 = 1.0, 2.0, 10.0, 0.7
    hval = 1 - 2 * m / r + cq / r**2

    def concrete(expr):
        expr = expr.subs(sp.Derivative(h, (r, 2)), sp.diff(hval, r, 2))
        expr = expr.subs(sp.Derivative(h, r), sp.diff(hval, r)).subs(h, hval)
        return float(expr.subs({r: r0, th: th0}))

    vec = {"n": [0, 1, 0, 0], "l": [-2, h, 0, 0], "t": [0, 0, 1, 0], "p": [0, 0, 0, 1]}

    def contract(vs, table, rank):
        s = 0
        for idx in itertools.product(range(n), repeat=rank):
            coef = 1
            for v, i in zip(vs, idx):
                coef *= v[i]
                if coef == 0:
                    break
            if coef != 0:
                s += coef * table(*idx)
        return concrete(sp.simplify(s))

    def rm(labels):
        return contract([vec[c] for c in labels], lambda *i: Rl[i], 4)

    def drm(labels):
        return contract([vec[c] for c in labels], DR, 5)

    return {"rm": rm, "drm": drm, "r": r0, "sin2": math.sin(th0) ** 2,
            "model": BackgroundModel.generalized(m, cq)}


def test_symbolic_components(symbolic_curvature):
    o = symbolic_curvature
    M, r, s2 = o["model"], o["r"], o["sin2"]
    cc = M.curvature_component
    # coordinate frame: ghat(d_theta, d_theta) = 1, ghat(d_phi, d_phi) = sin^2
    assert o["rm"]("nlnl") == pytest.approx(cc("n l n l", r), abs=1e-14)
    assert o["rm"]("tntl") == pytest.approx(cc("S n S l", r), abs=1e-14)
    assert o["rm"]("tptp") == pytest.approx(cc("S S S S", r) * s2, abs=1e-12)
    for labels in ("tntn", "tltl", "tpnl", "nlnn"):
        assert o["rm"](labels) == pytest.approx(0.0, abs=1e-14)


def test_symbolic_derivative_components(symbolic_curvature):
    o = symbolic_curvature
    M, r, s2 = o["model"], o["r"], o["sin2"]
    dc = M.deriv_curvature_component
    assert o["drm"]("ttnnl") == pytest.approx(dc("S S n n l", r), abs=1e-14)
    assert o["drm"]("ntntl") == pytest.approx(dc("n S n S l", r), abs=1e-14)
    assert o["drm"]("tptpl") == pytest.approx(dc("S S S S l", r) * s2, abs=1e-14)
    assert o["drm"]("tptpn") == pytest.approx(dc("S S S S n", r) * s2, abs=1e-14)
    assert o["drm"]("nptpt") == pytest.approx(dc("n S S S S", r) * s2, abs=1e-14)
    for labels in ("ttntl", "ntntn", "ntnnl"):
        assert o["drm"](labels) == pytest.approx(0.0, abs=1e-14)
