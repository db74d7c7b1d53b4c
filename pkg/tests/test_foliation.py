import math

import numpy as np
import pytest

from nullcone.background import BackgroundModel
from nullcone.boost import boosted_profile
from nullcone.flow import FlowConfig
from nullcone.foliation import (FoliationError, FoliationResult, bondi, build_foliation, check_foliation,
                                rescale_to_radius, uniqueness_probe)
from nullcone.sphere import get_grid

SCHW = BackgroundModel.schwarzschild(1.0)
MINK = BackgroundModel.minkowski()


@pytest.fixture(scope="module")
def short_sweep():
    return build_foliation(SCHW, get_grid(12), 15.0, 20.0, 1.0, "newton")


def test_schwarzschild_leaves_are_round(short_sweep):
    for leaf in short_sweep.leaves:
        assert np.max(np.abs(leaf.omega - leaf.sigma)) < 1e-10 * leaf.sigma
        assert leaf.H2 == pytest.approx(4 * (1 - 2 / leaf.sigma) / leaf.sigma**2, rel=1e-12)


def test_gaps_equal_step(short_sweep):
    assert short_sweep.sigmas == [15.0, 16.0, 17.0, 18.0, 19.0, 20.0]
    assert short_sweep.gaps == pytest.approx([1.0] * 5, abs=1e-10)


def test_check_on_round_sweep(short_sweep):
    chk = check_foliation(short_sweep)
    assert chk["ok"] and chk["model_profile_decreasing"]
    assert chk["profile_bound"]["stable"]


def test_rows_have_gap_column(short_sweep):
    rows = short_sweep.rows()
    assert len(rows) == 6
    assert math.isnan(rows[-1]["gap_margin"])
    assert rows[0]["gap_margin"] == pytest.approx(1.0, abs=1e-10)


def test_perturbed_seed_sweep_and_callback():
    g = get_grid(12)
    seen = []
    res = build_foliation(SCHW, g, 15.0, 18.0, 1.0, "newton", seed_omega=15.0 + 0.3 * g.ylm(2, 1),
                          on_leaf=lambda i, leaf: seen.append(i))
    assert seen == [0, 1, 2, 3]
    assert all(leaf.rho == pytest.approx(leaf.sigma, rel=1e-10) for leaf in res.leaves)
    assert check_foliation(res)["gaps_positive"]


def test_flow_method_on_round_seed():
    res = build_foliation(SCHW, get_grid(8), 15.0, 17.0, 1.0, "flow")
    assert res.method == "flow"
    assert res.gaps == pytest.approx([1.0, 1.0], abs=1e-10)


def test_bondi_examples():
    assert bondi(1.0, [0, 0, 0]) == (1.0, [0.0, 0.0, 0.0])
    E, P = bondi(1.0, [0, 0, 0.5])
    assert E == pytest.approx(1.1180340, abs=1e-7)
    assert P == pytest.approx([0, 0, 0.5])
    assert bondi(0.0, [0.3, 0, 0]) == (0.0, [0.0, 0.0, 0.0])


def test_schwarzschild_bondi(short_sweep):
    E, P = short_sweep.bondi
    assert E == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(P)) < 1e-12


def test_argument_errors():
    g = get_grid(8)
    with pytest.raises(ValueError):
        build_foliation(SCHW, g, 15.0, 20.0, 1.0, "bogus")
    with pytest.raises(ValueError):
        build_foliation(SCHW, g, 15.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        build_foliation(SCHW, g, 2.5, 20.0, 1.0)
    with pytest.raises(ValueError):
        build_foliation(SCHW, g, 20.0, 15.0, 1.0)


def test_failed_leaf_carries_partial():
    g = get_grid(8)
    with pytest.raises(FoliationError) as info:
        build_foliation(SCHW, g, 15.0, 17.0, 1.0, "flow", seed_omega=15.0 + 0.5 * g.ylm(2, 0),
                        flow_cfg=FlowConfig(max_steps=5))
    assert isinstance(info.value.partial, FoliationResult)
    assert info.value.partial.leaves == []


def test_check_needs_three_leaves():
    with pytest.raises(ValueError):
        check_foliation(FoliationResult(sigmas=[1.0, 2.0]))


def test_rescale_to_radius():
    g = get_grid(8)
    w = rescale_to_radius(g, 3.0 + 0.5 * g.ylm(2, 0), 7.0)
    assert math.sqrt(g.integrate(w**2) / (4 * math.pi)) == pytest.approx(7.0, rel=1e-14)


def test_uniqueness_two_seeds():
    g = get_grid(12)
    seeds = [20 + 0.3 * g.ylm(2, 0), 20 + 0.2 * g.ylm(3, 1) + 0.1 * g.ylm(1, 0)]
    rep = uniqueness_probe(SCHW, g, 20.0, seeds)
    assert rep["pass"] and rep["max_distance"] < 1e-6 * 20
    assert "kernel_caveat" not in rep


def test_uniqueness_same_seed():
    g = get_grid(8)
    seed = 20 + 0.3 * g.ylm(2, 0)
    rep = uniqueness_probe(SCHW, g, 20.0, [seed, seed.copy()])
    assert rep["max_distance"] == 0.0 and rep["pass"]


def test_minkowski_caveat_reports_distinct_boosted_limits():
    g = get_grid(12)
    seeds = [boosted_profile(g, 5, [0, 0, 0.1]) + 0.2 * g.ylm(2, 0), boosted_profile(g, 5, [0.1, 0, 0])]
    rep = uniqueness_probe(MINK, g, 5.0, seeds)
    assert rep["kernel_caveat"] and rep["pass"]
    assert rep["max_distance"] > 0.1


def test_minkowski_boosted_sweep_keeps_boost():
    g = get_grid(12)
    res = build_foliation(MINK, g, 5.0, 7.0, 1.0, "flow", seed_omega=boosted_profile(g, 5, [0, 0, 0.1]))
    for leaf in res.leaves:
        assert leaf.a == pytest.approx([0, 0, 0.1], abs=1e-12)
    assert res.bondi == (0.0, [0.0, 0.0, 0.0])
