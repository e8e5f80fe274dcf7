import json

import numpy as np
import pytest

from aggpatch import asymptotics as A
from aggpatch.evolve import run_graph
from aggpatch.graphstate import SampledGraph, trapezoid
from aggpatch.rates import fit_exponential_rate, successive_ratios
from aggpatch.scenario import bump


@pytest.fixture(scope="module")
def one_bump():
    g0 = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1), -1, 1, 129)
    return g0, run_graph(g0, 4.0, 0.02, "rescaled", cadence=0.5, components=[(-1.0, 1.0)])


@pytest.fixture(scope="module")
def two_bumps():
    fn = lambda x: bump(x, -0.6, 0.35, 0.05) + bump(x, 0.55, 0.4, 0.04)
    g0 = SampledGraph.from_function(fn, -0.95, 0.95, 129)
    comps = [(-0.95, -0.25), (0.15, 0.95)]
    return g0, comps, run_graph(g0, 3.0, 0.02, "rescaled", cadence=0.5, components=comps)


def test_rate_fit_recovers_exponent():
    t = np.linspace(0, 5, 11)
    assert fit_exponential_rate(t, 3 * np.exp(-0.7 * t)) == pytest.approx(-0.7)
    assert fit_exponential_rate(t, np.exp(-t), t_min=2, t_max=4) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        fit_exponential_rate(t, np.zeros(11))
    np.testing.assert_allclose(successive_ratios([4.0, 2.0, 1.0]), [0.5, 0.5])


def test_profile_mass(one_bump):
    g0, rec = one_bump
    prof = A.scattering_profile(rec)
    assert prof.mass() == pytest.approx(2 * trapezoid(g0), rel=1e-3)


def test_profile_gaps_contract(one_bump):
    _, rec = one_bump
    prof = A.scattering_profile(rec)
    assert prof.converging
    assert np.all(successive_ratios(prof.gaps[2:]) < 1)
    assert prof.rates["profile_gap"] < -0.5
    d = json.loads(prof.to_json())
    assert {"phi", "K_inf", "rates", "cauchy_gap"} <= set(d)


def test_profile_needs_three_snapshots():
    g0 = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1), -1, 1, 33)
    rec = run_graph(g0, 0.1, 0.05, "rescaled")
    with pytest.raises(ValueError):
        A.scattering_profile(rec)


def test_flow_convergence(one_bump):
    _, rec = one_bump
    fc = A.flow_convergence(rec)
    assert fc["rate"] < -0.6
    assert 0.5 <= fc["J_min"] <= fc["J_max"] <= 1.5
    assert fc["monotone"] and not fc["slow"]
    assert A.limit_flow(rec) is rec.flows[-1]


def test_hausdorff_decay(one_bump):
    _, rec = one_bump
    prof = A.scattering_profile(rec)
    K = A.limit_support(prof, rec.initial_components)
    t, d = A.hausdorff_series(rec, K)
    assert t[0] == pytest.approx(1.0)
    assert np.all(np.diff(d) < 0)
    assert A.hausdorff_decay(rec, K) == pytest.approx(-1.0, abs=0.15)


def test_two_components_survive(two_bumps):
    _, comps, rec = two_bumps
    prof = A.scattering_profile(rec)
    K = A.limit_support(prof, comps)
    assert len(K) == 2
    for (a, b), (c, d) in zip(K, comps):
        assert c < a < b < d
        assert b - a >= 0.5 * (d - c)


def test_merged_components_detected(two_bumps):
    _, _, rec = two_bumps
    prof = A.scattering_profile(rec)
    with pytest.raises(ValueError):
        A.limit_support(prof, [(-0.9, 0.3), (0.2, 0.9)])


def test_weak_convergence(one_bump):
    _, rec = one_bump
    prof = A.scattering_profile(rec)
    rows = {r["name"]: r for r in A.weak_convergence_test(rec, prof)}
    assert set(rows) == set(A.default_test_functions())
    for r in rows.values():
        assert r["gaps"][-1] <= r["gaps"][0] + 1e-12
    # the y-odd test function integrates to zero over a symmetric patch
    assert max(abs(v) for v in rows["y"]["I_t"]) < 1e-14
    assert rows["one"]["target"] == pytest.approx(prof.mass())


def test_reconstructed_exponent_paths_agree(one_bump):
    g0, rec = one_bump
    prof = A.scattering_profile(rec)
    out = A.reconstruct_g(prof, g0)
    assert out["x_dyn"].size > 50
    assert out["max_gap"] < 0.05
    assert np.any(np.isnan(out["g_alg"]))
