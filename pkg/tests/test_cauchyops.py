import json

import numpy as np
import pytest

from aggpatch import cauchyops as C
from aggpatch.graphstate import SampledGraph
from aggpatch.scenario import bump

# Pointwise values at x = -0.25 and 0.25 of the analytic inputs below, frozen
# from scipy quad applied to the closed-form integrands (no interpolation).
ORACLE = {
    "re": (-0.2225489172940294, 0.6015207194275409),
    "im": (0.0434052621841581, 0.018166981854582605),
    "T": (-1.1273945654282576, -2.0327132454060837),
}
THETA, ALPHA, BETA = 0.6, 0.5, 0.3


def inputs(n):
    f = SampledGraph.from_function(lambda x: bump(x, 0.1, 0.7, 0.05), -1, 1, n)
    g = SampledGraph.from_function(lambda x: bump(x, -0.2, 0.6, 0.8) - bump(x, 0.5, 0.4, 0.5), -1, 1, n)
    h = SampledGraph.from_function(lambda x: bump(x, 0.0, 0.8, 1.0), -1, 1, n)
    return f, g, h


@pytest.fixture(scope="module")
def fine():
    f, g, h = inputs(1025)
    idx = [int(np.argmin(np.abs(f.x - v))) for v in (-0.25, 0.25)]
    return f, g, h, idx


def test_cauchy_real_part_matches_quad(fine):
    f, g, h, idx = fine
    np.testing.assert_allclose(C.cauchy_bilinear(f, g, h, THETA, "re")[idx], ORACLE["re"], atol=1e-6)


def test_cauchy_imaginary_part_matches_quad(fine):
    f, g, h, idx = fine
    np.testing.assert_allclose(C.cauchy_bilinear(f, g, h, THETA, "im")[idx], ORACLE["im"], atol=1e-6)


def test_t_operator_matches_quad(fine):
    f, g, _, idx = fine
    np.testing.assert_allclose(C.t_operator(f, g, ALPHA, BETA)[idx], ORACLE["T"], atol=1e-6)


def test_degenerate_inputs_give_zero():
    f, g, h = inputs(65)
    assert not np.any(C.cauchy_bilinear(f, g, h, 0.0))
    const = g.with_values(np.full(g.n, 0.3))
    assert not np.any(C.cauchy_bilinear(f, const, h, 0.5))
    assert not np.any(C.t_operator(f, g.scaled(0.0), 0.5, 0.5))


def test_bilinear_in_g_and_h():
    f, g, h = inputs(129)
    a = C.cauchy_bilinear(f, g.scaled(2.0), h.scaled(-3.0), THETA)
    b = C.cauchy_bilinear(f, g, h, THETA)
    np.testing.assert_allclose(a, -6.0 * b, rtol=1e-12, atol=1e-14)


def test_argument_validation():
    f, g, h = inputs(33)
    with pytest.raises(ValueError):
        C.cauchy_bilinear(f, g, h, 1.5)
    with pytest.raises(ValueError):
        C.cauchy_bilinear(f, g, h, 0.5, part="abs")
    with pytest.raises(ValueError):
        C.t_operator(f, g, 2.0, 0.5)
    with pytest.raises(ValueError):
        C.t_operator(f.scaled(-1.0), g, 0.5, 0.5)


def test_c_beta():
    assert C.c_beta(1.0) == 1.0
    assert C.c_beta(0.0) == 1.0
    assert C.c_beta(np.exp(-2.0)) == pytest.approx(3.0)


def test_random_sample_is_seeded():
    a = C.random_sample(7, 65)
    b = C.random_sample(7, 65)
    np.testing.assert_array_equal(a[0].values, b[0].values)
    assert a[3:] == b[3:]
    assert np.all(a[0].values >= 0)


def test_probe_reports():
    reps = C.probe_bounds(samples=4, seed=1)
    assert [r.operator for r in reps] == ["C_re", "C_im", "T_linf", "fT_dini", "fT_holder"]
    for r in reps:
        assert r.finite and r.passed
        d = json.loads(r.to_json())
        assert d["samples"] == 4 and len(d["ratios_fine"]) == 4


def test_ratios_invariant_under_scaling_g():
    a = C.probe_bounds(samples=2, seed=3, grids=(65, 129))
    b = C.probe_bounds(samples=2, seed=3, grids=(65, 129), scale_g=5.0)
    for ra, rb in zip(a, b):
        np.testing.assert_allclose(ra.ratios_fine, rb.ratios_fine, rtol=1e-9)


def test_beta_sweep_grows():
    out = C.beta_sweep(samples=3, seed=0, n=65)
    raw = out["raw"]
    assert raw[0] <= raw[1] <= raw[2]
    np.testing.assert_allclose(out["normalized"], [r / C.c_beta(b) for r, b in zip(raw, out["betas"])])
