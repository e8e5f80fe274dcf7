import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggpatch import oracle
from aggpatch.graphstate import SampledGraph
from aggpatch.scenario import bump
from aggpatch.velocity import u1_at, u2_at


def test_disc_field_is_linear():
    # a disc of radius 1 moves with velocity -x/2 inside
    e = oracle.EllipseState(1.0, 1.0)
    for p in [(0.3, 0.2), (-0.5, 0.1), (0.0, -0.7)]:
        v = oracle.biot_savart_profile(e.profile, -1, 1, p)
        np.testing.assert_allclose(v, (-p[0] / 2, -p[1] / 2), atol=1e-8)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_ellipse_interior_field_matches_quadrature(s, t):
    e = oracle.EllipseState(2.0, 1.0)
    r = np.hypot(s, t)
    if r > 0.9:
        s, t = 0.9 * s / r, 0.9 * t / r
    p = (2.0 * s, 1.0 * t)
    np.testing.assert_allclose(oracle.ellipse_interior_field(e, p),
                               oracle.biot_savart_profile(e.profile, -2, 2, p), atol=1e-8)


def test_interior_field_rejects_outside_points():
    with pytest.raises(ValueError):
        oracle.ellipse_interior_field(oracle.EllipseState(2.0, 1.0), (2.0, 0.0))


def test_patch_oracle_matches_graph_velocity():
    g = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1), -1, 1, 1025)
    for i in (200, 512, 800):
        v1, v2 = oracle.biot_savart_patch(g, (g.x[i], g.values[i]))
        assert v1 == pytest.approx(u1_at(g, g.x[i]), abs=5e-7)
        assert v2 == pytest.approx(u2_at(g, g.x[i]), abs=5e-7)


def test_patch_oracle_rejects_nan():
    g = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1), -1, 1, 33)
    with pytest.raises(ValueError):
        oracle.biot_savart_patch(g, (np.nan, 0.0))
    assert oracle.biot_savart_patch(SampledGraph.zeros(-1, 1, 9), (0.0, 0.0)) == (0.0, 0.0)


def test_ode_keeps_axes_difference_and_area_law():
    states = oracle.ellipse_evolve(oracle.EllipseState(2.0, 1.0), 10.0, 1e-3)
    assert len(states) == 10001
    for s in states[::500]:
        assert s.a - s.b == pytest.approx(1.0, abs=1e-12)
        assert s.a * s.b == pytest.approx(2.0 * np.exp(-s.time), rel=1e-8)


def test_exact_minor_axis_matches_ode():
    states = oracle.ellipse_evolve(oracle.EllipseState(2.0, 1.0), 4.0, 1e-3)
    t = np.array([s.time for s in states])
    b = np.array([s.b for s in states])
    np.testing.assert_allclose(oracle.ellipse_exact_b(2.0, 1.0, t), b, rtol=1e-10)


def test_disc_shrinks_self_similarly():
    s = oracle.ellipse_evolve(oracle.EllipseState(1.0, 1.0), 2.0, 1e-3)[-1]
    assert s.a == pytest.approx(np.exp(-1.0), rel=1e-10)
    assert s.a == s.b


def test_ellipse_state_validation():
    with pytest.raises(ValueError):
        oracle.EllipseState(1.0, 2.0)
    with pytest.raises(ValueError):
        oracle.ellipse_ode_step(oracle.EllipseState(1.0, 1.0), 0.0)


def test_densities_have_unit_mass():
    x = np.linspace(-2, 2, 200001)
    assert np.trapezoid(oracle.semicircle_density(1.5, x), x) == pytest.approx(1.0, abs=1e-5)
    e = oracle.EllipseState(1.2, 0.3)
    assert np.trapezoid(oracle.ellipse_marginal(e, x), x) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        oracle.semicircle_density(0.0, x)


def test_marginal_approaches_semicircle():
    gaps = []
    for tau in (2.0, 6.0, 10.0):
        b = float(oracle.ellipse_exact_b(2.0, 1.0, tau))
        e = oracle.EllipseState(b + 1.0, b)
        x = np.linspace(-e.a, e.a, 4001)
        gaps.append(np.max(np.abs(oracle.ellipse_marginal(e, x) - oracle.semicircle_density(1.0, x))))
    assert gaps[0] > gaps[1] > gaps[2]


def test_endpoint_gap_monitor():
    t = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(oracle.endpoint_gap_monitor(t, [1.0, 1.0, 1.0], 5.0), [5, 3, 1])
    with pytest.raises(ValueError):
        oracle.endpoint_gap_monitor(t, [1.0], 1.0)


def test_comparison_csv():
    text = oracle.comparison_csv([(0.5, "u1", 1.0, 0.75)])
    assert text.splitlines() == ["x,quantity,model_value,oracle_value,abs_err", "0.5,u1,1.0,0.75,0.25"]
