import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggpatch.graphstate import (SampledGraph, default_threshold, dini_norm, holder_norm,
                                 holder_seminorm, interpolate, interpolate_many, lemma1_check,
                                 modulus_of_continuity, modulus_table, norm_report, slope,
                                 support_components, trapezoid)
from aggpatch.scenario import bump

values = st.lists(st.floats(-10, 10, allow_nan=False), min_size=5, max_size=40)


def tent(n=9, c=0.2):
    return SampledGraph.from_function(lambda x: c * (1 - np.abs(x)), -1, 1, n)


def test_grid_geometry():
    g = SampledGraph(0.0, 2.0, np.arange(5.0))
    assert g.n == 5
    assert g.h == pytest.approx(0.5)
    np.testing.assert_allclose(g.x, [0, 0.5, 1, 1.5, 2])


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        SampledGraph(0.0, 1.0, np.array([0.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        SampledGraph(1.0, 0.0, np.zeros(3))
    with pytest.raises(ValueError):
        SampledGraph(0.0, 1.0, np.zeros(1))


def test_values_are_immutable():
    g = tent()
    with pytest.raises(ValueError):
        g.values[0] = 1.0


@given(values)
def test_json_roundtrip(v):
    g = SampledGraph(-1.0, 2.0, np.array(v), time=0.25)
    back = SampledGraph.from_json(g.to_json())
    np.testing.assert_array_equal(back.values, g.values)
    assert (back.x_lo, back.x_hi, back.time) == (g.x_lo, g.x_hi, g.time)


def test_from_dict_checks_n():
    with pytest.raises(ValueError):
        SampledGraph.from_dict({"x_lo": 0, "x_hi": 1, "n": 4, "values": [0, 1, 0]})


def test_csv_header_and_rows():
    lines = tent(5).to_csv().splitlines()
    assert lines[0] == "x,f"
    assert len(lines) == 6


def test_trapezoid_exact_for_tent():
    assert trapezoid(tent()) == pytest.approx(0.2)


def test_interpolation_zero_outside():
    g = tent()
    assert interpolate(g, 1.5) == 0.0
    assert interpolate(g, -3.0) == 0.0
    np.testing.assert_allclose(interpolate_many(g, g.x), g.values, atol=1e-15)


def test_interpolation_rejects_nan():
    with pytest.raises(ValueError):
        interpolate(tent(), float("nan"))


@given(values)
def test_interpolation_respects_node_bounds(v):
    g = SampledGraph(0.0, 1.0, np.array(v))
    xs = np.linspace(0.0, 1.0, 301)
    w = interpolate_many(g, xs)
    assert np.all(w <= g.values.max() + 1e-12)
    assert np.all(w >= g.values.min() - 1e-12)


def test_modulus_of_linear_function():
    g = SampledGraph.from_function(lambda x: 3 * x, 0, 1, 11)
    assert modulus_of_continuity(g, 0.3) == pytest.approx(0.9)
    assert modulus_of_continuity(g, 0.0) == 0.0
    with pytest.raises(ValueError):
        modulus_of_continuity(g, -1.0)


@given(values)
def test_modulus_table_monotone_and_subadditive(v):
    g = SampledGraph(0.0, 1.0, np.array(v))
    w = modulus_table(g)
    assert w[0] == 0.0
    assert np.all(np.diff(w) >= 0)
    n = w.size
    for j in range(1, n):
        for k in range(1, n - j):
            assert w[j + k] <= w[j] + w[k] + 1e-12


@given(values, st.floats(0.1, 5.0))
def test_norms_are_homogeneous(v, lam):
    g = SampledGraph(0.0, 1.0, np.array(v))
    assert dini_norm(g.scaled(lam)) == pytest.approx(lam * dini_norm(g), rel=1e-9, abs=1e-12)
    assert holder_seminorm(g.scaled(lam), 0.5) == pytest.approx(lam * holder_seminorm(g, 0.5),
                                                                rel=1e-9, abs=1e-12)


def test_holder_seminorm_of_sqrt():
    # |sqrt(x) - sqrt(y)| <= |x - y|^{1/2} with equality at the origin
    g = SampledGraph.from_function(np.sqrt, 0, 1, 401)
    assert holder_seminorm(g, 0.5) == pytest.approx(1.0, rel=1e-12)
    assert holder_norm(g, 0.5) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        holder_seminorm(g, 1.0)


def test_dini_norm_of_linear_function():
    # omega(r) = r, so int_h^1 omega(r)/r dr = 1 - h
    g = SampledGraph.from_function(lambda x: x, 0, 1, 1001)
    assert dini_norm(g) == pytest.approx(1 - g.h, rel=1e-4)


def test_slope_fourth_order():
    errs = []
    for n in (65, 129):
        g = SampledGraph.from_function(np.sin, 0, 2, n)
        errs.append(np.max(np.abs(slope(g).values - np.cos(g.x))))
    assert errs[0] / errs[1] > 12
    with pytest.raises(ValueError):
        slope(SampledGraph(0, 1, np.zeros(4)))


def test_lemma1_constant_bounded_on_bumps():
    for p in (3, 4, 6):
        g = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1, p), -1, 1, 513)
        c = lemma1_check(g, 0.5)
        assert 0 < c < 10


def test_support_components_two_bumps():
    g = SampledGraph.from_function(lambda x: bump(x, -0.5, 0.3, 1) + bump(x, 0.5, 0.3, 1), -1, 1, 201)
    comps = support_components(g, 0.0)
    assert len(comps) == 2
    np.testing.assert_allclose(comps, [(-0.8, -0.2), (0.2, 0.8)], atol=1e-12)
    assert support_components(SampledGraph.zeros(0, 1, 5)) == []
    with pytest.raises(ValueError):
        support_components(g, -1.0)


def test_default_threshold_relative():
    g = tent()
    assert default_threshold(g) == pytest.approx(0.2e-10)
    assert default_threshold(SampledGraph.zeros(0, 1, 5)) == 0.0


def test_norm_report_fields():
    g = SampledGraph.from_function(lambda x: bump(x, 0, 1, 0.1), -1, 1, 129)
    r = norm_report(g)
    assert r.linf == pytest.approx(0.1)
    assert r.l1 == pytest.approx(trapezoid(g))
    assert r.support == [(-1.0, 1.0)]
    assert set(r.to_dict()) == {"linf", "l1", "slope_linf", "dini", "holder_s", "s", "support"}
