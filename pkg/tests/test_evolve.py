import numpy as np
import pytest

from aggpatch.evolve import (CFLError, FlowMap, InvariantError, advance, dt_max, flow_inverse,
                             run_graph, step, step_eps, velocity_pack)
from aggpatch.graphstate import SampledGraph, trapezoid
from aggpatch.oracle import ellipse_exact_b
from aggpatch.scenario import bump


def small(n=129, amp=0.1):
    return SampledGraph.from_function(lambda x: bump(x, 0, 1, amp), -1, 1, n)


@pytest.fixture(scope="module")
def plain_run():
    return run_graph(small(), 1.0, 0.025, "plain", cadence=0.25, components=[(-1.0, 1.0)])


def test_mass_law(plain_run):
    m = plain_run.monitor("mass_et")
    assert np.max(np.abs(m / m[0] - 1)) < 2e-4


def test_invariants_hold(plain_run):
    rep = {r["name"]: r for r in plain_run.invariant_report()}
    assert all(r["passed"] for r in rep.values())
    assert rep["support_leakage"]["max_violation"] == 0.0


def test_monitors_and_snapshots(plain_run):
    assert np.allclose(plain_run.times, [0, 0.25, 0.5, 0.75, 1.0])
    lines = plain_run.monitors_csv().splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("time,mass_et")
    snap = plain_run.snapshot_json(2)
    assert '"time": 0.5' in snap


def test_amplitude_decays_at_unit_rate(plain_run):
    # e^t sup f stays within the band set by the damping term R
    lin = plain_run.monitor("linf") * np.exp(plain_run.times)
    assert np.all(np.diff(plain_run.monitor("linf")) < 0)
    assert np.all(np.abs(lin / lin[0] - 1) < 0.2)


def test_endpoints_move_inward(plain_run):
    lo = plain_run.monitor("tracker_lo")
    hi = plain_run.monitor("tracker_hi")
    assert np.all(np.diff(lo) > 0) and np.all(np.diff(hi) < 0)


def test_rescaled_matches_plain():
    g0 = small()
    a = run_graph(g0, 0.5, 0.02, "plain").final.values
    b = run_graph(g0, 0.5, 0.02, "rescaled").final.values
    assert np.max(np.abs(a - b)) < 1e-5


def test_deterministic():
    g0 = small(65)
    a = run_graph(g0, 0.2, 0.04, "plain")
    b = run_graph(g0, 0.2, 0.04, "plain")
    assert a.monitors_csv() == b.monitors_csv()
    np.testing.assert_array_equal(a.final.values, b.final.values)


def test_cfl_guard():
    g0 = small()
    with pytest.raises(CFLError):
        step(g0, FlowMap.identity(g0.x), 2 * dt_max(g0))


def test_step_rejects_bad_arguments():
    g0 = small(33)
    fl = FlowMap.identity(g0.x)
    with pytest.raises(ValueError):
        advance(g0, fl, 0.0)
    with pytest.raises(ValueError):
        advance(g0, fl, 0.01, mode="implicit")
    with pytest.raises(ValueError):
        step_eps(g0, fl, 0.01, 0.0)
    with pytest.raises(ValueError):
        run_graph(g0, 0.15, 0.1)


def test_step_eps_close_to_step_for_small_eps():
    g0 = small()
    fl = FlowMap.identity(g0.x)
    a, _ = step(g0, fl, 0.02)
    b, _ = step_eps(g0, fl, 0.02, 1e-4)
    assert np.max(np.abs(a.values - b.values)) < 1e-4


def test_step_is_second_order_in_time():
    g0 = small()
    ref = run_graph(g0, 0.4, 0.005, "plain").final.values
    e = [np.max(np.abs(run_graph(g0, 0.4, d, "plain").final.values - ref)) for d in (0.04, 0.02)]
    assert 3.0 < e[0] / e[1] < 5.0


def test_flow_inverse_roundtrip():
    x0 = np.linspace(-1, 1, 11)
    fl = FlowMap(x0, 0.5 * x0 + 0.1, np.ones(11), np.zeros(11), 1.0)
    assert flow_inverse(fl, 0.35) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        flow_inverse(fl, 2.0)


def test_jacobian_tracks_flow_derivative(plain_run):
    fl = plain_run.flows[-1]
    fd = np.gradient(fl.tracker_x, fl.tracker_x0)
    core = slice(10, -10)
    np.testing.assert_allclose(fl.tracker_J[core], fd[core], rtol=2e-3)


def test_disc_shrinks_like_ode():
    # the graph of a disc stays a half-disc with radius e^{-t/2}
    g0 = SampledGraph.from_function(lambda x: np.sqrt(np.clip(1 - x * x, 0, None)), -1, 1, 257)
    rec = run_graph(g0, 0.5, 0.005, "plain")
    b = float(ellipse_exact_b(1.0, 1.0, 0.5))
    assert np.max(rec.final.values) == pytest.approx(b, abs=5e-3)
    # the square-root edge is not C^1, which costs accuracy near the endpoints
    assert trapezoid(rec.final) == pytest.approx(trapezoid(g0) * np.exp(-0.5), rel=3e-3)


def test_negative_initial_data_rejected():
    with pytest.raises(ValueError):
        run_graph(small(33).scaled(-1.0), 0.1, 0.01)


def test_strict_mode_raises_invariant_error(monkeypatch):
    import aggpatch.evolve as ev
    monkeypatch.setitem(ev.INVARIANT_TOL, "positivity", -1.0)
    with pytest.raises(InvariantError) as exc:
        run_graph(small(33), 0.04, 0.02, "plain")
    assert exc.value.name == "positivity"
    assert exc.value.snapshot is not None


def test_velocity_pack_consistency():
    g0 = small()
    p = velocity_pack(g0)
    inside = g0.values > 0
    np.testing.assert_allclose(p.U[inside], p.u2[inside] / g0.values[inside])
    np.testing.assert_allclose(p.R[inside], -p.U[inside] - 1)
