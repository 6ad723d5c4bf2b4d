import numpy as np
import pytest

from sobocurve.curves import circle, ellipse
from sobocurve.geodesics import CurvePath, GeodesicResult, solve_bvp
from sobocurve.metrics import MetricSpec
from sobocurve.verify import (
    BallSample,
    CheckReport,
    GronwallCase,
    dist_lower_bound_check,
    equivalence_constants,
    gronwall_bound,
    gronwall_check,
    gronwall_suite,
    ivp_longrun_check,
    poincare_suite,
    poincare_terms,
    random_curve,
    run_suite,
    speed_drift_check,
)

SPEC = MetricSpec.sobolev(1.0, 0.0, 1.0)


def _result(path, spec=SPEC):
    from sobocurve.geodesics import path_energy

    E = path_energy(path, spec)
    return GeodesicResult(path, E, float(np.sqrt(E)), 0, 0.0, True, [])


# -- Poincare -----------------------------------------------------------------------


def test_poincare_constant_field():
    c = random_curve(np.random.default_rng(0), 64)
    w = np.array([0.6, -0.8])
    lhs, rhs = poincare_terms(c, np.tile(w, (64, 1)))["i"]
    assert lhs == pytest.approx(1.0, rel=1e-14)
    assert rhs == pytest.approx(2.0, rel=1e-12)  # margin |h|^2


def test_poincare_unit_circle_sine():
    c = circle(64)
    h = np.stack([np.sin(c.theta), np.zeros(64)], 1)
    lhs, rhs = poincare_terms(c, h)["i"]
    assert lhs == pytest.approx(1.0, abs=1e-14)
    assert rhs == pytest.approx(1.0 + np.pi**2, rel=1e-12)


def test_poincare_small_suite():
    rep = poincare_suite(trials=50, seed=3, M=128)
    assert isinstance(rep, CheckReport) and rep.trials == 50
    assert rep.passed and rep.worst_margin >= -1e-8
    again = poincare_suite(trials=50, seed=3, M=128)
    assert again.worst_margin == rep.worst_margin  # deterministic under the seed


# -- Gronwall ---------------------------------------------------------------------------


def test_gronwall_zero_g():
    t = np.linspace(0, 1, 50)
    case = GronwallCase(t, np.full(50, 0.7), np.zeros(50), 1.0, 2.0)
    assert np.allclose(gronwall_bound(case), 0.7)
    assert gronwall_check(case).passed
    with pytest.raises(ValueError):
        GronwallCase(t, np.linspace(0.7, 1.0, 50), np.zeros(50), 1.0, 2.0)  # A grows with G = 0


def test_gronwall_exponential_equality_case():
    beta, A0 = 1.5, 0.4
    t = np.linspace(0, 1, 20001)
    case = GronwallCase(t, A0 * np.exp(beta * t), np.ones_like(t), 0.0, beta)
    bound = gronwall_bound(case)
    assert np.allclose(bound, A0 + A0 * beta * np.exp(beta) * t, rtol=1e-12)
    assert gronwall_check(case).passed


def test_gronwall_validation():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        GronwallCase(t, np.ones(5), -np.ones(5), 0.0, 0.0)
    with pytest.raises(ValueError):
        GronwallCase(t, np.ones(5), np.ones(5), -1.0, 0.0)
    with pytest.raises(ValueError):
        GronwallCase(t[::-1], np.ones(5), np.ones(5), 0.0, 0.0)


def test_gronwall_suite_small():
    rep = gronwall_suite(trials=50, seed=1)
    assert rep.passed and rep.trials == 50


# -- norm equivalence ----------------------------------------------------------------------


def test_equivalence_unit_circle():
    lo, hi, rep = equivalence_constants(BallSample(circle(64), 0.0, [], [], SPEC), SPEC, refine=False)
    assert lo == pytest.approx(1.0, abs=1e-6) and hi == pytest.approx(1.0, abs=1e-6)
    assert rep.passed


def test_equivalence_scaled_circle():
    # radius 2: G = 2 int |h|^2 + (1/8) int |h''|^2 dtheta; on Fourier mode k the Rayleigh
    # quotient is (2 + k^4/8) / (1 + k^4), minimal at the top retained mode k = M/2 - 1
    lo, hi, _ = equivalence_constants(BallSample(circle(64, radius=2.0), 0.0, [], [], SPEC), SPEC, refine=False)
    k = 31.0
    assert lo == pytest.approx(np.sqrt((1 + k**4) / (2 + k**4 / 8)), rel=1e-9)
    assert lo == pytest.approx(2 * np.sqrt(2), rel=1e-5)
    assert hi == pytest.approx(np.sqrt(2), rel=1e-9)


def test_ball_sample_certificates():
    ball = BallSample.random(circle(32), 0.5, 3, SPEC, seed=0)
    assert len(ball.members) == 4
    assert all(p.curves[0] is ball.center or np.array_equal(p.curves[0].samples, ball.center.samples) for p in ball.paths)
    fine = ball.refine()
    assert fine.center.M == 64
    with pytest.raises(ValueError):
        BallSample(ball.center, 1e-3, ball.curves, ball.paths, SPEC)  # certificates too long for the radius
    _, _, rep = equivalence_constants(ball, SPEC)
    assert rep.passed and rep.details["refinement_ratio"] <= 2


# -- lower bound and speed drift -----------------------------------------------------------------


def test_lower_bound_constant_and_translation():
    c = ellipse(32)
    const = CurvePath.from_samples([c.samples] * 3)
    rep = dist_lower_bound_check(_result(const), SPEC)
    assert rep.passed and rep.details["lhs"] == 0.0
    w = np.array([0.3, 0.4])
    trans = CurvePath.from_samples([c.samples + t * w for t in (0, 0.5, 1)])
    rep = dist_lower_bound_check(_result(trans), SPEC)
    assert rep.details["lhs"] == pytest.approx(np.sqrt(2 * np.pi) * 0.5, rel=1e-12)
    assert rep.details["length"] == pytest.approx(np.sqrt(c.length) * 0.5, rel=1e-12)
    assert rep.passed


def test_lower_bound_on_converged_bvp():
    res = solve_bvp(circle(32), ellipse(32), SPEC, N=8)
    assert res.converged
    assert dist_lower_bound_check(res, SPEC).passed


def test_speed_drift():
    c = ellipse(32)
    const = CurvePath.from_samples([c.samples] * 3)
    rep = speed_drift_check(const, SPEC)
    assert rep.passed and rep.details["final_bound"] == 0.0
    trans = CurvePath.from_samples([c.samples + t * np.array([1.0, 2.0]) for t in (0, 0.5, 1)])
    rep = speed_drift_check(trans, SPEC)
    assert rep.passed and rep.details["final_bound"] > 0
    res = solve_bvp(circle(32), ellipse(32), SPEC, N=8)
    assert speed_drift_check(res.path, SPEC).passed
    with pytest.raises(ValueError):
        speed_drift_check(res.path, MetricSpec(variant="length_weighted"))


# -- long runs ------------------------------------------------------------------------


def test_longrun_zero_and_translation():
    c = ellipse(32)
    rep = ivp_longrun_check(c, np.zeros_like(c.samples), SPEC, T_long=5.0, steps=50)
    assert rep.passed and rep.details["energy_drift"] == 0.0
    rep = ivp_longrun_check(circle(32), np.tile([0.2, 0.1], (32, 1)), SPEC, T_long=5.0, steps=100)
    assert rep.passed


def test_run_suite_names():
    with pytest.raises(ValueError):
        run_suite("nope")
    reps = run_suite("gronwall", seed=2)
    assert [r.name for r in reps] == ["gronwall"] and reps[0].seed == 2
    d = reps[0].to_dict()
    assert set(d) >= {"name", "trials", "worst_margin", "pass", "seed"}
