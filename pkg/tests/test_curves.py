import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from sobocurve.curves import (
    Diffeo,
    DiscreteCurve,
    ImmersionError,
    act,
    arc_derivative,
    binomial_sum,
    circle,
    constant_speed_reparam,
    ellipse,
    length,
    norm,
    speed,
    theta_derivative,
    theta_grid,
    unit_tangent,
    winding_number,
)
from sobocurve.verify import band_limited_field, random_curve


def test_construction_rejects_bad_curves():
    th = theta_grid(32)
    good = np.stack([np.cos(th), np.sin(th)], axis=1)
    with pytest.raises(ValueError):
        DiscreteCurve(good[:15])
    with pytest.raises(ValueError):
        DiscreteCurve(np.vstack([good, good[:1]]))  # odd M
    with pytest.raises(ValueError):
        DiscreteCurve(th[:, None])  # d = 1
    bad = good.copy()
    bad[3, 0] = np.nan
    with pytest.raises(ValueError):
        DiscreteCurve(bad)
    with pytest.raises(ImmersionError):
        DiscreteCurve(np.zeros((32, 2)))
    with pytest.raises(ValueError):
        DiscreteCurve(good, scheme="upwind")


def test_theta_derivative_spectral_exact():
    th = theta_grid(64)
    assert np.max(np.abs(theta_derivative(np.sin(th)) - np.cos(th))) <= 1e-12
    assert np.max(np.abs(theta_derivative(np.full(64, 3.0)))) <= 1e-14


def test_theta_derivative_central2_convergence():
    errs = []
    for M in (64, 128):
        th = theta_grid(M)
        errs.append(np.max(np.abs(theta_derivative(np.sin(3 * th), "central-2") - 3 * np.cos(3 * th))))
    # truncation error of the centred difference: 3^3 h^2 / 6, ratio exactly (sin x / x)-type
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_theta_derivative_central4_order():
    errs = []
    for M in (64, 128):
        th = theta_grid(M)
        errs.append(np.max(np.abs(theta_derivative(np.sin(3 * th), "central-4") - 3 * np.cos(3 * th))))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)


def test_speed_circle_and_ellipse():
    assert np.allclose(speed(circle(64)), 1.0, atol=1e-13)
    assert np.allclose(speed(circle(64, radius=2.5)), 2.5, atol=1e-12)
    th = theta_grid(256)
    assert np.max(np.abs(speed(ellipse(256)) - np.sqrt(4 * np.sin(th) ** 2 + np.cos(th) ** 2))) <= 1e-10


def test_unit_tangent():
    th = theta_grid(64)
    v = unit_tangent(circle(64))
    assert np.allclose(v, np.stack([-np.sin(th), np.cos(th)], 1), atol=1e-12)
    v2 = unit_tangent(circle(64, turns=2))
    assert np.allclose(v2, np.stack([-np.sin(2 * th), np.cos(2 * th)], 1), atol=1e-12)
    c = random_curve(np.random.default_rng(1), 64)
    assert np.allclose(np.linalg.norm(unit_tangent(c), axis=1), 1.0, atol=1e-12)


def test_arc_derivative_examples():
    c = circle(64)
    f = band_limited_field(np.random.default_rng(0), 64)
    assert np.array_equal(arc_derivative(c, f, 0), f)
    assert np.max(np.abs(arc_derivative(c, c.samples, 2) + c.samples)) <= 1e-12
    r = circle(64, radius=3.0)
    assert np.allclose(np.linalg.norm(arc_derivative(r, r.samples, 1), axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        arc_derivative(c, f, 5, max_order=4)


def test_arc_derivative_linearity():
    # relative L2 error; each spectral derivative amplifies roundoff by up to M/2,
    # so orders above 2 get that factor on top of the 1e-12 budget
    M = 64
    for seed in range(20):
        rng = np.random.default_rng(seed)
        c = random_curve(rng, M)
        f, g = band_limited_field(rng, M), band_limited_field(rng, M)
        for k in range(5):
            lhs = arc_derivative(c, 2.0 * f - 0.5 * g, k)
            rhs = 2.0 * arc_derivative(c, f, k) - 0.5 * arc_derivative(c, g, k)
            err = np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs)
            assert err <= 1e-12 * (M / 2) ** max(k - 2, 0)


def test_length_oracles():
    assert length(circle(64)) == pytest.approx(2 * np.pi, abs=1e-10)
    assert length(circle(64, radius=3.0)) == pytest.approx(6 * np.pi, abs=1e-10)
    # (2cos, sin): perimeter 4 a E(e^2) with a = 2, e^2 = 3/4
    exact = 8.0 * ellipe(0.75)
    assert exact == pytest.approx(9.68844822, abs=1e-8)
    assert length(ellipse(256)) == pytest.approx(exact, abs=1e-6)


def test_length_scaling():
    c = random_curve(np.random.default_rng(3), 64)
    for lam in (0.3, 1.7, 10.0):
        assert length(c.with_samples(lam * c.samples)) == pytest.approx(lam * length(c), rel=1e-12)


def test_norm_examples():
    c = circle(64)
    w = np.array([0.3, -1.2])
    assert norm(c, np.tile(w, (64, 1)), "L2ds") == pytest.approx(np.sqrt(2 * np.pi) * np.linalg.norm(w), rel=1e-12)
    assert norm(c, np.sin(c.theta), "Hndtheta", 2) ** 2 == pytest.approx(2 * np.pi, rel=1e-12)
    assert norm(c, np.sin(c.theta), "Hndθ", 2) ** 2 == pytest.approx(2 * np.pi, rel=1e-12)
    with pytest.raises(ValueError):
        norm(c, w, "L3")
    with pytest.raises(ValueError):
        norm(c, np.sin(c.theta), "Hnds", 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sqrt_speed_identity(seed):
    rng = np.random.default_rng(seed)
    c = random_curve(rng, 64)
    u = band_limited_field(rng, 64)
    lhs = norm(c, u * np.sqrt(speed(c))[:, None], "L2dtheta")
    assert lhs == pytest.approx(norm(c, u, "L2ds"), rel=1e-12)


def test_trapezoid_exact_on_trig_polynomials():
    c = circle(32)
    th = c.theta
    f = 1.0 + np.cos(5 * th) + np.sin(7 * th) ** 2  # degree 14 < 32
    assert norm(c, np.sqrt(f), "L2dtheta") ** 2 == pytest.approx(2 * np.pi * 1.5, rel=1e-14)


def test_shift_equivariance_exact():
    rng = np.random.default_rng(4)
    c = random_curve(rng, 64)
    h = band_limited_field(rng, 64)
    k = 5
    phi = Diffeo.rotation(64, 2 * np.pi * k / 64)
    cs = act(c, phi)
    assert np.array_equal(cs.samples, np.roll(c.samples, -k, axis=0))
    assert np.allclose(speed(cs), np.roll(speed(c), -k), rtol=0, atol=1e-14)
    for j in range(4):
        assert np.allclose(arc_derivative(cs, np.roll(h, -k, 0), j), np.roll(arc_derivative(c, h, j), -k, 0), atol=1e-12)


def test_constant_speed_reparam():
    c = circle(64)
    cs, phi = constant_speed_reparam(c)
    assert np.max(np.abs(cs.samples - c.samples)) <= 1e-10
    e, _ = constant_speed_reparam(ellipse(128))  # the arc-length integrand is not band-limited; M=64 gives 6e-5
    s = speed(e)
    assert s.max() / s.min() <= 1 + 1e-6
    rng = np.random.default_rng(5)
    for _ in range(100):
        c = random_curve(rng, 64)
        cs, _ = constant_speed_reparam(c)
        assert length(cs) == pytest.approx(length(c), rel=1e-8)
        assert speed(cs).max() / speed(cs).min() <= 1 + 1e-6


def test_winding_numbers():
    th = theta_grid(64)
    assert winding_number(circle(64)) == 1
    assert winding_number(circle(64, turns=2)) == 2
    assert winding_number(DiscreteCurve(np.stack([np.sin(2 * th), np.sin(th)], 1))) == 0
    assert winding_number(DiscreteCurve(np.stack([np.cos(th), -np.sin(th)], 1))) == -1
    with pytest.raises(ValueError):
        winding_number(DiscreteCurve(np.stack([np.cos(th), np.sin(th), 0 * th], 1)))


def test_binomial_sum_identity():
    from math import comb

    assert binomial_sum(1, 4) == 6 == comb(4, 2)
    for k in range(1, 31):
        for i in range(k):
            assert binomial_sum(i, k) == comb(k, i + 1)


def test_diffeo_invariants_and_algebra():
    M = 64
    th = theta_grid(M)
    with pytest.raises(ValueError):
        Diffeo(np.concatenate([th, [2 * np.pi + 0.1]]))
    with pytest.raises(ValueError):
        Diffeo.from_values(th[::-1])
    phi = Diffeo.from_values(th + 0.2 * np.sin(th) + 0.5)
    psi = Diffeo.from_values(th + 0.1 * np.cos(2 * th) + 1.0)
    assert 0 <= phi.shift < 2 * np.pi
    assert np.max(np.abs(phi.compose(phi.inverse()).values() - th)) <= 1e-10
    c = ellipse(M)
    lhs = act(act(c, phi), psi)
    rhs = act(c, phi.compose(psi))
    assert np.max(np.abs(lhs.samples - rhs.samples)) <= 1e-6
    assert np.max(np.abs(act(c, Diffeo.identity(M)).samples - c.samples)) <= 1e-10
