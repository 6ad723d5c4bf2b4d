"""Path energy, geodesic boundary- and initial-value problems, and the log map."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from .curves import (
    TWO_PI,
    DiscreteCurve,
    ImmersionError,
    _arc_chain,
    _diff,
    _dot,
    act,
    constant_speed_reparam,
    norm,
    winding_number,
)
from .metrics import MetricSpec, _apply, _apply_geo, _evaluate, _geometry

log = logging.getLogger(__name__)


class ComponentMismatchError(ValueError):
    """Endpoints lie in different connected components (different winding numbers)."""


class VelocityRecoveryError(RuntimeError):
    """The elliptic solve ``K_c u = m`` did not converge."""


@dataclass(frozen=True, eq=False)
class CurvePath:
    """A time-discretized path of curves ``c(t_i)``, ``0 = t_0 < ... < t_N = 1``."""

    times: np.ndarray
    curves: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        curves = tuple(self.curves)
        if t.ndim != 1 or t.size < 2 or t.size != len(curves):
            raise ValueError("a path needs N + 1 >= 2 times matching its curves")
        if np.any(np.diff(t) <= 0):
            raise ValueError("path times must be strictly increasing")
        c0 = curves[0]
        for c in curves:
            if not isinstance(c, DiscreteCurve):
                raise TypeError("path entries must be DiscreteCurve instances")
            if c.M != c0.M or c.dim != c0.dim or c.scheme != c0.scheme:
                raise ValueError("all curves of a path must share M, dim and scheme")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "curves", curves)

    @classmethod
    def from_samples(cls, samples, times=None, scheme: str = "spectral") -> CurvePath:
        samples = np.asarray(samples, dtype=float)
        if times is None:
            times = np.linspace(0.0, 1.0, samples.shape[0])
        return cls(times, tuple(DiscreteCurve(x, scheme=scheme) for x in samples))

    @property
    def N(self) -> int:
        return len(self.curves) - 1

    @property
    def scheme(self) -> str:
        return self.curves[0].scheme

    def samples(self) -> np.ndarray:
        return np.stack([c.samples for c in self.curves])

    def reversed(self) -> CurvePath:
        t = self.times
        return CurvePath((t[-1] + t[0] - t)[::-1], self.curves[::-1])


@dataclass(eq=False)
class GeodesicResult:
    path: CurvePath
    energy: float
    distance_estimate: float
    iterations: int
    gradient_norm: float
    converged: bool
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "distance_estimate": self.distance_estimate,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
            "trace": [{"energy": e, "gradient_norm": g} for e, g in self.trace],
        }


# -- energy of a stack of knots --------------------------------------------------


def _to_batch(X: np.ndarray) -> np.ndarray:
    """(K, M, d) -> (M, d, K)."""
    return np.moveaxis(X, 0, -1)


def _min_speed(X: np.ndarray, scheme: str) -> np.ndarray:
    cp = _diff(_to_batch(X), scheme)
    return np.sqrt(_dot(cp, cp)).min(axis=(0, 1))


def _energy(spec, X, dt, scheme, grads=True):
    """Midpoint-rule energy of knots ``X`` (N+1, M, d) and its gradient."""
    mid = 0.5 * (X[1:] + X[:-1])
    U = (X[1:] - X[:-1]) / dt[:, None, None]
    G, gc, gu = _evaluate(spec, _to_batch(mid), _to_batch(U), scheme, grads=grads)
    E = float(np.sum(dt * G))
    if not grads:
        return E, None
    gc = np.moveaxis(gc, -1, 0)
    gu = np.moveaxis(gu, -1, 0)
    per = 0.5 * dt[:, None, None] * gc
    grad = np.zeros_like(X)
    grad[1:] += gu + per
    grad[:-1] += -gu + per
    return E, grad


def _interval_norms(spec, X, dt, scheme):
    mid = 0.5 * (X[1:] + X[:-1])
    U = (X[1:] - X[:-1]) / dt[:, None, None]
    G, _, _ = _evaluate(spec, _to_batch(mid), _to_batch(U), scheme, grads=False)
    return np.asarray(G)


def _check_path(path: CurvePath, spec: MetricSpec):
    X = path.samples()
    mid = 0.5 * (X[1:] + X[:-1])
    eps = path.curves[0].eps_imm
    s = _min_speed(mid, path.scheme)
    if np.any(s < eps):
        i = int(np.argmin(s))
        raise ImmersionError(f"midpoint curve of interval {i} is not an immersion (|c'| = {s[i]:.3g})")
    return X, np.diff(path.times)


def path_energy(path: CurvePath, spec: MetricSpec) -> float:
    """``sum_i dt_i G_{cbar_i}(dc_i/dt_i, dc_i/dt_i)`` with midpoint curves ``cbar_i``."""
    X, dt = _check_path(path, spec)
    return _energy(spec, X, dt, path.scheme, grads=False)[0]


def path_length(path: CurvePath, spec: MetricSpec) -> float:
    """``sum_i dt_i sqrt(G_{cbar_i}(dc_i/dt_i, dc_i/dt_i))``."""
    X, dt = _check_path(path, spec)
    return float(np.sum(dt * np.sqrt(np.maximum(_interval_norms(spec, X, dt, path.scheme), 0.0))))


def path_speeds(path: CurvePath, spec: MetricSpec) -> np.ndarray:
    """Metric speed ``sqrt(G(cdot, cdot))`` on each interval."""
    X, dt = _check_path(path, spec)
    return np.sqrt(np.maximum(_interval_norms(spec, X, dt, path.scheme), 0.0))


def constant_speed_in_time(path: CurvePath, spec: MetricSpec) -> CurvePath:
    """Retime the knots so the discrete metric speed is constant (same knots)."""
    X, dt = _check_path(path, spec)
    seg = dt * np.sqrt(np.maximum(_interval_norms(spec, X, dt, path.scheme), 0.0))
    total = seg.sum()
    if total == 0:
        return path
    t = np.concatenate([[0.0], np.cumsum(seg)]) / total
    return CurvePath(t, path.curves)


# -- preconditioner ---------------------------------------------------------------


def _fourier_symbol(spec: MetricSpec, ref: np.ndarray, scheme: str, geo: dict | None = None) -> np.ndarray:
    """Fourier multiplier approximating ``K_c`` for a constant-speed curve."""
    M = ref.shape[0]
    geo = geo or _geometry(spec, ref, scheme)
    sbar = float(np.mean(geo["S"]))
    k = np.arange(M // 2 + 1, dtype=float)
    sym = np.zeros_like(k)
    for j, w in geo["w"].items():
        sym += float(np.mean(w)) * (k / sbar) ** (2 * j)
    return sym


class _PathPreconditioner:
    """Approximate inverse Hessian: (time Laplacian) x (Fourier symbol), inverted."""

    def __init__(self, spec, X, dt, scheme):
        M = X.shape[1]
        mid = X[len(X) // 2]
        self.sym = _fourier_symbol(spec, mid, scheme) * 2.0 * (TWO_PI / M)
        w = 1.0 / dt
        n = len(dt) - 1
        T = np.zeros((n, n))
        for i in range(n):
            T[i, i] = w[i] + w[i + 1]
            if i + 1 < n:
                T[i, i + 1] = T[i + 1, i] = -w[i + 1]
        self.Tinv = np.linalg.inv(T) if n else np.zeros((0, 0))
        self.M = M

    def __call__(self, g: np.ndarray) -> np.ndarray:
        F = np.fft.rfft(g, axis=1)
        F = np.einsum("ij,jkl->ikl", self.Tinv, F) / self.sym[None, :, None]
        return np.fft.irfft(F, n=self.M, axis=1)


# -- boundary value problem -----------------------------------------------------


def _check_endpoints(c0: DiscreteCurve, c1: DiscreteCurve):
    if c0.M != c1.M or c0.dim != c1.dim or c0.scheme != c1.scheme:
        raise ValueError("endpoint curves must share M, dim and scheme")
    if c0.dim == 2:
        w0, w1 = winding_number(c0), winding_number(c1)
        if w0 != w1:
            raise ComponentMismatchError(
                f"curves have winding numbers {w0} and {w1}; no path of immersions joins them"
            )


def _linear_init(c0, c1, N):
    t = np.linspace(0.0, 1.0, N + 1)[:, None, None]
    return (1.0 - t) * c0.samples[None] + t * c1.samples[None]


def _reparam_init(c0, c1, N):
    """Interpolate constant-speed shapes and their parametrizations separately."""
    k0, phi0 = constant_speed_reparam(c0)
    k1, phi1 = constant_speed_reparam(c1)
    inv0, inv1 = phi0.inverse(c0.scheme), phi1.inverse(c1.scheme)
    X = np.empty((N + 1, c0.M, c0.dim))
    for i, t in enumerate(np.linspace(0.0, 1.0, N + 1)):
        shape = k0.with_samples((1 - t) * k0.samples + t * k1.samples)
        vals = (1 - t) * inv0.values() + t * inv1.values()
        from .curves import Diffeo

        X[i] = act(shape, Diffeo.from_values(vals, eps_mono=1e-12)).samples
    X[0], X[-1] = c0.samples, c1.samples
    return X


def initial_path(c0: DiscreteCurve, c1: DiscreteCurve, N: int) -> np.ndarray:
    X = _linear_init(c0, c1, N)
    eps = c0.eps_imm
    s_knots = _min_speed(X, c0.scheme)
    s_mid = _min_speed(0.5 * (X[1:] + X[:-1]), c0.scheme)
    if s_knots.min() >= eps and s_mid.min() >= eps:
        return X
    log.info("linear interpolation leaves the immersions; trying constant-speed interpolation")
    try:
        X = _reparam_init(c0, c1, N)
    except (ImmersionError, ValueError) as exc:
        raise ImmersionError(f"no admissible initial path: {exc}") from exc
    s_knots = _min_speed(X, c0.scheme)
    s_mid = _min_speed(0.5 * (X[1:] + X[:-1]), c0.scheme)
    if s_knots.min() < eps or s_mid.min() < eps:
        i = int(np.argmin(np.minimum(s_knots[1:], s_mid[1:])))
        raise ImmersionError(
            f"initial path loses immersion near knot {i + 1}; increase N or M"
        )
    return X


def _lbfgs_path(spec, X, dt, scheme, eps, max_iter, grad_tol, memory=20, trace=None):
    """Minimize the path energy over the interior knots with fixed endpoints."""
    X = X.copy()
    P = _PathPreconditioner(spec, X, dt, scheme)

    def fg(Y):
        if np.min(_min_speed(Y[1:-1], scheme)) < eps or np.min(_min_speed(0.5 * (Y[1:] + Y[:-1]), scheme)) < eps:
            return np.inf, None
        E, g = _energy(spec, Y, dt, scheme)
        return E, g[1:-1]

    E, g = fg(X)
    if not np.isfinite(E):
        raise ImmersionError("initial path is not admissible")
    Pg = P(g)
    gnorm = float(np.sqrt(max(np.sum(g * Pg), 0.0)))
    if trace is not None:
        trace.append((E, gnorm))
    S_hist, Y_hist = [], []
    it = 0
    while it < max_iter and gnorm > grad_tol:
        # two-loop recursion with the preconditioner as initial inverse Hessian
        q = g.copy()
        alphas = []
        for s, y in reversed(list(zip(S_hist, Y_hist))):
            rho = 1.0 / np.sum(y * s)
            a = rho * np.sum(s * q)
            alphas.append((a, rho, s, y))
            q -= a * y
        r = P(q)
        if S_hist:
            s, y = S_hist[-1], Y_hist[-1]
            r *= np.sum(s * y) / np.sum(y * P(y))
        for a, rho, s, y in reversed(alphas):
            b = rho * np.sum(y * r)
            r += (a - b) * s
        d = -r
        slope = float(np.sum(g * d))
        if slope >= 0:
            S_hist.clear()
            Y_hist.clear()
            d = -Pg
            slope = float(np.sum(g * d))
        step = 1.0
        accepted = False
        for _ in range(40):
            Xn = X.copy()
            Xn[1:-1] += step * d
            En, gn = fg(Xn)
            if np.isfinite(En) and (En <= E + 1e-4 * step * slope):
                accepted = True
                break
            if np.isfinite(En) and En <= E:
                # decrease below the Armijo resolution: accept if the gradient improved
                Pgn = P(gn)
                if np.sum(gn * Pgn) < gnorm**2:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if S_hist:
                S_hist.clear()
                Y_hist.clear()
                continue
            break
        s = Xn[1:-1] - X[1:-1]
        y = gn - g
        if np.sum(s * y) > 1e-16 * np.sqrt(np.sum(s * s) * np.sum(y * y)):
            S_hist.append(s)
            Y_hist.append(y)
            if len(S_hist) > memory:
                S_hist.pop(0)
                Y_hist.pop(0)
        X, E, g = Xn, En, gn
        Pg = P(g)
        gnorm = float(np.sqrt(max(np.sum(g * Pg), 0.0)))
        it += 1
        if trace is not None:
            trace.append((E, gnorm))
    return X, E, gnorm, it


def solve_bvp(
    c0: DiscreteCurve,
    c1: DiscreteCurve,
    spec: MetricSpec,
    N: int = 16,
    max_iter: int = 2000,
    grad_tol: float = 1e-6,
    init=None,
) -> GeodesicResult:
    """Minimize the discrete path energy between fixed endpoints.

    ``gradient_norm`` is the energy gradient measured in the dual of the
    preconditioning metric (a Fourier-in-theta, tridiagonal-in-time
    approximation of the energy Hessian).
    """
    _check_endpoints(c0, c1)
    if N < 1:
        raise ValueError("need at least one time interval")
    dt = np.full(N, 1.0 / N)
    times = np.linspace(0.0, 1.0, N + 1)
    if np.array_equal(c0.samples, c1.samples):
        path = CurvePath(times, tuple(c0 for _ in range(N + 1)))
        return GeodesicResult(path, 0.0, 0.0, 0, 0.0, True, [(0.0, 0.0)])
    if init is not None:
        X = np.array(init, dtype=float)
        if X.shape != (N + 1, c0.M, c0.dim):
            raise ValueError("initial path has the wrong shape")
        X[0], X[-1] = c0.samples, c1.samples
    else:
        X = initial_path(c0, c1, N)
    trace = []
    if N == 1:
        E = _energy(spec, X, dt, c0.scheme, grads=False)[0]
        gnorm, it = 0.0, 0
        trace.append((E, 0.0))
    else:
        X, E, gnorm, it = _lbfgs_path(spec, X, dt, c0.scheme, c0.eps_imm, max_iter, grad_tol, trace=trace)
    curves = [c0] + [c0.with_samples(x) for x in X[1:-1]] + [c1]
    path = CurvePath(times, tuple(curves))
    converged = gnorm <= grad_tol
    if not converged:
        log.warning("geodesic BVP stopped after %d iterations with gradient norm %.3g", it, gnorm)
    return GeodesicResult(path, E, float(np.sqrt(E)), it, gnorm, converged, trace)


def distance(c0: DiscreteCurve, c1: DiscreteCurve, spec: MetricSpec, **opts) -> float:
    """Geodesic distance estimate ``sqrt(E)`` of the discrete minimizer."""
    return solve_bvp(c0, c1, spec, **opts).distance_estimate


# -- initial value problem --------------------------------------------------------


def geodesic_rhs(spec: MetricSpec, c: np.ndarray, u: np.ndarray, scheme: str) -> np.ndarray:
    """Time derivative of the momentum from the explicit geodesic equation.

    Constant coefficients only:
    ``-a_0/2 |c'| D_s(|u|^2 v) + sum_k sum_{j=1}^{2k-1} (-1)^(k+j) a_k/2 |c'| D_s(<D_s^{2k-j}u, D_s^j u> v)``.
    """
    if spec.variant != "constant":
        raise ValueError("the explicit geodesic equation is available for constant coefficients only")
    cp = _diff(c, scheme)
    S = np.sqrt(_dot(cp, cp))
    v = cp / S
    n = spec.order
    chain = _arc_chain(u, S, scheme, 2 * n - 1)
    scal = -0.5 * spec.coeffs[0] * _dot(u, u)
    for k in range(1, n + 1):
        a = spec.coeffs[k]
        if a == 0:
            continue
        for j in range(1, 2 * k):
            scal = scal + (-1) ** (k + j) * 0.5 * a * _dot(chain[2 * k - j], chain[j])
    return _diff(scal * v, scheme)


def variational_rhs(spec: MetricSpec, c: np.ndarray, u: np.ndarray, scheme: str) -> np.ndarray:
    """Momentum derivative from the gradient of the discrete metric, ``grad_c G(u,u) / (2 dtheta)``."""
    _, gc, _ = _evaluate(spec, c, u, scheme)
    return gc / (2.0 * TWO_PI / c.shape[0])


@lru_cache(maxsize=16)
def _diff_matrix(M: int, scheme: str) -> np.ndarray:
    D = _diff(np.eye(M), scheme)
    D.setflags(write=False)
    return D


def momentum_matrix(spec: MetricSpec, c: np.ndarray, scheme: str, geo: dict | None = None) -> np.ndarray:
    """Dense ``M x M`` block of ``K_c``; the operator acts on each component alike."""
    geo = geo or _geometry(spec, c, scheme)
    L = _diff_matrix(c.shape[0], scheme) / geo["S"][:, 0][:, None]
    K = np.zeros((c.shape[0], c.shape[0]))
    Lj = np.eye(c.shape[0])
    for j in range(max(geo["w"]) + 1):
        if j in geo["w"]:
            K += Lj.T @ (geo["w"][j][:, 0][:, None] * Lj)
        Lj = L @ Lj
    return 0.5 * (K + K.T)


def velocity_from_momentum(spec, c: np.ndarray, m: np.ndarray, scheme: str, x0=None, rtol: float = 1e-10):
    """Solve ``K_c u = m``.

    A Cholesky solve of the dense per-component block is tried first; if its
    relative residual exceeds ``rtol`` the solve falls back to conjugate
    gradients preconditioned by the Fourier symbol.
    """
    M, d = c.shape
    if np.all(m == 0):
        return np.zeros_like(m)
    geo = _geometry(spec, c, scheme)
    mnorm = np.linalg.norm(m)
    try:
        fac = cho_factor(momentum_matrix(spec, c, scheme, geo))
        u = cho_solve(fac, m)
        for _ in range(4):  # iterative refinement against the matrix-free operator
            r = m - _apply_geo(geo, u, scheme)
            if np.linalg.norm(r) <= rtol * mnorm:
                return u
            u = u + cho_solve(fac, r)
        x0 = u
    except np.linalg.LinAlgError:
        pass
    sym = _fourier_symbol(spec, c, scheme, geo)
    A = LinearOperator((M * d, M * d), matvec=lambda x: _apply_geo(geo, x.reshape(M, d), scheme).ravel(), dtype=float)
    P = LinearOperator(
        (M * d, M * d),
        matvec=lambda x: np.fft.irfft(np.fft.rfft(x.reshape(M, d), axis=0) / sym[:, None], n=M, axis=0).ravel(),
        dtype=float,
    )
    u, info = cg(A, m.ravel(), x0=None if x0 is None else x0.ravel(), rtol=rtol, atol=0.0, M=P, maxiter=20 * M * d)
    if info != 0:
        raise VelocityRecoveryError(f"conjugate gradient did not converge (info={info})")
    return u.reshape(M, d)


@dataclass(eq=False)
class GeodesicFlow:
    """Trajectory of the geodesic initial-value problem."""

    times: np.ndarray
    curves: np.ndarray  # (K, M, d)
    momenta: np.ndarray  # (K, M, d)
    energies: np.ndarray  # G_{c(t)}(c_t, c_t) at the saved times
    min_speed: np.ndarray
    scheme: str = "spectral"

    def path(self) -> CurvePath:
        return CurvePath.from_samples(self.curves, self.times / self.times[-1], scheme=self.scheme)

    @property
    def endpoint(self) -> np.ndarray:
        return self.curves[-1]

    def energy_drift(self) -> float:
        e0 = self.energies[0]
        if e0 == 0:
            return float(np.max(np.abs(self.energies)))
        return float(np.max(np.abs(self.energies - e0)) / e0)


def integrate_geodesic(
    c0: DiscreteCurve,
    u0,
    spec: MetricSpec,
    T: float = 1.0,
    steps: int = 1000,
    save_every: int | None = None,
    rhs: str = "auto",
) -> GeodesicFlow:
    """Integrate the geodesic equation in momentum form with classical RK4.

    ``rhs="explicit"`` uses the explicit geodesic equation (constant coefficients);
    ``rhs="variational"`` differentiates the discrete metric and applies to all
    variants. ``"auto"`` picks the former when available.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != c0.samples.shape:
        raise ValueError("initial velocity must match the curve's shape")
    if rhs == "auto":
        rhs = "explicit" if spec.variant == "constant" else "variational"
    if rhs not in ("explicit", "variational"):
        raise ValueError(f"unknown right-hand side {rhs!r}")
    F = geodesic_rhs if rhs == "explicit" else variational_rhs
    scheme, eps = c0.scheme, c0.eps_imm
    dtheta = TWO_PI / c0.M
    dt = T / steps
    save_every = save_every or steps
    c = c0.samples.copy()
    m = _apply(spec, c, u0, scheme)
    u_prev = u0.copy()

    def speed_ok(x):
        cp = _diff(x, scheme)
        return float(np.sqrt(_dot(cp, cp)).min())

    def deriv(x, p, guess):
        s = speed_ok(x)
        if s < eps:
            raise ImmersionError(f"geodesic left the immersions (|c'| = {s:.3g})")
        u = velocity_from_momentum(spec, x, p, scheme, x0=guess)
        return u, F(spec, x, u, scheme)

    times, curves, moms, energies, mins = [0.0], [c.copy()], [m.copy()], [dtheta * np.sum(m * u0)], [speed_ok(c)]
    for i in range(1, steps + 1):
        try:
            k1c, k1m = deriv(c, m, u_prev)
            u_prev = k1c
            k2c, k2m = deriv(c + 0.5 * dt * k1c, m + 0.5 * dt * k1m, k1c)
            k3c, k3m = deriv(c + 0.5 * dt * k2c, m + 0.5 * dt * k2m, k2c)
            k4c, k4m = deriv(c + dt * k3c, m + dt * k3m, k3c)
        except ImmersionError as exc:
            exc.time = (i - 1) * dt
            raise
        c = c + dt / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c)
        m = m + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        if i % save_every == 0 or i == steps:
            s = speed_ok(c)
            if s < eps:
                exc = ImmersionError(f"geodesic left the immersions at t = {i * dt:.4g}")
                exc.time = i * dt
                raise exc
            u = velocity_from_momentum(spec, c, m, scheme, x0=u_prev)
            times.append(i * dt)
            curves.append(c.copy())
            moms.append(m.copy())
            energies.append(dtheta * np.sum(m * u))
            mins.append(s)
    return GeodesicFlow(np.array(times), np.array(curves), np.array(moms), np.array(energies), np.array(mins), scheme)


def exp_map(c0: DiscreteCurve, u0, spec: MetricSpec, T: float = 1.0, steps: int = 1000, knots: int | None = None, rhs: str = "auto") -> CurvePath:
    """Geodesic starting at ``c0`` with velocity ``u0``, sampled at ``knots + 1`` times in [0, T].

    Path times are normalized to [0, 1].
    """
    knots = knots or steps
    if steps % knots:
        raise ValueError("steps must be a multiple of the number of output knots")
    flow = integrate_geodesic(c0, u0, spec, T=T, steps=steps, save_every=steps // knots, rhs=rhs)
    return flow.path()


def log_map(
    c0: DiscreteCurve,
    c1: DiscreteCurve,
    spec: MetricSpec,
    N: int = 16,
    steps: int = 200,
    shoot_tol: float = 1e-5,
    max_shoot: int = 30,
    bvp_result: GeodesicResult | None = None,
    **bvp_opts,
) -> np.ndarray:
    """Initial velocity of the geodesic from ``c0`` to ``c1``.

    Starts from the one-sided difference of the discrete minimizer and refines it
    by shooting until ``||exp(u) - c1||_{H^n(dtheta)} <= shoot_tol * distance``.
    """
    res = bvp_result or solve_bvp(c0, c1, spec, N=N, **bvp_opts)
    if res.energy == 0.0:
        return np.zeros_like(c0.samples)
    X = res.path.samples()
    h = res.path.times[1] - res.path.times[0]
    if len(X) >= 3:
        u = (-3.0 * X[0] + 4.0 * X[1] - X[2]) / (2.0 * h)
    else:
        u = (X[1] - X[0]) / h
    dist = res.distance_estimate
    n = spec.order
    best = None
    for _ in range(max_shoot):
        try:
            end = integrate_geodesic(c0, u, spec, T=1.0, steps=steps).endpoint
        except (ImmersionError, VelocityRecoveryError):
            if best is None:
                raise
            u = best[1] + 0.5 * (u - best[1])
            continue
        r = c1.samples - end
        err = norm(c1, r, "Hndtheta", n)
        if best is None or err < best[0]:
            best = (err, u.copy())
        elif err > best[0]:
            u = best[1] + 0.5 * (u - best[1])
            continue
        if err <= shoot_tol * dist:
            break
        u = u + r
    return best[1]
