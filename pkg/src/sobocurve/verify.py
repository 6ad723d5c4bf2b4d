"""Numerical checks of the inequalities and estimates behind Sobolev completeness.

Every check returns a :class:`CheckReport`. Margins are ``RHS - LHS`` (or the
relative slack where stated), so a check passes iff its worst margin is not
below minus the stated tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .curves import (
    TWO_PI,
    DiscreteCurve,
    ImmersionError,
    _arc_chain,
    _diff,
    _dot,
    _integrate,
    circle,
    ellipse,
    norm,
)
from .geodesics import (
    CurvePath,
    GeodesicResult,
    _diff_matrix,
    integrate_geodesic,
    path_length,
    solve_bvp,
)
from .metrics import MetricSpec, metric_inner, metric_matrix

__all__ = [
    "CheckReport",
    "GronwallCase",
    "BallSample",
    "band_limited_field",
    "random_curve",
    "poincare_terms",
    "poincare_suite",
    "gronwall_check",
    "gronwall_suite",
    "rayleigh_extremes",
    "equivalence_constants",
    "dist_lower_bound_check",
    "speed_drift_check",
    "ivp_longrun_check",
    "ivp_longrun_suite",
    "SUITES",
    "run_suite",
]


@dataclass
class CheckReport:
    name: str
    trials: int
    worst_margin: float
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "worst_margin": self.worst_margin,
            "pass": self.passed,
            "seed": self.seed,
            "details": self.details,
        }


def _report(name, margins, tol, seed=None, **details) -> CheckReport:
    margins = np.asarray(margins, dtype=float).ravel()
    worst = float(np.min(margins)) if margins.size else 0.0
    ok = bool(margins.size == 0 or (np.all(np.isfinite(margins)) and worst >= -tol))
    details.setdefault("violations", int(np.sum(margins < -tol)))
    return CheckReport(name, int(margins.size), worst, ok, seed, details)


# -- random inputs --------------------------------------------------------------------


def band_limited_field(rng: np.random.Generator, M: int, d: int = 2, K: int = 8, decay: float = 3.0) -> np.ndarray:
    """Random trigonometric field with modes up to ``K`` and amplitudes ``(1+k)^-decay``."""
    th = TWO_PI * np.arange(M) / M
    out = np.zeros((M, d))
    for k in range(K + 1):
        a, b = rng.normal(size=d), rng.normal(size=d)
        out += (np.outer(np.cos(k * th), a) + np.outer(np.sin(k * th), b)) / (1.0 + k) ** decay
    return out


def random_curve(rng: np.random.Generator, M: int, amp: float = 0.2, K: int = 6, scale=(0.5, 2.0), scheme="spectral") -> DiscreteCurve:
    """Randomly scaled unit circle plus a band-limited perturbation (immersed by rejection)."""
    base = circle(M, scheme=scheme).samples
    for _ in range(100):
        s = rng.uniform(*scale)
        try:
            return DiscreteCurve(s * (base + amp * band_limited_field(rng, M, 2, K)), scheme)
        except ImmersionError:
            continue
    raise RuntimeError("could not draw an immersed random curve")


# -- Poincare inequalities ----------------------------------------------------------------


def poincare_terms(c: DiscreteCurve, h, n: int = 2) -> dict:
    """Left and right sides of the three Poincare-type inequalities for ``h`` along ``c``.

    (i)   sup|h|^2 <= (2/l)|h|^2 + (l/2)|D_s h|^2
    (ii)  sup|D_s h_i|^2 <= (l/4)|D_s^2 h_i|^2, per component ``h_i``
    (iii) |D_s^k h|^2 <= |h|^2 + |D_s^n h|^2 for 0 <= k <= n
    All norms are ``L^2(ds)``.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    S = c._speed[:, None]
    ell = c.length
    chain = _arc_chain(h, S, c.scheme, max(n, 2))

    def l2(f):
        return _integrate(f * f * S)  # per component

    sq = [l2(f) for f in chain]
    terms = {
        "i": (float(np.max(_dot(h, h))), float(2.0 / ell * sq[0].sum() + ell / 2.0 * sq[1].sum())),
        "ii": [(float(np.max(chain[1][:, j] ** 2)), float(ell / 4.0 * sq[2][j])) for j in range(h.shape[1])],
        "iii": [(float(sq[k].sum()), float(sq[0].sum() + sq[n].sum())) for k in range(n + 1)],
    }
    return terms


def _relative(lhs, rhs):
    return (rhs - lhs) / max(abs(rhs), abs(lhs), 1e-300)


def poincare_suite(trials: int = 1000, seed: int = 0, M: int = 256, n: int = 2, tol: float = 1e-8) -> CheckReport:
    """Random band-limited fields along random curves; margins are relative slacks."""
    rng = np.random.default_rng(seed)
    margins = {"i": [], "ii": [], "iii": []}
    for _ in range(trials):
        c = random_curve(rng, M)
        h = rng.uniform(0.1, 10.0) * band_limited_field(rng, M, 2, K=12)
        t = poincare_terms(c, h, n)
        margins["i"].append(_relative(*t["i"]))
        margins["ii"].append(min(_relative(*p) for p in t["ii"]))
        margins["iii"].append(min(_relative(*p) for p in t["iii"]))
    allm = np.array([margins[k] for k in margins])
    rep = _report("poincare", allm.min(axis=0), tol, seed, M=M, n=n)
    rep.details.update({f"worst_{k}": float(np.min(v)) for k, v in margins.items()})
    return rep


# -- Gronwall -----------------------------------------------------------------------------


@dataclass
class GronwallCase:
    """Sampled ``A`` and ``G >= 0`` on ``grid`` satisfying ``A(t) <= A(0) + int (alpha + beta A) G``."""

    grid: np.ndarray
    A: np.ndarray
    G: np.ndarray
    alpha: float
    beta: float
    hypothesis_rtol: float = 1e-6

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.G = np.asarray(self.G, dtype=float)
        if not (self.grid.shape == self.A.shape == self.G.shape) or self.grid.size < 2:
            raise ValueError("grid, A and G must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if np.any(self.G < 0):
            raise ValueError("G must be nonnegative")
        rhs = self.A[0] + self._cumulative((self.alpha + self.beta * self.A) * self.G)
        if np.any(self.A > rhs + self.hypothesis_rtol * np.maximum(1.0, np.abs(rhs))):
            raise ValueError("Gronwall hypothesis does not hold on the grid")

    def _cumulative(self, f):
        return np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(self.grid))])

    @property
    def N(self) -> float:
        return float(self._cumulative(self.G)[-1])

    @classmethod
    def random(cls, rng: np.random.Generator, T: float = 1.0, pieces: int = 8, per_piece: int = 200) -> GronwallCase:
        """Piecewise-linear ``G`` and ``A' = r (alpha + beta A) G`` with ``r`` in [0, 1], solved in closed form."""
        knots = np.sort(np.concatenate([[0.0, T], rng.uniform(0, T, pieces - 1)]))
        gk = rng.uniform(0.0, 2.0, knots.size)
        grid = np.unique(np.concatenate([np.linspace(a, b, per_piece + 1) for a, b in zip(knots[:-1], knots[1:])]))
        G = np.interp(grid, knots, gk)
        alpha, beta, A0, r = rng.uniform(0, 2), rng.uniform(0, 3), rng.uniform(0, 2), rng.uniform(0, 1)
        IG = np.concatenate([[0.0], np.cumsum(0.5 * (G[1:] + G[:-1]) * np.diff(grid))])  # exact for linear G
        if beta > 0:
            A = (A0 + alpha / beta) * np.exp(r * beta * IG) - alpha / beta
        else:
            A = A0 + r * alpha * IG
        return cls(grid, A, G, alpha, beta)


def gronwall_bound(case: GronwallCase) -> np.ndarray:
    """``A(0) + (alpha + (A(0) + alpha N) beta e^{beta N}) int_0^t G``."""
    IG = case._cumulative(case.G)
    N = IG[-1]
    A0 = case.A[0]
    return A0 + (case.alpha + (A0 + case.alpha * N) * case.beta * np.exp(case.beta * N)) * IG


def gronwall_check(case: GronwallCase, tol: float = 1e-8) -> CheckReport:
    margin = gronwall_bound(case) - case.A
    return _report("gronwall", [margin.min()], tol, None, points=int(case.grid.size))


def gronwall_suite(trials: int = 500, seed: int = 0, tol: float = 1e-8) -> CheckReport:
    rng = np.random.default_rng(seed)
    margins = [gronwall_check(GronwallCase.random(rng), tol).worst_margin for _ in range(trials)]
    return _report("gronwall", margins, tol, seed)


# -- uniform norm equivalence on metric balls -------------------------------------------


def _hn_gram(M: int, d: int, n: int, scheme: str) -> np.ndarray:
    D = _diff_matrix(M, scheme)
    Dn = np.linalg.matrix_power(D, n)
    B = (TWO_PI / M) * (np.eye(M) + Dn.T @ Dn)
    return np.kron(0.5 * (B + B.T), np.eye(d))


def rayleigh_extremes(c: DiscreteCurve, spec: MetricSpec) -> tuple[float, float]:
    """Extreme values of ``G_c(h,h) / |h|^2_{H^n(dtheta)}`` over all discrete fields."""
    A = metric_matrix(spec, c)
    B = _hn_gram(c.M, c.dim, spec.order, c.scheme)
    lam = eigh(A, B, eigvals_only=True)
    return float(lam[0]), float(lam[-1])


def _constant(curves, spec) -> tuple[float, float]:
    lo, hi = np.inf, 0.0
    for c in curves:
        a, b = rayleigh_extremes(c, spec)
        lo, hi = min(lo, a), max(hi, b)
    return 1.0 / np.sqrt(lo), np.sqrt(hi)


def _linear_path(c0: DiscreteCurve, c1: DiscreteCurve, N: int) -> CurvePath:
    s = np.linspace(0.0, 1.0, N + 1)[:, None, None]
    return CurvePath.from_samples((1 - s) * c0.samples + s * c1.samples, scheme=c0.scheme)


@dataclass(eq=False)
class BallSample:
    """Curves certified to lie in the metric ball ``B(center, radius)``.

    Each member carries a path from the center; its length is recomputed on
    construction and must not exceed the radius.
    """

    center: DiscreteCurve
    radius: float
    curves: list
    paths: list
    spec: MetricSpec
    probes: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.curves) != len(self.paths):
            raise ValueError("every curve needs a certifying path")
        self.lengths = []
        for c, p in zip(self.curves, self.paths):
            if not (np.array_equal(p.curves[0].samples, self.center.samples) and np.array_equal(p.curves[-1].samples, c.samples)):
                raise ValueError("certifying path does not join the center to the curve")
            L = path_length(p, self.spec)
            if L > self.radius:
                raise ValueError(f"certified length {L:.6g} exceeds the radius {self.radius:.6g}")
            self.lengths.append(L)

    @property
    def members(self) -> list:
        return [self.center] + list(self.curves)

    @classmethod
    def random(cls, center: DiscreteCurve, radius: float, count: int, spec: MetricSpec, seed: int = 0, N: int = 8, K: int = 6) -> BallSample:
        """Members ``center + h`` reached along straight lines of length ``<= 0.9 radius``."""
        rng = np.random.default_rng(seed)
        curves, paths, probes = [], [], []
        for _ in range(count):
            h = band_limited_field(rng, center.M, center.dim, K)
            target = rng.uniform(0.3, 0.9) * radius
            s = target / np.sqrt(metric_inner(spec, center, h, h))
            for _ in range(60):
                try:
                    c = center.with_samples(center.samples + s * h)
                    p = _linear_path(center, c, N)
                    if path_length(p, spec) <= 0.9 * radius:
                        break
                except ImmersionError:
                    pass
                s *= 0.8
            else:
                raise RuntimeError("could not place a sample curve inside the ball")
            curves.append(c)
            paths.append(p)
            probes.append(band_limited_field(rng, center.M, center.dim, K))
        return cls(center, radius, curves, paths, spec, probes)

    def refine(self, factor: int = 2) -> BallSample:
        M2 = self.center.M * factor
        center = self.center.resample(M2)
        curves = [c.resample(M2) for c in self.curves]
        paths = [
            CurvePath(p.times, tuple([center] + [k.resample(M2) for k in p.curves[1:-1]] + [c2]))
            for p, c2 in zip(self.paths, curves)
        ]
        return BallSample(center, self.radius, curves, paths, self.spec)


def equivalence_constants(sample: BallSample, spec: MetricSpec | None = None, refine: bool = True, factor: float = 2.0):
    """Best constant ``C`` with ``C^-1 |h|_{H^n(dtheta)} <= sqrt(G_c(h,h)) <= C |h|_{H^n(dtheta)}`` on the sample.

    Returns ``(C_lower, C_upper, report)`` where ``C_lower = 1/sqrt(min Rayleigh)``
    and ``C_upper = sqrt(max Rayleigh)``; ``C = max`` of the two. The report
    passes iff ``C`` is finite and changes by at most ``factor`` under ``M -> 2M``.
    """
    spec = spec or sample.spec
    lo, hi = _constant(sample.members, spec)
    C = max(lo, hi)
    details = {"C_lower": lo, "C_upper": hi, "C": C, "M": sample.center.M, "members": len(sample.members)}
    margin = 0.0 if np.isfinite(C) else -np.inf
    if refine:
        fine = sample.refine()
        lo2, hi2 = _constant(fine.members, spec)
        C2 = max(lo2, hi2)
        ratio = max(C2 / C, C / C2)
        details.update(C_refined=C2, refinement_ratio=ratio)
        margin = min(margin, factor - ratio)
    return lo, hi, _report("equivalence", [margin], 0.0, None, **details)


def dist_lower_bound_check(result: GeodesicResult, spec: MetricSpec, slack: float = 1e-6) -> CheckReport:
    """``|c(1) - c(0)|_{H^n(dtheta)} <= C L(path)`` with ``C`` over knots and interval midpoints."""
    path = result.path
    curves = list(path.curves)
    X = path.samples()
    for i in range(path.N):
        try:
            curves.append(curves[0].with_samples(0.5 * (X[i] + X[i + 1])))
        except ImmersionError:
            return _report("dist_lower_bound", [-np.inf], slack, None, reason="midpoint curve not immersed")
    lo, hi = _constant(curves, spec)
    C = max(lo, hi)
    c0, c1 = path.curves[0], path.curves[-1]
    lhs = norm(c0, c1.samples - c0.samples, "Hndtheta", spec.order)
    L = path_length(path, spec)
    return _report("dist_lower_bound", [C * L - lhs], slack, None, lhs=lhs, C=C, length=L)


def _speed_prime_coefficient(spec: MetricSpec) -> float:
    if spec.order == 2:
        return spec.coeffs[2]
    return min(spec.coeffs[0], spec.coeffs[spec.order])


def speed_drift_check(path: CurvePath, spec: MetricSpec, slack: float = 1e-6, nodes: int = 8) -> CheckReport:
    """Pointwise ``|log|c'|(t_k) - log|c'|(t_0)|`` against the accumulated Poincare bound.

    Between knots the path is linear, ``h = dc/dt`` is constant and the bound
    ``sqrt(l(t) / (4 a')) sqrt(G_{c(t)}(h, h))`` is integrated by Gauss-Legendre.
    """
    if spec.variant != "constant":
        raise ValueError("speed drift bound needs constant coefficients")
    a = _speed_prime_coefficient(spec)
    X = path.samples()
    scheme = path.scheme
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    logs = [np.log(np.sqrt(_dot(_diff(k, scheme), _diff(k, scheme))))[:, 0] for k in X]
    bound, margins = 0.0, []
    for i in range(path.N):
        dt = path.times[i + 1] - path.times[i]
        h = (X[i + 1] - X[i]) / dt
        acc = 0.0
        for xi, wi in zip(x, w):
            ci = DiscreteCurve(X[i] + xi * (X[i + 1] - X[i]), scheme)
            acc += wi * np.sqrt(ci.length / (4.0 * a)) * np.sqrt(max(metric_inner(spec, ci, h, h), 0.0))
        bound += acc * dt
        drift = float(np.max(np.abs(logs[i + 1] - logs[0])))
        margins.append(bound - drift)
    return _report("speed_drift", margins, slack, None, final_bound=bound)


# -- long-horizon geodesics ------------------------------------------------------------------


def ivp_longrun_check(c0: DiscreteCurve, u0, spec: MetricSpec, T_long: float = 50.0, steps: int = 1000, drift_tol: float = 1e-2, seed=None) -> CheckReport:
    """Integrate the geodesic equation to ``T_long``; pass iff it stays immersed with small energy drift."""
    try:
        flow = integrate_geodesic(c0, u0, spec, T=T_long, steps=steps, save_every=max(steps // 50, 1))
    except ImmersionError as exc:
        return _report("ivp_longrun", [-np.inf], 0.0, seed, blowup_time=getattr(exc, "time", None), error=str(exc))
    drift = flow.energy_drift()
    hn = max(norm(c0, k, "Hndtheta", spec.order) for k in flow.curves)
    margin = drift_tol - drift if np.isfinite(hn) else -np.inf
    return _report(
        "ivp_longrun", [margin], 0.0, seed,
        energy_drift=drift, min_speed=float(flow.min_speed.min()), max_hn_norm=float(hn), T=T_long,
    )


def ivp_longrun_suite(runs: int = 10, seed: int = 0, M: int = 64, T_long: float = 50.0, steps: int = 1000, spec: MetricSpec | None = None) -> CheckReport:
    """Unit-energy random initial data; the desk-scale witness of geodesic completeness."""
    spec = spec or MetricSpec.sobolev(1, 0, 1)
    rng = np.random.default_rng(seed)
    reps = []
    for _ in range(runs):
        c = DiscreteCurve(circle(M).samples + 0.2 * band_limited_field(rng, M, 2, 6))
        u = band_limited_field(rng, M, 2, 6)
        u /= np.sqrt(metric_inner(spec, c, u, u))
        reps.append(ivp_longrun_check(c, u, spec, T_long, steps))
    margins = [r.worst_margin for r in reps]
    rep = _report("ivp_longrun", margins, 0.0, seed, T=T_long)
    rep.details["energy_drift"] = max(r.details.get("energy_drift", np.inf) for r in reps)
    rep.details["min_speed"] = min(r.details.get("min_speed", 0.0) for r in reps)
    return rep


# -- suites -------------------------------------------------------------------------------------


def _bvp_pairs(M: int, seed: int):
    rng = np.random.default_rng(seed)
    e = ellipse(M)
    pairs = [(circle(M), circle(M, radius=2.0)), (circle(M), e), (e, e.with_samples(e.samples + [0.5, 0.3]))]
    for _ in range(3):
        pairs.append((random_curve(rng, M, scale=(0.8, 1.2)), random_curve(rng, M, scale=(0.8, 1.2))))
    return pairs


def _suite_poincare(seed):
    return [poincare_suite(1000, seed)]


def _suite_gronwall(seed):
    return [gronwall_suite(500, seed)]


def _suite_equivalence(seed, spec=None):
    spec = spec or MetricSpec.sobolev(1, 0, 1)
    c = circle(64)
    unit = equivalence_constants(BallSample(c, 0.0, [], [], spec), spec, refine=False)[2]
    unit.worst_margin = 1e-6 - abs(unit.details["C"] - 1.0)
    unit.passed = unit.worst_margin >= 0
    unit.name = "equivalence_unit_circle"
    ball = BallSample.random(c, 0.5, 10, spec, seed=seed)
    return [unit, equivalence_constants(ball, spec)[2]]


def _suite_bvp(seed, spec=None):
    spec = spec or MetricSpec.sobolev(1, 0, 1)
    out = []
    for a, b in _bvp_pairs(64, seed):
        res = solve_bvp(a, b, spec, N=16)
        rep = dist_lower_bound_check(res, spec)
        rep.details["converged"] = res.converged
        out.append(rep)
        out.append(speed_drift_check(res.path, spec))
    return out


def _suite_longrun(seed):
    return [ivp_longrun_suite(10, seed)]


SUITES = {
    "poincare": _suite_poincare,
    "gronwall": _suite_gronwall,
    "equivalence": _suite_equivalence,
    "bvp": _suite_bvp,
    "longrun": _suite_longrun,
}


def run_suite(name: str, seed: int = 0) -> list[CheckReport]:
    """Run one named suite, or ``"all"``; returns the reports in a fixed order."""
    if name != "all" and name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    keys = list(SUITES) if name == "all" else [name]
    reports = [r for key in keys for r in SUITES[key](seed)]
    for rep in reports:
        rep.seed = seed
    return reports
