"""Closed curves sampled on a uniform periodic grid and their arc-length calculus.

Fields along a curve are plain numpy arrays: scalar fields have shape ``(M,)``
and tangent (vector) fields have shape ``(M, d)``. Row ``i`` holds the value at
``theta_i = 2*pi*i/M``.

Internally the heavy lifting uses arrays of layout ``(M, k, *batch)``: axis 0 is
the periodic grid, axis 1 the vector components and trailing axes are batch
dimensions. This lets the solvers evaluate many curves at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
from scipy.interpolate import CubicSpline

SCHEMES = ("spectral", "central-2", "central-4")
EPS_IMM = 1e-8
EPS_MONO = 1e-6
TWO_PI = 2.0 * np.pi


class ImmersionError(ValueError):
    """Raised when a curve has (numerically) vanishing speed somewhere."""


def theta_grid(M: int) -> np.ndarray:
    return TWO_PI * np.arange(M) / M


def _check_scheme(scheme: str, M: int) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown derivative scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "spectral" and M % 2:
        raise ValueError("spectral scheme requires an even number of samples")


# -- grid operators (axis 0) -------------------------------------------------


def _bshape(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape(v.shape + (1,) * (ndim - 1))


def _diff(f: np.ndarray, scheme: str) -> np.ndarray:
    """d/dtheta along axis 0 of a periodic array."""
    M = f.shape[0]
    if scheme == "spectral":
        k = np.arange(M // 2 + 1, dtype=float)
        k[-1] = 0.0  # Nyquist mode: keeps the operator real and skew-symmetric
        F = np.fft.rfft(f, axis=0)
        return np.fft.irfft(F * _bshape(1j * k, f.ndim), n=M, axis=0)
    h = TWO_PI / M
    if scheme == "central-2":
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)
    if scheme == "central-4":
        return (
            -np.roll(f, -2, axis=0)
            + 8.0 * np.roll(f, -1, axis=0)
            - 8.0 * np.roll(f, 1, axis=0)
            + np.roll(f, 2, axis=0)
        ) / (12.0 * h)
    raise ValueError(f"unknown derivative scheme {scheme!r}")


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise inner product over axis 1, keeping the axis."""
    return np.sum(a * b, axis=1, keepdims=True)


def _integrate(f: np.ndarray) -> np.ndarray:
    """Trapezoid rule in theta over axis 0 (exact for band-limited integrands)."""
    return np.sum(f, axis=0) * (TWO_PI / f.shape[0])


def _speed(samples: np.ndarray, scheme: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (c', |c'|) with |c'| keeping a unit component axis."""
    cp = _diff(samples, scheme)
    return cp, np.sqrt(_dot(cp, cp))


def _arc_chain(u: np.ndarray, S: np.ndarray, scheme: str, k: int) -> list[np.ndarray]:
    """[u, D_s u, ..., D_s^k u] by repeated composition."""
    out = [u]
    for _ in range(k):
        out.append(_diff(out[-1], scheme) / S)
    return out


def _arc_chain_adjoint(
    chain: list[np.ndarray], S: np.ndarray, scheme: str, cotangents: dict[int, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse pass through ``_arc_chain``.

    Given cotangents ``g_j`` for the chain entries, returns ``(sigma, g_0)`` with

        sum_j <g_j, delta(D_s^j u)> = <sigma, delta|c'|> + <g_0, delta u>

    as plain sums over the grid. Uses that d/dtheta is skew-symmetric on the grid.
    """
    top = max(cotangents) if cotangents else 0
    g = np.zeros_like(chain[0] if top == 0 else chain[top])
    g = g + cotangents.get(top, 0.0)
    sigma = np.zeros_like(S)
    for j in range(top, 0, -1):
        # f_j = D(f_{j-1}) / S  ->  d f_j = -f_j dS/S + D(d f_{j-1})/S
        sigma = sigma - _dot(g, chain[j]) / S
        g = -_diff(g / S, scheme) + cotangents.get(j - 1, 0.0)
    return sigma, g


# -- curves --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """A closed immersed curve ``c(theta_i)`` on the uniform periodic grid.

    Parameters
    ----------
    samples : array_like, shape (M, d)
        Curve values at ``theta_i = 2*pi*i/M``; ``M >= 16`` and even.
    scheme : {"spectral", "central-2", "central-4"}
        Discrete d/dtheta used by every derived quantity.
    eps_imm : float
        Minimal admissible speed; slower curves are rejected.
    """

    samples: np.ndarray
    scheme: str = "spectral"
    eps_imm: float = EPS_IMM
    _cp: np.ndarray = field(init=False, repr=False)
    _speed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 2 or x.shape[1] < 2:
            raise ValueError(f"samples must have shape (M, d) with d >= 2, got {x.shape}")
        M = x.shape[0]
        if M < 16 or M % 2:
            raise ValueError(f"need an even number M >= 16 of samples, got {M}")
        _check_scheme(self.scheme, M)
        if not np.all(np.isfinite(x)):
            raise ValueError("curve samples must be finite")
        x.setflags(write=False)
        cp, S = _speed(x, self.scheme)
        smin = float(S.min())
        if not smin >= self.eps_imm:
            i = int(np.argmin(S[:, 0]))
            raise ImmersionError(
                f"curve is not an immersion: |c'| = {smin:.3g} < {self.eps_imm:g} at sample {i}"
            )
        cp.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "_cp", cp)
        object.__setattr__(self, "_speed", S[:, 0])

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return theta_grid(self.M)

    @cached_property
    def length(self) -> float:
        return float(np.sum(self._speed) * TWO_PI / self.M)

    def with_samples(self, samples) -> DiscreteCurve:
        return DiscreteCurve(samples, scheme=self.scheme, eps_imm=self.eps_imm)

    def resample(self, M: int) -> DiscreteCurve:
        """The same curve on a grid of ``M`` points (periodic interpolation)."""
        if M == self.M:
            return self
        return self.with_samples(periodic_interpolate(self.samples, theta_grid(M), self.scheme))

    def __len__(self) -> int:
        return self.M


def as_curve(c, scheme: str = "spectral") -> DiscreteCurve:
    if isinstance(c, DiscreteCurve):
        return c
    return DiscreteCurve(c, scheme=scheme)


def circle(M: int, radius: float = 1.0, center=(0.0, 0.0), turns: int = 1, scheme="spectral") -> DiscreteCurve:
    t = turns * theta_grid(M)
    pts = np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1) + np.asarray(center, float)
    return DiscreteCurve(pts, scheme=scheme)


def ellipse(M: int, a: float = 2.0, b: float = 1.0, scheme="spectral") -> DiscreteCurve:
    t = theta_grid(M)
    return DiscreteCurve(np.stack([a * np.cos(t), b * np.sin(t)], axis=1), scheme=scheme)


def _field(c: DiscreteCurve, f) -> tuple[np.ndarray, bool]:
    """Validate ``f`` against ``c``; return it as (M, k) plus a was-scalar flag."""
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 1
    f2 = f[:, None] if scalar else f
    if f2.ndim != 2 or f2.shape[0] != c.M or (not scalar and f2.shape[1] != c.dim):
        raise ValueError(f"field of shape {f.shape} does not match curve with M={c.M}, d={c.dim}")
    if not np.all(np.isfinite(f2)):
        raise ValueError("field values must be finite")
    return f2, scalar


def _unfield(f: np.ndarray, scalar: bool) -> np.ndarray:
    return f[:, 0] if scalar else f


# -- public calculus -----------------------------------------------------------


def theta_derivative(f, scheme: str = "spectral") -> np.ndarray:
    """d/dtheta of a periodic field sampled on the uniform grid (along axis 0)."""
    f = np.asarray(f, dtype=float)
    _check_scheme(scheme, f.shape[0])
    return _diff(f, scheme)


def speed(c: DiscreteCurve) -> np.ndarray:
    """Pointwise speed ``|c'|``."""
    return c._speed.copy()


def unit_tangent(c: DiscreteCurve) -> np.ndarray:
    """Unit tangent ``v = c'/|c'|``."""
    return c._cp / c._speed[:, None]


def arc_derivative(c: DiscreteCurve, f, k: int = 1, max_order: int | None = None) -> np.ndarray:
    """``D_s^k f`` with ``D_s = |c'|^{-1} d/dtheta`` applied ``k`` times."""
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    if max_order is not None and k > max_order:
        raise ValueError(f"order {k} exceeds configured maximum {max_order}")
    f2, scalar = _field(c, f)
    return _unfield(_arc_chain(f2, c._speed[:, None], c.scheme, k)[-1], scalar)


def length(c: DiscreteCurve) -> float:
    """Length of the curve (trapezoid rule for the integral of ``|c'|``)."""
    return c.length


NORM_KINDS = ("L2dtheta", "L2ds", "Hndtheta", "Hnds")
_NORM_ALIASES = {"L2dθ": "L2dtheta", "Hndθ": "Hndtheta"}


def norm(c: DiscreteCurve, f, kind: str = "L2ds", n: int = 2) -> float:
    """One of the four norms of a field along ``c``.

    ``L2dtheta`` and ``L2ds`` integrate ``|f|^2`` against ``dtheta`` and ``ds``;
    ``Hndtheta`` adds ``|d^n f/dtheta^n|^2`` and ``Hnds`` adds ``|D_s^n f|^2``.
    """
    kind = _NORM_ALIASES.get(kind, kind)
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    if kind.startswith("Hn") and (int(n) != n or n < 1):
        raise ValueError(f"Sobolev order must be an integer >= 1, got {n}")
    f2, _ = _field(c, f)
    S = c._speed[:, None]
    if kind == "L2dtheta":
        val = _integrate(_dot(f2, f2))
    elif kind == "L2ds":
        val = _integrate(_dot(f2, f2) * S)
    elif kind == "Hndtheta":
        dn = f2
        for _ in range(n):
            dn = _diff(dn, c.scheme)
        val = _integrate(_dot(f2, f2) + _dot(dn, dn))
    else:
        dn = _arc_chain(f2, S, c.scheme, n)[-1]
        val = _integrate((_dot(f2, f2) + _dot(dn, dn)) * S)
    return float(np.sqrt(val.item()))


def binomial_sum(i: int, k: int) -> int:
    """``sum_{j=i}^{k-1} C(j, i)``, which equals ``C(k, i+1)``."""
    return sum(comb(j, i) for j in range(i, k))


# -- periodic interpolation ----------------------------------------------------


def _trig_eval(samples: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``samples`` at points ``x``."""
    M = samples.shape[0]
    F = np.fft.rfft(samples, axis=0) / M
    k = np.arange(M // 2 + 1)
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    if M % 2 == 0:
        w[-1] = 1.0  # Nyquist mode enters as a cosine with unit weight
    E = np.exp(1j * np.outer(np.ravel(x), k))  # (P, K)
    flat = F.reshape(F.shape[0], -1) * w[:, None]
    out = np.real(E @ flat)
    return out.reshape(np.shape(x) + samples.shape[1:])


def periodic_interpolate(samples, x, scheme: str = "spectral") -> np.ndarray:
    """Values at arbitrary parameters ``x`` of the periodic interpolant of ``samples``.

    Trigonometric interpolation for the spectral scheme, periodic cubic splines
    otherwise.
    """
    samples = np.asarray(samples, dtype=float)
    x = np.asarray(x, dtype=float)
    if scheme == "spectral":
        return _trig_eval(samples, x)
    M = samples.shape[0]
    t = TWO_PI * np.arange(M + 1) / M
    ext = np.concatenate([samples, samples[:1]], axis=0)
    return CubicSpline(t, ext, axis=0, bc_type="periodic")(np.mod(x, TWO_PI))


def _cumulative_arclength(S: np.ndarray, scheme: str):
    """Return a callable ``s(x)`` with ``s(0) = 0`` and ``s(2*pi) = length``."""
    M = S.shape[0]
    if scheme == "spectral":
        F = np.fft.rfft(S) / M
        mean = F[0].real
        k = np.arange(M // 2 + 1)
        w = np.full(k.shape, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        G = np.zeros_like(F)
        G[1:] = F[1:] / (1j * k[1:])

        def s_of(x):
            x = np.asarray(x, dtype=float)
            E = np.exp(1j * np.multiply.outer(x, k))
            osc = np.real(E @ (G * w)) - np.real(np.sum(G * w))
            return mean * x + osc

        return s_of
    t = TWO_PI * np.arange(M + 1) / M
    spl = CubicSpline(t, np.append(S, S[0]), bc_type="periodic").antiderivative()
    total = float(spl(TWO_PI))

    def s_of(x):
        x = np.asarray(x, dtype=float)
        q = np.floor(x / TWO_PI)
        return q * total + spl(x - q * TWO_PI)

    return s_of


def constant_speed_reparam(c: DiscreteCurve, tol: float = 1e-13, max_iter: int = 50):
    """Reparametrize ``c`` to constant speed, keeping the base point.

    Returns ``(c_const, phi)`` with ``c_const = c o phi`` sampled on the grid.
    """
    S = c._speed
    ell = c.length
    s_of = _cumulative_arclength(S, c.scheme)
    target = ell * c.theta / TWO_PI
    # initial guess from the cumulative trapezoid sum, then Newton on s(x) = target
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (S + np.roll(S, -1)))]) * TWO_PI / c.M
    tgrid = TWO_PI * np.arange(c.M + 1) / c.M
    x = np.interp(target, cum, tgrid)
    for _ in range(max_iter):
        r = s_of(x) - target
        sp = periodic_interpolate(S, x, c.scheme)
        step = r / np.maximum(sp, c.eps_imm)
        x = x - step
        if np.max(np.abs(step)) < tol:
            break
    knots = np.append(x, x[0] + TWO_PI)
    phi = Diffeo(knots - knots[0], float(np.mod(knots[0], TWO_PI)))
    return act(c, phi), phi


def winding_number(c: DiscreteCurve, max_residual: float = 0.1) -> int:
    """Degree of a planar curve: total turning of the unit tangent over ``2*pi``."""
    if c.dim != 2:
        raise ValueError("winding number is defined for planar curves only (dim = 2)")
    v = unit_tangent(c)
    ang = np.arctan2(v[:, 1], v[:, 0])
    step = np.diff(np.append(ang, ang[0]))
    step = (step + np.pi) % TWO_PI - np.pi
    if np.max(np.abs(step)) > np.pi / 2:
        raise ValueError("tangent turns by more than pi/2 between samples; curve is under-resolved")
    total = np.sum(step) / TWO_PI
    w = int(np.rint(total))
    if abs(total - w) > max_residual:
        raise ValueError(f"turning number {total:.4f} is not close to an integer")
    return w


# -- reparametrizations ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Diffeo:
    """Orientation-preserving circle map ``phi(theta_i) = knots[i] + shift``.

    ``knots`` has ``M + 1`` strictly increasing entries with
    ``knots[M] = knots[0] + 2*pi`` (a monotone lift sampled on the grid).
    """

    knots: np.ndarray
    shift: float = 0.0
    eps_mono: float = EPS_MONO

    def __post_init__(self):
        k = np.array(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 3:
            raise ValueError("knots must be a 1-d array of length M + 1")
        if not np.all(np.isfinite(k)):
            raise ValueError("knots must be finite")
        # periodic lift: snap the closing knot (tiny roundoff) then demand exactness
        if abs(k[-1] - k[0] - TWO_PI) > 1e-9:
            raise ValueError("knots must satisfy knots[-1] = knots[0] + 2*pi")
        k[-1] = k[0] + TWO_PI
        gaps = np.diff(k)
        if gaps.min() < self.eps_mono:
            raise ValueError(f"diffeo is not strictly monotone (min gap {gaps.min():.3g})")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "shift", float(np.mod(self.shift, TWO_PI)))

    @classmethod
    def identity(cls, M: int) -> Diffeo:
        return cls(TWO_PI * np.arange(M + 1) / M, 0.0)

    @classmethod
    def rotation(cls, M: int, shift: float) -> Diffeo:
        return cls(TWO_PI * np.arange(M + 1) / M, shift)

    @classmethod
    def from_values(cls, values, eps_mono: float = EPS_MONO) -> Diffeo:
        """Build from ``phi(theta_i)``, i < M (a monotone lift)."""
        values = np.asarray(values, dtype=float)
        knots = np.append(values, values[0] + TWO_PI) - values[0]
        return cls(knots, float(values[0]), eps_mono=eps_mono)

    @property
    def M(self) -> int:
        return self.knots.size - 1

    def values(self) -> np.ndarray:
        """``phi(theta_i)`` as a monotone lift (may exceed ``2*pi``)."""
        return self.knots[:-1] + self.shift

    def _periodic_part(self) -> np.ndarray:
        return self.knots[:-1] - theta_grid(self.M)

    def __call__(self, x, scheme: str = "spectral") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + self.shift + periodic_interpolate(self._periodic_part(), x, scheme)

    def derivative(self, scheme: str = "spectral") -> np.ndarray:
        return 1.0 + _diff(self._periodic_part(), scheme)

    def compose(self, other: Diffeo, scheme: str = "spectral") -> Diffeo:
        """``self o other``, sampled on ``other``'s grid."""
        return Diffeo.from_values(self(other.values(), scheme), eps_mono=min(self.eps_mono, other.eps_mono))

    def inverse(self, scheme: str = "spectral", tol: float = 1e-13, max_iter: int = 60) -> Diffeo:
        """``phi^{-1}`` on the same grid, by Newton iteration on the lift."""
        M = self.M
        th = theta_grid(M)
        # monotone table of the lift over a few periods for the initial guess
        reps = np.arange(-3, 4)[:, None] * TWO_PI
        xs = (th[None, :] + reps).ravel()
        ys = (self.values()[None, :] + reps).ravel()
        x = np.interp(th, ys, xs)
        dper = _diff(self._periodic_part(), scheme)
        for _ in range(max_iter):
            r = self(x, scheme) - th
            dphi = 1.0 + periodic_interpolate(dper, x, scheme)
            step = r / np.maximum(dphi, 1e-3)
            x = x - step
            if np.max(np.abs(step)) < tol:
                break
        return Diffeo.from_values(x, eps_mono=self.eps_mono)

    def max_derivative_ratio(self) -> float:
        g = np.diff(self.knots)
        return float(g.max() / g.min())


def act(c: DiscreteCurve, phi: Diffeo) -> DiscreteCurve:
    """``c o phi`` resampled on the grid of ``phi``."""
    x = phi.values()
    M = phi.M
    if M == c.M:
        rot = phi.shift / (TWO_PI / M)
        k = int(np.rint(rot))
        # integer grid shifts are exact cyclic rotations
        if abs(rot - k) < 1e-12 and np.allclose(phi.knots, TWO_PI * np.arange(M + 1) / M, rtol=0, atol=1e-14):
            return c.with_samples(np.roll(c.samples, -k, axis=0))
    return c.with_samples(periodic_interpolate(c.samples, x, c.scheme))
