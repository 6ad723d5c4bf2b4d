"""Sobolev metrics on closed curves and their first variations.

Every supported metric is written as

    G_c(h1, h2) = sum_j  int  w_j(c) <D_s^j h1, D_s^j h2>  dtheta

with weight fields ``w_j`` depending on the curve:

* ``constant``:            w_j = a_j |c'|
* ``length_weighted``:     w_0 = (2 pi / l) |c'|,  w_2 = (l / 2 pi)^3 |c'|
* ``curvature_weighted``:  w_0 = w_3 = (1 + kappa^2) |c'|,  kappa = |D_s^2 c|
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .curves import (
    TWO_PI,
    DiscreteCurve,
    _arc_chain,
    _arc_chain_adjoint,
    _diff,
    _dot,
    _field,
    _integrate,
)

VARIANTS = ("constant", "curvature_weighted", "length_weighted")


@dataclass(frozen=True)
class MetricSpec:
    """Order, coefficients and variant of a Sobolev metric.

    For the weighted variants the order and coefficients are fixed
    (order 3 for ``curvature_weighted``, order 2 for ``length_weighted``).
    """

    order: int = 2
    coeffs: tuple = (1.0, 0.0, 1.0)
    variant: str = "constant"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown metric variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "curvature_weighted":
            object.__setattr__(self, "order", 3)
            object.__setattr__(self, "coeffs", (1.0, 0.0, 0.0, 1.0))
        elif self.variant == "length_weighted":
            object.__setattr__(self, "order", 2)
            object.__setattr__(self, "coeffs", (1.0, 0.0, 1.0))
        n = self.order
        if int(n) != n or n < 2:
            raise ValueError(f"metric order must be an integer >= 2, got {n}")
        a = tuple(float(x) for x in self.coeffs)
        if len(a) != n + 1:
            raise ValueError(f"order {n} needs {n + 1} coefficients a_0..a_n, got {len(a)}")
        if any(not np.isfinite(x) or x < 0 for x in a):
            raise ValueError("metric coefficients must be finite and non-negative")
        if a[0] <= 0 or a[-1] <= 0:
            raise ValueError("a_0 and a_n must be positive")
        object.__setattr__(self, "order", int(n))
        object.__setattr__(self, "coeffs", a)

    @classmethod
    def sobolev(cls, *coeffs) -> MetricSpec:
        return cls(order=len(coeffs) - 1, coeffs=tuple(coeffs))

    @classmethod
    def parse(cls, text: str) -> MetricSpec:
        """Parse ``"n=2,a0=1,a2=1"`` or ``"variant=length_weighted"``."""
        items = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            if "=" not in part:
                raise ValueError(f"malformed metric item {part!r}; expected key=value")
            key, val = (s.strip() for s in part.split("=", 1))
            if key in items:
                raise ValueError(f"duplicate metric key {key!r}")
            items[key] = val
        variant = items.pop("variant", "constant")
        if variant != "constant":
            if items:
                raise ValueError(f"variant {variant!r} takes no further parameters")
            return cls(variant=variant)
        a = {}
        n = None
        for key, val in items.items():
            if key == "n":
                n = int(val)
            elif re.fullmatch(r"a\d+", key):
                a[int(key[1:])] = float(val)
            else:
                raise ValueError(f"unknown metric key {key!r}")
        if n is None:
            if not a:
                raise ValueError("metric string names neither n nor any coefficient")
            n = max(a)
        if any(j > n for j in a):
            raise ValueError(f"coefficient index exceeds order n={n}")
        return cls(order=n, coeffs=tuple(a.get(j, 0.0) for j in range(n + 1)))

    def to_dict(self) -> dict:
        return {"order": self.order, "coeffs": list(self.coeffs), "variant": self.variant}

    @classmethod
    def from_dict(cls, d: dict) -> MetricSpec:
        return cls(order=int(d["order"]), coeffs=tuple(d["coeffs"]), variant=d.get("variant", "constant"))

    def __str__(self) -> str:
        if self.variant != "constant":
            return f"variant={self.variant}"
        terms = [f"a{j}={a:g}" for j, a in enumerate(self.coeffs) if a]
        return ",".join([f"n={self.order}"] + terms)

    @property
    def active_orders(self) -> tuple[int, ...]:
        return tuple(j for j, a in enumerate(self.coeffs) if a > 0)


# -- weight fields and their adjoints ------------------------------------------


def _geometry(spec: MetricSpec, c: np.ndarray, scheme: str) -> dict:
    """Quantities shared by evaluation and differentiation, layout (M, k, *b)."""
    cp = _diff(c, scheme)
    S = np.sqrt(_dot(cp, cp))
    geo = {"S": S, "v": cp / S}
    if spec.variant == "constant":
        geo["w"] = {j: a * S for j, a in enumerate(spec.coeffs) if a > 0}
    elif spec.variant == "length_weighted":
        ell = _integrate(S)
        alpha, beta = TWO_PI / ell, (ell / TWO_PI) ** 3
        geo.update(ell=ell, alpha=alpha, beta=beta)
        geo["w"] = {0: alpha * S, 2: beta * S}
    else:
        kc = _arc_chain(c, S, scheme, 2)
        rho = 1.0 + _dot(kc[2], kc[2])
        geo.update(kc=kc, rho=rho)
        geo["w"] = {0: rho * S, 3: rho * S}
    return geo


def _weight_adjoint(spec: MetricSpec, geo: dict, wbar: dict, scheme: str):
    """Pull cotangents of the weight fields back to ``(sigma, direct)``.

    ``sigma`` is the cotangent of |c'|; ``direct`` the cotangent of ``c`` itself
    (non-zero only for the curvature-weighted variant).
    """
    S = geo["S"]
    if spec.variant == "constant":
        sigma = sum(spec.coeffs[j] * wb for j, wb in wbar.items())
        return sigma, None
    dtheta = TWO_PI / S.shape[0]
    if spec.variant == "length_weighted":
        ell, alpha, beta = geo["ell"], geo["alpha"], geo["beta"]
        sigma = alpha * wbar[0] + beta * wbar[2]
        dl = -alpha / ell * np.sum(wbar[0] * S, axis=0) + 3.0 * beta / ell * np.sum(wbar[2] * S, axis=0)
        return sigma + dl * dtheta, None
    rho, kc = geo["rho"], geo["kc"]
    both = wbar[0] + wbar[3]
    sigma = rho * both
    k2bar = 2.0 * S * both * kc[2]
    sig_c, direct = _arc_chain_adjoint(kc, S, scheme, {2: k2bar})
    return sigma + sig_c, direct


def _evaluate(spec: MetricSpec, c: np.ndarray, u: np.ndarray, scheme: str, grads: bool = True):
    """``G_c(u, u)`` and optionally its gradients w.r.t. ``c`` and ``u``.

    Gradients are with respect to the plain grid sums, i.e.
    ``D_{c,h} G = sum <grad_c, h>``. Works on batched arrays (M, d, *b).
    """
    geo = _geometry(spec, c, scheme)
    w = geo["w"]
    top = max(w)
    chain = _arc_chain(u, geo["S"], scheme, top)
    sq = {j: _dot(chain[j], chain[j]) for j in w}
    G = _integrate(sum(w[j] * sq[j] for j in w))[0]
    if not grads:
        return G, None, None
    dtheta = TWO_PI / c.shape[0]
    cot = {j: 2.0 * dtheta * w[j] * chain[j] for j in w}
    sig_u, grad_u = _arc_chain_adjoint(chain, geo["S"], scheme, cot)
    sig_w, direct = _weight_adjoint(spec, geo, {j: dtheta * sq[j] for j in w}, scheme)
    sigma = sig_u + sig_w
    grad_c = -_diff(sigma * geo["v"], scheme)
    if direct is not None:
        grad_c = grad_c + direct
    return G, grad_c, grad_u


def _apply(spec: MetricSpec, c: np.ndarray, u: np.ndarray, scheme: str) -> np.ndarray:
    """Momentum operator ``K_c u`` with ``G_c(u, h) = dtheta * sum <K_c u, h>``.

    For constant coefficients ``K_c u = sum_j (-1)^j a_j |c'| D_s^{2j} u``.
    """
    return _apply_geo(_geometry(spec, c, scheme), u, scheme)


def _apply_geo(geo: dict, u: np.ndarray, scheme: str) -> np.ndarray:
    w = geo["w"]
    chain = _arc_chain(u, geo["S"], scheme, max(w))
    _, out = _arc_chain_adjoint(chain, geo["S"], scheme, {j: w[j] * chain[j] for j in w})
    return out


def _bilinear(spec: MetricSpec, c: np.ndarray, h1: np.ndarray, h2: np.ndarray, scheme: str):
    geo = _geometry(spec, c, scheme)
    w = geo["w"]
    top = max(w)
    f1 = _arc_chain(h1, geo["S"], scheme, top)
    f2 = _arc_chain(h2, geo["S"], scheme, top)
    return _integrate(sum(w[j] * _dot(f1[j], f2[j]) for j in w))[0]


# -- public API ----------------------------------------------------------------


def curvature(c: DiscreteCurve) -> np.ndarray:
    """``kappa = |D_s^2 c|`` (norm of the curvature vector)."""
    k2 = _arc_chain(c.samples, c._speed[:, None], c.scheme, 2)[2]
    return np.sqrt(np.sum(k2 * k2, axis=1))


def metric_inner(spec: MetricSpec, c: DiscreteCurve, h1, h2) -> float:
    """``G_c(h1, h2)`` for tangent fields ``h1``, ``h2`` along ``c``."""
    a, _ = _field(c, h1)
    b, _ = _field(c, h2)
    if a.shape[1] != c.dim or b.shape[1] != c.dim:
        raise ValueError("metric arguments must be tangent (vector) fields")
    return float(_bilinear(spec, c.samples, a, b, c.scheme).item())


def momentum(spec: MetricSpec, c: DiscreteCurve, u) -> np.ndarray:
    """``m = K_c u``; for constant coefficients ``sum_j (-1)^j a_j |c'| D_s^{2j} u``."""
    u2, _ = _field(c, u)
    return _apply(spec, c.samples, u2, c.scheme)


def metric_matrix(spec: MetricSpec, c: DiscreteCurve) -> np.ndarray:
    """Gram matrix ``A`` with ``G_c(h1, h2) = h1.ravel() @ A @ h2.ravel()``."""
    M, d = c.M, c.dim
    basis = np.eye(M * d).reshape(M, d, M * d)
    cb = np.broadcast_to(c.samples[:, :, None], basis.shape)
    K = _apply(spec, cb, basis, c.scheme) * (TWO_PI / M)
    A = K.reshape(M * d, M * d).T
    return 0.5 * (A + A.T)


def _variation_chain(S, w, u, du, k, scheme):
    chain = _arc_chain(u, S, scheme, k)
    out = _arc_chain(du, S, scheme, k)[-1] if du is not None else np.zeros_like(u)
    for j in range(k):
        out = out - _arc_chain(w * chain[k - j], S, scheme, j)[-1]
    return out


def _w_field(c: DiscreteCurve, h: np.ndarray) -> np.ndarray:
    S = c._speed[:, None]
    v = c._cp / S
    return _dot(_diff(h, c.scheme) / S, v)


def variation_arc_derivative(c: DiscreteCurve, h, u, k: int, du=None) -> np.ndarray:
    """Directional derivative ``D_{c,h}(D_s^k u)``.

    ``du`` is the variation of ``u`` itself: ``None`` when ``u`` is held fixed,
    ``h`` when ``u = c``. Uses the commutator form

        D_s^k(du) - sum_{j<k} D_s^j( <D_s h, v> D_s^{k-j} u ),

    which is the exact derivative of the discrete operator.
    """
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    h2, _ = _field(c, h)
    u2, scalar = _field(c, u)
    du2 = None if du is None else _field(c, du)[0]
    out = _variation_chain(c._speed[:, None], _w_field(c, h2), u2, du2, k, c.scheme)
    return out[:, 0] if scalar else out


def variation_arc_derivative_binomial(c: DiscreteCurve, h, u, k: int, du=None) -> np.ndarray:
    """Same variation expanded with the product rule into binomial form,

        D_s^k(du) - sum_{i<k} C(k, i+1) D_s^i<D_s h, v> * D_s^{k-i} u.

    Agrees with :func:`variation_arc_derivative` up to the grid's product-rule error.
    """
    from math import comb

    h2, _ = _field(c, h)
    u2, scalar = _field(c, u)
    S = c._speed[:, None]
    w = _w_field(c, h2)
    wc = _arc_chain(w, S, c.scheme, k)
    uc = _arc_chain(u2, S, c.scheme, k)
    out = _arc_chain(_field(c, du)[0], S, c.scheme, k)[-1] if du is not None else np.zeros_like(u2)
    for i in range(k):
        out = out - comb(k, i + 1) * wc[i] * uc[k - i]
    return out[:, 0] if scalar else out


def variation_speed(c: DiscreteCurve, h, k: int = 0) -> np.ndarray:
    """Directional derivative ``D_{c,h}(D_s^k |c'|)``."""
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    h2, _ = _field(c, h)
    S = c._speed[:, None]
    w = _w_field(c, h2)
    return _variation_chain(S, w, S, w * S, k, c.scheme)[:, 0]


def metric_inner_variation(spec: MetricSpec, c: DiscreteCurve, h, u) -> float:
    """Directional derivative of ``c -> G_c(u, u)`` in direction ``h`` (``u`` fixed).

    Assembled in forward mode from :func:`variation_arc_derivative`,
    :func:`variation_speed` and ``D_{c,h}(ds) = <D_s h, v> ds``.
    """
    h2, _ = _field(c, h)
    u2, _ = _field(c, u)
    S = c._speed[:, None]
    w_h = _w_field(c, h2)
    dS = w_h * S
    geo = _geometry(spec, c.samples, c.scheme)
    weights = geo["w"]
    if spec.variant == "constant":
        dweights = {j: a * dS for j, a in enumerate(spec.coeffs) if a > 0}
    elif spec.variant == "length_weighted":
        dl = _integrate(dS)
        alpha, beta, ell = geo["alpha"], geo["beta"], geo["ell"]
        dweights = {
            0: alpha * dS - alpha * dl / ell * S,
            2: beta * dS + 3.0 * beta * dl / ell * S,
        }
    else:
        k2 = geo["kc"][2]
        dk2 = variation_arc_derivative(c, h2, c.samples, 2, du=h2)
        drho = 2.0 * _dot(k2, dk2)
        dw = drho * S + geo["rho"] * dS
        dweights = {0: dw, 3: dw}
    total = 0.0
    for j, wj in weights.items():
        fj = _arc_chain(u2, S, c.scheme, j)[-1]
        dfj = variation_arc_derivative(c, h2, u2, j)
        total += _integrate(dweights[j] * _dot(fj, fj) + 2.0 * wj * _dot(fj, dfj)).item()
    return float(total)


def metric_gradient(spec: MetricSpec, c: DiscreteCurve, u) -> tuple[float, np.ndarray, np.ndarray]:
    """``(G_c(u,u), grad_c, grad_u)``; the adjoint of :func:`metric_inner_variation`."""
    u2, _ = _field(c, u)
    G, gc, gu = _evaluate(spec, c.samples, u2, c.scheme)
    return float(G.item()), gc, gu
