"""Finite-difference oracles shared by the unit and acceptance tests."""

import numpy as np

from sobocurve.curves import arc_derivative, speed
from sobocurve.metrics import variation_arc_derivative, variation_speed

EPSILONS = 1e-2 * 2.0 ** -np.arange(8)


def fd_sweep(f, exact, c, h, eps=EPSILONS):
    """Relative errors of central differences of ``f(curve)`` along ``h``."""
    errs = []
    scale = np.linalg.norm(exact)
    for e in eps:
        fp = f(c.with_samples(c.samples + e * h))
        fm = f(c.with_samples(c.samples - e * h))
        errs.append(np.linalg.norm((fp - fm) / (2 * e) - exact) / scale)
    return np.array(errs)


def observed_order(errs, eps=EPSILONS, points=3):
    """Least-squares slope of log error against log step over the largest steps."""
    return np.polyfit(np.log(eps[:points]), np.log(errs[:points]), 1)[0]


def variation_cases(c, h, u, k):
    """(function of the curve, exact derivative) pairs for one input triple."""
    return {
        "fixed_u": (lambda cc: arc_derivative(cc, u, k), variation_arc_derivative(c, h, u, k)),
        "u_is_c": (lambda cc: arc_derivative(cc, cc.samples, k), variation_arc_derivative(c, h, c.samples, k, du=h)),
        "speed": (lambda cc: arc_derivative(cc, speed(cc), k), variation_speed(c, h, k)),
    }


# -- extended-precision reference calculus ---------------------------------------
#
# An independent dense implementation of d/dtheta and D_s in long double. Central
# differences of high-order arc derivatives in double precision bottom out near
# 1e-6 relative (each spectral derivative amplifies rounding noise by up to M/2);
# in long double the same differences resolve the variation formulas to 1e-7 or better.

LD = np.longdouble


def ld_diff_matrix(M):
    """Spectral derivative with the Nyquist mode dropped, as dense long-double matrix."""
    pi = np.arccos(LD(-1))
    i = np.arange(M)
    d = (i[:, None] - i[None, :]).astype(LD) * (2 * pi / M)
    D = np.zeros((M, M), dtype=LD)
    for k in range(1, M // 2):
        D -= LD(2 * k) / M * np.sin(k * d)
    return D


def ld_arc(D, c, f, k):
    cp = D @ c
    S = np.sqrt(np.sum(cp * cp, axis=1, keepdims=True))
    for _ in range(k):
        f = (D @ f) / (S if f.ndim == 2 else S[:, 0])
    return f


def ld_speed(D, c):
    cp = D @ c
    return np.sqrt(np.sum(cp * cp, axis=1))


def ld_fd_sweep(kind, c, h, u, k, exact, eps=EPSILONS, D=None):
    """Relative errors of long-double central differences for one variation formula."""
    D = ld_diff_matrix(c.M) if D is None else D
    c0, h0 = c.samples.astype(LD), h.astype(LD)
    u0 = None if u is None else u.astype(LD)

    def f(x):
        if kind == "fixed_u":
            return ld_arc(D, x, u0, k)
        if kind == "u_is_c":
            return ld_arc(D, x, x, k)
        return ld_arc(D, x, ld_speed(D, x), k)

    scale = np.linalg.norm(exact)
    errs = []
    for e in eps:
        e = LD(e)
        fd = (f(c0 + e * h0) - f(c0 - e * h0)) / (2 * e)
        errs.append(float(np.sqrt(np.sum((fd - exact) ** 2))) / scale)
    return np.array(errs)
