"""Numerical checks of the convolution estimates behind the nonlinear decay rates.

Each estimate has the form LHS(x, t, ...) <= C RHS(x, t, ...) with an
unspecified constant. ``inequality_suite`` evaluates LHS / RHS by adaptive
quadrature at randomized parameters, fits C as the largest ratio on a
calibration draw and confirms that a fresh draw never exceeds ``slack * C``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

R_VALUES = (1.5, 2.5, 3.0)
M_KERNEL = 4.0
M_PRIME = 2 * M_KERNEL


def windowed_quad(f, windows, epsrel=1e-10):
    """int_R f by splitting at c + h * {0, +-1, +-3, +-10, +-40} for each (c, h) window."""
    offs = np.array([-40, -10, -3, -1, 0, 1, 3, 10, 40], dtype=float)
    pts = np.unique(np.concatenate([c + h * offs for c, h in windows]))
    edges = [(-np.inf, pts[0])] + list(zip(pts[:-1], pts[1:])) + [(pts[-1], np.inf)]
    kw = dict(epsabs=0.0, epsrel=epsrel, limit=200)
    with warnings.catch_warnings():
        # pieces far from the mass hit rounding long before epsrel; they are negligible
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return sum(integrate.quad(f, a, b, **kw)[0] for a, b in edges)


def _alg_windows():
    return [(0.0, 1.0), (0.0, 30.0), (0.0, 1e3)]


# each ratio function returns LHS / RHS


def semigroup_ratio(x, t, s):
    """int (t-s)^{-1/2} e^{-(x-y)^2/(t-s)} s^{-1/2} e^{-y^2/s} dy / (t^{-1/2} e^{-x^2/t}).

    The exponent is combined before exponentiating, so the ratio stays
    finite where both sides underflow. Exact value: sqrt(pi).
    """
    u = t - s
    c = x * s / t
    h = np.sqrt(s * u / t)

    def f(y):
        return np.exp(-(x - y) ** 2 / u - y ** 2 / s + x ** 2 / t)

    return windowed_quad(f, [(c, h)]) / np.sqrt(u * s / t)


def semigroup_exact(x, t, s):
    return np.sqrt(np.pi)


def linear3_lhs(x, t, r):
    def f(y):
        return t ** -0.5 * np.exp(-(x - y) ** 2 / t) * (1 + abs(y)) ** -r

    return windowed_quad(f, [(x, np.sqrt(t))] + _alg_windows())


def linear3_rhs(x, t, r, M=M_KERNEL):
    # the algebraic weight is read at x: the bound must not depend on the integration variable
    return (min(t ** -0.5, (1 + abs(x)) ** -r)
            + (1 + np.sqrt(t)) ** -1 * np.exp(-x ** 2 / (M * t)))


def linear4_rhs(x, t, r, M=M_KERNEL):
    return ((1 + abs(x) + np.sqrt(t)) ** -r
            + (1 + np.sqrt(t)) ** -1 * np.exp(-x ** 2 / (M * t)))


def xwy_lhs(x, t, r, w, M=M_KERNEL):
    def f(y):
        return (1 + t) ** -0.5 * np.exp(-(x - w * y) ** 2 / (M * (1 + t))) * (1 + abs(y)) ** -r

    return windowed_quad(f, [(x / w, np.sqrt(M * (1 + t)) / w)] + _alg_windows())


def xwy_rhs(x, t, r, Mp=M_PRIME):
    return ((1 + abs(x) + np.sqrt(t)) ** -r
            + (1 + t) ** -0.5 * np.exp(-x ** 2 / (Mp * (1 + t))))


def xwy_nl_lhs(x, t, s, r, w, M=M_KERNEL):
    u = t - s

    def f(y):
        return ((1 + u) ** -0.5 * np.exp(-(x - w * y) ** 2 / (M * (1 + u)))
                * (1 + abs(y) + np.sqrt(s)) ** -r)

    return windowed_quad(f, [(x / w, np.sqrt(M * (1 + u)) / w), (0.0, 1 + np.sqrt(s))]
                         + _alg_windows())


def xwy_nl_rhs(x, t, s, r, Mp=M_PRIME):
    u = t - s
    return ((1 + abs(x) + np.sqrt(u) + np.sqrt(s)) ** -r
            + (1 + u) ** -0.5 * (1 + s) ** (-(r - 1) / 2) * np.exp(-x ** 2 / (Mp * (1 + t))))


def _draw(rng, n):
    """Randomized (x, t, s, r, w) with t log-uniform on [1e-3, 1e3] and |x| log-uniform on [1e-2, 1e3]."""
    t = 10 ** rng.uniform(-3, 3, n)
    s = t * rng.uniform(1e-3, 1 - 1e-3, n)
    x = rng.choice([-1.0, 1.0], n) * 10 ** rng.uniform(-2, 3, n)
    r = rng.choice(R_VALUES, n)
    w = rng.uniform(1e-3, 1.0, n)
    return x, t, s, r, w


def lemma_ratios(name, x, t, s, r, w):
    if name == "semigroup":
        return semigroup_ratio(x, t, s)
    if name == "linear3":
        return linear3_lhs(x, t, r) / linear3_rhs(x, t, r)
    if name == "linear4":
        return linear3_lhs(x, t, r) / linear4_rhs(x, t, r)
    if name == "xwy":
        return xwy_lhs(x, t, r, w) / xwy_rhs(x, t, r)
    if name == "xwy_nonlinear":
        return xwy_nl_lhs(x, t, s, r, w) / xwy_nl_rhs(x, t, s, r)
    raise ValueError(f"unknown lemma {name!r}")


LEMMAS = ("semigroup", "linear3", "linear4", "xwy", "xwy_nonlinear")


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    C: float
    max_validation_ratio: float
    n_calibration: int
    n_validation: int
    violations: int
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def check_lemma(name, n=200, seed=0, slack=2.0):
    """Fit C on ``n`` samples from ``seed`` and validate on ``n`` fresh samples."""
    cal = _draw(np.random.default_rng(seed), n)
    val = _draw(np.random.default_rng(seed + 1_000_003), n)
    rc = np.array([lemma_ratios(name, *p) for p in zip(*cal)])
    rv = np.array([lemma_ratios(name, *p) for p in zip(*val)])
    if not (np.all(np.isfinite(rc)) and np.all(np.isfinite(rv))):
        return LemmaCheck(name, float("nan"), float("nan"), n, n, n, False)
    C = float(rc.max())
    viol = int(np.sum(rv > slack * C))
    return LemmaCheck(name, C, float(rv.max()), n, n, viol, viol == 0)


def inequality_suite(n=200, seed=0, slack=2.0, lemmas=LEMMAS):
    """Pass/fail report for every estimate, keyed by lemma name."""
    return {name: check_lemma(name, n, seed, slack) for name in lemmas}
