"""Closed forms for the constant-coefficient scalar operator d^2/dx^2 + a d/dx.

With profile speed ``a`` the Bloch eigenvalue problem has characteristic
roots mu_pm = (-a - 2 i xi +- sqrt(a^2 + 4 lambda)) / 2 (principal square
root), so Re mu_+ >= Re mu_-. Kernels are those of (L_xi - lambda)^{-1}:
the x-derivative jumps by +1 across x = y.
"""

import numpy as np


def mu_pm(lam, xi, a):
    """Return (mu_minus, mu_plus)."""
    root = np.sqrt(complex(a * a + 4 * lam))
    base = -a - 2j * xi
    return 0.5 * (base - root), 0.5 * (base + root)


def whole_line_kernel(lam, xi, a, x, y, derivative=False):
    mm, mp = mu_pm(lam, xi, a)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    mu = np.where(d > 0, mm, mp)
    val = np.exp(mu * d) / (mm - mp)
    return mu * val if derivative else val


def periodic_kernel(lam, xi, a, x, y, derivative=False):
    mm, mp = mu_pm(lam, xi, a)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    d = np.where(d > 0, d, d + 1.0)
    em = np.exp(mm * d) / ((mm - mp) * (1 - np.exp(mm)))
    ep = np.exp(mp * d) / ((mm - mp) * (1 - np.exp(mp)))
    if derivative:
        return mm * em - mp * ep
    return em - ep


def projections(lam, xi, a):
    """(Pi_plus, Pi_minus): Pi_plus projects onto the decaying mode (1, mu_-)."""
    mm, mp = mu_pm(lam, xi, a)
    pp = np.array([[-mp, 1.0], [-mm * mp, mm]], dtype=complex) / (mm - mp)
    return pp, np.eye(2) - pp


def decay_rate(lam, xi, a):
    """c = min(-Re mu_-, Re mu_+): exponential decay rate of the whole-line kernel."""
    mm, mp = mu_pm(lam, xi, a)
    return min(-mm.real, mp.real)


def images_tail(lam, xi, a, x, y, J):
    """Exact remainder sum_{|j|>J} of the image series at (x, y)."""
    mm, mp = mu_pm(lam, xi, a)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    # j >= J+1: x - y - j < 0, uses mu_plus; j <= -J-1: x - y - j > 0, uses mu_minus
    up = np.exp(mp * (d - (J + 1))) / (1 - np.exp(-mp))
    lo = np.exp(mm * (d + (J + 1))) / (1 - np.exp(mm))
    return (up + lo) / (mm - mp)


def heat_kernel(x, t, b=1.0):
    return np.exp(-np.asarray(x) ** 2 / (4 * b * t)) / np.sqrt(4 * np.pi * b * t)


def periodized_heat_kernel(x, t, b=1.0, drift=0.0, terms=None):
    """sum_j k(x - drift t - j, t) over enough images for full precision."""
    if terms is None:
        terms = int(np.ceil(12 * np.sqrt(b * t))) + 3
    x = np.asarray(x, dtype=float)[..., None] - drift * t
    j = np.arange(-terms, terms + 1)
    return heat_kernel(x - j, t, b).sum(axis=-1)
