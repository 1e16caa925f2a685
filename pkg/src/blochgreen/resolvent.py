"""Whole-line and periodic resolvent kernels from Floquet modes.

Kernels are those of (L_xi - lambda)^{-1} in the stacked form
(G, dG/dx): for x > y the whole-line kernel is F^{y->x} Pi_+(y) e and
for x <= y it is -F^{y->x} Pi_-(y) e, with e = (0, I)^T. The periodic
kernel replaces Pi_+ by M_+ = (I - F^{y->y+1})^{-1} and -Pi_- by
-M_- = (I - F^{y->y+1})^{-1} F^{y->y+1}.

Everything is assembled from Floquet modes w_k with w_k(x + 1) = m_k w_k(x).
Growing modes are integrated forward from x = 0 and decaying ones
backward from x = 1, so each is computed in the direction in which it
grows and no cancellation occurs even for large |lambda|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import floquet
from .errors import IntegrationError, SpectrumError

UNIT_CIRCLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FloquetModes:
    """Floquet modes sampled at the fractional positions ``nodes`` in [0, 1].

    ``W[i][:, k]`` is w_k(nodes[i]); ``m[k]`` the multiplier; ``stable[k]``
    is True when |m_k| < 1.
    """

    nodes: np.ndarray
    W: np.ndarray
    m: np.ndarray
    stable: np.ndarray
    n: int

    def at(self, r):
        """Mode matrix at fractional positions ``r`` (must be nodes)."""
        idx = np.searchsorted(self.nodes, r)
        if np.any(idx >= len(self.nodes)) or np.any(np.abs(self.nodes[idx] - r) > 1e-13):
            raise ValueError("position is not a sampled node")
        return self.W[idx]

    def coefficients(self, r):
        """c(y) = W(y)^{-1} e, shape (len(r), 2n, n)."""
        w = self.at(r)
        n = self.n
        e = np.zeros((2 * n, n))
        e[n:] = np.eye(n)
        scale = np.linalg.norm(w, axis=1, keepdims=True)
        sol = np.linalg.solve(w / scale, np.broadcast_to(e, w.shape[:1] + e.shape))
        return sol / scale.transpose(0, 2, 1)


def floquet_modes(sys, nodes, tol=1e-10, auto_rescale=True, require_split=True):
    """Compute Floquet modes of ``sys`` on the fractional grid ``nodes``.

    Parameters
    ----------
    require_split : bool
        Raise :class:`SpectrumError` when a multiplier lies within 1e-6 of
        the unit circle (needed for whole-line kernels and projections).
    """
    nodes = np.unique(np.concatenate([np.asarray(nodes, dtype=float), [0.0, 1.0]]))
    if nodes[0] < 0 or nodes[-1] > 1:
        raise ValueError("nodes must lie in [0, 1]")
    n2 = 2 * sys.n
    fwd = floquet.propagate(sys, 0.0, nodes[1:], tol, auto_rescale)
    fwd = np.concatenate([np.eye(n2, dtype=complex)[None], fwd])
    bwd = floquet.propagate(sys, 1.0, nodes[-2::-1], tol, auto_rescale)[::-1]
    bwd = np.concatenate([bwd, np.eye(n2, dtype=complex)[None]])
    F, Finv = fwd[-1], bwd[0]

    mf, vf = np.linalg.eig(F)
    mb, vb = np.linalg.eig(Finv)
    gap = np.abs(np.abs(mf) - 1.0)
    if require_split and np.min(gap) < UNIT_CIRCLE_TOL:
        k = int(np.argmin(gap))
        raise SpectrumError(
            f"spectrum on unit circle: Floquet multiplier {mf[k]:.6g} has modulus "
            f"within {UNIT_CIRCLE_TOL} of 1 (lambda={sys.lam}, xi={sys.xi})", detail=mf[k])
    # an eigenvalue of a matrix with entries of size |F| is only resolved
    # when it is well above eps |F|; decaying multipliers are therefore taken
    # from F^{-1} and growing ones from F
    eps = 1e4 * np.finfo(float).eps
    ok_f = (np.abs(mf) >= 1.0) & (np.abs(mf) > eps * np.linalg.norm(F, 2))
    ok_b = (np.abs(mb) > 1.0) & (np.abs(mb) > eps * np.linalg.norm(Finv, 2))
    iu = np.flatnonzero(ok_f)
    ist = np.flatnonzero(ok_b)
    if len(iu) + len(ist) != n2:
        raise IntegrationError(
            f"could not resolve {n2} Floquet multipliers at lambda={sys.lam}, xi={sys.xi} "
            f"(found {len(iu)} growing and {len(ist)} decaying)")
    # mode order: stable first, sorted by modulus ascending
    m_st = 1.0 / mb[ist]
    m_un = mf[iu]
    ost = np.argsort(np.abs(m_st))
    oun = np.argsort(np.abs(m_un))
    vs = vb[:, ist][:, ost]
    vu = vf[:, iu][:, oun]
    m = np.concatenate([m_st[ost], m_un[oun]])
    W = np.concatenate([bwd @ vs * m_st[ost], fwd @ vu], axis=2)
    stable = np.abs(m) < 1.0
    return FloquetModes(nodes, W, m, stable, sys.n)


@dataclass(frozen=True, eq=False)
class DichotomyProjections:
    base_y: float
    Pi_plus: np.ndarray
    Pi_minus: np.ndarray
    multipliers: np.ndarray
    stable: np.ndarray
    monodromy: np.ndarray

    @property
    def moduli(self):
        return np.abs(self.multipliers)


def dichotomy_projections(sys, base_y=0.0, tol=1e-10, auto_rescale=True):
    """Spectral projections of F^{y->y+1} split by |multiplier| < 1 (Pi_plus) and > 1."""
    r = float(base_y) % 1.0
    modes = floquet_modes(sys, [r], tol, auto_rescale)
    w = modes.at(np.array([r]))[0]
    winv = np.linalg.inv(w)
    mask = modes.stable.astype(float)
    pp = (w * mask) @ winv
    pm = (w * (1 - mask)) @ winv
    mono = (w * modes.m) @ winv
    return DichotomyProjections(float(base_y), pp, pm, modes.m, modes.stable, mono)


@dataclass(frozen=True, eq=False)
class KernelField:
    """Kernel samples ``G[i, j]`` = G(x_i, y_j) and ``dG`` its x-derivative (n x n blocks)."""

    xi: float
    lam: complex
    x: np.ndarray
    y: np.ndarray
    G: np.ndarray
    dG: np.ndarray
    kind: str

    def scalar(self):
        return self.G[..., 0, 0]


def _assemble(modes, x, y, kind):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, rx = np.divmod(x, 1.0)
    sy, ry = np.divmod(y, 1.0)
    if kind == "periodic":
        # allow x = 1 as the right end of the cell
        at_end = (x == 1.0)
        sx = np.where(at_end, 0.0, sx)
        rx = np.where(at_end, 1.0, rx)
    Wx = modes.at(rx)                        # (Nx, 2n, 2n)
    cy = modes.coefficients(ry)              # (Ny, 2n, n)
    m = modes.m
    above = (x[:, None] > y[None, :])[..., None]
    shift = (sx[:, None] - sy[None, :])[..., None]
    if kind == "whole":
        logm = np.log(m.astype(complex))
        with np.errstate(over="ignore", invalid="ignore"):
            fac = np.exp(shift * logm)
        g = np.where(above, np.where(modes.stable, fac, 0.0),
                     np.where(modes.stable, 0.0, -fac))
    else:
        g = np.where(above, 1.0 / (1.0 - m), m / (1.0 - m))
        g = np.broadcast_to(g, above.shape[:2] + m.shape)
    stacked = np.einsum("iak,ijk,jkb->ijab", Wx, g, cy)
    n = modes.n
    return stacked[:, :, :n, :], stacked[:, :, n:, :]


def _nodes(*arrs):
    r = np.concatenate([np.mod(np.asarray(a, dtype=float), 1.0) for a in arrs])
    return r


def whole_line_kernel(sys, x, y=None, tol=1e-10, auto_rescale=True):
    """Whole-line kernel of (L_xi - lambda)^{-1} at arbitrary real x and y.

    Parameters
    ----------
    x : array_like
        Evaluation points; may extend over several periods.
    y : array_like, optional
        Source points (defaults to ``x``).
    """
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    modes = floquet_modes(sys, _nodes(x, y), tol, auto_rescale)
    G, dG = _assemble(modes, x, y, "whole")
    return KernelField(sys.xi, sys.lam, x, y, G, dG, "whole-line")


def periodic_kernel(sys, x, y=None, tol=1e-10, auto_rescale=True, singular_tol=1e-10):
    """Periodic-cell kernel of (L_xi - lambda)^{-1} for x in [0, 1], y in [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(y < 0) or np.any(y >= 1):
        raise ValueError("periodic kernel needs x in [0, 1] and y in [0, 1)")
    modes = floquet_modes(sys, np.concatenate([x, y]), tol, auto_rescale, require_split=False)
    dist = np.abs(1.0 - modes.m)
    if np.min(dist) < singular_tol:
        F = floquet.monodromy(sys, 0.0, tol, auto_rescale).matrix
        smin = np.linalg.svd(np.eye(len(F)) - F, compute_uv=False)[-1]
        raise SpectrumError(
            f"I - F is singular at lambda={sys.lam}, xi={sys.xi}: smallest singular value "
            f"{smin:.3e}", detail=smin)
    G, dG = _assemble(modes, x, y, "periodic")
    return KernelField(sys.xi, sys.lam, x, y, G, dG, "periodic")


def periodic_multipliers(sys, base_y=0.0, tol=1e-10, auto_rescale=True):
    """(M_plus, M_minus) = ((I - F)^{-1}, -(I - F)^{-1} F) with F = F^{y->y+1}."""
    F = floquet.monodromy(sys, base_y, tol, auto_rescale).matrix
    inv = np.linalg.inv(np.eye(len(F)) - F)
    return inv, -inv @ F


@dataclass(frozen=True)
class ImagesResult:
    deviation: float
    bound: float
    rate: float
    prefactor: float
    J: int


def decay_rate(modes):
    """c = -log of the largest stable multiplier modulus, limited by the unstable side."""
    am = np.abs(modes.m)
    c_st = -np.log(np.max(am[modes.stable])) if modes.stable.any() else np.inf
    c_un = np.log(np.min(am[~modes.stable])) if (~modes.stable).any() else np.inf
    return float(min(c_st, c_un))


def images_sum(sys, x, y, J, tol=1e-10, auto_rescale=True):
    """sum_{|j| <= J} whole-line kernel at (x, y + j), shape (Nx, Ny, n, n)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = (y[None, :] + np.arange(-J, J + 1)[:, None]).ravel()
    modes = floquet_modes(sys, _nodes(x, y), tol, auto_rescale)
    G, _ = _assemble(modes, x, ys, "whole")
    return G.reshape(len(x), 2 * J + 1, len(y), sys.n, sys.n).sum(axis=1), modes


def method_of_images_check(sys, J, x, y=None, tol=1e-10, auto_rescale=True):
    """Compare the periodic kernel with the truncated image sum of whole-line kernels.

    Returns the max deviation over the grid together with the geometric
    tail bound K e^{-cJ} / (1 - e^{-c}), where c is the decay rate read off
    the Floquet multipliers and K is fitted from the first few images.
    """
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    per = periodic_kernel(sys, x, y, tol, auto_rescale).G
    total, modes = images_sum(sys, x, y, J, tol, auto_rescale)
    c = decay_rate(modes)
    if not c > 0:
        raise SpectrumError("whole-line kernel does not decay", detail=c)
    # fit K from |G(x, y + j)| e^{c(|j| - 1)} over j = +-1..+-3
    ks = []
    for j in (-3, -2, -1, 1, 2, 3):
        g, _ = _assemble(modes, x, y + j, "whole")
        ks.append(np.max(np.abs(g)) * np.exp(c * (abs(j) - 1)))
    K = float(max(ks))
    dev = float(np.max(np.abs(per - total)))
    bound = 2.0 * K * np.exp(-c * J) / (1.0 - np.exp(-c))
    return ImagesResult(dev, bound, c, K, int(J))


@dataclass(frozen=True)
class HighFrequencyFit:
    prefactor: float
    rate: float
    scatter: float
    sup_scaled: np.ndarray
    lams: np.ndarray


def high_frequency_modulus_check(profile, xi, lams, x, y=None, tol=1e-10, d_max=0.25):
    """Fit log|G| + log|lambda|^{1/2} = log C - rate |lambda|^{1/2} d, d = periodic distance.

    Only pairs with d <= ``d_max`` enter the fit, so the nearest image
    dominates. Also returns sup_{x,y} |G| |lambda|^{1/2} per lambda.
    """
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    d = np.abs(x[:, None] - y[None, :])
    d = np.minimum(d, 1.0 - d)
    rows, rhs, sups = [], [], []
    for lam in lams:
        kf = periodic_kernel(floquet.FloquetSystem(profile, xi, complex(lam)), x, y, tol)
        mod = np.linalg.norm(kf.G, ord=2, axis=(2, 3)) if profile.n > 1 else np.abs(kf.G[..., 0, 0])
        if not np.all(np.isfinite(mod)):
            raise SpectrumError(f"non-finite kernel at lambda={lam}")
        s = np.sqrt(abs(lam))
        sups.append(float(np.max(mod) * s))
        sel = (d <= d_max) & (mod > 0)
        rows.append(np.stack([np.ones(sel.sum()), -s * d[sel]], axis=1))
        rhs.append(np.log(mod[sel]) + np.log(s))
    A = np.concatenate(rows)
    b = np.concatenate(rhs)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    scatter = float(np.sqrt(np.mean((A @ coef - b) ** 2)))
    return HighFrequencyFit(float(np.exp(coef[0])), float(coef[1]), scatter,
                            np.array(sups), np.asarray(lams))
