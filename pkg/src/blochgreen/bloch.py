"""Fourier-Galerkin spectra of the Bloch operators and the critical spectral branch.

L_xi = (d/dx + i xi)^2 + a (d/dx + i xi) + df(u(x)) acting on 1-periodic
functions is discretized in the basis e^{2 pi i k x}, k = -K..K. The
unknown is stored mode-major: index (k + K) * n + component.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import BranchCollision, ProfileError, SpectrumError

FIT_RADIUS = 0.1 * np.pi
XI_CUT = 0.5


@dataclass(frozen=True, eq=False)
class BlochMatrix:
    xi: float
    K: int
    n: int
    matrix: np.ndarray

    @property
    def modes(self):
        return np.arange(-self.K, self.K + 1)


def symbol(a, xi, k):
    """Diagonal symbol (i(2 pi k + xi))^2 + a i(2 pi k + xi)."""
    s = 1j * (2 * np.pi * np.asarray(k) + xi)
    return s * s + a * s


def convolution_blocks(profile, K):
    """Fourier coefficients c_m of df for |m| <= 2K, shape (4K+1, n, n).

    Warns when the discarded tail of the coefficient series exceeds 1e-10.
    """
    k, chat = profile.coefficient_modes()
    n = profile.n
    out = np.zeros((4 * K + 1, n, n), dtype=complex)
    mask = np.abs(k) <= 2 * K
    out[k[mask] + 2 * K] = chat[mask]
    if np.any(~mask):
        tail = float(np.max(np.abs(chat[~mask])))
        if tail > 1e-10:
            warnings.warn(f"truncation K={K} drops coefficient modes of size {tail:.2e}",
                          RuntimeWarning, stacklevel=3)
    return out


def bloch_matrix(profile, xi, K=16):
    """Galerkin matrix of L_xi on modes -K..K."""
    if K < 8:
        raise ProfileError("Galerkin truncation K must be at least 8")
    n = profile.n
    m = 2 * K + 1
    conv = convolution_blocks(profile, K)
    modes = np.arange(-K, K + 1)
    # block (l, k) = c_{l - k}
    diff = modes[:, None] - modes[None, :] + 2 * K
    big = conv[diff]  # (m, m, n, n)
    mat = big.transpose(0, 2, 1, 3).reshape(m * n, m * n).copy()
    diag = np.repeat(symbol(profile.a, xi, modes), n)
    mat[np.diag_indices(m * n)] += diag
    return BlochMatrix(float(xi), int(K), n, mat)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition sorted by descending real part.

    ``right[:, j]`` and ``left[:, j]`` are Fourier-coefficient vectors with
    left^H right = I.
    """

    xi: float
    K: int
    n: int
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def eigenfunction(self, j, x):
        """Periodic eigenfunction q_j(x), shape (len(x), n)."""
        return fourier_eval(self.right[:, j], self.K, self.n, x)

    def dual(self, j, y):
        """Dual function qt_j(y), shape (len(y), n), with int qt_j q_k dy = delta_jk."""
        return fourier_eval(self.left[:, j].conj(), self.K, self.n, y, sign=-1)


def fourier_eval(coef, K, n, x, sign=1):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    modes = np.arange(-K, K + 1)
    phase = np.exp(sign * 2j * np.pi * np.outer(x, modes))
    return phase @ np.asarray(coef).reshape(2 * K + 1, n)


def spectrum(profile, xi, K=16):
    """All eigenvalues of the Galerkin matrix with biorthonormal eigenvectors."""
    bm = bloch_matrix(profile, xi, K)
    try:
        vals, left, right = sla.eig(bm.matrix, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(bm.matrix)
        raise SpectrumError(f"eigensolver failed at xi={xi}: {exc}", detail=cond) from None
    order = np.lexsort((-vals.imag, -vals.real))
    vals, left, right = vals[order], left[:, order], right[:, order]
    pair = np.einsum("ij,ij->j", left.conj(), right)
    left = left / pair.conj()
    return Spectrum(float(xi), int(K), profile.n, vals, right, left)


@dataclass(frozen=True)
class StabilityReport:
    D1: bool
    gap: float
    lambda0: complex
    D2: bool
    theta: float
    violating_xi: float | None
    max_real_outside: float

    def as_dict(self):
        return {"D1": self.D1, "gap": self.gap,
                "lambda0": [self.lambda0.real, self.lambda0.imag],
                "D2": self.D2, "theta": self.theta, "violating_xi": self.violating_xi,
                "max_real_outside": self.max_real_outside}


def check_diffusive_stability(profile, K=16, xi_samples=64, xi_cut=XI_CUT):
    """Numerical check of the simple zero eigenvalue and the quadratic spectral bound.

    D1 holds when the eigenvalue of L_0 closest to 0 has modulus < 1e-8 and
    is separated from the rest of the spectrum. D2 fits
    theta = min (-max Re sigma(L_xi)) / xi^2 over 0 < |xi| <= xi_cut and
    requires max Re sigma(L_xi) < 0 for |xi| > xi_cut.
    """
    if xi_samples < 32:
        raise ValueError("xi_samples must be at least 32")
    s0 = spectrum(profile, 0.0, K)
    j0 = int(np.argmin(np.abs(s0.values)))
    lam0 = complex(s0.values[j0])
    others = np.delete(s0.values, j0)
    gap = float(np.min(np.abs(others - lam0)))
    d1 = abs(lam0) < 1e-8 and gap > 1e-6 and np.all(others.real < -1e-8)

    xis = -np.pi + 2 * np.pi * np.arange(xi_samples) / xi_samples
    theta = np.inf
    worst_xi = None
    max_out = -np.inf
    d2 = True
    for xi in xis:
        if xi == 0.0:
            continue
        top = float(spectrum(profile, xi, K).values[0].real)
        if abs(xi) <= xi_cut:
            ratio = -top / xi ** 2
            if ratio < theta:
                theta = ratio
                if ratio <= 0:
                    worst_xi = float(xi)
        else:
            max_out = max(max_out, top)
            if top >= 0 and worst_xi is None:
                worst_xi = float(xi)
    if not np.isfinite(theta):
        theta = float("nan")
    d2 = bool(theta > 0 and max_out < 0 and s0.values[0].real <= 1e-8)
    if not d2 and worst_xi is None and s0.values[0].real > 1e-8:
        worst_xi = 0.0
    return StabilityReport(bool(d1), gap, lam0, d2, float(theta), worst_xi, float(max_out))


@dataclass(frozen=True, eq=False)
class SpectralBranch:
    """Critical branch lambda(xi) near 0 with eigenfunctions.

    ``q_coef[i]`` and ``qt_coef[i]`` hold Fourier coefficients of q(., xi_i)
    and of the dual qt(., xi_i); ``qt`` is normalized by the bilinear
    pairing int qt q dy = 1. ``surrogate`` is True when q(., 0) was not
    pinned to the stored wave derivative.
    """

    xi_grid: np.ndarray
    lambda_values: np.ndarray
    lambda1: complex
    lambda2: complex
    K: int
    n: int
    q_coef: np.ndarray
    qt_coef: np.ndarray
    surrogate: bool
    fit_residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def a_eff(self):
        """Drift i lambda1 (real for real coefficients)."""
        return 1j * self.lambda1

    @property
    def b(self):
        return -self.lambda2.real

    def index(self, xi):
        return int(np.argmin(np.abs(self.xi_grid - xi)))

    def q(self, x, xi=0.0):
        return fourier_eval(self.q_coef[self.index(xi)], self.K, self.n, x)

    def qt(self, y, xi=0.0):
        return fourier_eval(self.qt_coef[self.index(xi)], self.K, self.n, y, sign=-1)

    def summary(self):
        return {"lambda1": [self.lambda1.real, self.lambda1.imag],
                "lambda2": [self.lambda2.real, self.lambda2.imag],
                "a_eff": self.a_eff.real, "a_eff_imag": self.a_eff.imag,
                "b": self.b, "lambda2_imag": self.lambda2.imag,
                "surrogate_zero_mode": self.surrogate,
                "fit_residual": self.fit_residual}


def _pick(values, target):
    dist = np.abs(values - target)
    order = np.argsort(dist)
    return int(order[0]), float(dist[order[0]]), float(dist[order[1]]) if len(order) > 1 else np.inf


def track(profile, xis, K=16, start_index=None, min_step=1e-6):
    """Nearest-eigenvalue continuation of the branch through lambda(0) = 0.

    ``xis`` must be sorted and contain 0. Between grid points the step is
    halved whenever the nearest and second-nearest candidates are not
    clearly separated relative to the predicted value. Returns eigenvalues
    and the ``Spectrum`` objects with the chosen index at each grid point.
    """
    xis = np.asarray(xis, dtype=float)
    i0 = int(np.argmin(np.abs(xis)))
    if abs(xis[i0]) > 1e-14:
        raise ValueError("branch grid must contain xi = 0")
    s0 = spectrum(profile, 0.0, K)
    j0 = int(np.argmin(np.abs(s0.values))) if start_index is None else start_index
    vals = np.empty(len(xis), dtype=complex)
    specs = [None] * len(xis)
    picks = np.zeros(len(xis), dtype=int)
    vals[i0], specs[i0], picks[i0] = s0.values[j0], s0, j0
    _check_gap(s0.values, j0, 0.0)

    for direction in (1, -1):
        hist = [(0.0, s0.values[j0])]
        i = i0
        while 0 <= i + direction < len(xis):
            target = xis[i + direction]
            cur = xis[i]
            h = target - cur
            while True:
                nxt = cur + h
                if len(hist) >= 2:
                    (x1, l1), (x2, l2) = hist[-2], hist[-1]
                    pred = l2 + (l2 - l1) * (nxt - x2) / (x2 - x1)
                else:
                    pred = hist[-1][1]
                sp = spectrum(profile, nxt, K)
                j, d1, d2 = _pick(sp.values, pred)
                step = abs(sp.values[j] - hist[-1][1]) + 1e-14
                if d2 > 2.0 * d1 + 0.5 * step or abs(h) < min_step:
                    _check_gap(sp.values, j, nxt)
                    hist.append((nxt, sp.values[j]))
                    cur = nxt
                    if abs(cur - target) < 1e-15:
                        break
                    h = target - cur
                else:
                    h *= 0.5
            i += direction
            vals[i], specs[i], picks[i] = sp.values[j], sp, j
    return vals, specs, picks


def _check_gap(values, j, xi):
    others = np.delete(values, j)
    gap = float(np.min(np.abs(others - values[j])))
    if gap < 1e-6:
        raise BranchCollision(f"branch collision at xi={xi}: gap {gap:.2e}", xi=float(xi))


def _normalize_pair(spec, j, ref):
    """Right/left coefficient vectors of mode j, phase-fixed against ``ref``."""
    c = spec.right[:, j].copy()
    d = spec.left[:, j].copy()  # left^H right = 1 already
    if ref is not None:
        ip = np.vdot(ref, c)
        scale = np.linalg.norm(ref) / np.linalg.norm(c)
        rot = np.conj(ip) / abs(ip) if abs(ip) > 0 else 1.0
        c = c * rot * scale
        d = d / np.conj(rot * scale)
    return c, d


def critical_branch(profile, K=16, xi_max=0.1 * np.pi, n_xi=41):
    """Track lambda(xi) on |xi| <= xi_max and extract lambda1, lambda2, q, qt.

    lambda1 and lambda2 come from a least-squares fit of lambda(xi) against
    (xi, xi^2, xi^3) on |xi| <= min(0.1 pi, xi_max) using at least 21 points.
    q(., 0) is set equal to the stored wave derivative when available,
    otherwise it is normalized to unit L2 norm and flagged as a surrogate.
    """
    if n_xi % 2 == 0:
        n_xi += 1
    xis = np.linspace(-xi_max, xi_max, n_xi)
    vals, specs, picks = track(profile, xis, K)
    i0 = int(np.argmin(np.abs(xis)))
    if abs(vals[i0]) > 1e-6:
        raise SpectrumError(f"no eigenvalue near 0 at xi=0 (closest {vals[i0]:.3e})",
                            detail=abs(vals[i0]))

    # zero mode
    s0, j0 = specs[i0], picks[i0]
    c0 = s0.right[:, j0].copy()
    surrogate = True
    deriv = profile.derivative_samples
    if deriv is not None and np.max(np.abs(deriv)) > 0:
        q = fourier_eval(c0, K, profile.n, profile.x)
        alpha = np.vdot(q.ravel(), deriv.ravel()) / np.vdot(q.ravel(), q.ravel())
        c0 = c0 * alpha
        surrogate = False
    else:
        # unit L2 norm, phase so that the largest coefficient is real positive
        c0 = c0 / np.linalg.norm(c0)
        big = c0[np.argmax(np.abs(c0))]
        c0 = c0 * np.conj(big) / abs(big)
    ref = c0

    m = (2 * K + 1) * profile.n
    q_coef = np.empty((len(xis), m), dtype=complex)
    qt_coef = np.empty((len(xis), m), dtype=complex)
    for i, (sp, j) in enumerate(zip(specs, picks)):
        if i == i0:
            c = c0
            d = sp.left[:, j] / np.conj(np.vdot(sp.left[:, j], c0))
        else:
            c, d = _normalize_pair(sp, j, ref)
        q_coef[i] = c
        qt_coef[i] = d.conj()

    r = min(FIT_RADIUS, xi_max)
    sel = np.abs(xis) <= r + 1e-15
    fx, fl = xis[sel], vals[sel]
    if sel.sum() < 21:
        fx = np.linspace(-r, r, 41)
        fl, _, _ = track(profile, fx, K)
    design = np.stack([fx, fx ** 2, fx ** 3], axis=1)
    coef, *_ = np.linalg.lstsq(design.astype(complex), fl, rcond=None)
    resid = float(np.max(np.abs(design @ coef - fl)))
    return SpectralBranch(xis, vals, complex(coef[0]), complex(coef[1]), int(K),
                          profile.n, q_coef, qt_coef, surrogate, resid)
