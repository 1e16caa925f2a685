"""First-order Floquet systems, solution operators and the periodic Evans function.

The eigenvalue problem L_xi w = lambda w with
L_xi = (d/dx + i xi)^2 + a (d/dx + i xi) + df(u(x)) is written as
W' = A_xi(x, lambda) W for W = (w, w'), with

    A_xi = [[0, I], [lambda I + C_xi(x), -(a + 2 i xi) I]],
    C_xi = -df(u(x)) - (i a xi - xi^2) I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import newton

from .errors import ConvergenceError, IntegrationError, ZeroOnContour

RESCALE_THRESHOLD = 100.0


@dataclass(frozen=True, eq=False)
class FloquetSystem:
    """The 2n x 2n system W' = A_xi(x, lambda) W for a given profile."""

    profile: object
    xi: float
    lam: complex

    @property
    def n(self):
        return self.profile.n

    def blocks(self):
        """Scalars ``(shift, adiag)`` with C_xi = -df + shift I and A_xi = adiag I."""
        a, xi = self.profile.a, self.xi
        shift = -(1j * a * xi - xi * xi)
        return shift, -(a + 2j * xi)

    def matrix(self, x):
        n = self.n
        shift, adiag = self.blocks()
        m = np.zeros((2 * n, 2 * n), dtype=complex)
        eye = np.eye(n)
        m[:n, n:] = eye
        m[n:, :n] = (self.lam + shift) * eye - self.profile.coefficient(x)
        m[n:, n:] = adiag * eye
        return m

    def trace(self):
        return -self.n * (self.profile.a + 2j * self.xi)


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """F^{y->x}; ``error`` is an estimate of the absolute integration error."""

    from_y: float
    to_x: float
    matrix: np.ndarray
    error: float


def _scale(sys, auto_rescale):
    if auto_rescale and abs(sys.lam) > RESCALE_THRESHOLD:
        return float(np.sqrt(abs(sys.lam)))
    return 1.0


def _rhs_factory(sys, s):
    """Right-hand side for V = D^{-1} W with D = diag(I, s I)."""
    n = sys.n
    shift, adiag = sys.blocks()
    eye = np.eye(n)
    base = np.zeros((2 * n, 2 * n), dtype=complex)
    base[:n, n:] = s * eye
    base[n:, n:] = adiag * eye
    lower = (sys.lam + shift) * eye
    prof = sys.profile
    if prof.is_constant:
        m = base.copy()
        m[n:, :n] = (lower - prof.coeffs[0]) / s
        dim = 2 * n

        def rhs(x, v):
            return (m @ v.reshape(dim, -1)).ravel()
        return rhs, m

    dim = 2 * n

    def rhs(x, v):
        m = base.copy()
        m[n:, :n] = (lower - prof.coefficient(x)) / s
        return (m @ v.reshape(dim, -1)).ravel()
    return rhs, None


def propagate(sys, y, xs, tol=1e-10, auto_rescale=True, method="ode"):
    """F^{y->x} for every x in the monotone sequence ``xs``.

    Parameters
    ----------
    sys : FloquetSystem
    y : float
        Base point (identity data).
    xs : array_like
        Targets, all on one side of ``y`` and monotone away from it.
    tol : float
        Relative tolerance for the adaptive DOP853 integrator.
    auto_rescale : bool
        For |lambda| > 100, integrate the balanced variables (w, w'/|lambda|^{1/2}).
    method : {"ode", "expm"}
        ``expm`` is exact for constant coefficients only.

    Returns
    -------
    ndarray, shape (len(xs), 2n, 2n)
    """
    if not 1e-13 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-13, 1e-4]")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n2 = 2 * sys.n
    s = _scale(sys, auto_rescale)
    d = np.concatenate([np.ones(sys.n), s * np.ones(sys.n)])
    rhs, const = _rhs_factory(sys, s)
    out = np.empty((len(xs), n2, n2), dtype=complex)
    if method == "expm":
        if const is None:
            raise ValueError("expm propagation needs constant coefficients")
        for i, x in enumerate(xs):
            out[i] = expm(const * (x - y))
    else:
        span = xs[-1] - y if len(xs) else 0.0
        if span == 0.0:
            out[:] = np.eye(n2)
            return out
        signs = np.sign(xs - y)
        if np.any(signs * np.sign(span) < 0) or np.any(np.diff(xs) * np.sign(span) < 0):
            raise ValueError("targets must be monotone on one side of the base point")
        sol = solve_ivp(rhs, (y, xs[-1]), np.eye(n2, dtype=complex).ravel(),
                        method="DOP853", t_eval=xs, rtol=tol, atol=tol * 1e-3)
        if sol.status != 0:
            raise IntegrationError(
                f"integration failed at lambda={sys.lam}, xi={sys.xi}: {sol.message}. "
                "Try auto_rescale=True or a looser tolerance.")
        out[:] = sol.y.T.reshape(len(xs), n2, n2)
    if s != 1.0:
        out = d[None, :, None] * out / d[None, None, :]
    return out


def solution_operator(sys, y, x, tol=1e-10, auto_rescale=True, method="ode"):
    """F_xi^{y->x}: solution of dF/dx = A_xi F with F(y) = I."""
    m = propagate(sys, y, [x], tol=tol, auto_rescale=auto_rescale, method=method)[0]
    return PropagatorMatrix(float(y), float(x), m, float(tol * np.linalg.norm(m)))


def monodromy(sys, base_y=0.0, tol=1e-10, auto_rescale=True, method="ode"):
    """Monodromy F_xi^{y->y+1}."""
    return solution_operator(sys, base_y, base_y + 1.0, tol, auto_rescale, method)


def sorted_eigvals(m):
    """Eigenvalues sorted by modulus, ties by argument."""
    ev = np.linalg.eigvals(m)
    order = np.lexsort((np.angle(ev), np.round(np.abs(ev), 12)))
    return ev[order]


def evans(profile, lam, xi, tol=1e-10, auto_rescale=True):
    """D(lambda, xi) = det(Psi(lambda) - e^{i xi} I), Psi the xi = 0 monodromy."""
    if abs(xi) > np.pi + 1e-14:
        raise ValueError("|xi| must not exceed pi")
    psi = monodromy(FloquetSystem(profile, 0.0, complex(lam)), 0.0, tol, auto_rescale).matrix
    return complex(np.linalg.det(psi - np.exp(1j * xi) * np.eye(psi.shape[0])))


def evans_root(profile, xi, guess, tol=1e-10, xtol=1e-12, maxiter=50):
    """Zero of D(., xi) near ``guess`` by the secant method."""
    try:
        root = newton(lambda z: evans(profile, z, xi, tol), complex(guess),
                      x1=complex(guess) + 1e-3, tol=xtol, maxiter=maxiter)
    except RuntimeError as exc:
        raise ConvergenceError(f"secant iteration for D(., {xi}) failed: {exc}") from None
    return complex(root)


def circle_contour(center, radius, n=64):
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return center + radius * np.exp(1j * t)


def winding_number(profile, xi, contour, tol=1e-10, zero_threshold=1e-10, max_refine=12):
    """Winding number of D(., xi) along the closed polyline ``contour``.

    Each edge is subdivided until successive phase increments stay below
    pi/3, so the count is reliable as long as the contour keeps clear of
    zeros of D.
    """
    pts = np.asarray(contour, dtype=complex)
    if pts[0] == pts[-1]:
        pts = pts[:-1]

    def d(z):
        val = evans(profile, z, xi, tol)
        if abs(val) < zero_threshold:
            raise ZeroOnContour(f"|D| = {abs(val):.3e} at lambda = {z}")
        return val

    total = 0.0
    vals = [d(z) for z in pts]
    for j in range(len(pts)):
        z0, z1 = pts[j], pts[(j + 1) % len(pts)]
        d0, d1 = vals[j], vals[(j + 1) % len(pts)]
        stack = [(z0, z1, d0, d1, 0)]
        while stack:
            za, zb, da, db, depth = stack.pop()
            step = np.angle(db / da)
            if abs(step) < np.pi / 3 or depth >= max_refine:
                if depth >= max_refine and abs(step) >= np.pi / 3:
                    raise ZeroOnContour(f"phase of D not resolved near lambda = {za}")
                total += step
                continue
            zm = 0.5 * (za + zb)
            dm = d(zm)
            stack.append((zm, zb, dm, db, depth + 1))
            stack.append((za, zm, da, dm, depth + 1))
    return int(round(total / (2 * np.pi)))
