"""Time-domain Green functions G(x, t; y) of u_t = L u on the line.

Three independent routes are provided:

* ``green_bloch``: inverse Bloch transform, G = (1/2 pi) int e^{i xi (x - y)}
  [e^{L_xi t} delta_y](x) d xi, with the Galerkin matrix exponential and the
  trapezoidal rule in xi. With n_xi nodes this is exactly the Green function
  on a ring of n_xi periods.
* ``green_direct``: Strang-split spectral time stepping of delta data on
  such a ring.
* ``green_laplace``: inverse Laplace transform of the whole-line resolvent
  kernel along a parabolic contour.

``leading_split`` subtracts the heat-kernel leading term built from the
critical spectral branch and ``fit_residual_envelope`` fits the Gaussian
envelope of what is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import bloch, resolvent
from .errors import ConvergenceError, SpectrumError
from .floquet import FloquetSystem
from .profiles import TrigInterpolant, grid

T_MIN = 0.05


@dataclass(frozen=True, eq=False)
class GreenField:
    """Samples ``G[i, j]`` = G(x_i, t; y_j) as (n, n) blocks (real part)."""

    t: float
    x: np.ndarray
    y: np.ndarray
    G: np.ndarray
    route: str
    imag_max: float = 0.0
    info: dict = field(default_factory=dict)

    def scalar(self):
        return self.G[..., 0, 0]


def _expm_eig(mat, t):
    """exp(t M) by eigendecomposition when well conditioned, else scaling and squaring."""
    vals, vecs = np.linalg.eig(mat)
    if np.linalg.cond(vecs) < 1e8:
        return (vecs * np.exp(t * vals)) @ np.linalg.inv(vecs)
    return sla.expm(t * mat)


def _fourier_rows(x, K, n, xi, deriv=False):
    """Rows e^{i xi x} e^{2 pi i k x} (times i(2 pi k + xi) if deriv), shape (len(x) n, (2K+1) n)."""
    modes = np.arange(-K, K + 1)
    wav = 2 * np.pi * modes + xi
    ph = np.exp(1j * np.outer(x, wav))
    if deriv:
        ph = ph * (1j * wav)
    if n == 1:
        return ph
    return np.kron(ph, np.eye(n))


def _bloch_sum(profile, t, x, y, K, xis, weights, derivative_y=False):
    n = profile.n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros((len(x) * n, len(y) * n), dtype=complex)
    for xi, w in zip(xis, weights):
        mat = bloch.bloch_matrix(profile, xi, K).matrix
        ex = _expm_eig(mat, t)
        px = _fourier_rows(x, K, n, xi)
        # conj(i w e^{i w y}) = d/dy e^{-i w y}, so the conjugated rows give dG/dy directly
        py = _fourier_rows(y, K, n, xi, deriv=derivative_y)
        out += w * (px @ ex) @ py.conj().T
    out = out.reshape(len(x), n, len(y), n).transpose(0, 2, 1, 3)
    return out


def _pack(t, x, y, vals, route, **info):
    imag = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    return GreenField(float(t), np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                      vals.real.copy(), route, imag, dict(info))


def bloch_nodes(n_xi):
    """Trapezoidal nodes -pi + 2 pi j / n_xi (n_xi even, so xi = 0 is a node)."""
    return -np.pi + 2 * np.pi * np.arange(n_xi) / n_xi


def green_bloch(profile, t, x, y, K=16, n_xi=256, check=False, derivative_y=False,
                t_min=T_MIN):
    """Green function by inverse Bloch quadrature.

    Parameters
    ----------
    x, y : array_like
        Absolute positions on the line.
    K : int
        Galerkin truncation per Bloch operator.
    n_xi : int
        Number of trapezoidal nodes in xi (even). The result is exact for
        the ring of n_xi periods, so |x - y - a t| must stay well inside it.
    check : bool
        Repeat with 2 n_xi nodes and raise ``ConvergenceError`` if the
        result moves by more than 1e-5.
    derivative_y : bool
        Return dG/dy instead of G.
    """
    if t < t_min:
        raise ValueError(f"t={t} below t_min={t_min}; use green_direct or green_laplace")
    if n_xi % 2:
        raise ValueError("n_xi must be even")
    xis = bloch_nodes(n_xi)
    vals = _bloch_sum(profile, t, x, y, K, xis, np.full(n_xi, 1.0 / n_xi), derivative_y)
    change = None
    if check:
        xis2 = bloch_nodes(2 * n_xi)
        vals2 = _bloch_sum(profile, t, x, y, K, xis2, np.full(2 * n_xi, 0.5 / n_xi), derivative_y)
        change = float(np.max(np.abs(vals2 - vals)))
        if change > 1e-5:
            raise ConvergenceError(f"xi quadrature not converged: doubling n_xi moved G by {change:.2e}")
    return _pack(t, x, y, vals, "bloch-quadrature", n_xi=n_xi, K=K, doubling_change=change)


def green_torus(profile, t, x, y, cells=1, K=16):
    """Green function on the ring of ``cells`` periods (cells = 1: the periodic cell)."""
    xis = np.mod(2 * np.pi * np.arange(cells) / cells + np.pi, 2 * np.pi) - np.pi
    vals = _bloch_sum(profile, t, x, y, K, xis, np.full(cells, 1.0 / cells))
    return _pack(t, x, y, vals, "bloch-quadrature", cells=cells, K=K)


# direct evolution

@dataclass(frozen=True, eq=False)
class RingStepper:
    """Strang splitting for u_t = u_xx + a u_x + c(x) u on a ring of ``cells`` periods.

    The constant-coefficient part is applied exactly in Fourier space; the
    coefficient part exactly pointwise. One step is
    exp(C dt/2) exp(D dt) exp(C dt/2).
    """

    profile: object
    cells: int
    points_per_cell: int
    dt: float

    def __post_init__(self):
        n, ppc = self.profile.n, self.points_per_cell
        N = self.cells * ppc
        k = 2 * np.pi * np.fft.fftfreq(N, d=1.0 / ppc)
        k1 = k.copy()
        k1[N // 2] = 0.0
        lin = np.exp((-(k ** 2) + 1j * self.profile.a * k1) * self.dt)
        object.__setattr__(self, "_lin", lin)
        if ppc == self.profile.grid_size:
            cell = self.profile.coeffs
        else:
            interp = TrigInterpolant(self.profile.coeffs)
            cell = np.array([interp(s) for s in grid(ppc)])
        if n == 1:
            half = np.exp(0.5 * self.dt * cell[:, 0, 0])
        else:
            half = np.array([sla.expm(0.5 * self.dt * c) for c in cell])
        object.__setattr__(self, "_half", np.tile(half, (self.cells,) + (1,) * (half.ndim - 1)))

    @property
    def x(self):
        return np.arange(self.cells * self.points_per_cell) / self.points_per_cell

    def _react(self, u):
        if self.profile.n == 1:
            return self._half[:, None] * u
        return np.einsum("xab,xbc->xac", self._half, u)

    def step(self, u):
        """Advance samples ``u`` (shape (N, ...) ) by one step."""
        u = self._react(u)
        uh = np.fft.fft(u, axis=0)
        uh *= self._lin.reshape((-1,) + (1,) * (u.ndim - 1))
        u = np.fft.ifft(uh, axis=0)
        u = self._react(u)
        return u


@dataclass(frozen=True, eq=False)
class RingPropagator:
    """Exact exp(L dt) for the spectrally discretized scalar operator on a ring.

    On a ring of P cells with m points per cell, the DFT index n = j + P l
    carries the Bloch wavenumber 2 pi j / P, and multiplication by the
    1-periodic c(x) only couples indices in the same residue class j. The
    grid operator is therefore block diagonal with P blocks of size m, and
    each block is exponentiated once. Unlike ``RingStepper`` there is no
    splitting error, which matters for long times: the O(dt^2) shift of the
    zero eigenvalue under splitting grows exponentially in t.
    """

    profile: object
    cells: int
    points_per_cell: int
    dt: float

    def __post_init__(self):
        if self.profile.n != 1:
            raise ValueError("RingPropagator is implemented for scalar profiles")
        P, m = self.cells, self.points_per_cell
        N = P * m
        if m == self.profile.grid_size:
            cell = self.profile.coeffs[:, 0, 0]
        else:
            interp = TrigInterpolant(self.profile.coeffs)
            cell = np.array([interp(s)[0, 0] for s in grid(m)])
        chat = np.fft.fft(cell) / m
        kap = 2 * np.pi * np.fft.fftfreq(N, d=1.0 / m)
        kap1 = kap.copy()
        kap1[N // 2] = 0.0
        diag = -kap ** 2 + 1j * self.profile.a * kap1
        ls = np.arange(m)
        conv = chat[(ls[:, None] - ls[None, :]) % m]
        blocks = np.empty((P, m, m), dtype=complex)
        for j in range(P):
            idx = j + P * ls
            blocks[j] = sla.expm(self.dt * (np.diag(diag[idx]) + conv))
        object.__setattr__(self, "_blocks", blocks)

    def step(self, u):
        """exp(L dt) u for real or complex samples of shape (N,) or (N, k)."""
        P, m = self.cells, self.points_per_cell
        uh = np.fft.fft(u, axis=0)
        shp = uh.shape
        # uh[j + P l] -> block j, position l
        blk = uh.reshape((m, P) + shp[1:])
        blk = np.moveaxis(blk, 1, 0)                       # (P, m, ...)
        out = np.einsum("jab,jb...->ja...", self._blocks, blk)
        out = np.moveaxis(out, 0, 1).reshape(shp)
        res = np.fft.ifft(out, axis=0)
        return res.real if np.isrealobj(u) else res


def _delta_columns(x, y_idx, n, spacing, width):
    """Initial data, shape (N, Ny) for n = 1 and (N, n, Ny n) otherwise."""
    N = len(x)
    L = N * spacing
    cols = np.zeros((N, len(y_idx)), dtype=complex)
    for j, iy in enumerate(y_idx):
        if width == 0.0:
            cols[iy, j] = 1.0 / spacing
        else:
            d = x - x[iy]
            d = (d + 0.5 * L) % L - 0.5 * L
            cols[:, j] = np.exp(-d ** 2 / (2 * width ** 2)) / np.sqrt(2 * np.pi * width ** 2)
    if n == 1:
        return cols
    out = np.zeros((N, n, len(y_idx), n), dtype=complex)
    for a in range(n):
        out[:, a, :, a] = cols
    return out.reshape(N, n, len(y_idx) * n)


def green_direct(profile, times, y, cells=256, points_per_cell=None, dt=0.005,
                 width=0.0, richardson=True, x_origin=None, growth_limit=1e6):
    """Green function by time stepping delta data on a ring of ``cells`` periods.

    Parameters
    ----------
    times : float or sequence of float
        Output times; each must be a multiple of ``dt``.
    y : array_like
        Source points, snapped to the simulation grid.
    width : float
        Gaussian mollification width of the initial delta (0: grid delta).
    richardson : bool
        Combine step sizes dt and dt/2 as (4 G_{dt/2} - G_dt)/3.
    x_origin : float, optional
        Left end of the ring (default: centered on the sources' cell).

    Returns
    -------
    list of GreenField, one per time, on the full ring grid.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ppc = points_per_cell or profile.grid_size
    y = np.asarray(y, dtype=float)
    if x_origin is None:
        x_origin = np.floor(np.min(y)) - cells // 2
    if x_origin != np.floor(x_origin):
        raise ValueError("x_origin must be an integer so the coefficients stay aligned")
    x = x_origin + np.arange(cells * ppc) / ppc
    y_idx = np.rint((y - x_origin) * ppc).astype(int)
    if np.any(np.abs(x[y_idx] - y) > 1e-12):
        raise ValueError("source points must lie on the simulation grid")
    n = profile.n

    def run(step):
        nsteps = np.rint(times / step).astype(int)
        if np.any(np.abs(nsteps * step - times) > 1e-9):
            raise ValueError("output times must be multiples of dt")
        stepper = RingStepper(profile, cells, ppc, step)
        u = _delta_columns(x, y_idx, n, 1.0 / ppc, width)
        norm0 = np.max(np.abs(u))
        out = {}
        done = 0
        for target in sorted(set(nsteps.tolist())):
            for _ in range(target - done):
                u = stepper.step(u)
            done = target
            if np.max(np.abs(u)) > growth_limit * max(norm0, 1.0):
                raise ConvergenceError("instability detected: norm grew beyond limit")
            out[target] = u.copy()
        return [out[s] for s in nsteps]

    coarse = run(dt)
    if richardson:
        fine = run(0.5 * dt)
        results = [(4 * f - c) / 3 for f, c in zip(fine, coarse)]
    else:
        results = coarse
    fields = []
    for t, u in zip(times, results):
        if n == 1:
            vals = u.reshape(len(x), len(y), 1, 1)
        else:
            vals = u.reshape(len(x), n, len(y), n).transpose(0, 2, 1, 3)
        fields.append(_pack(t, x, y, vals, "direct-evolution", dt=dt, width=width,
                            richardson=richardson, cells=cells))
    return fields


def relative_l1(a, b, dx=1.0):
    """||a - b||_1 / ||a||_1 on a common grid."""
    return float(np.sum(np.abs(a - b)) / np.sum(np.abs(a)))


# inverse Laplace route

def parabolic_contour(t, N=24, scale=1.0):
    """Nodes and weights of the parabola z(u) = mu (1 + i u)^2.

    mu = scale * pi N / (12 t) and u = k h with h = 3 / (scale N),
    0 <= k <= scale N; the k < 0 half follows by conjugation. Spectrum on
    the negative real axis maps to Im u = +-1, so the trapezoidal error is
    about e^{-pi N scale / 3} while rounding in the kernel is amplified by
    e^{mu t} = e^{pi N scale / 12}.
    """
    mu = scale * np.pi * N / (12.0 * t)
    m = int(round(scale * N))
    h = 3.0 / m
    u = h * np.arange(0, m + 1)
    z = mu * (1 + 1j * u) ** 2
    dz = 2j * mu * (1 + 1j * u) * h
    return z, dz


def green_laplace(profile, t, x, y, N=24, scale=1.0, tol=1e-12):
    """G(x, t; y) = -(1/2 pi i) int_Gamma e^{lambda t} K_lambda(x, y) d lambda.

    K_lambda is the whole-line kernel of (L - lambda)^{-1} (xi = 0), so
    -K_lambda is the resolvent (lambda - L)^{-1}. Uses the symmetry
    K_{conj lambda} = conj K_lambda of real-coefficient profiles.
    ``scale`` enlarges the contour; the result must not depend on it.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z, dz = parabolic_contour(t, N, scale)
    total = 0.0
    for k, (lam, d) in enumerate(zip(z, dz)):
        try:
            kern = resolvent.whole_line_kernel(FloquetSystem(profile, 0.0, lam), x, y, tol).G
        except SpectrumError as exc:
            raise SpectrumError(f"contour too close to the spectrum at lambda={lam}: {exc}") from None
        term = np.exp(lam * t) * kern * d
        total = total + (0.5 * term if k == 0 else term)
    vals = -(total - np.conj(total)) / (2j * np.pi)
    return _pack(t, x, y, vals.astype(complex), "laplace-contour", N=N, scale=scale)


# leading term

@dataclass(frozen=True, eq=False)
class LeadingTermSplit:
    t: float
    x: np.ndarray
    y: np.ndarray
    E: np.ndarray
    residual: np.ndarray
    a: float
    b: float
    sup_residual: float
    sup_G: float


def leading_term(branch, x, t, y, derivative_y=False):
    """E(x, t; y) = (4 pi b t)^{-1/2} e^{-|x - y - a t|^2/(4 b t)} q(x, 0) qt(y, 0).

    Shape (len(x), len(y), n, n). With ``derivative_y`` the y-derivative of E
    is returned instead.
    """
    a = float(np.real(branch.a_eff))
    b = branch.b
    if not b > 0:
        raise ValueError("leading term needs b > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x[:, None] - y[None, :] - a * t
    gauss = np.exp(-d ** 2 / (4 * b * t)) / np.sqrt(4 * np.pi * b * t)
    q = branch.q(x, 0.0)                # (Nx, n)
    qt = branch.qt(y, 0.0)              # (Ny, n)
    if not derivative_y:
        return gauss[:, :, None, None] * q[:, None, :, None] * qt[None, :, None, :]
    dgauss = gauss * d / (2 * b * t)
    K, n = branch.K, branch.n
    modes = np.arange(-K, K + 1)
    coef = branch.qt_coef[branch.index(0.0)].reshape(2 * K + 1, n)
    dqt = np.exp(-2j * np.pi * np.outer(y, modes)) @ (coef * (-2j * np.pi * modes)[:, None])
    return (dgauss[:, :, None, None] * q[:, None, :, None] * qt[None, :, None, :]
            + gauss[:, :, None, None] * q[:, None, :, None] * dqt[None, :, None, :])


def leading_split(gfield, branch):
    """Subtract the heat-kernel leading term from a Green field."""
    E = leading_term(branch, gfield.x, gfield.t, gfield.y)
    if np.max(np.abs(E.imag)) < 1e-8 * max(np.max(np.abs(E)), 1e-300):
        E = E.real
    R = gfield.G - E
    return LeadingTermSplit(gfield.t, gfield.x, gfield.y, E, R,
                            float(np.real(branch.a_eff)), branch.b,
                            float(np.max(np.abs(R))), float(np.max(np.abs(gfield.G))))


def derivative_residuals(profile, branch, t, x, y, n_xi=256, K=16):
    """sup |G_y - E| and sup |G_y - E_y| for the two readings of the G_y leading term.

    The first compares G_y with the same leading term E as G, the second
    with the y-derivative of E. Both are reported; neither is asserted.
    """
    gy = green_bloch(profile, t, x, y, K=K, n_xi=n_xi, derivative_y=True).G
    E = leading_term(branch, x, t, y)
    Ey = leading_term(branch, x, t, y, derivative_y=True)
    return {"same_term": float(np.max(np.abs(gy - E))),
            "y_derivative": float(np.max(np.abs(gy - Ey))),
            "sup_G_y": float(np.max(np.abs(gy)))}


@dataclass(frozen=True)
class EnvelopeFit:
    C_res: float
    M_res: float
    scatter: float
    slope: float
    exact_split: bool
    times: tuple
    sups: tuple

    def as_dict(self):
        return {"C_res": self.C_res, "M_res": self.M_res, "scatter": self.scatter,
                "slope": self.slope, "exact_split": self.exact_split,
                "times": list(self.times), "sup_residual": list(self.sups)}


def fit_residual_envelope(splits, t_fit_min=2.0, bins=40, dynamic_range=1e-5, zero_tol=1e-13):
    """Fit |R| <= C (1+t)^{-1} e^{-d^2/(M t)}, d = x - y - a t, over t >= t_fit_min.

    The binned maxima of |R| in d at each time are regressed as
    log|R| + log(1+t) = log C - (1/M) d^2/t. ``scatter`` is the RMS
    regression residual; ``slope`` the log-log slope of sup|R| against t.
    Bins whose maximum is below ``dynamic_range`` times sup|R| at that time
    are dropped: out there |R| is dominated by rounding in the synthesis,
    not by the envelope being fitted.
    When every residual is below ``zero_tol`` relative to G the split is
    exact and the envelope is reported as ``exact_split`` with C_res = 0.
    """
    use = [s for s in splits if s.t >= t_fit_min]
    if not use:
        raise ValueError("no split at t >= t_fit_min")
    ts = np.array([s.t for s in use])
    sups = np.array([s.sup_residual for s in use])
    if np.all(sups <= zero_tol * np.array([s.sup_G for s in use])):
        return EnvelopeFit(0.0, float("inf"), 0.0, float("-inf"), True,
                           tuple(ts.tolist()), tuple(sups.tolist()))
    rows, rhs = [], []
    for s in use:
        d = s.x[:, None] - s.y[None, :] - s.a * s.t
        r = np.abs(s.residual).reshape(d.shape + (-1,)).max(axis=-1)
        edges = np.linspace(d.min(), d.max(), bins + 1)
        which = np.clip(np.digitize(d.ravel(), edges) - 1, 0, bins - 1)
        rv = r.ravel()
        floor = dynamic_range * s.sup_residual
        for b in range(bins):
            sel = which == b
            if not sel.any():
                continue
            k = np.argmax(np.where(sel, rv, -1.0))
            if rv[k] <= floor:
                continue
            rows.append([1.0, -d.ravel()[k] ** 2 / s.t])
            rhs.append(np.log(rv[k]) + np.log1p(s.t))
    A, bvec = np.array(rows), np.array(rhs)
    coef, *_ = np.linalg.lstsq(A, bvec, rcond=None)
    scatter = float(np.sqrt(np.mean((A @ coef - bvec) ** 2)))
    inv_m = coef[1]
    M = float(1.0 / inv_m) if inv_m > 0 else float("-inf") if inv_m < 0 else float("inf")
    slope = float(np.polyfit(np.log(ts), np.log(sups), 1)[0]) if len(ts) > 1 else float("nan")
    return EnvelopeFit(float(np.exp(coef[0])), M, scatter, slope, False,
                       tuple(ts.tolist()), tuple(sups.tolist()))
