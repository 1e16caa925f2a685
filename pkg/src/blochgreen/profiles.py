"""Periodic coefficient data for L = d^2/dx^2 + a d/dx + df(u(x)) on a period-1 cell."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ProfileError

SOURCES = ("analytic", "manufactured", "external-file")


def check_grid_size(grid_size):
    if int(grid_size) != grid_size:
        raise ProfileError("grid size must be an integer")
    if grid_size % 2:
        raise ProfileError(f"grid must be even (got Nx={grid_size})")
    if grid_size < 16:
        raise ProfileError(f"grid must have at least 16 points (got Nx={grid_size})")


def grid(grid_size):
    """Uniform grid x_j = j / Nx on [0, 1)."""
    return np.arange(grid_size) / grid_size


def wavenumbers(grid_size):
    """Angular wavenumbers 2*pi*k in FFT order."""
    return 2.0 * np.pi * np.fft.fftfreq(grid_size, d=1.0 / grid_size)


def spectral_derivative(samples, order=1):
    """FFT derivative of periodic samples along axis 0.

    For odd orders the Nyquist mode is dropped so real data stay real.
    """
    samples = np.asarray(samples)
    nx = samples.shape[0]
    k = wavenumbers(nx)
    symbol = (1j * k) ** order
    if order % 2:
        symbol[nx // 2] = 0.0
    symbol = symbol.reshape((nx,) + (1,) * (samples.ndim - 1))
    out = np.fft.ifft(symbol * np.fft.fft(samples, axis=0), axis=0)
    if np.isrealobj(samples):
        return out.real
    return out


def fourier_coefficients(samples):
    """Symmetric Fourier coefficients of periodic samples along axis 0.

    Returns ``(k, chat)`` with k = -Nx/2..Nx/2 so that
    ``f(x) = sum_k chat[k] exp(2 pi i k x)`` interpolates the samples.
    The Nyquist coefficient is split evenly between +-Nx/2, which keeps
    the interpolant of real data real.
    """
    samples = np.asarray(samples)
    nx = samples.shape[0]
    half = nx // 2
    c = np.fft.fft(samples, axis=0) / nx
    k = np.arange(-half, half + 1)
    chat = np.empty((nx + 1,) + samples.shape[1:], dtype=complex)
    chat[half:2 * half] = c[:half]
    chat[:half] = c[half:]
    chat[0] = 0.5 * c[half]
    chat[2 * half] = 0.5 * c[half]
    return k, chat


class TrigInterpolant:
    """Trigonometric interpolant of periodic samples, evaluable at any real x."""

    def __init__(self, samples):
        samples = np.asarray(samples)
        self.shape = samples.shape[1:]
        self.real = np.isrealobj(samples)
        k, chat = fourier_coefficients(samples)
        keep = np.any(np.abs(chat.reshape(len(k), -1)) > 0.0, axis=1)
        if not keep.any():
            keep[len(k) // 2] = True
        self.k = k[keep]
        self.chat = chat[keep].reshape(keep.sum(), -1)

    def __call__(self, x):
        phase = np.exp(2j * np.pi * self.k * x)
        val = phase @ self.chat
        if self.real:
            val = val.real
        return val.reshape(self.shape)


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Period-1 coefficient data.

    Parameters
    ----------
    n : int
        System dimension.
    a : float
        Speed appearing in the first-order term a d/dx.
    coeffs : ndarray, shape (Nx, n, n)
        Samples of df(u(x_j)) on the uniform grid x_j = j / Nx.
    profile_samples, derivative_samples : ndarray, shape (Nx, n), optional
        Samples of the wave u and its derivative u'. For manufactured
        profiles ``derivative_samples`` holds the zero mode.
    source : str
        One of ``analytic``, ``manufactured``, ``external-file``.
    """

    n: int
    a: float
    coeffs: np.ndarray
    profile_samples: np.ndarray | None = None
    derivative_samples: np.ndarray | None = None
    source: str = "analytic"
    _interp: TrigInterpolant = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1, 1)
        if coeffs.ndim != 3 or coeffs.shape[1:] != (self.n, self.n):
            raise ProfileError(
                f"dimension mismatch: coefficient samples have shape {coeffs.shape}, "
                f"expected (Nx, {self.n}, {self.n})")
        if self.n < 1:
            raise ProfileError("dimension n must be positive")
        check_grid_size(coeffs.shape[0])
        if not np.all(np.isfinite(coeffs)):
            raise ProfileError("coefficient samples must be finite")
        if self.source not in SOURCES:
            raise ProfileError(f"unknown source {self.source!r}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "n", int(self.n))
        for name in ("profile_samples", "derivative_samples"):
            val = getattr(self, name)
            if val is None:
                continue
            val = np.array(val, dtype=float)
            if val.ndim == 1:
                val = val.reshape(-1, 1)
            if val.shape != (coeffs.shape[0], self.n):
                raise ProfileError(
                    f"dimension mismatch: {name} has shape {val.shape}, "
                    f"expected ({coeffs.shape[0]}, {self.n})")
            val.flags.writeable = False
            object.__setattr__(self, name, val)
        if self.profile_samples is not None and self.derivative_samples is not None:
            d = spectral_derivative(self.profile_samples)
            scale = max(np.max(np.abs(d)), np.max(np.abs(self.derivative_samples)), 1e-300)
            if np.max(np.abs(d - self.derivative_samples)) > 1e-6 * scale:
                raise ProfileError(
                    "derivative samples are inconsistent with the spectral "
                    "derivative of the profile samples")
        object.__setattr__(self, "_interp", TrigInterpolant(coeffs))

    @property
    def grid_size(self):
        return self.coeffs.shape[0]

    @property
    def x(self):
        return grid(self.grid_size)

    @property
    def is_constant(self):
        return bool(np.all(self.coeffs == self.coeffs[0]))

    def coefficient(self, x):
        """df(u(x)) at arbitrary real x via the trigonometric interpolant."""
        return self._interp(x)

    def coefficient_modes(self):
        """Symmetric Fourier coefficients of df, shape (Nx+1, n, n)."""
        return fourier_coefficients(self.coeffs)

    def zero_mode(self):
        """Samples of u' if known, else None."""
        return self.derivative_samples


def make_constant_profile(n, a, c0, grid_size):
    """Profile with df(u) identically equal to ``c0``."""
    check_grid_size(grid_size)
    c0 = np.asarray(c0, dtype=float).reshape(n, n)
    coeffs = np.broadcast_to(c0, (grid_size, n, n)).copy()
    return WaveProfile(n=n, a=a, coeffs=coeffs, source="analytic")


def make_manufactured_profile(p, a, grid_size=None):
    """Scalar profile whose operator annihilates ``p``.

    The coefficient is c = -(p'' + a p') / p with spectral derivatives, so
    p'' + a p' + c p vanishes on the grid up to rounding. ``p`` is stored as
    the zero mode in ``derivative_samples``.

    Parameters
    ----------
    p : array_like or callable
        Samples of a positive periodic function on the uniform grid, or a
        callable evaluated on it (then ``grid_size`` is required).
    """
    if callable(p):
        if grid_size is None:
            raise ProfileError("grid_size is required when p is a callable")
        check_grid_size(grid_size)
        p = np.asarray(p(grid(grid_size)), dtype=float)
    p = np.asarray(p, dtype=float).ravel()
    if grid_size is not None and len(p) != grid_size:
        raise ProfileError(f"expected {grid_size} samples of p, got {len(p)}")
    check_grid_size(len(p))
    if np.min(np.abs(p)) < 1e-8:
        raise ProfileError("p must satisfy min |p| >= 1e-8 on the grid")
    if np.min(p) <= 0:
        raise ProfileError("p must be strictly positive on the grid")
    c = -(spectral_derivative(p, 2) + a * spectral_derivative(p, 1)) / p
    return WaveProfile(n=1, a=a, coeffs=c.reshape(-1, 1, 1),
                       derivative_samples=p.reshape(-1, 1), source="manufactured")


def manufactured_residual(profile):
    """max |p'' + a p' + c p| on the grid for a manufactured profile."""
    p = profile.derivative_samples[:, 0]
    c = profile.coeffs[:, 0, 0]
    r = spectral_derivative(p, 2) + profile.a * spectral_derivative(p, 1) + c * p
    return float(np.max(np.abs(r)))


# fixtures

def heat_profile(grid_size=64):
    """u_t = u_xx."""
    return make_constant_profile(1, 0.0, [[0.0]], grid_size)


def advection_diffusion_profile(drift=1.0, grid_size=64):
    """u_t + drift u_x = u_xx, i.e. profile speed -drift."""
    return make_constant_profile(1, -drift, [[0.0]], grid_size)


def manufactured_fixture(a=1.0, amplitude=0.3, grid_size=64):
    """Manufactured operator with zero mode p = 1 + amplitude sin(2 pi x)."""
    return make_manufactured_profile(
        lambda x: 1.0 + amplitude * np.sin(2 * np.pi * x), a, grid_size)


# text format

def _fmt(v):
    return "%.17g" % v


def format_profile(profile):
    """Canonical text serialization."""
    head = [f"n={profile.n}", f"a={_fmt(profile.a)}", f"Nx={profile.grid_size}"]
    if profile.source != "external-file":
        head.append(f"source={profile.source}")
    if profile.profile_samples is not None:
        head.append("profile=1")
    if profile.derivative_samples is not None:
        head.append("derivative=1")
    lines = [" ".join(head)]
    for j in range(profile.grid_size):
        vals = list(profile.coeffs[j].ravel())
        if profile.profile_samples is not None:
            vals += list(profile.profile_samples[j])
        if profile.derivative_samples is not None:
            vals += list(profile.derivative_samples[j])
        lines.append(str(j) + " " + " ".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def parse_profile(text, source=None):
    """Parse the text format produced by :func:`format_profile`.

    Header ``n=<int> a=<float> Nx=<int>`` with optional ``source=``,
    ``profile=1`` and ``derivative=1`` keys; then Nx blocks, each a grid
    index followed by n^2 row-major matrix entries and, when flagged, n
    profile and n derivative entries, one block per line.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ProfileError("parse error: empty profile file")
    header = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise ProfileError(f"parse error: bad header token {tok!r}")
        key, val = tok.split("=", 1)
        header[key] = val
    for key in ("n", "a", "Nx"):
        if key not in header:
            raise ProfileError(f"parse error: header missing {key}=")
    try:
        n = int(header["n"])
        a = float(header["a"])
        nx = int(header["Nx"])
    except ValueError as exc:
        raise ProfileError(f"parse error: {exc}") from None
    has_prof = header.get("profile", "0") == "1"
    has_der = header.get("derivative", "0") == "1"
    src = source or header.get("source", "external-file")
    width = n * n + n * has_prof + n * has_der

    rows = [ln.split() for ln in lines[1:]]
    for r in rows:
        if len(r) != width + 1:
            raise ProfileError(
                f"dimension mismatch: block has {len(r) - 1} entries, "
                f"expected {width} for n={n}")
    try:
        blocks = np.array(rows, dtype=float).reshape(len(rows), width + 1)
    except ValueError as exc:
        raise ProfileError(f"parse error: {exc}") from None
    if len(blocks) != nx:
        raise ProfileError(f"parse error: header declares Nx={nx} but found {len(blocks)} blocks")
    check_grid_size(nx)
    idx = blocks[:, 0]
    if not np.array_equal(idx, np.arange(nx)):
        raise ProfileError("non-uniform grid: indices must be 0..Nx-1 in order")
    body = blocks[:, 1:]
    coeffs = body[:, :n * n].reshape(nx, n, n)
    off = n * n
    prof = der = None
    if has_prof:
        prof = body[:, off:off + n]
        off += n
    if has_der:
        der = body[:, off:off + n]
    return WaveProfile(n=n, a=a, coeffs=coeffs, profile_samples=prof,
                       derivative_samples=der, source=src)


def save_profile(profile, path):
    Path(path).write_text(format_profile(profile), encoding="utf-8")


def load_profile(path):
    return parse_profile(Path(path).read_text(encoding="utf-8"))
