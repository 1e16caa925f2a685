import numpy as np
import pytest

from blochgreen import bloch, profiles
from blochgreen.errors import ProfileError


def test_heat_matrix_is_diagonal_symbol(heat):
    m = bloch.bloch_matrix(heat, 0.0, 8).matrix
    k = np.arange(-8, 9)
    assert np.array_equal(m, np.diag(-(2 * np.pi * k) ** 2 + 0j))


def test_symbol_convention():
    p = profiles.make_constant_profile(1, 1.0, [[0.0]], 16)
    m = bloch.bloch_matrix(p, 0.3, 8).matrix
    s = 2 * np.pi * np.arange(-8, 9) + 0.3
    assert np.allclose(np.diag(m), (1j * s) ** 2 + 1j * s, atol=1e-12)
    assert np.allclose(m - np.diag(np.diag(m)), 0)


def test_small_K_rejected(heat):
    with pytest.raises(ProfileError):
        bloch.bloch_matrix(heat, 0.0, 4)


def test_truncation_warning():
    x = profiles.grid(128)
    p = profiles.WaveProfile(n=1, a=0.0, coeffs=np.cos(2 * np.pi * 40 * x))
    with pytest.warns(RuntimeWarning, match="truncation"):
        bloch.bloch_matrix(p, 0.0, 8)


def test_manufactured_zero_eigenvalue(manufactured):
    vals = bloch.spectrum(manufactured, 0.0, 16).values
    i = np.argmin(np.abs(vals))
    assert abs(vals[i]) < 1e-8
    gap = np.min(np.abs(np.delete(vals, i) - vals[i]))
    assert gap > 0.1


def test_top_eigenvalues(heat, advdiff):
    assert abs(bloch.spectrum(heat, 0.4).values[0] - (-0.16)) < 1e-12
    assert abs(bloch.spectrum(advdiff, 0.4).values[0] - (-0.16 - 0.4j)) < 1e-12


def test_sorted_descending(manufactured):
    v = bloch.spectrum(manufactured, 0.9).values
    assert np.all(np.diff(v.real) <= 1e-12)


def test_stability_reports(advdiff):
    rep = bloch.check_diffusive_stability(advdiff)
    assert rep.D1 and rep.D2 and abs(rep.theta - 1) < 1e-6
    unstable = profiles.make_constant_profile(1, 0.0, [[1.0]], 16)
    rep = bloch.check_diffusive_stability(unstable)
    assert not rep.D2


def test_manufactured_report_generated(manufactured):
    rep = bloch.check_diffusive_stability(manufactured)
    d = rep.as_dict()
    assert set(d) >= {"D1", "D2", "theta", "gap"}


def test_branch_advdiff(advdiff_branch):
    assert abs(advdiff_branch.lambda1 + 1j) < 1e-10
    assert abs(advdiff_branch.lambda2 + 1) < 1e-10
    assert abs(advdiff_branch.b - 1) < 1e-10
    assert abs(advdiff_branch.a_eff - 1) < 1e-10


def test_branch_heat(heat_branch):
    assert abs(heat_branch.lambda1) < 1e-10
    assert abs(heat_branch.lambda2 + 1) < 1e-10


def test_branch_zero_mode_is_derivative(manufactured, manufactured_branch):
    q = manufactured_branch.q(manufactured.x)[:, 0]
    assert not manufactured_branch.surrogate
    assert np.max(np.abs(q - manufactured.derivative_samples[:, 0])) < 1e-10
    assert manufactured_branch.b > 0
    assert manufactured_branch.lambda2.real <= 0


def test_branch_biorthogonal(manufactured_branch):
    y = np.arange(256) / 256
    for xi in (0.0, 0.1, -0.2):
        pair = np.sum(manufactured_branch.qt(y, xi) * manufactured_branch.q(y, xi)) / 256
        assert abs(pair - 1) < 1e-10


def test_branch_cubic_residual(manufactured):
    # |lambda(xi) - lambda1 xi - lambda2 xi^2| = O(|xi|^3): halving xi cuts it >= 8x
    br = bloch.critical_branch(manufactured)
    res = []
    for xi in (0.2, 0.1):
        lam = bloch.spectrum(manufactured, xi).values[0]
        res.append(abs(lam - br.lambda1 * xi - br.lambda2 * xi ** 2))
    assert res[0] / res[1] >= 7.0


def test_top_branches_biorthogonal(manufactured):
    sp = bloch.spectrum(manufactured, 0.3)
    y = np.arange(256) / 256
    for j in range(3):
        for k in range(3):
            pair = np.sum(sp.dual(j, y) * sp.eigenfunction(k, y)) / 256
            assert abs(pair - (j == k)) < 1e-8


def test_galerkin_convergence(manufactured):
    a = bloch.spectrum(manufactured, 0.0, 16).values[:5]
    b = bloch.spectrum(manufactured, 0.0, 32).values[:7]
    # conjugate pairs may swap order, so match each value to its nearest partner
    assert max(np.min(np.abs(b - v)) for v in a) < 1e-8


@pytest.mark.parametrize("xi", [0.3, 1.7, 3.0])
def test_conjugation_symmetry(manufactured, xi):
    a = bloch.spectrum(manufactured, xi).values
    b = np.conj(bloch.spectrum(manufactured, -xi).values)
    a = a[np.lexsort((a.imag, a.real))]
    b = b[np.lexsort((b.imag, b.real))]
    assert np.max(np.abs(a - b)) < 1e-9
