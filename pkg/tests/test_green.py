import numpy as np
import pytest

from blochgreen import exact, green
from blochgreen.errors import ConvergenceError

XC = (np.arange(32) + 0.5) / 32


def test_torus_heat_periodized(heat):
    y = np.array([0.0, 0.3])
    G = green.green_torus(heat, 1.0, XC, y).scalar()
    ref = exact.periodized_heat_kernel(XC[:, None] - y[None, :], 1.0)
    assert np.max(np.abs(G - ref)) < 1e-8


def test_torus_advdiff_periodized(advdiff):
    y = np.array([0.1])
    G = green.green_torus(advdiff, 1.0, XC, y).scalar()
    ref = exact.periodized_heat_kernel(XC[:, None] - y[None, :], 1.0, drift=1.0)
    assert np.max(np.abs(G - ref)) < 1e-8


def test_bloch_line_gaussian(heat, advdiff):
    x = np.linspace(-6, 6, 121)
    y = np.array([0.0, 0.5])
    for prof, drift in ((heat, 0.0), (advdiff, 1.0)):
        G = green.green_bloch(prof, 1.0, x, y, n_xi=64).scalar()
        ref = exact.heat_kernel(x[:, None] - y[None, :] - drift, 1.0)
        assert np.max(np.abs(G - ref)) < 1e-12


def test_mass_and_realness(heat, manufactured):
    x = -16 + np.arange(32 * 32) / 32
    G = green.green_bloch(heat, 2.0, x, np.array([0.0]), n_xi=32)
    assert abs(np.sum(G.scalar()) / 32 - 1) < 1e-6
    gm = green.green_bloch(manufactured, 1.0, np.linspace(-3, 4, 50), np.array([0.2]), n_xi=64)
    assert gm.imag_max <= 1e-8


def test_t_min(heat):
    with pytest.raises(ValueError):
        green.green_bloch(heat, 0.01, XC, XC)


def test_doubling_check(manufactured):
    gf = green.green_bloch(manufactured, 1.0, np.linspace(-4, 5, 40), np.array([0.0]),
                           n_xi=32, check=True)
    assert gf.info["doubling_change"] <= 1e-5
    # a ring of 4 periods is far too small at t = 4: the check must fire
    with pytest.raises(ConvergenceError):
        green.green_bloch(manufactured, 4.0, np.linspace(-4, 5, 40), np.array([0.0]),
                          n_xi=4, check=True)


def test_derivative_y(manufactured):
    x = np.linspace(-3, 4, 40)
    h = 1e-5
    y = np.array([0.3])
    dG = green.green_bloch(manufactured, 1.0, x, y, n_xi=64, derivative_y=True).scalar()
    gp = green.green_bloch(manufactured, 1.0, x, y + h, n_xi=64).scalar()
    gm = green.green_bloch(manufactured, 1.0, x, y - h, n_xi=64).scalar()
    assert np.max(np.abs(dG - (gp - gm) / (2 * h))) < 1e-6


def test_direct_heat_periodized(heat):
    gd = green.green_direct(heat, 1.0, np.array([0.0]), cells=1, dt=0.01)[0]
    ref = exact.periodized_heat_kernel(gd.x, 1.0)
    assert np.max(np.abs(gd.scalar()[:, 0] - ref)) < 1e-4


def test_direct_matches_bloch(manufactured):
    y = np.array([0.0, 0.5])
    gd = green.green_direct(manufactured, 2.0, y, cells=64, dt=0.005)[0]
    gb = green.green_bloch(manufactured, 2.0, gd.x, y, n_xi=64)
    assert green.relative_l1(gb.scalar(), gd.scalar()) <= 1e-3


def test_direct_second_order(manufactured):
    y = np.array([0.0])
    runs = [green.green_direct(manufactured, 1.0, y, cells=16, dt=dt, richardson=False)[0].scalar()
            for dt in (0.02, 0.01, 0.005)]
    c1 = np.max(np.abs(runs[1] - runs[0]))
    c2 = np.max(np.abs(runs[2] - runs[1]))
    assert 3.0 <= c1 / c2 <= 5.0


def test_direct_linearity(manufactured):
    st = green.RingStepper(manufactured, 8, 64, 0.01)
    u = np.zeros((8 * 64, 3))
    u[100, 0] = 64.0
    u[260, 1] = 64.0
    u[:, 2] = 0.5 * (u[:, 0] + u[:, 1])
    for _ in range(50):
        u = st.step(u)
    assert np.max(np.abs(u[:, 2] - 0.5 * (u[:, 0] + u[:, 1]))) < 1e-10


def test_ring_propagator_exact(manufactured):
    prop = green.RingPropagator(manufactured, 16, 16, 0.25)
    x = -8 + np.arange(256) / 16
    u0 = np.exp(-x ** 2)
    u = u0.copy()
    for _ in range(4):
        u = prop.step(u)
    G = green.green_bloch(manufactured, 1.0, x, x, n_xi=16, K=8).scalar()
    assert np.max(np.abs(u - G @ u0 / 16)) < 1e-10


def test_direct_instability_guard(manufactured):
    with pytest.raises(ConvergenceError):
        green.green_direct(manufactured, 1.0, np.array([0.0]), cells=4, dt=0.5, growth_limit=1e-3)


def test_laplace_heat(heat):
    g = green.green_laplace(heat, 0.5, np.array([0.3]), np.array([0.0])).scalar()[0, 0]
    assert abs(g - exact.heat_kernel(0.3, 0.5)) < 1e-4


def test_laplace_matches_bloch(manufactured, rng):
    x = rng.uniform(-2, 3, 5)
    y = rng.uniform(0, 1, 5)
    gl = green.green_laplace(manufactured, 1.0, x, y).scalar()
    gb = green.green_bloch(manufactured, 1.0, x, y, n_xi=64).scalar()
    assert np.max(np.abs(np.diag(gl) - np.diag(gb))) < 1e-4


def test_laplace_contour_independence(manufactured):
    x, y = np.array([0.7]), np.array([0.1])
    a = green.green_laplace(manufactured, 1.0, x, y).scalar()
    b = green.green_laplace(manufactured, 1.0, x, y, scale=2.0).scalar()
    assert np.max(np.abs(a - b)) < 1e-6


def test_semigroup_l1(manufactured):
    cells, ppc = 32, 32
    z = -cells // 2 + np.arange(cells * ppc) / ppc
    x = np.linspace(-3, 4, 57)
    y = np.array([0.1, 0.6])
    g1 = green.green_bloch(manufactured, 0.5, x, z, n_xi=cells).scalar()
    g2 = green.green_bloch(manufactured, 1.0, z, y, n_xi=cells).scalar()
    g = green.green_bloch(manufactured, 1.5, x, y, n_xi=cells).scalar()
    assert green.relative_l1(g, g1 @ g2 / ppc) < 1e-4


def test_delta_recovery(manufactured):
    y = np.arange(64) / 64
    f = np.exp(np.cos(2 * np.pi * y))
    errs = []
    for t in (0.005, 0.01):
        G = green.green_torus(manufactured, t, y, y).scalar()
        errs.append(np.max(np.abs(G @ f / 64 - f)))
    assert 1.6 <= errs[1] / errs[0] <= 2.4


def test_leading_split_aliasing_tail(advdiff, advdiff_branch):
    t = 3.0
    y = np.array([0.2])
    gf = green.green_torus(advdiff, t, XC, y)
    s = green.leading_split(gf, advdiff_branch)
    d = XC[:, None] - y[None, :] - t
    j = np.concatenate([np.arange(-20, 0), np.arange(1, 21)])
    tail = exact.heat_kernel(d[..., None] - j, t).sum(axis=-1)
    assert np.max(np.abs(s.residual[..., 0, 0] - tail)) < 1e-10


def test_leading_split_heat_value(heat, heat_branch):
    gf = green.green_torus(heat, 1.0, np.array([0.4]), np.array([0.4]))
    s = green.leading_split(gf, heat_branch)
    ref = 2 * sum(exact.heat_kernel(j, 1.0) for j in range(1, 30))
    assert abs(s.residual[0, 0, 0, 0] - ref) < 1e-12


def test_leading_split_exact_on_line(advdiff, advdiff_branch):
    x = np.linspace(-5, 10, 151)
    splits = [green.leading_split(green.green_bloch(advdiff, t, x, np.array([0.0]), n_xi=64),
                                  advdiff_branch) for t in (2.0, 4.0)]
    assert all(s.sup_residual < 1e-13 for s in splits)
    assert green.fit_residual_envelope(splits).exact_split


def test_residual_order_bounded(manufactured, manufactured_branch):
    y = np.array([0.25, 0.75])
    a, b = float(np.real(manufactured_branch.a_eff)), manufactured_branch.b
    vals = []
    for t in (2.0, 4.0, 8.0, 16.0, 32.0):
        half = 8 * np.sqrt(4 * b * t)
        x = np.arange(np.floor(a * t - half), np.ceil(a * t + half), 1 / 16)
        s = green.leading_split(green.green_bloch(manufactured, t, x, y, n_xi=256),
                                manufactured_branch)
        vals.append(s.sup_residual * (1 + t))
    assert max(vals) <= 2 * vals[0]


def test_leading_term_y_derivative(manufactured_branch):
    x = np.linspace(-2, 3, 11)
    y = np.array([0.3])
    h = 1e-6
    dE = green.leading_term(manufactured_branch, x, 2.0, y, derivative_y=True)
    Ep = green.leading_term(manufactured_branch, x, 2.0, y + h)
    Em = green.leading_term(manufactured_branch, x, 2.0, y - h)
    assert np.max(np.abs(dE - (Ep - Em) / (2 * h))) < 1e-6


def test_derivative_readings(advdiff, advdiff_branch):
    x = np.linspace(-4, 8, 97)
    r = green.derivative_residuals(advdiff, advdiff_branch, 2.0, x, np.array([0.0, 0.5]), n_xi=64)
    # on the line the y-derivative reading is exact, the literal one is not
    assert r["y_derivative"] < 1e-12
    assert r["same_term"] > 0.1 * r["sup_G_y"]
