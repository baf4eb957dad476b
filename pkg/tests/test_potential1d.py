import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from conilay import asymptotics, potential1d as p1
from conilay import specfun
from conilay.geometry import SQRT2PI

J = 2.404825557695773

# K_{i nu}(sqrt(E)) = 0 with nu = sqrt(3)/2: bound states of -d^2/dx^2 - 1/x^2 on (1, inf)
INVSQ_C1_LEVELS = [1.3911708817851507e-3, 9.824620266009322e-7, 6.941022158630051e-10, 4.903782620265347e-13]


def _radial_fd(lo, hi, n):
    # -(1/y)(y u')' on (lo, hi), Dirichlet, conservative three-point stencil
    y = np.linspace(lo, hi, n + 1)
    d = y[1] - y[0]
    yi = y[1:-1]
    yp, ym = yi + d / 2, yi - d / 2
    diag = (yp + ym) / (d * d * yi)
    off = -yp[:-1] / (d * d) / np.sqrt(yi[:-1] * yi[1:])
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))[0]


def test_disc_values():
    assert abs(p1.v_min() - J * J / (2 * math.pi**2)) < 1e-15
    assert p1.effective_potential(0.0).v == pytest.approx(J * J / (2 * math.pi**2), rel=1e-15)
    x = math.pi - SQRT2PI
    assert abs(p1.effective_potential(x).v - J * J / math.pi**2) < 1e-14


def test_large_x_approaches_half_from_below():
    v = p1.effective_potential(10.0).v
    assert 0.4975 <= v <= 0.5


def test_annulus_against_finite_differences():
    a, b = 1.0, 1.0 + SQRT2PI
    c1, c2 = _radial_fd(a, b, 4000), _radial_fd(a, b, 8000)
    ref = (4 * c2 - c1) / 3
    s = p1.effective_potential(1.0)
    assert abs(s.v - ref) <= 1e-6
    assert abs(s.residual) < 1e-12


def test_annulus_root_against_high_precision_cross_product():
    x = 0.37
    v = p1.effective_potential(x).v
    with mp.workdps(30):
        k = mp.sqrt(mp.mpf(v))
        f = lambda vv: mp.besselj(0, mp.sqrt(vv) * x) * mp.bessely(0, mp.sqrt(vv) * (x + SQRT2PI)) - mp.besselj(
            0, mp.sqrt(vv) * (x + SQRT2PI)
        ) * mp.bessely(0, mp.sqrt(vv) * x)
        root = mp.findroot(f, mp.mpf(v))
    assert abs(v - float(root)) < 1e-13
    assert k > 0


def test_rejects_outside_domain():
    with pytest.raises(ValueError):
        p1.effective_potential(-SQRT2PI)


def test_log_constant_and_asymptote():
    j = specfun.j0_zero(1)
    C = j / (2 * math.pi) * abs(float(mp.bessely(0, j))) / abs(float(mp.besselj(1, j)))
    assert abs(p1.log_constant() - C) < 1e-14
    assert p1.agmon_c0() == pytest.approx(C / 2, rel=1e-15)
    ratios = [(p1.effective_potential(x).v - p1.v_min()) * abs(math.log(x)) / C for x in (1e-4, 1e-7, 1e-12)]
    assert abs(ratios[1] - 1.0) < 0.05
    assert abs(ratios[2] - 1.0) < abs(ratios[1] - 1.0) < abs(ratios[0] - 1.0)
    with pytest.raises(ValueError):
        p1.potential_log_asymptote(1.5)


def test_increasing_near_zero_and_bounds_on_grid():
    xs = np.geomspace(1e-10, 1 / math.e, 60)
    v, res = p1.effective_potential_array(xs)
    assert np.all(np.diff(v) > 0)
    wide = np.linspace(-SQRT2PI + 0.5, 8.0, 80)
    w, _ = p1.effective_potential_array(wide)
    assert np.all(w >= p1.v_min() - 1e-14)
    assert np.all(w[wide > 0] <= 0.5)
    assert np.all(np.diff(w[wide > 0]) > 0)
    assert np.all(np.diff(w[wide <= 0]) < 0)


def test_array_matches_scalar():
    xs = np.array([2.0, 0.01, -1.0, 0.5])
    v, _ = p1.effective_potential_array(xs)
    for x, vi in zip(xs, v):
        assert abs(vi - p1.effective_potential(x).v) < 1e-14


def test_verified_x1_lower_bound():
    x1 = p1.verified_x1(n=120)
    assert 0.0 < x1 < 1.0
    xs = np.geomspace(1e-12, x1, 50)
    v, _ = p1.effective_potential_array(xs)
    assert np.all(v >= p1.v_min() + p1.agmon_c0() / np.abs(np.log(xs)))


def test_potential_csv(tmp_path):
    path = tmp_path / "v.csv"
    p1.write_potential_csv(path, [0.0, 1.0], header=["demo"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# demo" and lines[1] == "x,v,residual"
    assert float(lines[2].split(",")[1]) == pytest.approx(p1.v_min(), rel=1e-15)


def test_free_particle_box():
    prob = p1.Model1DProblem((1.0, 1.0 + math.pi), p1.InverseSquare(0.0), h=1.0, grid_n=2000)
    spec = p1.solve_1d(prob, 3)
    assert np.allclose(spec.values, [1.0, 4.0, 9.0], atol=1e-6)
    assert spec.n_below == 0 and spec.partial
    assert len(spec.bound_states) == 0


def test_scaled_box_h():
    prob = p1.Model1DProblem((1.0, 1.0 + math.pi), p1.InverseSquare(0.0), h=0.5, grid_n=1000)
    assert np.allclose(p1.solve_1d(prob, 2).values, [0.25, 1.0], atol=1e-6)


def test_born_oppenheimer_ground_state_above_minimum():
    for h in (0.2, 0.1):
        spec = p1.solve_1d(p1.Model1DProblem.born_oppenheimer(h, b=8.0, grid_n=1000), 2)
        assert spec.values[0] >= p1.v_min() - 1e-6
        assert spec.values[0] < spec.values[1] < 0.5
        assert not spec.partial


def test_hat_model_rescales_to_inverse_square():
    theta = math.radians(5.0)
    hat = p1.HatQ(theta)
    L = hat.stretch
    a, b = 1.0, 400.0
    ph = p1.Model1DProblem((a, b), hat, grid_n=3000)
    sa, sb = float(hat.to_sigma(a)), float(hat.to_sigma(b))
    pi = p1.Model1DProblem((sa, sb), p1.InverseSquare(hat.c), h=1.0, grid_n=3000)
    vh = p1.solve_1d(ph, 4).values
    vi = p1.solve_1d(pi, 4).values
    assert np.allclose(vh, vi / L**2, rtol=1e-8, atol=0)
    assert hat.c == pytest.approx(1 / (4 * math.sin(theta) ** 2))


def test_subcritical_inverse_square_has_no_bound_states():
    prob = p1.Model1DProblem((1.0, None), p1.InverseSquare(0.25), grid_n=4000)
    counts = p1.count_curve(prob, np.geomspace(1e-8, 0.1, 20))
    assert np.all(counts == 0)
    assert p1.count_slope(prob, 1e-8, n=20) == 0.0


def test_inverse_square_counts_match_bessel_oracle():
    nu = math.sqrt(0.75)
    # the frozen levels are zeros of K_{i nu}(sqrt E)
    for E in INVSQ_C1_LEVELS[:2]:
        assert abs(float(mp.besselk(1j * nu, math.sqrt(E)).real)) < 1e-9
    prob = p1.Model1DProblem((1.0, None), p1.InverseSquare(1.0), grid_n=8000)
    for E, expected in [(1e-2, 0), (1e-3, 1), (1e-6, 1), (1e-8, 2), (1e-9, 2), (5e-10, 3)]:
        assert p1.count_below(prob, E) == expected == sum(e > E for e in INVSQ_C1_LEVELS)
    spec = p1.solve_1d(prob.with_end(1e5), 2)
    assert spec.values[0] == pytest.approx(-INVSQ_C1_LEVELS[0], rel=1e-4)


def test_count_floor_error():
    prob = p1.Model1DProblem((1.0, 100.0), p1.InverseSquare(1.0))
    with pytest.raises(ValueError, match="floor"):
        p1.count_below(prob, 1e-8)
    with pytest.raises(ValueError):
        p1.count_below(prob, 0.0)


@pytest.mark.parametrize("deg", np.linspace(1.0, 80.0, 20))
def test_bridge_identity(deg):
    t = math.radians(deg)
    assert abs(asymptotics.bridge_constant(t) - asymptotics.counting_constant(t)) <= 1e-14 * asymptotics.counting_constant(t)


def test_counting_slope_inverse_square():
    c = 1.0 / (4 * math.sin(math.radians(5.0)) ** 2)
    prob = p1.Model1DProblem((1.0, None), p1.InverseSquare(c), grid_n=6000)
    slope = p1.count_slope(prob, 1e-8)
    target = math.sqrt(c - 0.25) / (2 * math.pi)
    assert abs(slope / target - 1) < 0.02


def test_jump_slope():
    # jumps at E_j = exp(-2 pi j / s) have slope exactly s / (2 pi)
    s = 3.0
    E = np.exp(-2 * math.pi * np.arange(1, 8) / s + 0.1)
    assert p1.jump_slope(E) == pytest.approx(s / (2 * math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        p1.jump_slope([0.1])


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_richardson_stable_on_smooth_models(c):
    prob = p1.Model1DProblem((1.0, 60.0), p1.InverseSquare(c), grid_n=2000)
    a = p1.solve_1d(prob, 2).values
    b = p1.solve_1d(p1.Model1DProblem((1.0, 60.0), p1.InverseSquare(c), grid_n=4000), 2).values
    assert np.max(np.abs(a - b)) < 1e-8


@pytest.mark.parametrize("kind", ["quintic", "cubic"])
def test_partition_weight(kind):
    s = np.linspace(1.0001, 1.9999, 501)
    S, dS = p1.smoothstep(s - 1.0, kind)
    chi0 = 1 - S
    chi1 = np.sqrt(1 - chi0**2)
    # central differences of the two cut-offs
    d = 1e-6
    c0 = lambda x: 1 - p1.smoothstep(x - 1.0, kind)[0]
    c1 = lambda x: np.sqrt(1 - c0(x) ** 2)
    W = ((c0(s + d) - c0(s - d)) / (2 * d)) ** 2 + ((c1(s + d) - c1(s - d)) / (2 * d)) ** 2
    assert np.allclose(p1.partition_w(s, kind), W, rtol=1e-5, atol=1e-6)
    assert np.all(p1.partition_w([0.5, 2.5], kind) == 0.0)
    assert np.all(chi0**2 + chi1**2 == pytest.approx(1.0))


def test_model_validation():
    with pytest.raises(ValueError):
        p1.InverseSquare(-1.0)
    with pytest.raises(ValueError):
        p1.Model1DProblem((1.0, 2.0), p1.InverseSquare(1.0), grid_n=10)
    with pytest.raises(ValueError):
        p1.Model1DProblem((2.0, 1.0), p1.InverseSquare(1.0))
    with pytest.raises(ValueError):
        p1.Model1DProblem((-5.0, 1.0), p1.BornOppenheimer())
    with pytest.raises(ValueError):
        p1.solve_1d(p1.Model1DProblem((1.0, 2.0), p1.InverseSquare(1.0)), 0)
    with pytest.raises(ValueError):
        p1.smoothstep(0.5, "linear")


@given(st.floats(-SQRT2PI + 0.05, 20.0))
def test_property_potential_bounds(x):
    s = p1.effective_potential(x)
    if x > 0:
        assert p1.v_min() <= s.v <= 0.5
        assert s.v >= p1.v_min() + 0.0
    else:
        assert s.v == pytest.approx(J * J / (x + SQRT2PI) ** 2, rel=1e-14)


@given(st.floats(1e-6, 5.0), st.floats(1e-6, 5.0))
def test_property_monotone_on_positive_axis(a, b):
    lo, hi = sorted((a, b))
    assert p1.effective_potential(lo).v <= p1.effective_potential(hi).v + 1e-15
