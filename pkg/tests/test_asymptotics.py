import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
import mpmath as mp

from conilay import asymptotics as asy
from conilay.assembly import ContractViolation, build_dofmap
from conilay.geometry import SQRT2PI, MeshParams, Shape, build_domain, generate_mesh

J = 2.404825557695773
A1 = 2.338107410459767


def test_counting_asymptote_quarter_aperture():
    assert asy.counting_asymptote(math.pi / 4, math.exp(-1)) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    with pytest.raises(ValueError):
        asy.counting_asymptote(0.3, 1.0)


def test_staircase_example():
    assert list(asy.staircase([0.5, 0.9], [0.6, 0.3, 0.05])) == [0, 1, 2]
    with pytest.raises(ContractViolation):
        asy.staircase([0.5, 1.0], [0.1])
    with pytest.raises(ValueError):
        asy.staircase([0.9, 0.5], [0.1])


def test_staircase_slope_of_geometric_jumps():
    # jumps kept above 1e-6 so that 1 - E_j carries E_j to about 1e-10
    s = 4.0
    E = np.exp(-2 * math.pi * np.arange(1, 9) / s)
    assert asy.staircase_slope(1 - E) == pytest.approx(s / (2 * math.pi), rel=1e-9)
    assert np.allclose(asy.jump_energies(1 - E), E)


def test_variant_ratio():
    for n in (1, 3, 7):
        main = asy.expansion_coefficients(n, asy.Variant.MAIN)
        cone = asy.expansion_coefficients(n, "TheoremCone")
        assert cone.beta0 == main.beta0 == pytest.approx(J * J / math.pi**2, rel=1e-15)
        assert cone.beta2 / main.beta2 == pytest.approx(J ** (2 / 3), rel=1e-14)
    assert asy.expansion_coefficients(1).beta2 == pytest.approx((2 * J * J) ** (2 / 3) * A1 / math.pi**2, rel=1e-14)


def test_lambda_scale_halves():
    mu = asy.expansion_coefficients(2, scale="mu")
    lam = asy.expansion_coefficients(2, scale="lambda")
    assert (lam.beta0, lam.beta2) == (0.5 * mu.beta0, 0.5 * mu.beta2)
    with pytest.raises(ValueError):
        asy.expansion_coefficients(2, scale="nu")
    with pytest.raises(ValueError):
        asy.expansion_coefficients(0)


def test_small_aperture_limits():
    for variant in asy.Variant:
        assert asy.mu_two_term(1, 0.0, variant) == pytest.approx(J * J / math.pi**2, rel=1e-15)
    assert asy.lambda_delta_expansion(1, 1e-12) == pytest.approx(J * J / (2 * math.pi**2), rel=1e-7)
    with pytest.raises(ValueError):
        asy.lambda_delta_expansion(1, 0.0)
    with pytest.raises(ValueError):
        asy.mu_two_term(1, -0.1)


def test_lambda_delta_increasing_in_n():
    vals = [asy.lambda_delta_expansion(n, 0.1) for n in range(1, 10)]
    assert np.all(np.diff(vals) > 0)


@given(st.floats(0.01, 1.5), st.floats(0.01, 10.0))
def test_scaling_round_trip(theta, v):
    lam = asy.scale_mu_lambda(v, theta, "mu_to_lambda")
    assert lam == pytest.approx(v / (2 * math.cos(theta) ** 2), rel=1e-14)
    assert asy.scale_mu_lambda(lam, theta, asy.Direction.LAMBDA_TO_MU) == pytest.approx(v, rel=1e-14)


@given(st.floats(0.01, 1.5))
def test_property_counting_constant(theta):
    assert asy.counting_constant(theta) == pytest.approx(asy.bridge_constant(theta), rel=1e-12)


def test_theta_validation():
    for bad in (0.0, math.pi / 2):
        with pytest.raises(ValueError):
            asy.counting_constant(bad)


def _log_integral_oracle(x):
    # substitute t = e^{-u^2}: the integral becomes 2 int_{sqrt(-ln x)}^inf e^{-u^2} du
    with mp.workdps(30):
        return float(2 * mp.quad(lambda u: mp.exp(-u * u), [mp.sqrt(-mp.log(x)), mp.inf]))


def test_agmon_weight_pieces():
    p = asy.AgmonWeightParams(eta0=0.3, eta1=0.2, eta2=0.5, x1=0.25)
    assert asy.agmon_weight(-4.0, p) == pytest.approx(0.3 * 8.0)
    assert asy.agmon_weight(0.0, p) == 0.0
    ref = _log_integral_oracle(0.1)
    assert asy.agmon_weight(0.1, p) == pytest.approx(0.2 * ref, rel=1e-10)
    at_x1 = 0.2 * _log_integral_oracle(0.25)
    assert asy.agmon_weight(1.25, p) == pytest.approx(at_x1 + 0.5, rel=1e-10)
    # continuity at x1
    assert abs(asy.agmon_weight(0.25 + 1e-12, p) - asy.agmon_weight(0.25, p)) < 1e-10


def test_agmon_params_validation():
    with pytest.raises(ValueError):
        asy.AgmonWeightParams(x1=1.0)
    with pytest.raises(ValueError):
        asy.AgmonWeightParams(eta0=-0.1)


@pytest.fixture(scope="module")
def scaled_guide():
    T = 2.0
    mesh = generate_mesh(build_domain(math.pi / 4, T, Shape.SCALED_GUIDE), MeshParams(0.25, ratio=1.1))
    return T, mesh, build_dofmap(mesh, 2)


def _moment(k, x0, T):
    """Exact ``int_{x > x0} x^k y`` over the scaled guide truncated at ``T``."""
    a = SQRT2PI
    P = np.polynomial.Polynomial
    x = P([0.0, 1.0])
    left = (x**k * (x + a) ** 2 / 2).integ()
    right = (x**k * ((x + a) ** 2 - x**2) / 2).integ()
    lo = max(x0, 0.0)
    return (left(0.0) - left(min(x0, 0.0))) + (right(T) - right(lo))


def test_agmon_ratio_without_weight(scaled_guide):
    T, mesh, dofs = scaled_guide
    h = 0.3
    psi = dofs.coords[:, 0]  # psi = x is reproduced exactly by quadratic elements
    res = asy.agmon_ratio(psi, mesh, h, asy.AgmonWeightParams(0.0, 0.0, 0.0), dofs)
    exact = 1 + h * h * _moment(0, -SQRT2PI, T) / _moment(2, -SQRT2PI, T)
    assert res.ratio == pytest.approx(exact, rel=1e-10)
    assert not res.clamped


def test_agmon_ratio_monotone_and_clamping(scaled_guide):
    T, mesh, dofs = scaled_guide
    psi = np.ones(dofs.n_dofs)
    r = [asy.agmon_ratio(psi, mesh, 0.5, asy.AgmonWeightParams(eta0=e), dofs).ratio for e in (0.0, 0.1, 0.2, 0.4)]
    assert np.all(np.diff(r) > 0)
    big = asy.agmon_ratio(psi, mesh, 1e-3, asy.AgmonWeightParams(eta0=5.0), dofs)
    assert big.clamped
    with pytest.raises(ValueError):
        asy.agmon_ratio(psi, mesh, 0.0, asy.AgmonWeightParams(), dofs)
    with pytest.raises(ValueError):
        asy.agmon_ratio(psi[:-1], mesh, 0.5, asy.AgmonWeightParams(), dofs)


def test_mass_fraction_matches_area_integrals(scaled_guide):
    T, mesh, dofs = scaled_guide
    psi = np.ones(dofs.n_dofs)
    total = _moment(0, -SQRT2PI, T)
    for x0 in (-3.3, -0.123, 0.0, 0.77):
        part = _moment(0, x0, T)
        assert asy.mass_fraction_beyond(psi, mesh, x0, dofs) == pytest.approx(part / total, rel=1e-12)
    assert asy.mass_fraction_beyond(psi, mesh, -10.0, dofs) == 1.0
    assert asy.mass_fraction_beyond(psi, mesh, 10.0, dofs) == 0.0


def test_mass_fraction_with_free_subset(scaled_guide):
    T, mesh, dofs = scaled_guide
    free = np.arange(0, dofs.n_dofs, 2)
    v = np.ones(len(free))
    full = np.zeros(dofs.n_dofs)
    full[free] = 1.0
    assert asy.mass_fraction_beyond(v, mesh, 0.3, dofs, free) == pytest.approx(asy.mass_fraction_beyond(full, mesh, 0.3, dofs))


def test_leakage_abscissa(scaled_guide):
    T, mesh, dofs = scaled_guide
    psi = np.ones(dofs.n_dofs)
    x = asy.leakage_abscissa(psi, mesh, dofs, level=0.05)
    assert asy.mass_fraction_beyond(psi, mesh, x, dofs) == pytest.approx(0.05, abs=1e-8)
    with pytest.raises(ValueError):
        asy.leakage_abscissa(psi, mesh, dofs, level=1.0)


@given(st.floats(-4.4, 1.9), st.floats(-4.4, 1.9))
def test_property_mass_fraction_monotone(a, b):
    T = 2.0
    mesh = generate_mesh(build_domain(math.pi / 4, T, Shape.SCALED_GUIDE), MeshParams(0.5))
    dofs = build_dofmap(mesh, 2)
    psi = np.cos(dofs.coords[:, 0]) + 2.0
    lo, hi = sorted((a, b))
    assert asy.mass_fraction_beyond(psi, mesh, lo, dofs) >= asy.mass_fraction_beyond(psi, mesh, hi, dofs) - 1e-14
