import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nnjscc import analytic as an
from nnjscc.errors import DomainError

LN2 = math.log(2)


@pytest.fixture
def gg_report():
    # Gaussian source and noise, P=3, sigma2=1, D=0.25
    return an.dispersion_report(3.0, 1.0, 3.0, 3.0, 0.25)


def test_capacity_values():
    assert an.capacity(0) == 0
    assert an.capacity(3) == pytest.approx(LN2, rel=1e-15)
    assert an.capacity(1) == pytest.approx(0.5 * LN2, rel=1e-15)
    with pytest.raises(DomainError):
        an.capacity(-0.1)


def test_rate_distortion_values():
    assert an.rate_distortion(1.0, 1.0) == 0
    assert an.rate_distortion(1.0, 0.25) == pytest.approx(LN2, rel=1e-15)
    assert an.rate_distortion(1.0, 2.0) == 0
    for bad in ((0, 1), (1, 0), (-1, 1)):
        with pytest.raises(DomainError):
            an.rate_distortion(*bad)


def test_bandwidth_ratio_values():
    assert an.bandwidth_ratio(3, 1, 0.25) == pytest.approx(1.0, rel=1e-15)
    assert an.bandwidth_ratio(1, 1, 0.25) == pytest.approx(0.5, rel=1e-15)
    assert an.bandwidth_ratio(3, 1, 0.5) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(DomainError):
        an.bandwidth_ratio(3, 1, 1)


def test_v_source_values():
    assert an.v_source(3.0, 1.0) == 0.5
    assert an.v_source(3.0 * 4.0, 2.0) == 0.5
    assert an.v_source(1.0, 1.0) == 0.0
    assert an.v_source(9 / 5, 1.0) == pytest.approx(0.2, rel=1e-14)
    with pytest.raises(DomainError):
        an.v_source(0.5, 1.0)


@pytest.mark.parametrize("P", [0.5, 1, 3, 10])
def test_v_channel_gaussian_noise(P):
    want = P * (P + 2) / (2 * (P + 1) ** 2)
    assert abs(an.v_channel(3.0, P, "spherical") - want) <= 1e-12 * want


def test_v_channel_point_value_and_errors():
    assert an.v_channel(3.0, 1.0, "spherical") == pytest.approx(0.375, rel=1e-15)
    with pytest.raises(DomainError):
        an.v_channel(0.5, 1.0, "spherical")
    with pytest.raises(DomainError):
        an.v_channel(3.0, 0.0, "iid")
    with pytest.raises(DomainError):
        an.v_channel(3.0, 1.0, "lattice")


@given(st.floats(1.0, 50.0), st.floats(1e-3, 1e3))
@settings(max_examples=200)
def test_iid_minus_spherical_channel_dispersion(zeta_c, P):
    diff = an.v_channel(zeta_c, P, "iid") - an.v_channel(zeta_c, P, "spherical")
    want = 0.5 * (P / (P + 1)) ** 2
    assert abs(diff - want) <= 1e-12 * want + 1e-15


def test_v_joint_gaussian_case(gg_report):
    want = (0.5 + 15 / 32) / LN2**2
    assert gg_report.v_joint_sp == pytest.approx(want, rel=1e-13)
    assert gg_report.v_joint_sp == pytest.approx(2.0163, abs=5e-5)


def test_v_joint_vanishes_with_both_dispersions():
    # V_s = 0 exactly; V_c is O(P) and vanishes as P -> 0
    v0 = an.v_joint(1.0, 1.0, 1.0, 1e-300, 0.25, "spherical")
    assert v0 == pytest.approx(0.0, abs=1e-250)


def _flat(report):
    return dataclasses.replace(report, v_s=0.0, v_c_sp=0.0, v_c_iid=0.0, v_joint_sp=0.0, v_joint_iid=0.0)


def test_iid_joint_excess(gg_report):
    R = gg_report.rate_distortion
    extra = 0.5 * (3 / 4) ** 2 / R**2
    assert gg_report.v_joint_iid - gg_report.v_joint_sp == pytest.approx(extra, rel=1e-12)


@given(st.floats(1.0, 20.0), st.floats(0.1, 10.0), st.floats(1.0, 20.0), st.floats(0.05, 20.0),
       st.floats(0.01, 0.99))
@settings(max_examples=200)
def test_joint_dispersion_forms_agree(zs_ratio, sigma2, zeta_c, P, d_frac):
    for kind in ("spherical", "iid"):
        v = an.v_joint(zs_ratio * sigma2**2, sigma2, zeta_c, P, d_frac * sigma2, kind)
        C, R = an.capacity(P), an.rate_distortion(sigma2, d_frac * sigma2)
        vs, vc = an.v_source(zs_ratio * sigma2**2, sigma2), an.v_channel(zeta_c, P, kind)
        assert v == pytest.approx((C * vs + R * vc) / R**3, rel=1e-12)


@given(st.floats(1.0, 20.0), st.floats(0.1, 10.0), st.floats(0.01, 0.99), st.floats(0.01, 100.0))
@settings(max_examples=100)
def test_scaling_invariance(zs_ratio, sigma2, d_frac, c):
    a = an.dispersion_report(zs_ratio * sigma2**2, sigma2, 3.0, 2.0, d_frac * sigma2)
    b = an.dispersion_report(c**2 * zs_ratio * sigma2**2, c * sigma2, 3.0, 2.0, c * d_frac * sigma2)
    for name in ("rate_distortion", "rho_star", "v_s", "v_joint_sp", "v_joint_iid"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-10, abs=1e-14)


def test_report_consistency(gg_report):
    assert gg_report.rho_star * gg_report.rate_distortion == pytest.approx(gg_report.capacity, rel=1e-15)
    assert gg_report.nu_star_sp == pytest.approx(1 / (2 * gg_report.v_joint_sp))
    assert "normal approximation" in gg_report.as_dict()["approximation"]


def test_second_order_k(gg_report):
    assert an.second_order_k(100, 0.5, gg_report) == pytest.approx(100 * gg_report.rho_star, rel=1e-15)
    assert an.second_order_k(100, 0.2, gg_report) < 100 * gg_report.rho_star
    k = an.second_order_k(10**4, 0.1, gg_report)
    assert k == pytest.approx(10**4 - math.sqrt(10**4 * gg_report.v_joint_sp) * 1.2815515655446004, rel=1e-14)
    assert k == pytest.approx(9818.0, abs=0.05)
    assert gg_report.k_star_prediction(10**4, 0.1) == k


def test_second_order_k_monotone_in_eps(gg_report):
    eps = np.linspace(0.01, 0.99, 50)
    ks = [an.second_order_k(500, e, gg_report) for e in eps]
    assert np.all(np.diff(ks) > 0)


def test_predicted_eps_inverts_second_order_k(gg_report):
    for eps in (0.05, 0.3, 0.5, 0.9):
        k = an.second_order_k(200, eps, gg_report, "iid")
        assert an.predicted_eps(200, k, gg_report, "iid") == pytest.approx(eps, rel=1e-10)


def test_md_constant(gg_report):
    assert an.md_constant(gg_report) == pytest.approx(1 / (2 * gg_report.v_joint_sp))
    assert an.md_constant(gg_report) == pytest.approx(0.24798, abs=5e-6)
    assert an.md_constant(gg_report, "iid") < an.md_constant(gg_report, "spherical")
    with pytest.raises(DomainError):
        an.md_constant(_flat(gg_report))


def test_md_constant_at_half_dispersion():
    rep = dataclasses.replace(an.dispersion_report(3.0, 1.0, 3.0, 3.0, 0.25), v_joint_sp=0.5)
    assert an.md_constant(rep) == 1.0


def test_separate_second_order_exceeds_joint(gg_report):
    # grid-search oracle over eps1 at resolution 1e-5
    eps = 0.1
    R = gg_report.rate_distortion
    a = math.sqrt(gg_report.rho_star * gg_report.v_s) / R
    b = math.sqrt(gg_report.v_c_sp) / R
    grid = np.arange(1e-5, eps, 1e-5)
    oracle = np.min(a * an.qfunc_inv(grid) + b * an.qfunc_inv(eps - grid))
    value, eps1 = an.separate_split(eps, gg_report)
    assert value == pytest.approx(oracle, abs=1e-6)
    assert value <= oracle + 1e-12
    joint = math.sqrt(gg_report.v_joint_sp) * an.qfunc_inv(eps)
    assert joint == pytest.approx(1.8199, abs=5e-4)
    assert value > joint
    assert 0 < eps1 < eps


def test_separate_second_order_reduces_without_source_dispersion():
    rep = an.dispersion_report(1.0, 1.0, 3.0, 3.0, 0.25)
    want = math.sqrt(rep.v_c_sp) / rep.rate_distortion * an.qfunc_inv(0.1)
    assert an.separate_second_order(0.1, rep) == pytest.approx(want, rel=1e-14)
    assert an.separate_second_order(0.1, rep) == pytest.approx(math.sqrt(rep.v_joint_sp) * an.qfunc_inv(0.1))


def test_separate_split_symmetric_case():
    # rho* V_s = V_c: Gaussian noise at P=3 has V_c = 15/32; pick zeta_s with V_s = 15/32 and rho* = 1
    zeta_s = 1 + 4 * 15 / 32
    rep = an.dispersion_report(zeta_s, 1.0, 3.0, 3.0, 0.25)
    assert rep.rho_star * rep.v_s == pytest.approx(rep.v_c_sp)
    _, eps1 = an.separate_split(0.1, rep)
    assert eps1 == pytest.approx(0.05, abs=1e-6)
    branches = (rep.rate_distortion**2 / (2 * rep.rho_star * rep.v_s), rep.rate_distortion**2 / (2 * rep.v_c_sp))
    assert branches[0] == pytest.approx(branches[1])
    assert an.separate_md(rep) == pytest.approx(branches[0])


@given(st.floats(1.05, 10), st.floats(1.05, 20), st.floats(0.1, 10), st.floats(0.05, 0.95),
       st.floats(0.001, 0.499))
@settings(max_examples=100, deadline=None)
def test_separate_backoff_never_beats_joint(zs, zc, P, d, eps):
    rep = an.dispersion_report(zs, 1.0, zc, P, d)
    assert an.separate_second_order(eps, rep) > math.sqrt(rep.v_joint_sp) * an.qfunc_inv(eps)


def test_separate_md_gaussian_value(gg_report):
    assert an.separate_md(gg_report) == pytest.approx(LN2**2, rel=1e-14)
    assert an.separate_md(gg_report) == pytest.approx(0.48045, abs=5e-6)


def test_separate_md_errors(gg_report):
    with pytest.raises(DomainError):
        an.separate_md(_flat(gg_report))
    with pytest.raises(DomainError):
        an.separate_split(0.6, gg_report)


def test_qfunc():
    assert an.qfunc(0) == 0.5
    assert an.qfunc_inv(an.qfunc(1.2345)) == pytest.approx(1.2345, abs=1e-8)
    # erfc oracle by direct integration of the normal density
    tail, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 1.28155, np.inf,
                             epsabs=1e-14)
    assert an.qfunc(1.28155) == pytest.approx(tail, abs=1e-12)
    assert an.qfunc(1.28155) == pytest.approx(0.1, abs=1e-5)
    assert an.qfunc(40.0) == pytest.approx(math.erfc(40 / math.sqrt(2)) / 2, rel=1e-10)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DomainError):
            an.qfunc_inv(bad)


def test_qfunc_vectorised():
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(an.qfunc(x) + an.qfunc(-x), 1.0, rtol=1e-15)
