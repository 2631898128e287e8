from fractions import Fraction

import mpmath
import pytest

from cpverify.errors import DomainError, UsageError
from cpverify.exact import session_registry
from cpverify.moments import MasterFunction, ibp_relation, ibp_relation_partial_vi
from cpverify.quadrature import (
    andreief_phi,
    check_domain,
    moment_numeric,
    pde_residual_numeric,
    phi_numeric,
    phi_value,
    simplex_phi_coeffs,
)

REG = session_registry(1, seeds=("nu0", "nu1"))

ADMISSIBLE = {
    "II": (Fraction(1, 2), {}),
    "III": (Fraction(-3, 2), {"b": Fraction(-1, 3)}),
    "IV": (Fraction(1, 3), {"b": Fraction(-1, 3)}),
    "V": (Fraction(3, 2), {"b": Fraction(-1, 3), "c": Fraction(-1, 5)}),
    "VI": (Fraction(7, 4), {"a": Fraction(-1, 4), "b": Fraction(-1, 3), "c": Fraction(-1, 5), "d": Fraction(2, 7)}),
}


def mpq(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def relation_residual(J, n, t, params, prec=192):
    mf = MasterFunction(J, REG, params)
    rel = ibp_relation(mf, n)
    with mpmath.mp.workprec(prec):
        total = mpmath.mpf(0)
        scale = mpmath.mpf(0)
        for key, coeff in rel.terms.items():
            ((kind, k),) = key
            c = mpq(coeff.eval({"t": t, "nu0": 0, "nu1": 0}))
            mom = moment_numeric(J, k, 0, t, params, prec=prec)[0]
            total += c * mom
            scale = max(scale, abs(c * mom))
        return abs(total) / scale


def test_domain_constraints():
    with pytest.raises(DomainError):
        check_domain("III", Fraction(1, 2), {"b": Fraction(-1, 3)})
    with pytest.raises(DomainError):
        check_domain("V", Fraction(1, 2), {"b": Fraction(1, 3), "c": Fraction(-1, 5)})
    with pytest.raises(DomainError):
        check_domain("VI", Fraction(1, 2), ADMISSIBLE["VI"][1])  # t must exceed 1
    check_domain("II", Fraction(0), {})
    with pytest.raises(UsageError):
        moment_numeric("V", 0, 1, Fraction(3, 2), ADMISSIBLE["V"][1])


def test_airy_type_moment_finite_and_stable():
    v1, e1 = moment_numeric("II", 0, 0, 0, {}, prec=128)
    v2, _ = moment_numeric("II", 0, 0, 0, {}, prec=192)
    assert abs(v1) > 0.1
    assert abs(v1 - v2) < mpmath.mpf("1e-35")
    assert e1 < mpmath.mpf("1e-30")


@pytest.mark.parametrize("J", ["II", "III", "IV", "V", "VI"])
def test_moment_recursions_numeric(J):
    t, params = ADMISSIBLE[J]
    for n in range(0, 5):  # covers moments k = 0..6 for every family
        assert relation_residual(J, n, t, params) < mpmath.mpf("1e-10"), (J, n)


def test_vi_partial_relation_with_rho():
    t, params = ADMISSIBLE["VI"]
    mf = MasterFunction("VI", REG, params)
    rel = ibp_relation_partial_vi(mf, 1)
    with mpmath.mp.workprec(192):
        total = mpmath.mpf(0)
        scale = mpmath.mpf(0)
        for key, coeff in rel.terms.items():
            ((kind, k),) = key
            c = mpq(coeff.eval({"t": t, "nu0": 0, "nu1": 0}))
            mom = moment_numeric("VI", k, 1 if kind == "rho" else 0, t, params, prec=192)[0]
            total += c * mom
            scale = max(scale, abs(c * mom))
        assert abs(total) / scale < mpmath.mpf("1e-10")


def test_phi_numeric_matches_seed_moments():
    # N=1, m=1: Phi(z) = z nu0 - nu1 numerically
    t, params = ADMISSIBLE["V"]
    coeffs, err = phi_numeric("V", 1, 1, 1, t, params, prec=96, level=5)
    nu0 = moment_numeric("V", 0, 0, t, params, prec=96)[0]
    nu1 = moment_numeric("V", 1, 0, t, params, prec=96)[0]
    assert abs(coeffs[(0,)] - nu0) / abs(nu0) < mpmath.mpf("1e-20")
    assert abs(coeffs[(1,)] - nu1) / abs(nu1) < mpmath.mpf("1e-20")


def test_phi_coeffs_symmetric_under_index_swap():
    t, params = ADMISSIBLE["V"]
    coeffs, _, _ = simplex_phi_coeffs("V", 2, 2, Fraction(1, 2), t, params, prec=64, level=3)
    for k in coeffs:
        # equal up to accumulation order (last-bit rounding)
        assert abs(coeffs[k] - coeffs[k[::-1]]) <= mpmath.mpf("1e-16") * abs(coeffs[k])


def test_pde_residual_numeric_v():
    t, params = ADMISSIBLE["V"]
    rep = pde_residual_numeric("V", 2, 2, Fraction(1, 2), t, params, prec=64, level=3)
    assert rep["residual"] < mpmath.mpf("1e-6")
    assert rep["dt_agreement"] < mpmath.mpf("1e-8")
    assert rep["time_factor"] == 2


def test_pde_residual_negative_control():
    t, params = ADMISSIBLE["V"]
    rep = pde_residual_numeric("V", 2, 2, Fraction(1, 2), t, params, prec=64, level=3, time_factor=-2)
    assert rep["residual"] > mpmath.mpf("0.1")


def test_andreief_matches_simplex():
    params = {"b": Fraction(-1, 3)}
    z = [Fraction(3, 2), Fraction(-2, 3)]
    coeffs, _ = phi_numeric("IV", 2, 2, 1, Fraction(1, 3), params, prec=96, level=5)
    simplex_val = phi_value(coeffs, [mpq(x) for x in z], 2)
    det_val = andreief_phi("IV", z, Fraction(1, 3), 2, params, prec=96)
    # at hbar = 1 the symmetric full-domain integral is m! * simplex
    assert abs(2 * simplex_val - det_val) / abs(det_val) < mpmath.mpf("1e-8")


def test_andreief_m1_trivial():
    params = {"b": Fraction(-1, 3)}
    t = Fraction(1, 3)
    det_val = andreief_phi("IV", [Fraction(2)], t, 1, params, prec=96)
    # m = 1: the determinant is the single modified moment z nu0 - nu1
    nu0 = moment_numeric("IV", 0, 0, t, params, prec=96)[0]
    nu1 = moment_numeric("IV", 1, 0, t, params, prec=96)[0]
    assert abs(det_val - (2 * nu0 - nu1)) / abs(det_val) < mpmath.mpf("1e-12")
