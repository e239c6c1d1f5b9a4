"""Sharp constants against the committed multi-precision oracle.

The fixture is produced by make_constants_oracle.py (mpmath at 40 digits);
everything here compares the package's lgamma-based doubles against those
values, plus the closed-form identities the constants must satisfy among
themselves.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from hartreelab import ProblemParams, sharp_constants
from hartreelab.constants import (k_identity_defect, newton_constant,
                                  newton_constant_alt, omega, unit_ball_volume)
from hartreelab.errors import ParameterDomainError

FIXTURE = Path(__file__).parent / "fixtures" / "sharp_constants_oracle.json"
ORACLE = json.loads(FIXTURE.read_text())["cases"]
FIELDS = ("p", "s_n", "h_n", "k_n", "c_n", "omega", "omega_n", "omega_n_minus_2")


@pytest.mark.parametrize("case", ORACLE, ids=lambda c: f"n{c['n']}a{c['alpha']:g}")
def test_constants_match_oracle(case):
    sc = sharp_constants(ProblemParams(case["n"], case["alpha"]))
    for key in FIELDS:
        assert getattr(sc, key) == pytest.approx(float(case[key]), rel=1e-12), key


def test_sphere_measures():
    assert omega(1) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert omega(2) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert omega(3) == pytest.approx(2.0 * math.pi ** 2, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
    with pytest.raises(ValueError):
        omega(-1)


def test_exponents():
    P = ProblemParams(3, 2.0)
    assert P.p == 5.0
    assert P.p_minus_1 == 4.0
    assert P.nu == 0.5
    sc = sharp_constants(P)
    assert sc.p == 5.0 and sc.p_minus_1 == 4.0


@pytest.mark.parametrize("n,alpha", [(3, 1.0), (3, 2.0), (4, 2.0), (5, 3.0)])
def test_k_identity_holds_to_roundoff(n, alpha):
    P = ProblemParams(n, alpha)
    assert k_identity_defect(sharp_constants(P), P) < 1e-14


def test_newton_constant_conventions():
    assert newton_constant(3) == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-15)
    for n in (3, 4, 5):
        ratio = newton_constant_alt(n) / newton_constant(n)
        assert ratio == pytest.approx((n - 2.0) / (n - 1.0), rel=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sobolev_quotient_calibration(n):
    # the profile (1 + r^2)^(-(n-2)/2) attains |grad u|_2^2 / |u|_{2*}^2 = s_n^{-2}
    sc = sharp_constants(ProblemParams(n, 2.0))
    nu = (n - 2.0) / 2.0
    du = lambda r: -2.0 * nu * r * (1.0 + r * r) ** (-nu - 1.0)
    u = lambda r: (1.0 + r * r) ** (-nu)
    two_star = 2.0 * n / (n - 2.0)
    om = omega(n - 1)
    grad2 = om * quad(lambda r: du(r) ** 2 * r ** (n - 1), 0.0, np.inf)[0]
    norm2 = (om * quad(lambda r: u(r) ** two_star * r ** (n - 1), 0.0, np.inf)[0]) \
        ** (2.0 / two_star)
    assert grad2 / norm2 == pytest.approx(sc.s_n ** -2, rel=1e-12)


def test_invalid_parameters_are_refused():
    with pytest.raises(ParameterDomainError):
        ProblemParams(2, 1.0)
    with pytest.raises(ParameterDomainError):
        ProblemParams(3, 0.0)
    with pytest.raises(ParameterDomainError):
        ProblemParams(3, 3.0)
    with pytest.raises(ParameterDomainError):
        ProblemParams(4, -1.0)
