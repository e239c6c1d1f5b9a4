"""Singularity predicates: bound scans, symmetry ratios, profile fits.

The anchors are fields whose asymptotics are known in closed form: powers
r^e (the scan scales them exactly), bubbles (radial, bounded, and equal to
the cylinder-limit profile after one log translation), and synthetic
periodic profiles pushed back to radial coordinates.
"""

import json
import math

import numpy as np
import pytest

from hartreelab import (CylinderProfile, Field, GridError,
                        ParameterDomainError, ParameterRangeError,
                        ProblemParams, asymptotics_report, blowup_rescale,
                        default_radii, find_delaunay, kernel_table,
                        make_bubble, make_singular_power, nonlinearity_for,
                        profile_fit, sharp_constants, symmetry_ratio,
                        upper_bound_scan)

P32 = ProblemParams(3, 2.0)


# ============================================================
# radii ladders
# ============================================================


def test_default_radii_ladder():
    r = default_radii(1e-3, 1.0)
    assert r[0] == 1.0
    assert np.all(np.diff(r) < 0)
    np.testing.assert_allclose(r[:-1] / r[1:], 2.0 ** 0.25, rtol=1e-12)
    assert r[-1] >= 1e-3 / 2.0 ** 0.25
    # the ladder clips itself to four decades however deep r_min goes
    deep = default_radii(1e-12, 1.0)
    assert deep[-1] >= 1e-4
    with pytest.raises(ParameterRangeError):
        default_radii(0.0, 1.0)
    with pytest.raises(ParameterRangeError):
        default_radii(2.0, 1.0)


def test_scans_reject_bad_ladders():
    u = make_bubble(P32)
    with pytest.raises(ParameterRangeError):
        upper_bound_scan(u, [0.1, 0.2, 0.3])     # increasing
    with pytest.raises(ParameterRangeError):
        symmetry_ratio(u, [0.5])                 # single radius
    with pytest.raises(ParameterRangeError):
        upper_bound_scan(u, [0.5, 0.0])          # nonpositive


# ============================================================
# upper bound scan
# ============================================================


def test_scan_is_exactly_flat_on_the_critical_power():
    # r^nu |x|^(-nu) = 1 identically, the borderline the flag must not trip
    u = make_singular_power(P32)
    scan = upper_bound_scan(u, default_radii(1e-4, 1.0))
    np.testing.assert_allclose(scan.s_values, 1.0, rtol=1e-13)
    assert scan.sup == pytest.approx(1.0, rel=1e-13)
    assert not scan.divergence


@pytest.mark.parametrize("n,a", [(3, 2.0), (4, 2.0), (5, 3.0)])
def test_scan_flags_the_critical_rate_violator(n, a):
    # |x|^-(n-2) turns s into r^(-(n-2)/2); in low dimension that grows
    # under 10x per decade, so the flag needs the whole-scan clause
    P = ProblemParams(n, a)
    u = make_singular_power(P, exponent=-(n - 2.0))
    scan = upper_bound_scan(u, default_radii(1e-5, 1.0))
    assert scan.divergence
    assert scan.slope_last_decade == pytest.approx(-(n - 2.0) / 2.0, abs=1e-6)


def test_scan_keeps_bounded_fields_unflagged():
    scan = upper_bound_scan(make_bubble(P32), default_radii(1e-4, 1.0))
    assert not scan.divergence
    assert scan.growth_last_decade < 1.0
    assert scan.running_sup[-1] == scan.sup


# ============================================================
# symmetry ratio
# ============================================================


def test_symmetry_ratio_certifies_radial_fields():
    sym = symmetry_ratio(make_bubble(P32), default_radii(1e-4, 1.0))
    assert sym.slope is None
    assert sym.certified
    assert "radial" in sym.note
    assert np.max(sym.ratios) < 1e-13


def test_symmetry_ratio_fits_the_linear_rate():
    # probing an off-center bubble about the origin: the oscillation on
    # |x| = r is driven by the gradient, hence O(r) with slope 1
    u = make_bubble(P32, center=[0.05, 0.0, 0.0])
    sym = symmetry_ratio(u, default_radii(1e-4, 0.01))
    assert sym.slope == pytest.approx(1.0, abs=0.05)
    assert sym.certified


def test_symmetry_ratio_needs_positive_fields():
    u = Field(n=3, fn=lambda p: p[:, 0])
    with pytest.raises(ParameterDomainError):
        symmetry_ratio(u, default_radii(0.01, 1.0))


# ============================================================
# blow-up frames
# ============================================================


def test_blowup_frame_normalizes_to_one():
    frame = blowup_rescale(make_bubble(P32), [0.2, 0.0, 0.0])
    assert frame.w(np.zeros(3)) == pytest.approx(1.0, abs=1e-14)
    assert frame.value == pytest.approx(make_bubble(P32)([0.2, 0.0, 0.0]))
    assert frame.scale == pytest.approx(frame.value ** -2.0)   # 2/(2-n), n=3
    with pytest.raises(ParameterDomainError):
        blowup_rescale(Field(n=3, fn=lambda p: -np.ones(p.shape[0])), np.zeros(3))


def test_blowup_frame_maps_singular_points():
    u = make_singular_power(P32)
    x = np.array([0.5, 0.0, 0.0])
    frame = blowup_rescale(u, x)
    img = np.asarray(frame.w.singular_points[0])
    np.testing.assert_allclose(img, -x / frame.scale, rtol=1e-12)


# ============================================================
# profile fits
# ============================================================


def test_profile_fit_matches_the_bubble_limit():
    fit = profile_fit(make_bubble(P32), "cylinder_bubble",
                      default_radii(1e-4, 1.0), P32)
    assert fit.candidate == "cylinder_bubble"
    assert abs(fit.tau) < 1e-6
    assert fit.error_smallest < 1e-10
    assert not fit.rejected
    assert fit.multistart_spread is None


def test_profile_fit_finds_the_dilation_translation():
    # mu^nu c_n (1 + mu^2 r^2)^(-nu) is the dilated solution; on the
    # cylinder that is the same profile translated by -ln mu
    mu = 3.0
    u = make_bubble(P32, mu=mu).scaled(mu ** 0.5)
    fit = profile_fit(u, "cylinder_bubble", default_radii(1e-4, 1.0), P32)
    assert fit.tau == pytest.approx(-math.log(mu), abs=1e-6)
    assert fit.error_smallest < 1e-10
    assert not fit.rejected


def test_profile_fit_recovers_periodic_translation():
    L = 3.0
    tau_true = 0.8
    tgrid = L / 128 * np.arange(128)
    W = CylinderProfile(tgrid, 0.7 + 0.1 * np.cos(2.0 * np.pi * tgrid / L),
                        boundary="periodic", period=L)
    u = Field.radial(3, lambda r: r ** -0.5 * W(-np.log(r) + tau_true),
                     singular_center=True)
    fit = profile_fit(u, W, default_radii(1e-4, 1.0), P32)
    assert fit.candidate == "cylinder_profile"
    k = round((fit.tau - tau_true) / L)
    assert fit.tau - k * L == pytest.approx(tau_true, abs=1e-4)
    assert fit.error_smallest < 1e-6
    assert not fit.rejected
    assert fit.multistart_spread is not None and fit.multistart_spread >= 0.0


def test_profile_fit_accepts_delaunay_candidates():
    nl = nonlinearity_for(P32)
    kt = kernel_table(P32)
    uc = (0.25 / (nl.c_f * kt.norm_l1)) ** 0.125
    sol = find_delaunay(P32, nl, 0.5 * uc, 1.05 * 2.0 * math.pi,
                        kt=kt, n_nodes=128)
    u = Field.radial(3, lambda r: r ** -0.5 * sol.profile(-np.log(r)),
                     singular_center=True)
    fit = profile_fit(u, sol, default_radii(1e-3, 1.0), P32)
    assert fit.candidate == "delaunay"
    assert fit.error_smallest < 1e-8
    assert not fit.rejected


def test_profile_fit_rejects_wrong_shapes():
    # a decaying candidate that does not cover the probed t-range
    t = np.linspace(-5.0, 5.0, 200)
    shallow = CylinderProfile(t, 1e-6 * np.exp(-t * t))
    with pytest.raises(GridError):
        profile_fit(make_bubble(P32), shallow, default_radii(1e-4, 1.0), P32)
    with pytest.raises(ParameterDomainError):
        profile_fit(make_bubble(P32), "sech_squared", default_radii(1e-4, 1.0), P32)


def test_profile_fit_flags_genuinely_different_fields():
    # the critical power is constant on the cylinder, so no translation of
    # the decaying bubble profile can track it across a whole decade
    u = make_singular_power(P32)
    fit = profile_fit(u, "cylinder_bubble", default_radii(1e-4, 1.0), P32)
    assert fit.rejected
    assert fit.error_smallest > 1e-2


def test_profile_fit_absorbs_scalings_into_the_tail_translation():
    # on a decaying tail a translation IS a rescaling (W ~ e^(-nu t)), so
    # a 3x-scaled bubble still fits, just at a shifted tau
    u = make_bubble(P32).scaled(3.0)
    fit = profile_fit(u, "cylinder_bubble", default_radii(1e-4, 1.0), P32)
    assert not fit.rejected
    assert fit.tau == pytest.approx(-2.0 * math.log(3.0), rel=1e-2)


# ============================================================
# the report
# ============================================================


def test_asymptotics_report_summary_and_files(tmp_path):
    rep = asymptotics_report(make_bubble(P32), default_radii(1e-3, 1.0), P32)
    doc = rep.summary()
    assert set(doc) == {"n", "alpha", "sup_scaled_average", "divergence",
                        "growth_last_decade", "symmetry_slope",
                        "symmetry_certified", "fits"}
    assert doc["n"] == 3 and not doc["divergence"] and doc["symmetry_certified"]
    assert doc["fits"][0]["candidate"] == "cylinder_bubble"
    assert not doc["fits"][0]["rejected"]

    rep.to_json(tmp_path / "report.json")
    rep.scan_to_csv(tmp_path / "scan.csv")
    rep.symmetry_to_csv(tmp_path / "sym.csv")
    loaded = json.loads((tmp_path / "report.json").read_text())
    assert loaded["symmetry_slope"] is None
    scan_lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert scan_lines[0] == "# hartreelab upper-bound scan v1"
    assert scan_lines[1].startswith("r,")
    sym_lines = (tmp_path / "sym.csv").read_text().splitlines()
    assert sym_lines[0] == "# hartreelab symmetry ratio v1"
