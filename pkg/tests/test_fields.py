"""Grids, radial profiles, fields, and the sphere quadrature."""

import math

import numpy as np
import pytest

from hartreelab import (Field, ProblemParams, RadialGrid, RadialProfile,
                        make_bubble, make_hls_extremal, make_singular_power,
                        sample_radial, sharp_constants, spherical_average,
                        sphere_quadrature)
from hartreelab.constants import omega
from hartreelab.errors import (GridError, SamplingError,
                               UnsupportedDimensionError)
from hartreelab.spheres import fd_laplacian

P32 = ProblemParams(3, 2.0)


# ============================================================
# grids and profiles
# ============================================================


def test_grid_contracts():
    with pytest.raises(GridError):
        RadialGrid(np.array([1.0, 0.5, 2.0]))       # not increasing
    with pytest.raises(GridError):
        RadialGrid(np.array([-1.0, 1.0]))           # not positive
    with pytest.raises(GridError):
        RadialGrid.geometric(1e-2, 1e2, per_decade=8)   # too coarse
    with pytest.raises(GridError):
        RadialGrid.geometric(2.0, 1.0)
    g = RadialGrid.geometric(1e-2, 1e2, 32)
    assert g.r_min == pytest.approx(1e-2) and g.r_max == pytest.approx(1e2)
    assert len(g) == 4 * 32 + 1


def test_grid_refinement_bands():
    g = RadialGrid.geometric(1e-2, 1e2, 32, refine=[(0.5, 2.0, 3.0)])
    base = RadialGrid.geometric(1e-2, 1e2, 32)
    assert len(g) > len(base)
    assert np.all(np.diff(g.r) > 0.0)
    with pytest.raises(GridError):
        RadialGrid.geometric(1e-2, 1e2, 32, refine=[(1e-3, 1.0, 2.0)])


def test_profile_interpolation_and_extrapolation():
    grid = RadialGrid.geometric(0.1, 10.0, 48)
    prof = RadialProfile(grid, grid.r ** -1.5, inner_exponent=-1.5,
                         outer_exponent=-1.5)
    # log-log pchip reproduces a pure power exactly
    assert prof(0.37) == pytest.approx(0.37 ** -1.5, rel=1e-13)
    assert prof(30.0, extrapolate=True) == pytest.approx(30.0 ** -1.5, rel=1e-12)
    assert prof(0.01, extrapolate=True) == pytest.approx(0.01 ** -1.5, rel=1e-12)
    with pytest.raises(SamplingError):
        prof(30.0)                      # outside, extrapolation not requested
    with pytest.raises(SamplingError):
        prof(-1.0)
    bare = RadialProfile(grid, grid.r ** -1.5)
    with pytest.raises(SamplingError):
        bare(30.0, extrapolate=True)    # no declared exponent to use


def test_profile_exponent_estimation():
    grid = RadialGrid.geometric(1e-3, 1e3, 64)
    vals = 2.0 * grid.r ** -0.5 / (1.0 + grid.r ** 2)
    prof = RadialProfile(grid, vals)
    e_in, e_out = prof.estimate_exponents()
    assert e_in == pytest.approx(-0.5, abs=1e-3)
    assert e_out == pytest.approx(-2.5, abs=1e-3)
    assert prof.with_exponents(-0.5, -2.5).validate_exponents()
    assert not prof.with_exponents(-0.5, -4.0).validate_exponents()


def test_profile_shape_mismatch():
    grid = RadialGrid.geometric(0.1, 10.0, 48)
    with pytest.raises(GridError):
        RadialProfile(grid, np.ones(3))
    with pytest.raises(GridError):
        RadialProfile(grid, np.full(len(grid), np.nan))


def test_profile_csv_json_roundtrip(tmp_path):
    grid = RadialGrid.geometric(0.1, 10.0, 24)
    prof = RadialProfile(grid, np.exp(-grid.r), inner_exponent=0.0,
                         outer_exponent=None)
    prof.to_csv(tmp_path / "p.csv", metadata={"kind": "test"})
    back = RadialProfile.from_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.grid.r, prof.grid.r)
    np.testing.assert_array_equal(back.values, prof.values)
    assert back.inner_exponent == 0.0 and back.outer_exponent is None
    prof.to_json(tmp_path / "p.json")
    back = RadialProfile.from_json(tmp_path / "p.json")
    np.testing.assert_array_equal(back.values, prof.values)


# ============================================================
# fields
# ============================================================


def test_field_evaluation_shapes():
    u = make_bubble(P32)
    single = u(np.array([1.0, 0.0, 0.0]))
    assert isinstance(single, float)
    batch = u(np.zeros((5, 3)))
    assert batch.shape == (5,)
    with pytest.raises(SamplingError):
        u(np.zeros((5, 4)))             # wrong ambient dimension


def test_singular_points_are_refused():
    u = make_singular_power(P32)
    with pytest.raises(SamplingError):
        u(np.zeros(3))
    assert u(np.array([2.0, 0.0, 0.0])) == pytest.approx(2.0 ** -0.5)


def test_bubble_values_and_scaling():
    sc = sharp_constants(P32)
    u = make_bubble(P32, mu=2.0)
    assert u(np.zeros(3)) == pytest.approx(sc.c_n)
    r = 1.3
    assert u(np.array([r, 0.0, 0.0])) == pytest.approx(
        sc.c_n * (1.0 + (2.0 * r) ** 2) ** -0.5, rel=1e-14)
    shifted = make_bubble(P32, center=[1.0, 0.0, 0.0])
    assert shifted(np.array([1.0, 0.0, 0.0])) == pytest.approx(sc.c_n)
    with pytest.raises(SamplingError):
        make_bubble(P32, mu=-1.0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_talenti_bubble_solves_local_equation(n):
    # -Lap u = mu^2 u^((n+2)/(n-2)) for the talenti normalization
    P = ProblemParams(n, 2.0)
    mu = 1.7
    u = make_bubble(P, mu=mu, normalization="talenti")
    pts = np.array([[0.3] + [0.1] * (n - 1), [1.0] + [0.0] * (n - 1)])
    lap = fd_laplacian(u, pts, h=1e-3)
    want = mu ** 2 * u(pts) ** ((n + 2.0) / (n - 2.0))
    # the bound is the h^2 stencil error, not the identity itself
    assert np.max(np.abs(-lap / want - 1.0)) < 1e-4


def test_field_algebra():
    u = make_bubble(P32)
    v = u.plus_constant(0.25).scaled(2.0)
    pt = np.array([0.4, -0.2, 0.1])
    assert v(pt) == pytest.approx(2.0 * (u(pt) + 0.25), rel=1e-15)
    assert v.radial_fn is not None          # algebra preserves the radial route


def test_sample_radial_uses_exact_callable():
    u = make_bubble(P32)
    grid = RadialGrid.geometric(1e-3, 1e3, 48)
    prof = sample_radial(u, grid)
    want = u.radial_fn(grid.r)
    np.testing.assert_allclose(prof.values, want, rtol=1e-15)
    # bubble tails: flat inside, r^-(n-2) outside
    assert prof.inner_exponent == pytest.approx(0.0, abs=1e-3)
    assert prof.outer_exponent == pytest.approx(-1.0, abs=1e-3)


def test_sample_radial_ray_direction():
    u = make_bubble(P32, center=[0.5, 0.0, 0.0])
    grid = RadialGrid.geometric(0.1, 10.0, 48)
    along = sample_radial(u, grid, direction=[1.0, 0.0, 0.0],
                          estimate_tails=False)
    r = grid.r
    want = u(np.column_stack([0.5 + r, np.zeros_like(r), np.zeros_like(r)]))
    np.testing.assert_allclose(along.values, want, rtol=1e-14)
    with pytest.raises(SamplingError):
        sample_radial(u, grid, direction=[0.0, 0.0, 0.0])


def test_hls_extremal_shape():
    u = make_hls_extremal(P32, mu=2.0)
    assert u(np.zeros(3)) == pytest.approx((1.0 / 2.0) ** 2.5)
    with pytest.raises(SamplingError):
        make_hls_extremal(P32, mu=0.0)


# ============================================================
# sphere quadrature
# ============================================================


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sphere_rule_moments(n):
    nodes, weights = sphere_quadrature(n, order=14)
    om = omega(n - 1)
    assert np.sum(weights) == pytest.approx(om, rel=1e-13)
    assert np.abs(np.dot(weights, nodes[:, 0])) < 1e-13 * om
    # int y_1^2 = omega/n, int y_1^2 y_2^2 = omega/(n(n+2))
    assert np.dot(weights, nodes[:, 0] ** 2) == pytest.approx(om / n, rel=1e-12)
    assert np.dot(weights, nodes[:, 0] ** 2 * nodes[:, 1] ** 2) == pytest.approx(
        om / (n * (n + 2.0)), rel=1e-12)


def test_sphere_rule_dimension_guard():
    with pytest.raises(UnsupportedDimensionError):
        sphere_quadrature(6)


def test_spherical_average():
    u = make_bubble(P32)
    assert spherical_average(u, 0.7) == pytest.approx(u.radial_fn(0.7), rel=1e-13)
    # harmonic (affine) functions average to their center value
    lin = Field(n=3, fn=lambda pts: 1.0 + pts[:, 0] - 2.0 * pts[:, 2])
    c = np.array([0.3, 0.1, -0.2])
    want = 1.0 + c[0] - 2.0 * c[2]
    assert spherical_average(lin, 1.7, center=c) == pytest.approx(want, rel=1e-13)
    with pytest.raises(SamplingError):
        spherical_average(u, 0.0)
