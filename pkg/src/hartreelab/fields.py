"""Radial grids, radial profiles, and point fields on R^n \\ {0}.

Positive radial quantities in this problem live across many decades and
decay like powers at both ends, so the native representation is a
geometric radial grid together with declared power-law exponents for the
two tails.  Interpolation of positive profiles happens in (log r, log u)
with a monotone cubic, which keeps interpolants positive and exact on
pure power laws; non-positive profiles fall back to linear interpolation
in the value.

Fields are lightweight wrappers around closed-form callables.  No global
n-dimensional grid is ever built: pointwise evaluation, radial sampling
along rays, and product Gauss quadrature over spheres are the only
access paths.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_jacobi

from .constants import omega, sharp_constants
from .errors import GridError, SamplingError, UnsupportedDimensionError
from .params import ProblemParams

_LOG10 = math.log(10.0)
_MAX_LOG_SPACING = _LOG10 / 16.0   # grid contract: at least 16 nodes per decade


# ============================================================
# radial grids
# ============================================================


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing positive radii, geometrically spaced up to refinement."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "r", r)
        if r.ndim != 1 or r.size < 2:
            raise GridError("grid needs a 1-d array with at least two radii")
        if r[0] <= 0.0 or not np.all(np.isfinite(r)):
            raise GridError("grid radii must be positive and finite")
        dlog = np.diff(np.log(r))
        if np.any(dlog <= 0.0):
            raise GridError("grid radii must be strictly increasing")
        if np.max(dlog) > _MAX_LOG_SPACING * (1 + 1e-9):
            raise GridError(
                f"grid too coarse: {_LOG10 / np.max(dlog):.1f} nodes/decade "
                "where at least 16 are required")

    @classmethod
    def geometric(cls, r_min: float, r_max: float, per_decade: int = 96,
                  refine: Optional[Sequence[tuple]] = None) -> "RadialGrid":
        """Geometric grid with optional (lo, hi, factor) refinement bands."""
        if not (0.0 < r_min < r_max):
            raise GridError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
        if per_decade < 16:
            raise GridError(f"per_decade must be >= 16, got {per_decade}")
        decades = math.log10(r_max / r_min)
        num = int(math.ceil(decades * per_decade)) + 1
        r = np.geomspace(r_min, r_max, num)
        if refine:
            pieces = [r]
            for lo, hi, factor in refine:
                if not (r_min <= lo < hi <= r_max):
                    raise GridError(f"refinement band ({lo}, {hi}) outside grid range")
                band_num = int(math.ceil(math.log10(hi / lo) * per_decade * factor)) + 1
                pieces.append(np.geomspace(lo, hi, band_num))
            r = np.unique(np.concatenate(pieces))
            # collapse near-duplicates that would create degenerate spacings
            keep = np.concatenate([[True], np.diff(np.log(r)) > 1e-12])
            r = r[keep]
        return cls(r)

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def log_r(self) -> np.ndarray:
        return np.log(self.r)

    def __len__(self) -> int:
        return self.r.size


# ============================================================
# radial profiles
# ============================================================


@dataclass(frozen=True)
class RadialProfile:
    """Values on a radial grid with declared power-law tail exponents.

    ``inner_exponent`` / ``outer_exponent`` describe u ~ c r^e below r_min
    and above r_max.  They are declarations (used for extrapolation and for
    analytic tail integrals), not measurements; ``estimate_exponents``
    measures, ``validate_exponents`` compares the two.
    """

    grid: RadialGrid
    values: np.ndarray
    inner_exponent: Optional[float] = None
    outer_exponent: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.r.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.r.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("profile values must be finite")

    # ---------- basic queries ----------

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0.0))

    def with_exponents(self, inner: Optional[float], outer: Optional[float]) -> "RadialProfile":
        return replace(self, inner_exponent=inner, outer_exponent=outer)

    # ---------- interpolation ----------

    def _interpolant(self):
        if self.is_positive:
            return PchipInterpolator(self.grid.log_r, np.log(self.values), extrapolate=False)
        return None

    def __call__(self, r, extrapolate: bool = False):
        """Evaluate at radii r; extrapolation beyond the grid is opt-in."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rr = np.atleast_1d(r)
        if np.any(rr <= 0.0):
            raise SamplingError("profiles are defined for r > 0 only")
        below = rr < self.grid.r_min
        above = rr > self.grid.r_max
        if not extrapolate and (np.any(below) or np.any(above)):
            raise SamplingError(
                "radius outside the grid range; pass extrapolate=True to use "
                "the declared tail exponents")
        if extrapolate:
            if np.any(below) and self.inner_exponent is None:
                raise SamplingError("no inner_exponent declared for extrapolation below r_min")
            if np.any(above) and self.outer_exponent is None:
                raise SamplingError("no outer_exponent declared for extrapolation above r_max")
        out = np.empty_like(rr)
        inside = ~(below | above)
        pch = self._interpolant()
        if np.any(inside):
            if pch is not None:
                out[inside] = np.exp(pch(np.log(rr[inside])))
            else:
                out[inside] = np.interp(rr[inside], self.grid.r, self.values)
        if np.any(below):
            out[below] = self.values[0] * (rr[below] / self.grid.r_min) ** self.inner_exponent
        if np.any(above):
            out[above] = self.values[-1] * (rr[above] / self.grid.r_max) ** self.outer_exponent
        return float(out[0]) if scalar else out

    # ---------- exponents ----------

    def estimate_exponents(self, decades: float = 1.0):
        """Log-log regression slopes over the first and last `decades` of the grid.

        Returns (inner, outer); an end containing non-positive values yields
        None there (the slope is undefined).
        """
        r, v = self.grid.r, self.values

        def slope(mask):
            if np.count_nonzero(mask) < 3 or np.any(v[mask] <= 0.0):
                return None
            return float(np.polyfit(np.log(r[mask]), np.log(v[mask]), 1)[0])

        lo = r <= r[0] * 10.0 ** decades
        hi = r >= r[-1] * 10.0 ** (-decades)
        return slope(lo), slope(hi)

    def validate_exponents(self, tol: float = 0.1) -> bool:
        """Check declared exponents against measured end-decade slopes.

        The comparison is |declared - measured| <= tol * max(1, |declared|);
        an end with no declaration passes vacuously.
        """
        est_in, est_out = self.estimate_exponents()
        ok = True
        for declared, measured in ((self.inner_exponent, est_in),
                                   (self.outer_exponent, est_out)):
            if declared is None:
                continue
            if measured is None:
                ok = False
            elif abs(declared - measured) > tol * max(1.0, abs(declared)):
                ok = False
        return ok

    # ---------- serialization ----------

    def to_csv(self, path, metadata: Optional[dict] = None) -> None:
        buf = io.StringIO()
        buf.write("# hartreelab radial profile v1\n")
        for key, val in (metadata or {}).items():
            buf.write(f"# {key}={val}\n")
        buf.write(f"# inner_exponent={_fmt_opt(self.inner_exponent)}\n")
        buf.write(f"# outer_exponent={_fmt_opt(self.outer_exponent)}\n")
        buf.write("r,value\n")
        for r, v in zip(self.grid.r, self.values):
            buf.write(f"{float(r)!r},{float(v)!r}\n")
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "RadialProfile":
        inner = outer = None
        rows = []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("inner_exponent="):
                    inner = _parse_opt(body.split("=", 1)[1])
                elif body.startswith("outer_exponent="):
                    outer = _parse_opt(body.split("=", 1)[1])
                continue
            if not line or line.startswith("r,"):
                continue
            a, b = line.split(",")
            rows.append((float(a), float(b)))
        r = np.array([a for a, _ in rows])
        v = np.array([b for _, b in rows])
        return cls(RadialGrid(r), v, inner, outer)

    def to_json(self, path, metadata: Optional[dict] = None) -> None:
        doc = dict(metadata or {})
        doc.update({
            "format": "hartreelab.radial_profile.v1",
            "inner_exponent": self.inner_exponent,
            "outer_exponent": self.outer_exponent,
            "r": [float(x) for x in self.grid.r],
            "value": [float(x) for x in self.values],
        })
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "RadialProfile":
        doc = json.loads(Path(path).read_text())
        return cls(RadialGrid(np.array(doc["r"])), np.array(doc["value"]),
                   doc.get("inner_exponent"), doc.get("outer_exponent"))


def _fmt_opt(x):
    return "none" if x is None else repr(float(x))


def _parse_opt(s):
    s = s.strip()
    return None if s == "none" else float(s)


# ============================================================
# fields
# ============================================================


@dataclass(frozen=True)
class Field:
    """A scalar field on R^n \\ {singular point}, evaluated pointwise.

    ``fn`` maps an (m, n) array of points to m values.  Radial fields
    carry their center and a 1-d radial callable so samplers can take the
    exact route instead of ray evaluation.
    """

    n: int
    fn: Callable[[np.ndarray], np.ndarray]
    is_radial: bool = False
    center: Optional[np.ndarray] = None
    radial_fn: Optional[Callable] = None
    singular_points: tuple = field(default_factory=tuple)  # points where evaluation is refused

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.n:
            raise SamplingError(f"points have dimension {pts.shape[1]}, field has n={self.n}")
        for s in self.singular_points:
            d = np.linalg.norm(pts - np.asarray(s), axis=1)
            if np.any(d == 0.0):
                raise SamplingError(f"field evaluated at its singular point {np.asarray(s)}")
        vals = np.asarray(self.fn(pts), dtype=float)
        return float(vals[0]) if single else vals

    @classmethod
    def radial(cls, n: int, radial_fn: Callable, center=None,
               singular_center: bool = True) -> "Field":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)

        def fn(pts):
            rr = np.linalg.norm(pts - c[None, :], axis=1)
            return radial_fn(rr)

        sing = (tuple(c),) if singular_center else ()
        return cls(n=n, fn=fn, is_radial=True, center=c, radial_fn=radial_fn,
                   singular_points=sing)

    @classmethod
    def from_profile(cls, n: int, profile: RadialProfile, center=None,
                     extrapolate: bool = True) -> "Field":
        return cls.radial(n, lambda r: profile(r, extrapolate=extrapolate), center=center)

    def plus_constant(self, h: float) -> "Field":
        """The field u + h (harmonic offsets enter tests only this way)."""
        base = self

        def fn(pts):
            return base.fn(pts) + h

        rf = (lambda r: base.radial_fn(r) + h) if base.radial_fn is not None else None
        return Field(n=base.n, fn=fn, is_radial=base.is_radial, center=base.center,
                     radial_fn=rf, singular_points=base.singular_points)

    def scaled(self, c: float) -> "Field":
        base = self

        def fn(pts):
            return c * base.fn(pts)

        rf = (lambda r: c * base.radial_fn(r)) if base.radial_fn is not None else None
        return Field(n=base.n, fn=fn, is_radial=base.is_radial, center=base.center,
                     radial_fn=rf, singular_points=base.singular_points)


# ============================================================
# canonical fields
# ============================================================


def make_bubble(params: ProblemParams, center=None, mu: float = 1.0,
                normalization: str = "hartree") -> Field:
    """The explicit bubble amp * (1 + mu^2 |x - x0|^2)^(-(n-2)/2).

    normalization selects the amplitude: "hartree" uses the sharp-constant
    amplitude c_n(alpha); "talenti" uses (n(n-2))^((n-2)/4), the amplitude
    for which -Lap u = mu^2 u^((n+2)/(n-2)).
    """
    if mu <= 0.0:
        raise SamplingError(f"bubble scale mu must be positive, got {mu}")
    n = params.n
    nu = params.nu
    if normalization == "hartree":
        amp = sharp_constants(params).c_n
    elif normalization == "talenti":
        amp = (n * (n - 2.0)) ** ((n - 2.0) / 4.0)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")

    def radial_fn(r):
        return amp * (1.0 + (mu * np.asarray(r)) ** 2) ** (-nu)

    return Field.radial(n, radial_fn, center=center, singular_center=False)


def make_hls_extremal(params: ProblemParams, center=None, mu: float = 1.0) -> Field:
    """Extremal (mu/(mu^2 + |x - x0|^2))^((n+alpha)/2) of the Riesz bilinear inequality."""
    if mu <= 0.0:
        raise SamplingError(f"extremal scale mu must be positive, got {mu}")
    expo = (params.n + params.alpha) / 2.0

    def radial_fn(r):
        return (mu / (mu ** 2 + np.asarray(r) ** 2)) ** expo

    return Field.radial(params.n, radial_fn, center=center, singular_center=False)


def make_singular_power(params: ProblemParams, exponent: Optional[float] = None) -> Field:
    """The singular power field |x|^e, default e = -(n-2)/2 (the cylinder constant's shadow)."""
    e = -params.nu if exponent is None else float(exponent)

    def radial_fn(r):
        return np.asarray(r, dtype=float) ** e

    return Field.radial(params.n, radial_fn, center=None, singular_center=True)


# ============================================================
# sampling
# ============================================================


def sample_radial(field: Field, grid: RadialGrid, direction=None,
                  estimate_tails: bool = True) -> RadialProfile:
    """Restrict a field to a ray from its center and wrap as a RadialProfile.

    For radial fields the exact radial callable is used; otherwise the ray
    direction (default e_1) matters and the caller owns that choice.
    Tail exponents are estimated from the sampled end decades unless
    disabled.
    """
    if field.radial_fn is not None and direction is None:
        vals = np.asarray(field.radial_fn(grid.r), dtype=float)
    else:
        d = np.zeros(field.n)
        d[0] = 1.0
        if direction is not None:
            d = np.asarray(direction, dtype=float)
            nrm = np.linalg.norm(d)
            if nrm == 0.0:
                raise SamplingError("ray direction must be nonzero")
            d = d / nrm
        c = field.center if field.center is not None else np.zeros(field.n)
        pts = c[None, :] + grid.r[:, None] * d[None, :]
        vals = field(pts)
    prof = RadialProfile(grid, vals)
    if estimate_tails:
        e_in, e_out = prof.estimate_exponents()
        prof = prof.with_exponents(e_in, e_out)
    return prof


# ============================================================
# sphere quadrature (n = 3, 4, 5)
# ============================================================

_SPHERE_CACHE: dict = {}


def sphere_quadrature(n: int, order: int = 14):
    """Product Gauss nodes and weights on the unit sphere S^(n-1) in R^n.

    Exact for polynomials of total degree <= order.  Weights sum to
    omega(n-1).  Supported for n in {3, 4, 5}; anything larger is outside
    this toolkit's scope by design and raises.
    """
    if n not in (3, 4, 5):
        raise UnsupportedDimensionError(
            f"sphere quadrature implemented for n in {{3, 4, 5}}, got n={n}")
    key = (n, order)
    if key not in _SPHERE_CACHE:
        _SPHERE_CACHE[key] = _sphere_rule(n, order)
    return _SPHERE_CACHE[key]


def _sphere_rule(n: int, order: int):
    if n == 2:
        m = max(order + 1, 4)
        phi = 2.0 * np.pi * np.arange(m) / m
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        weights = np.full(m, 2.0 * np.pi / m)
        return nodes, weights
    m_t = max((order + 2) // 2, 2)
    a = (n - 3) / 2.0
    t, w_t = roots_jacobi(m_t, a, a)
    sub_nodes, sub_w = _sphere_rule(n - 1, order)
    s = np.sqrt(1.0 - t ** 2)
    nodes = np.empty((m_t * len(sub_nodes), n))
    weights = np.empty(m_t * len(sub_nodes))
    for i in range(m_t):
        block = slice(i * len(sub_nodes), (i + 1) * len(sub_nodes))
        nodes[block, 0] = t[i]
        nodes[block, 1:] = s[i] * sub_nodes
        weights[block] = w_t[i] * sub_w
    return nodes, weights


def spherical_average(field: Field, r: float, center=None, order: int = 14) -> float:
    """Mean of the field over the sphere of radius r about `center`.

    Product Gauss quadrature, exact for polynomial integrands of degree
    <= order; the mean is the integral divided by omega(n-1).
    """
    if r <= 0.0:
        raise SamplingError(f"sphere radius must be positive, got {r}")
    nodes, weights = sphere_quadrature(field.n, order)
    c = np.zeros(field.n) if center is None else np.asarray(center, dtype=float)
    pts = c[None, :] + r * nodes
    vals = field(pts)
    return float(np.dot(weights, vals) / omega(field.n - 1))
