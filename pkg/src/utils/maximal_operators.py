# -*- coding: utf-8 -*-
"""
utils/maximal_operators.py

Discrete averages over dilates of a body, their maximal functions over a
scale set, the discrete heat semigroup, the square function comparing the
two, and grid versions of the continuous averages.

Functions are finitely supported and carried as a dense block of values
on an integer box (LatticeFunction) or on a box of the grid hZ^d
(GridFunction).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft, ndimage

from utils.lattice_geometry import (
    GAUGE_TOL,
    BodySpec,
    BudgetExceeded,
    gauge,
    lattice_count,
    lattice_points,
    scale_breakpoints,
    smallest_nonzero_gauge,
)

log = logging.getLogger("maximal_operators")

MAX_BOX_CELLS = 50_000_000
SEMIGROUP_GRID_CAP = 2**22
SEMIGROUP_TAIL = 1e-14


# ── Functions on Z^d and hZ^d ────────────────────────────────────
@dataclass(eq=False)
class LatticeFunction:
    offset: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim == 0:
            raise ValueError("values must be at least one-dimensional")
        self.offset = tuple(int(o) for o in np.atleast_1d(self.offset))
        if len(self.offset) != self.values.ndim:
            raise ValueError(
                "offset has %d coordinates but values are %d-dimensional"
                % (len(self.offset), self.values.ndim)
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("function values must be finite")

    @property
    def dim(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def delta(cls, dim, at=None, mass=1.0):
        at = (0,) * dim if at is None else tuple(at)
        return cls(at, np.full((1,) * dim, float(mass)))

    @classmethod
    def from_atoms(cls, positions, masses):
        """Sum of point masses; positions are ints (d=1) or integer tuples."""
        positions = np.array(positions, dtype=np.int64)
        if positions.ndim == 1:
            positions = positions[:, None]
        masses = np.asarray(masses, dtype=float)
        if len(positions) == 0 or len(positions) != len(masses):
            raise ValueError("need one mass per atom and at least one atom")
        lower = positions.min(axis=0)
        shape = tuple(positions.max(axis=0) - lower + 1)
        values = np.zeros(shape)
        np.add.at(values, tuple((positions - lower).T), masses)
        return cls(tuple(lower), values)

    def with_values(self, values, offset=None, **meta):
        # Same kind of function (lattice or grid) on a new box.
        offset = self.offset if offset is None else offset
        return LatticeFunction(offset, values, dict(meta))

    def norm(self, p):
        v = np.abs(self.values)
        if math.isinf(p):
            return float(v.max())
        if p < 1:
            raise ValueError("norm needs p >= 1, got p=" + str(p))
        return float(np.sum(v**p) ** (1.0 / p))

    def mass(self):
        return float(np.sum(self.values))

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0))

    def shifted(self, k):
        k = tuple(np.atleast_1d(k))
        offset = tuple(o + int(s) for o, s in zip(self.offset, k))
        return self.with_values(self.values.copy(), offset)

    def scaled(self, c):
        return self.with_values(self.values * c)

    def embedded(self, offset, shape):
        """Values on the larger box (offset, shape), zero outside the support box."""
        start = [a - b for a, b in zip(self.offset, offset)]
        if any(s < 0 or s + n > m for s, n, m in zip(start, self.shape, shape)):
            raise ValueError("target box does not contain the function's box")
        out = np.zeros(shape)
        out[tuple(slice(s, s + n) for s, n in zip(start, self.shape))] = self.values
        return out

    def value_at(self, x):
        index = [a - b for a, b in zip(np.atleast_1d(x), self.offset)]
        if any(i < 0 or i >= n for i, n in zip(index, self.shape)):
            return 0.0
        return float(self.values[tuple(index)])

    def points(self):
        """Integer coordinates of every cell of the box, shape (*shape, d)."""
        axes = [np.arange(o, o + n) for o, n in zip(self.offset, self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def sup_distance(self, other):
        """Sup-norm distance after aligning both boxes."""
        if self.dim != other.dim:
            raise ValueError("functions live in different dimensions")
        lower = [min(a, b) for a, b in zip(self.offset, other.offset)]
        upper = [
            max(a + n, b + m)
            for a, n, b, m in zip(self.offset, self.shape, other.offset, other.shape)
        ]
        shape = tuple(u - lo for u, lo in zip(upper, lower))
        diff = self.embedded(lower, shape) - other.embedded(lower, shape)
        return float(np.abs(diff).max())


@dataclass(eq=False)
class GridFunction(LatticeFunction):
    h: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        self.h = float(self.h)
        if not self.h > 0:
            raise ValueError("mesh width h must be > 0, got " + str(self.h))

    @classmethod
    def sample(cls, func, lower, upper, h):
        """Samples of func on the grid points of hZ^d inside [lower, upper]."""
        lower = np.atleast_1d(lower).astype(float)
        upper = np.atleast_1d(upper).astype(float)
        lo = np.ceil(lower / h - 1e-9).astype(np.int64)
        hi = np.floor(upper / h + 1e-9).astype(np.int64)
        axes = [np.arange(a, b + 1) * h for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(tuple(lo), func(grid), h=h)

    def with_values(self, values, offset=None, **meta):
        offset = self.offset if offset is None else offset
        return GridFunction(offset, values, dict(meta), h=self.h)

    def positions(self):
        return self.points() * self.h

    def norm(self, p):
        if math.isinf(p):
            return super().norm(p)
        return super().norm(p) * self.h ** (self.dim / p)

    def integral(self):
        return self.mass() * self.h**self.dim

    def lipschitz_estimate(self):
        slopes = [
            np.abs(np.diff(self.values, axis=a)).max()
            for a in range(self.dim)
            if self.shape[a] > 1
        ]
        return float(max(slopes, default=0.0)) / self.h


# ── Scale sets ────────────────────────────────────────────────────
def dyadic_window(q, d, c1, c2):
    """Powers of two N = 2^n, n any integer, with c1 d^(1/q) <= N <= c2 d."""
    low = c1 * d ** (0.0 if math.isinf(q) else 1.0 / q)
    high = c2 * d
    if not low > 0 or high < low:
        return ()
    n = math.floor(math.log2(low)) - 1
    window = []
    while 2.0**n <= high * (1 + 1e-12):
        if 2.0**n >= low * (1 - 1e-12):
            window.append(float(2**n))
        n += 1
    return tuple(window)


@dataclass(frozen=True)
class ScaleSelector:
    variant: str
    t_max: float = None
    D: float = 0.0
    c1: float = None
    c2: float = None
    scales: tuple = ()

    @classmethod
    def all(cls, t_max):
        return cls("all", t_max=float(t_max))

    @classmethod
    def greater_than(cls, D, t_max):
        return cls("greater_than", t_max=float(t_max), D=float(D))

    @classmethod
    def dyadic(cls, c1, c2):
        return cls("dyadic_window", c1=float(c1), c2=float(c2))

    @classmethod
    def explicit(cls, scales):
        scales = tuple(sorted(set(float(t) for t in scales)))
        if any(not t > 0 for t in scales):
            raise ValueError("explicit scales must be > 0")
        return cls("explicit", scales=scales)

    def expand(self, body, unit=1.0):
        """Effective scales in physical units; unit is the grid mesh width."""
        if self.variant in ("all", "greater_than"):
            if self.t_max is None or self.t_max < 0:
                raise ValueError("t_max must be given and >= 0")
            ts = tuple(unit * b for b in scale_breakpoints(body, self.t_max / unit))
            if self.variant == "greater_than":
                ts = tuple(t for t in ts if t > self.D + GAUGE_TOL)
        elif self.variant == "dyadic_window":
            if body.kind != "qball":
                raise ValueError("dyadic windows are defined for q-balls only")
            ts = dyadic_window(body.q, body.dim, self.c1, self.c2)
        elif self.variant == "explicit":
            ts = self.scales
        else:
            raise ValueError("Invalid scale selector: " + str(self.variant))
        if not ts:
            raise ValueError("empty scale set for selector " + self.describe())
        return ts

    def describe(self):
        if self.variant == "all":
            return "all(t_max=%g)" % self.t_max
        if self.variant == "greater_than":
            return "greater_than(D=%g, t_max=%g)" % (self.D, self.t_max)
        if self.variant == "dyadic_window":
            return "dyadic_window(C1=%g, C2=%g)" % (self.c1, self.c2)
        return "explicit(%s)" % ",".join("%g" % t for t in self.scales)


# ── Averages ──────────────────────────────────────────────────────
def _check_box(shape):
    cells = math.prod(shape)
    if cells > MAX_BOX_CELLS:
        raise BudgetExceeded(
            "support box %s has %d cells, above the cap %d"
            % (shape, cells, MAX_BOX_CELLS)
        )


def _box_sum(values, r, axis):
    # out[i] = sum of values[i + j] over |j| <= r, zero outside.
    if r == 0:
        return values
    pad = [(0, 0)] * values.ndim
    pad[axis] = (r, r)
    c = np.cumsum(np.pad(values, pad), axis=axis)
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    n = values.shape[axis]
    upper = np.take(c, np.arange(2 * r + 1, 2 * r + 1 + n), axis=axis)
    lower = np.take(c, np.arange(n), axis=axis)
    return upper - lower


def _cube_window_sums(values, r):
    padded = np.pad(values, r)
    for axis in range(values.ndim):
        padded = _box_sum(padded, r, axis)
    return padded


def _kernel_sums(values, points, reach, weights=None):
    shape = tuple(n + 2 * R for n, R in zip(values.shape, reach))
    _check_box(shape)
    out = np.zeros(shape)
    for k, y in enumerate(points):
        target = tuple(
            slice(R + yi, R + yi + n) for R, yi, n in zip(reach, y, values.shape)
        )
        if weights is None:
            out[target] += values
        else:
            out[target] += weights[k] * values
    return out


def average(body, t, f, separable=None):
    """Discrete average of f over the lattice points of G_t."""
    if not t > 0:
        raise ValueError("scale t must be > 0, got " + str(t))
    if body.dim != f.dim:
        raise ValueError("body has d=%d but f has d=%d" % (body.dim, f.dim))
    if separable is None:
        separable = body.is_cube
    if separable and not body.is_cube:
        raise ValueError("the separable path exists for the cube only")
    reach = body.coordinate_bounds(t)
    if separable:
        _check_box(tuple(n + 2 * reach[0] for n in f.shape))
        sums = _cube_window_sums(f.values, reach[0])
        count = lattice_count(body, t).count
    else:
        points = lattice_points(body, t)
        sums = _kernel_sums(f.values, points, reach)
        count = len(points)
    values = sums / count
    offset = tuple(o - R for o, R in zip(f.offset, reach))
    return f.with_values(values, offset, scale=float(t), count=count)


# ── Maximal functions ─────────────────────────────────────────────
def _maximal_pairs(body, ts, f):
    """For every point of the dilated box: the best window sum, its lattice count
    and the index of the scale attaining the max of |sum|/count.

    Ties go to the smallest scale.
    """
    t_max = max(ts)
    reach = body.coordinate_bounds(t_max)
    shape = tuple(n + 2 * R for n, R in zip(f.shape, reach))
    _check_box(shape)
    best_sum = np.zeros(shape)
    best_count = np.ones(shape, dtype=np.int64)
    best_scale = np.zeros(shape, dtype=np.int64)
    ceiling = float(np.abs(f.values).max())

    def update(k, sums, count):
        # Cumulative-sum windows can overshoot sup |f| by rounding.
        sums = np.minimum(np.abs(sums), ceiling * count)
        better = sums * best_count > best_sum * count
        best_sum[better] = sums[better]
        best_count[better] = count
        best_scale[better] = k

    if body.is_cube and body.dim == 1:
        radii = np.array([int(math.floor(t + GAUGE_TOL)) for t in ts])
        padded = np.pad(f.values, (reach[0] + radii.max(), reach[0] + radii.max()))
        c = np.concatenate([[0.0], np.cumsum(padded)])
        n, base = shape[0], radii.max()
        idx = np.arange(n) + base
        chunk = max(1, 20_000_000 // max(n, 1))
        for start in range(0, len(radii), chunk):
            rs = radii[start : start + chunk][:, None]
            window = c[idx[None, :] + rs + 1] - c[idx[None, :] - rs]
            for j, r in enumerate(rs[:, 0]):
                update(start + j, window[j], 2 * int(r) + 1)
    elif body.is_cube:
        padded = np.pad(f.values, reach[0])
        for k, t in enumerate(ts):
            r = int(math.floor(t + GAUGE_TOL))
            inner = tuple(slice(r, -r or None) for _ in shape)
            sums = _cube_window_sums(padded, r)[inner]
            update(k, sums, (2 * r + 1) ** body.dim)
    else:
        # Kernels grow shell by shell along the sorted scales.
        points = np.asarray(lattice_points(body, t_max))
        gauges = gauge(body, points.astype(float))
        order = np.argsort(gauges, kind="stable")
        points, gauges = points[order], gauges[order]
        sums = np.zeros(shape)
        added = 0
        for k, t in enumerate(ts):
            stop = int(np.searchsorted(gauges, t + GAUGE_TOL, side="right"))
            for y in points[added:stop]:
                target = tuple(
                    slice(R + yi, R + yi + m) for R, yi, m in zip(reach, y, f.shape)
                )
                sums[target] += f.values
            added = stop
            update(k, sums, added)
    return best_sum, best_count, best_scale, reach


def maximal(body, scales, f):
    """Pointwise sup of |average(body, t, f)| over the effective scales."""
    if body.dim != f.dim:
        raise ValueError("body has d=%d but f has d=%d" % (body.dim, f.dim))
    ts = scales.expand(body)
    best_sum, best_count, _, reach = _maximal_pairs(body, ts, f)
    t_max = max(ts)
    offset = tuple(o - R for o, R in zip(f.offset, reach))
    truncation = f.norm(1) / lattice_count(body, t_max).count
    log.debug(
        "maximal: %s %s, %d scales, truncation %.3g",
        body.describe(),
        scales.describe(),
        len(ts),
        truncation,
    )
    return f.with_values(
        best_sum / best_count,
        offset,
        t_max=t_max,
        scales=len(ts),
        selector=scales.describe(),
        truncation_error=truncation,
    )


def maximal_argmax(body, scales, f):
    """maximal() together with the scale attaining the sup at each point."""
    ts = scales.expand(body)
    best_sum, best_count, best_scale, reach = _maximal_pairs(body, ts, f)
    offset = tuple(o - R for o, R in zip(f.offset, reach))
    return f.with_values(best_sum / best_count, offset), np.asarray(ts)[best_scale]


# ── Heat semigroup ────────────────────────────────────────────────
def _semigroup_grid_size(t):
    x = t / 2.0
    target = math.log(SEMIGROUP_TAIL)
    M = 8
    while True:
        m = M // 4
        if -x + m * math.log(x) - math.lgamma(m + 1) < target:
            return M
        M *= 2
        if M > SEMIGROUP_GRID_CAP:
            raise BudgetExceeded(
                "semigroup kernel grid for t=%g exceeds %d points"
                % (t, SEMIGROUP_GRID_CAP)
            )


@lru_cache(maxsize=64)
def semigroup_kernel(t):
    """1-D kernel k(-m..m) whose torus multiplier is exp(-t sin^2(pi theta))."""
    if t < 0:
        raise ValueError("semigroup time must be >= 0, got " + str(t))
    if t == 0:
        kernel = np.ones(1)
        kernel.setflags(write=False)
        return kernel
    M = _semigroup_grid_size(t)
    theta = np.arange(M) / M
    coefficients = fft.ifft(np.exp(-t * np.sin(np.pi * theta) ** 2)).real
    m = M // 4
    kernel = np.maximum(np.concatenate([coefficients[-m:], coefficients[: m + 1]]), 0.0)
    # Drop tails whose total mass is negligible.
    tail = np.cumsum(kernel[:m]) + np.cumsum(kernel[::-1][:m])
    rho = m - int(np.searchsorted(tail, SEMIGROUP_TAIL, side="right"))
    kernel = kernel[m - rho : m + rho + 1]
    log.debug("semigroup_kernel: t=%g M=%d support=%d", t, M, len(kernel))
    kernel.setflags(write=False)
    return kernel


def semigroup_apply(t, f):
    if t < 0:
        raise ValueError("semigroup time must be >= 0, got " + str(t))
    if t == 0:
        return f.with_values(f.values.copy(), time=0.0)
    kernel = semigroup_kernel(float(t))
    rho = len(kernel) // 2
    _check_box(tuple(n + 2 * rho for n in f.shape))
    values = np.pad(f.values, rho)
    for axis in range(f.dim):
        values = ndimage.convolve1d(
            values, kernel, axis=axis, mode="constant", cval=0.0
        )
    offset = tuple(o - rho for o in f.offset)
    return f.with_values(values, offset, time=float(t))


# ── Square function ───────────────────────────────────────────────
def square_function(q, c1, c2, f):
    d = f.dim
    window = dyadic_window(q, d, c1, c2)
    if not window:
        raise ValueError(
            "empty dyadic window for C1=%g, C2=%g, d=%d, q=%g" % (c1, c2, d, q)
        )
    body = BodySpec.qball(q, d)
    q_exp = 0.0 if math.isinf(q) else 2.0 / q
    terms = []
    for N in window:
        terms.append(
            (average(body, N, f), semigroup_apply(N**2 / d**q_exp, f))
        )
    lower = [min(min(a.offset[i], p.offset[i]) for a, p in terms) for i in range(d)]
    upper = [
        max(max(a.offset[i] + a.shape[i], p.offset[i] + p.shape[i]) for a, p in terms)
        for i in range(d)
    ]
    shape = tuple(u - lo for u, lo in zip(upper, lower))
    total = np.zeros(shape)
    for a, p in terms:
        total += (a.embedded(lower, shape) - p.embedded(lower, shape)) ** 2
    return f.with_values(np.sqrt(total), tuple(lower), window=list(window))


# ── Continuous averages on a grid ─────────────────────────────────
@lru_cache(maxsize=256)
def _grid_kernel(body, r):
    # Grid offsets inside G_r (index units) with half weight on the boundary.
    points = np.asarray(lattice_points(body, r))
    gauges = gauge(body, points.astype(float))
    weights = np.where(np.abs(gauges - r) <= GAUGE_TOL, 0.5, 1.0)
    return points, gauges, weights


def continuous_average_grid(body, t, F):
    """Riemann-sum average of F over G_t, on the grid of F."""
    if not t > 0:
        raise ValueError("scale t must be > 0, got " + str(t))
    r = t / F.h
    if r < smallest_nonzero_gauge(body):
        raise ValueError(
            "empty kernel: G_%g contains no grid cell at mesh h=%g" % (t, F.h)
        )
    points, _, weights = _grid_kernel(body, r)
    reach = body.coordinate_bounds(r)
    sums = _kernel_sums(F.values, points, reach, weights)
    values = sums / weights.sum()
    offset = tuple(o - R for o, R in zip(F.offset, reach))
    error = F.h * math.sqrt(F.dim) * F.lipschitz_estimate()
    return F.with_values(values, offset, scale=float(t), grid_error_bound=error)


def continuous_maximal_grid(body, scales, F):
    """Grid version of the continuous maximal function: sup over the scales of
    |continuous_average_grid|, the scale set being read in physical units."""
    if body.dim != F.dim:
        raise ValueError("body has d=%d but F has d=%d" % (body.dim, F.dim))
    ts = scales.expand(body, unit=F.h)
    radii = sorted(t / F.h for t in ts)
    r_max = radii[-1]
    points = np.asarray(lattice_points(body, r_max))
    gauges = gauge(body, points.astype(float))
    order = np.argsort(gauges, kind="stable")
    points, gauges = points[order], gauges[order]
    reach = body.coordinate_bounds(r_max)
    shape = tuple(n + 2 * R for n, R in zip(F.shape, reach))
    _check_box(shape)

    def shifted_sum(block):
        out = np.zeros(shape)
        for y in block:
            target = tuple(
                slice(R + yi, R + yi + m) for R, yi, m in zip(reach, y, F.shape)
            )
            out[target] += F.values
        return out

    # Interval scale sets also see the open stretches between breakpoints,
    # where every point of gauge <= r carries full weight.
    interval = scales.variant in ("all", "greater_than")
    upper = scales.t_max / F.h if interval else r_max
    sums = np.zeros(shape)
    best = np.zeros(shape)
    added = 0
    for i, r in enumerate(radii):
        stop = int(np.searchsorted(gauges, r + GAUGE_TOL, side="right"))
        sums += shifted_sum(points[added:stop])
        added = stop
        first = int(np.searchsorted(gauges, r - GAUGE_TOL, side="left"))
        on_boundary = max(0, stop - first)
        if on_boundary and gauges[first] > 0:
            boundary = shifted_sum(points[first:stop])
            value = np.abs(sums - 0.5 * boundary) / (stop - 0.5 * on_boundary)
            if interval and i == 0 and first > 1:
                left = np.abs(sums - boundary) / (stop - on_boundary)
                np.maximum(value, left, out=value)
        else:
            value = np.abs(sums) / stop
        if interval and r < upper - GAUGE_TOL:
            np.maximum(value, np.abs(sums) / stop, out=value)
        np.maximum(best, value, out=best)
    offset = tuple(o - R for o, R in zip(F.offset, reach))
    error = F.h * math.sqrt(F.dim) * F.lipschitz_estimate()
    return F.with_values(
        best, offset, t_max=float(max(ts)), scales=len(ts), grid_error_bound=error
    )
