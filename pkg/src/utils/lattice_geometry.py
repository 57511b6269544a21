# -*- coding: utf-8 -*-
"""
utils/lattice_geometry.py

Convex symmetric bodies (q-balls, cubes, ellipsoids), their gauges and
volumes, exact lattice point counts of dilates and the scales at which the
lattice set of a dilate changes.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

log = logging.getLogger("lattice_geometry")

# Bodies are closed: a point whose gauge is within GAUGE_TOL of t is in G_t.
GAUGE_TOL = 1e-9
DP_BUDGET_CAP = 2**31
ENUM_POINT_CAP = 20_000_000
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


class BudgetExceeded(RuntimeError):
    """A table, enumeration or grid would exceed its configured cap."""


class UnsupportedOperation(ValueError):
    pass


@dataclass(frozen=True)
class BodySpec:
    kind: str
    dim: int
    q: float = 2.0
    weights: tuple = ()
    paper_family: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("qball", "ellipsoid"):
            raise ValueError("Invalid body kind: " + str(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(
                "dimension must be a positive integer, got " + str(self.dim)
            )
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "q", float(self.q))
        if self.kind == "qball":
            if not self.q >= 1:
                raise ValueError("q-ball needs q >= 1, got q=" + str(self.q))
            if self.weights:
                raise ValueError("q-balls take no axis weights")
            return

        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if len(weights) != self.dim:
            raise ValueError(
                "ellipsoid needs %d weights, got %d" % (self.dim, len(weights))
            )
        if any(not w > 0 or not math.isfinite(w) for w in weights):
            raise ValueError("ellipsoid weights must be positive and finite")
        if self.paper_family:
            increasing = all(a < b for a, b in zip(weights, weights[1:]))
            if not (1 <= weights[0] and increasing and weights[-1] < math.sqrt(2)):
                raise ValueError(
                    "paper family needs 1 <= l_1 < ... < l_d < sqrt(2), got "
                    + str(weights)
                )

    @classmethod
    def qball(cls, q, dim):
        return cls("qball", dim, q)

    @classmethod
    def cube(cls, dim):
        return cls("qball", dim, math.inf)

    @classmethod
    def ellipsoid(cls, weights, paper_family=False):
        weights = tuple(weights)
        return cls("ellipsoid", len(weights), 2.0, weights, paper_family)

    @property
    def is_cube(self):
        return self.kind == "qball" and math.isinf(self.q)

    @property
    def integer_q(self):
        return self.kind == "qball" and math.isfinite(self.q) and self.q.is_integer()

    @property
    def exchangeable(self):
        # q-balls are invariant under coordinate permutations, ellipsoids are not.
        return self.kind == "qball"

    def coordinate_bounds(self, t):
        """Largest |x_i| of a lattice point of G_t, per coordinate."""
        reach = t + GAUGE_TOL
        if self.kind == "qball":
            return (int(math.floor(reach)),) * self.dim
        return tuple(int(math.floor(reach / w)) for w in self.weights)

    def describe(self):
        if self.kind == "ellipsoid":
            return "ellipsoid(d=%d, weights=%s)" % (
                self.dim,
                ",".join("%g" % w for w in self.weights),
            )
        if self.is_cube:
            return "cube(d=%d)" % self.dim
        return "qball(q=%g, d=%d)" % (self.q, self.dim)


@dataclass
class CountResult:
    count: int
    exact: bool
    elapsed: float


def ellipsoid_family(d):
    """Weights l_j = 2^((1 - 1/j)/2): 1 = l_1 < l_2 < ... < sqrt(2), the same
    sequence for every d."""
    weights = [2.0 ** ((1.0 - 1.0 / j) / 2.0) for j in range(1, d + 1)]
    return BodySpec.ellipsoid(weights, paper_family=True)


def gauge(body, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != body.dim:
        raise ValueError(
            "dimension mismatch: body has d=%d, point has shape %s"
            % (body.dim, x.shape)
        )
    if body.kind == "ellipsoid":
        value = np.linalg.norm(x * np.asarray(body.weights), axis=-1)
    else:
        value = np.linalg.norm(x, ord=body.q, axis=-1)
    if x.ndim == 1:
        return float(value)
    return value


def _check_q(q):
    q = float(q)
    if not q >= 1:
        raise ValueError("q must be >= 1 or inf, got " + str(q))
    return q


def log_ball_volume(q, d, R):
    q = _check_q(q)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if R < 0:
        raise ValueError("radius must be >= 0")
    if R == 0:
        return -math.inf
    if math.isinf(q):
        return d * math.log(2.0 * R)
    return (
        d * math.log(2.0)
        + d * float(gammaln(1.0 + 1.0 / q))
        - float(gammaln(1.0 + d / q))
        + d * math.log(R)
    )


def ball_volume(q, d, R):
    """|B^q_R| in dimension d; raises OverflowError outside float range."""
    lv = log_ball_volume(q, d, R)
    if lv == -math.inf:
        return 0.0
    if lv > LOG_FLOAT_MAX:
        raise OverflowError(
            "volume of B^%g_%g in d=%d is e^%.1f, beyond float range; "
            "use ball_volume_split" % (q, R, d, lv)
        )
    if math.isinf(float(q)):
        return (2.0 * R) ** d
    return math.exp(lv)


def ball_volume_split(q, d, R):
    """(mantissa, exponent) with volume = mantissa * 2**exponent, 1 <= mantissa < 2."""
    lv = log_ball_volume(q, d, R)
    if lv == -math.inf:
        return 0.0, 0
    log2v = lv / math.log(2.0)
    exponent = math.floor(log2v)
    return 2.0 ** (log2v - exponent), int(exponent)


def body_volume(body, t):
    if body.kind == "ellipsoid":
        return ball_volume(2.0, body.dim, t) / math.prod(body.weights)
    return ball_volume(body.q, body.dim, t)


def kappa(q, d, N):
    q = _check_q(q)
    if math.isinf(q):
        raise ValueError("kappa(d, N) = N d^(-1/q) needs a finite q")
    if d < 1 or not N > 0:
        raise ValueError("kappa needs d >= 1 and N > 0")
    return N * d ** (-1.0 / q)


def integer_root(n, q):
    """Largest k >= 0 with k**q <= n."""
    if n < 0:
        return -1
    k = int(round(n ** (1.0 / q)))
    while k**q > n:
        k -= 1
    while (k + 1) ** q <= n:
        k += 1
    return k


def floor_kappa(q, d, N):
    """Exact floor of N d^(-1/q) when q and N are integers."""
    q = _check_q(q)
    if q.is_integer() and float(N).is_integer():
        q, N = int(q), int(N)
        m = int(N * d ** (-1.0 / q))
        while m > 0 and m**q * d > N**q:
            m -= 1
        while (m + 1) ** q * d <= N**q:
            m += 1
        return m
    return int(math.floor(kappa(q, d, N)))


def integer_budget(q, t):
    # Sum of |x_i|^q allowed for a point of B^q_t.
    if float(t).is_integer():
        return int(t) ** q
    return int(math.floor((t + GAUGE_TOL) ** q))


@lru_cache(maxsize=128)
def shell_table(q, r, budget):
    """Entry s counts x in Z^r with sum |x_i|^q = s, for 0 <= s <= budget."""
    q = int(q)
    if budget + 1 > DP_BUDGET_CAP:
        raise BudgetExceeded(
            "DP table of %d entries exceeds the cap %d" % (budget + 1, DP_BUDGET_CAP)
        )
    kmax = integer_root(budget, q)
    dtype = np.int64 if (2 * kmax + 1) ** r < 2**62 else object
    log.debug("shell_table: q=%d r=%d budget=%d dtype=%s", q, r, budget, dtype)
    table = np.zeros(budget + 1, dtype=dtype)
    table[0] = 1
    for _ in range(r):
        nxt = table.copy()
        for k in range(1, kmax + 1):
            step = k**q
            nxt[step:] += 2 * table[: budget + 1 - step]
        table = nxt
    table.setflags(write=False)
    return table


def shell_count(q, r, s):
    if not float(q).is_integer():
        raise UnsupportedOperation("shell counts need an integer q, got q=" + str(q))
    if r < 1 or s < 0:
        raise ValueError("shell_count needs r >= 1 and s >= 0")
    return int(shell_table(int(q), int(r), int(s))[int(s)])


def _costs(body, coordinate, ks):
    if body.kind == "ellipsoid":
        return (body.weights[coordinate] * ks) ** 2
    return np.abs(ks).astype(float) ** body.q


def _budget(body, t):
    if body.kind == "ellipsoid":
        return (t + GAUGE_TOL) ** 2
    return (t + GAUGE_TOL) ** body.q


def _enumerate(body, t, center=None, nonneg=False, monotone=False):
    """Lattice points x with gauge(x - center) <= t, by coordinate recursion.

    Prefixes are grown one coordinate at a time and pruned against the
    remaining budget; the result is in lexicographic order.
    """
    if body.is_cube and center is None and not (nonneg or monotone):
        axes = [np.arange(-b, b + 1) for b in body.coordinate_bounds(t)]
        if math.prod(len(a) for a in axes) > ENUM_POINT_CAP:
            raise BudgetExceeded("cube enumeration exceeds %d points" % ENUM_POINT_CAP)
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1).astype(np.int64)

    center = np.zeros(body.dim) if center is None else np.asarray(center, float)
    exact = body.integer_q and not center.any() and (t + 1) ** body.q < 2**62
    if exact:
        limit = integer_budget(int(body.q), t)
    else:
        limit = _budget(body, t)
    weights = body.weights or (1.0,) * body.dim
    span = [(t + GAUGE_TOL) / w for w in weights]

    prefixes = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1, dtype=np.int64 if exact else float)
    for i in range(body.dim):
        lo = int(math.ceil(center[i] - span[i]))
        hi = int(math.floor(center[i] + span[i]))
        if nonneg or monotone:
            lo = max(lo, 0)
        ks = np.arange(lo, hi + 1, dtype=np.int64)
        if exact:
            cost = np.abs(ks) ** int(body.q)
        elif body.is_cube:
            cost = np.abs(ks - center[i])
        else:
            cost = _costs(body, i, ks - center[i])
        if body.is_cube and not exact:
            total = np.maximum(partial[:, None], cost[None, :])
            keep = total <= t + GAUGE_TOL
        else:
            total = partial[:, None] + cost[None, :]
            keep = total <= limit
        if monotone and i > 0:
            keep &= ks[None, :] >= prefixes[:, -1][:, None]
        rows, cols = np.nonzero(keep)
        if len(rows) > ENUM_POINT_CAP:
            raise BudgetExceeded(
                "enumeration of %s at t=%g exceeds %d points"
                % (body.describe(), t, ENUM_POINT_CAP)
            )
        prefixes = np.column_stack([prefixes[rows], ks[cols]])
        partial = total[rows, cols]
    return prefixes


@lru_cache(maxsize=512)
def lattice_points(body, t):
    """G_t intersected with Z^d as a read-only (K, d) integer array."""
    if t < 0:
        raise ValueError("scale t must be >= 0, got " + str(t))
    points = _enumerate(body, float(t))
    points.setflags(write=False)
    return points


def lattice_points_shifted(body, t, center):
    """Lattice points of the translate center + G_t."""
    if t < 0:
        raise ValueError("scale t must be >= 0, got " + str(t))
    center = np.asarray(center, dtype=float)
    if center.shape != (body.dim,):
        raise ValueError("center must have %d coordinates" % body.dim)
    return _enumerate(body, float(t), center=center)


def sign_orbits(body, t):
    """Points of G_t in the closed positive orthant with their sign-orbit sizes."""
    points = _enumerate(body, float(t), nonneg=True)
    sizes = 2 ** np.count_nonzero(points, axis=1)
    return points, sizes


def _count_enumerated(body, t):
    # Enumerate all but the last coordinate; the last one is an interval.
    if body.dim == 1:
        partial = np.zeros(1)
    else:
        head = BodySpec(
            body.kind,
            body.dim - 1,
            body.q,
            body.weights[:-1] if body.weights else (),
        )
        prefixes = _enumerate(head, t)
        partial = np.zeros(len(prefixes))
        for i in range(head.dim):
            partial += _costs(body, i, prefixes[:, i])
    limit = _budget(body, t)
    room = np.maximum(limit - partial, 0.0)
    if body.kind == "ellipsoid":
        root = np.sqrt(room) / body.weights[-1]
    else:
        root = room ** (1.0 / body.q)
    kmax = np.floor(root).astype(np.int64)
    last = body.dim - 1
    over = partial + _costs(body, last, kmax) > limit
    kmax[over] -= 1
    under = partial + _costs(body, last, kmax + 1) <= limit
    kmax[under] += 1
    return int(np.sum(2 * kmax + 1))


def lattice_count(body, t):
    if t < 0:
        raise ValueError("scale t must be >= 0, got " + str(t))
    start = time.perf_counter()
    if body.is_cube:
        count = (2 * int(math.floor(t + GAUGE_TOL)) + 1) ** body.dim
        exact = True
    elif body.integer_q:
        q = int(body.q)
        budget = integer_budget(q, t)
        count = int(np.sum(shell_table(q, body.dim, budget)))
        exact = True
    else:
        count = _count_enumerated(body, float(t))
        exact = False
    elapsed = time.perf_counter() - start
    log.debug(
        "lattice_count: %s t=%g -> %d (%.3fs)", body.describe(), t, count, elapsed
    )
    return CountResult(count, exact, elapsed)


def smallest_nonzero_gauge(body):
    if body.kind == "ellipsoid":
        return min(body.weights)
    return 1.0


@lru_cache(maxsize=256)
def scale_breakpoints(body, t_max):
    """Distinct gauges of lattice points of G_{t_max}, led by a degenerate scale.

    The degenerate scale sees only the origin; the sup of the discrete
    averages over 0 < t <= t_max is a max over these values.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0, got " + str(t_max))
    if t_max == 0:
        return ()
    if body.is_cube:
        values = np.arange(1, int(math.floor(t_max + GAUGE_TOL)) + 1, dtype=float)
    elif body.integer_q:
        q = int(body.q)
        shells = shell_table(q, body.dim, integer_budget(q, t_max))
        nonzero = np.nonzero(shells)[0]
        values = nonzero[nonzero > 0].astype(float) ** (1.0 / q)
    else:
        points = _enumerate(body, float(t_max), monotone=body.exchangeable, nonneg=True)
        values = np.unique(gauge(body, points.astype(float)))
        values = values[values > 0]
        if len(values):
            # Merge gauges that agree up to the closedness tolerance.
            keep = np.concatenate([[True], np.diff(values) > GAUGE_TOL])
            values = values[keep]
    degenerate = min(float(t_max), smallest_nonzero_gauge(body) / 2.0)
    return (degenerate,) + tuple(float(v) for v in values)
