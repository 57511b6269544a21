# -*- coding: utf-8 -*-
"""
utils/constants_lab.py

Lower bounds for the strong and weak type constants of discrete maximal
functions: ratios of explicit witnesses, a seeded search for weak type
extremizers, and the two constructions that transfer maximal estimates
between the lattice and the continuum (sampling a slowly varying function,
extending a lattice function by steps).
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from utils.inequality_verifier import INCONCLUSIVE, in_regime, report, to_plain
from utils.lattice_geometry import (
    GAUGE_TOL,
    BodySpec,
    ellipsoid_family,
    gauge,
    lattice_points,
)
from utils.maximal_operators import (
    GridFunction,
    LatticeFunction,
    ScaleSelector,
    _maximal_pairs,
    continuous_maximal_grid,
    maximal,
)
from utils.rng import stream

log = logging.getLogger("constants_lab")

RECORD_VERSION = 1
BARRIER_TOL = 1e-9
LEVEL_TOL = 1e-12


def melas_constant():
    """Larger root of 12 C^2 - 22 C + 5 = 0."""
    a, b, c = 12.0, -22.0, 5.0
    return (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)


# ── Ratios ────────────────────────────────────────────────────────
def strong_ratio(body, scales, f, p):
    if not p > 1:
        raise ValueError("strong ratio needs p in (1, inf], got p=" + str(p))
    norm = f.norm(p)
    if norm == 0:
        raise ValueError("strong ratio of the zero function is undefined")
    return maximal(body, scales, f).norm(p) / norm


def weak_ratio(body, scales, f):
    """(level, ratio): the max over attained values v of the maximal function
    of v * #{M f >= v} / |f|_1."""
    if not f.is_nonnegative():
        raise ValueError("weak ratio needs a nonnegative function")
    mass = f.mass()
    if mass == 0:
        raise ValueError("weak ratio of the zero function is undefined")
    best_sum, best_count, _, _ = _maximal_pairs(body, scales.expand(body), f)
    sums = best_sum.ravel()
    counts = best_count.ravel().astype(float)
    positive = sums > 0
    sums, counts = sums[positive], counts[positive]
    values = sums / counts
    order = np.argsort(-values, kind="stable")
    sums, counts, values = sums[order], counts[order], values[order]
    # Last index of each group of equal values: #{M f >= v} there.
    last = np.nonzero(
        np.append(values[:-1] - values[1:] > LEVEL_TOL * values[:-1], True)
    )[0]
    levels = (last + 1) * sums[last] / (counts[last] * mass)
    i = int(np.argmax(levels))
    return float(values[last[i]]), float(levels[i])


@dataclass
class ConstantEstimate:
    kind: str
    lower_bound: float
    witness: LatticeFunction
    body: BodySpec
    selector: ScaleSelector
    p: float = None
    witness_level: float = None
    search_trace: dict = field(default_factory=dict)
    seed: int = None
    budget_exhausted: bool = False
    timestamp: str = None

    def recompute(self):
        if self.kind == "weak11":
            return weak_ratio(self.body, self.selector, self.witness)[1]
        return strong_ratio(self.body, self.selector, self.witness, self.p)

    def summary(self):
        return "%s %s %s: lower bound %.12g (%d atoms%s)" % (
            self.kind if self.p is None else "%s(p=%g)" % (self.kind, self.p),
            self.body.describe(),
            self.selector.describe(),
            self.lower_bound,
            int(np.count_nonzero(self.witness.values)),
            ", budget exhausted" if self.budget_exhausted else "",
        )

    def to_record(self):
        w = self.witness
        return to_plain(
            {
                "version": RECORD_VERSION,
                "kind": self.kind,
                "p": self.p,
                "body": {
                    "kind": self.body.kind,
                    "dim": self.body.dim,
                    "q": self.body.q,
                    "weights": list(self.body.weights),
                },
                "selector": self.selector.describe(),
                "lower_bound": self.lower_bound,
                "witness_level": self.witness_level,
                "witness": {"offset": list(w.offset), "values": w.values},
                "seed": self.seed,
                "search_trace": self.search_trace,
                "budget_exhausted": self.budget_exhausted,
                "timestamp": self.timestamp,
            }
        )


def strong_estimate(body, scales, f, p):
    return ConstantEstimate(
        "strong", strong_ratio(body, scales, f, p), f, body, scales, p=p
    )


def weak_estimate(body, scales, f):
    level, ratio = weak_ratio(body, scales, f)
    return ConstantEstimate("weak11", ratio, f, body, scales, witness_level=level)


# ── Weak type search ──────────────────────────────────────────────
@dataclass
class SearchConfig:
    atoms_max: int = 4
    radius: int = 40
    value_grid: tuple = (0.25, 0.5, 0.75, 1.0)
    evaluations: int = 100_000
    seed: int = 0
    t_max: float = None
    threads: int = 1
    local_steps: int = None
    local_atoms_max: int = None
    refine_top: int = 8
    initial: tuple = ()

    def __post_init__(self):
        if self.atoms_max < 1 or self.radius < 1 or self.evaluations < 1:
            raise ValueError("atoms_max, radius and evaluations must be >= 1")
        if not self.value_grid or min(self.value_grid) <= 0:
            raise ValueError("value grid must hold positive values")
        if self.t_max is None:
            self.t_max = 4.0 * self.radius
        if self.local_atoms_max is None:
            self.local_atoms_max = 2 * self.atoms_max


def _candidates(dim, radius):
    # Box points lexicographically after the origin.
    axes = [range(-radius, radius + 1)] * dim
    return [p for p in itertools.product(*axes) if p > (0,) * dim]


def _normalized(positions, values):
    # Merge coinciding atoms, sort by position, drop empty atoms.
    merged = {}
    for p, v in zip(positions, values):
        merged[p] = merged.get(p, 0.0) + v
    items = sorted((p, v) for p, v in merged.items() if v > 0)
    return tuple(p for p, _ in items), tuple(v for _, v in items)


def atoms_of(f):
    """(positions, values) of the positive entries of f, a search start state."""
    support = np.argwhere(f.values > 0)
    positions = [tuple(int(a + o) for a, o in zip(p, f.offset)) for p in support]
    values = [float(f.values[tuple(p)]) for p in support]
    return _normalized(positions, values)


class _Search:
    def __init__(self, body, config):
        self.body = body
        self.config = config
        self.selector = ScaleSelector.all(config.t_max)
        self.evaluations = 0
        self.best = None
        self.trace = {"phases": [], "barrier_violations": 0}
        self.barrier = melas_constant() if body.is_cube and body.dim == 1 else None
        self.pool = ThreadPoolExecutor(max_workers=max(1, config.threads))

    def evaluate(self, state):
        positions, values = state
        f = LatticeFunction.from_atoms(list(positions), list(values))
        level, ratio = weak_ratio(self.body, self.selector, f)
        return ratio, level

    def run_batch(self, states):
        states = states[: max(0, self.config.evaluations - self.evaluations)]
        results = list(self.pool.map(self.evaluate, states))
        self.evaluations += len(states)
        for state, (ratio, level) in zip(states, results):
            self.offer(state, ratio, level)
        return results

    def offer(self, state, ratio, level):
        if self.barrier is not None and ratio > self.barrier + BARRIER_TOL:
            self.trace["barrier_violations"] += 1
            log.warning("weak ratio %.15g above the barrier at %s", ratio, state)
        best = self.best
        if best is None or ratio > best[0] or (ratio == best[0] and state < best[2]):
            self.best = (ratio, level, state)
            log.debug(
                "search: %d evals, best %.12g at %s", self.evaluations, ratio, state
            )

    @property
    def left(self):
        return self.config.evaluations - self.evaluations

    def atoms_phase(self):
        config = self.config
        dim = self.body.dim
        origin = (0,) * dim
        candidates = _candidates(dim, config.radius)
        sizes = range(1, config.atoms_max + 1)
        total = sum(math.comb(len(candidates), k - 1) for k in sizes)
        limit = max(1, config.evaluations // 2)
        if total <= limit:
            states = [
                ((origin,) + combo, (1.0,) * k)
                for k in range(1, config.atoms_max + 1)
                for combo in itertools.combinations(candidates, k - 1)
            ]
            exhaustive = True
        else:
            rng = stream(config.seed, 0)
            states = []
            for _ in range(limit):
                k = int(rng.integers(1, config.atoms_max + 1))
                picks = sorted(rng.choice(len(candidates), k - 1, replace=False))
                atoms = (origin,) + tuple(candidates[i] for i in picks)
                states.append((atoms, (1.0,) * k))
            exhaustive = False
        scored = []
        for start in range(0, len(states), 4096):
            batch = states[start : start + 4096]
            results = self.run_batch(batch)
            scored.extend((r[0], s) for s, r in zip(batch, results))
        self.trace["phases"].append(
            {"phase": "atoms", "evaluations": len(scored), "exhaustive": exhaustive}
        )
        log.info(
            "search atoms: %d configurations (%s), best %.12g",
            len(scored),
            "exhaustive" if exhaustive else "sampled",
            self.best[0],
        )
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [s for _, s in scored[: config.refine_top]], exhaustive

    def values_phase(self, seeds):
        grid = self.config.value_grid
        states = []
        for positions, _ in seeds:
            for rest in itertools.product(grid, repeat=len(positions) - 1):
                states.append(_normalized(positions, (1.0,) + rest))
        planned = len(states)
        done = len(self.run_batch(states))
        self.trace["phases"].append({"phase": "values", "evaluations": done})
        log.info("search values: %d of %d, best %.12g", done, planned, self.best[0])
        return done == planned

    def move(self, state, rng):
        positions, values = list(state[0]), list(state[1])
        dim = self.body.dim
        kind = rng.choice(["set", "insert", "delete", "move", "scale"])
        i = int(rng.integers(len(positions)))
        if kind == "set":
            values[i] = float(rng.choice(self.config.value_grid))
        elif kind == "scale":
            values[i] *= float(np.exp(rng.normal(0.0, 0.3)))
        elif kind == "move":
            step = tuple(int(s) for s in rng.integers(-2, 3, size=dim))
            positions[i] = tuple(a + b for a, b in zip(positions[i], step))
        elif kind == "insert" and len(positions) < self.config.local_atoms_max:
            step = tuple(int(s) for s in rng.integers(-4, 5, size=dim))
            positions.append(tuple(a + b for a, b in zip(positions[i], step)))
            values.append(float(rng.choice(self.config.value_grid)))
        elif kind == "delete" and len(positions) > 1:
            del positions[i], values[i]
        positions, values = _normalized(positions, values)
        if not positions:
            return state
        # Translate back so the first atom sits at the origin.
        first = positions[0]
        positions = tuple(tuple(a - b for a, b in zip(p, first)) for p in positions)
        scale = 1.0 / values[0]
        return positions, tuple(v * scale for v in values)

    def local_phase(self):
        planned = self.config.local_steps
        if planned is None:
            planned = self.left
        steps = min(planned, self.left)
        rng = stream(self.config.seed, 1)
        current = self.best[2]
        current_ratio = self.best[0]
        accepted = 0
        for _ in range(steps):
            candidate = self.move(current, rng)
            ratio, level = self.evaluate(candidate)
            self.evaluations += 1
            self.offer(candidate, ratio, level)
            if ratio >= current_ratio:
                current, current_ratio = candidate, ratio
                accepted += 1
        self.trace["phases"].append(
            {"phase": "local", "evaluations": steps, "accepted": accepted}
        )
        log.info("search local: %d steps, best %.12g", steps, self.best[0])
        return steps == planned


def search_weak_constant(body, config):
    """Best weak ratio over sums of few point masses: every configuration of
    up to atoms_max unit atoms in the box (sampled when there are too many),
    value-grid refinement of the best ones, then a seeded local search."""
    search = _Search(body, config)
    log.debug("search_weak_constant: %s %s", body.describe(), config)
    try:
        if config.initial:
            search.run_batch([_normalized(*state) for state in config.initial])
        seeds, exhaustive = search.atoms_phase()
        complete = exhaustive
        if search.left > 0:
            complete = search.values_phase(seeds) and complete
        if search.left > 0:
            complete = search.local_phase() and complete
        else:
            complete = False
    finally:
        search.pool.shutdown()
    ratio, level, (positions, values) = search.best
    search.trace["evaluations"] = search.evaluations
    witness = LatticeFunction.from_atoms(list(positions), list(values))
    estimate = ConstantEstimate(
        "weak11",
        ratio,
        witness,
        body,
        search.selector,
        witness_level=level,
        search_trace=search.trace,
        seed=config.seed,
        budget_exhausted=not complete,
    )
    log.info(estimate.summary())
    return estimate


# ── Transference constructions ────────────────────────────────────
def _step_mesh(delta):
    # Smallest odd k >= 5 with k / delta an integer: then h = delta / k.
    for k in range(5, 200, 2):
        m = k / delta
        if abs(m - round(m)) < 1e-9:
            return 1.0 / round(m)
    raise ValueError("no default mesh for delta=%g, pass h explicitly" % delta)


def step_extension(f, delta, h=None):
    """sum_n f(n) delta^-d 1_{Q_delta(n)}, sampled on hZ^d.

    The mesh must give each delta-cube an odd number of grid points per axis
    and an integer number of grid points per unit, so every cube is resolved
    exactly and no grid point lies on a cube face.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1), got " + str(delta))
    if not f.is_nonnegative():
        raise ValueError("step extension needs a nonnegative function")
    h = _step_mesh(delta) if h is None else float(h)
    m = round(1.0 / h)
    k = round(delta / h)
    if abs(m * h - 1.0) > 1e-9 or abs(k * h - delta) > 1e-9 or k % 2 == 0:
        raise ValueError(
            "mesh h=%g incompatible with delta=%g: need 1/h integer, delta/h odd"
            % (h, delta)
        )
    half = (k - 1) // 2
    index = []
    for o, n in zip(f.offset, f.shape):
        g = np.arange(o * m - half, (o + n - 1) * m + half + 1)
        lattice = np.rint(g / m).astype(np.int64)
        inside = np.abs(g - lattice * m) <= half
        index.append((g, lattice - o, inside))
    rows = [np.clip(i, 0, n - 1) for (_, i, _), n in zip(index, f.shape)]
    values = f.values[np.ix_(*rows)]
    for axis, (_, _, inside) in enumerate(index):
        shape = [1] * f.dim
        shape[axis] = len(inside)
        values = values * inside.reshape(shape)
    offset = tuple(int(g[0]) for g, _, _ in index)
    return GridFunction(offset, values / delta**f.dim, {"delta": delta}, h=1.0 / m)


def compare_step_extension(f, delta, h=None, t_max=None):
    """M F_delta(x) >= M f(n) on grid points x of the shrunken cube Q_{1-delta}(n),
    cube body, discrete radii N against continuous half-sides N + 1/2."""
    d = f.dim
    body = BodySpec.cube(d)
    F = step_extension(f, delta, h)
    m = round(1.0 / F.h)
    t_max = float(max(f.shape)) if t_max is None else float(t_max)
    discrete_scales = ScaleSelector.all(t_max)
    ts = discrete_scales.expand(body)
    radii = sorted({math.floor(t + GAUGE_TOL) + 0.5 for t in ts})
    discrete = maximal(body, discrete_scales, f)
    continuous = continuous_maximal_grid(body, ScaleSelector.explicit(radii), F)

    J = int(math.floor((1.0 - delta) / 2.0 * m + 1e-9))
    lattice = discrete.points().reshape(-1, d)
    lhs_values = discrete.values.reshape(-1)
    worst = (math.inf, 0.0, 0.0)
    for j in itertools.product(range(-J, J + 1), repeat=d):
        grid = lattice * m + np.asarray(j) - np.asarray(continuous.offset)
        rhs_values = continuous.values[tuple(grid.T)]
        gaps = rhs_values - lhs_values
        i = int(np.argmin(gaps))
        if gaps[i] < worst[0]:
            worst = (float(gaps[i]), lhs_values[i], rhs_values[i])
    conditions = {"d == 1": d == 1}
    return report(
        "step_extension_maximal",
        {"d": d, "delta": delta, "h": F.h, "t_max": t_max, "mass": F.integral()},
        worst[1],
        worst[2],
        d == 1,
        conditions,
        slack=1e-12,
        oracle={"kind": "grid", "mesh": F.h},
        notes="" if d == 1 else "grid cube weights differ from volume for d > 1",
    )


def sample_and_compare(F, K, body, eta, t_max=None):
    """min over n of M f_K(n) / M F_K(n) with f_K(n) = F(n / K), F_K = F(. / K).

    Asserted (pass/fail against 1 - eta) once K >= 1/eta; inconclusive when
    the grid of F does not contain the points n / K or when the grid error
    bound is not small against eta.
    """
    if K < 1:
        raise ValueError("K must be >= 1, got " + str(K))
    if body.dim != F.dim:
        raise ValueError("body has d=%d but F has d=%d" % (body.dim, F.dim))
    conditions = {"K >= 1/eta": K >= 1.0 / eta}
    regime = in_regime(conditions)
    parameters = {"K": K, "eta": eta, "h": F.h, "body": body.describe()}
    s = 1.0 / (K * F.h)
    if abs(s - round(s)) > 1e-9:
        return report(
            "sampling_transference",
            parameters,
            1.0 - eta,
            math.nan,
            regime,
            conditions,
            margin=None,
            verdict=INCONCLUSIVE if regime else None,
            notes="grid of F does not contain the points n/K",
        )
    s = round(s)
    lo = [math.ceil(o / s) for o in F.offset]
    hi = [math.floor((o + n - 1) / s) for o, n in zip(F.offset, F.shape)]
    picks = tuple(np.arange(a, b + 1) * s - o for a, b, o in zip(lo, hi, F.offset))
    f = LatticeFunction(tuple(lo), F.values[np.ix_(*picks)])
    extent = max(np.abs(F.positions()).max(), F.h)
    t_max = 2.0 * K * extent if t_max is None else float(t_max)
    discrete = maximal(body, ScaleSelector.all(t_max), f)
    continuous = continuous_maximal_grid(body, ScaleSelector.all(t_max / K), F)

    n = f.points().reshape(-1, f.dim)
    lhs = np.array([discrete.value_at(x) for x in n])
    grid = n * s - np.asarray(continuous.offset)
    rhs = continuous.values[tuple(grid.T)]
    ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), math.inf)
    i = int(np.argmin(ratios))
    ratio = float(ratios[i])
    error = continuous.meta["grid_error_bound"]
    parameters.update(min_ratio=ratio, at=n[i].tolist(), grid_error_bound=error)
    verdict = None
    if regime and error >= eta * float(rhs.max()):
        verdict = INCONCLUSIVE
    return report(
        "sampling_transference",
        parameters,
        1.0 - eta,
        ratio,
        regime,
        conditions,
        verdict=verdict,
        oracle={"kind": "grid", "mesh": F.h},
    )


# ── Charts ────────────────────────────────────────────────────────
def delta_maximal_norm(body, t_max, p):
    """|M delta_0|_p over all scales up to t_max: at x the max is 1/#G_{|x|}."""
    points = np.asarray(lattice_points(body, t_max), dtype=float)
    gauges = np.sort(gauge(body, points))
    counts = np.searchsorted(gauges, gauges + GAUGE_TOL, side="right")
    if math.isinf(p):
        return 1.0
    return float(np.sum(counts.astype(float) ** -p) ** (1.0 / p))


def ellipsoid_trend(d_values, p, t_max=None):
    """|M f|_p / |f|_p for f = delta_0 and the ellipsoid family, scales 0 < t <= d
    (or t_max). Charts the growth in d; nothing is asserted."""
    rows = []
    for d in d_values:
        body = ellipsoid_family(int(d))
        t = float(d) if t_max is None else float(t_max)
        value = delta_maximal_norm(body, t, p)
        rows.append(
            {
                "d": int(d),
                "p": p,
                "t_max": t,
                "ratio": value,
                "log_d_power": math.log(d) ** (1.0 / p) if d > 1 else 0.0,
            }
        )
        log.info("ellipsoid trend: d=%d p=%g -> %.6g", d, p, value)
    return rows
