# -*- coding: utf-8 -*-
"""
utils/inequality_verifier.py

Numerical checks of the quantified inequalities behind the dimension-free
estimates: binomial series constants, Hanner's inequality, count/volume
sandwiches, small-set bounds, shift bounds and the permutation lemmas.

Every check returns VerificationReport objects. A violated inequality is
a report with verdict "fail", never an exception. Assertions are made only
inside the hypothesis regime of the statement being checked; outside it
the verdict is "report_only".
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from utils.lattice_geometry import (
    BodySpec,
    ball_volume,
    floor_kappa,
    integer_budget,
    integer_root,
    kappa,
    lattice_count,
    lattice_points,
    lattice_points_shifted,
    log_ball_volume,
    shell_table,
)
from utils.rng import chunk_sizes, stream

log = logging.getLogger("inequality_verifier")

PASS = "pass"
FAIL = "fail"
REPORT_ONLY = "report_only"
INCONCLUSIVE = "inconclusive"

SERIES_TOL = 1e-15
MC_CHUNK = 10_000
EXHAUSTIVE_MAX_DIM = 8


@dataclass
class VerificationReport:
    check_name: str
    parameters: dict
    lhs: float
    rhs: float
    margin: float
    hypothesis_regime: bool
    oracle: dict = field(default_factory=lambda: {"kind": "exact"})
    verdict: str = REPORT_ONLY
    notes: str = ""

    def __post_init__(self):
        if not self.hypothesis_regime and self.verdict in (PASS, FAIL):
            raise ValueError(
                "%s: verdict %s outside the hypothesis regime"
                % (self.check_name, self.verdict)
            )

    @property
    def failed(self):
        return self.verdict == FAIL

    def to_record(self):
        return to_plain(asdict(self))


def to_plain(value):
    # JSON-safe copy: numpy scalars to Python, non-finite floats to strings.
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def decide(margin, regime, stderr=0.0, slack=0.0):
    if not regime:
        return REPORT_ONLY
    if margin is None or math.isnan(margin):
        return INCONCLUSIVE
    return PASS if margin >= -(slack + 3.0 * stderr) else FAIL


def report(name, parameters, lhs, rhs, regime, conditions=None, **kwargs):
    """Build a report, with margin rhs - lhs unless given, and decide it."""
    margin = kwargs.pop("margin", rhs - lhs)
    stderr = kwargs.get("oracle", {}).get("stderr", 0.0)
    slack = kwargs.pop("slack", 0.0)
    verdict = kwargs.pop("verdict", None) or decide(margin, regime, stderr, slack)
    parameters = dict(parameters)
    if conditions is not None:
        parameters["regime"] = dict(conditions)
    result = VerificationReport(
        name,
        parameters,
        float(lhs),
        float(rhs),
        float("nan") if margin is None else float(margin),
        bool(regime),
        verdict=verdict,
        **kwargs,
    )
    level = logging.WARNING if result.failed else logging.INFO
    log.log(level, "%s %s: lhs=%.6g rhs=%.6g", name, result.verdict, lhs, rhs)
    return result


# ── Series constants ──────────────────────────────────────────────
def generalized_binomial(q, k):
    """q(q-1)...(q-k+1)/k!, exact through math.comb for nonnegative integer q."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a nonnegative integer, got " + str(k))
    k = int(k)
    if float(q).is_integer() and q >= 0:
        return float(math.comb(int(q), k))
    value = 1.0
    for i in range(k):
        value *= (q - i) / (i + 1)
    return value


def _binomial_series(q, ks, weight, ratio):
    # Sum of |binom(q, k)| weight(k) over ks, stopped once terms fall below
    # SERIES_TOL past k > q + 1, where consecutive terms shrink by `ratio`.
    total = 0.0
    term = 0.0
    for k in ks:
        term = abs(generalized_binomial(q, k)) * weight(k)
        total += term
        if k > q + 1 and term < SERIES_TOL:
            break
    return total, term * ratio / (1.0 - ratio)


def c_tilde_series(q):
    """(sum of |binom(q, 2k)| 2^(-2k) over k >= 1, tail bound)."""
    return _binomial_series(q, itertools.count(2, 2), lambda k: 2.0**-k, 0.25)


def c_tilde(q):
    if q < 2:
        raise ValueError("c_tilde needs q >= 2, got " + str(q))
    return max(c_tilde_series(q)[0], 1.5**q)


def lemma2_series(q):
    """(sum of |binom(q, k)| 2^(1-k) over k >= 2, tail bound)."""
    return _binomial_series(q, itertools.count(2), lambda k: 2.0 ** (1 - k), 0.5)


def a_q(q):
    return 1.0 + 1.5**q + q


# ── Hypothesis gates ──────────────────────────────────────────────
def lemma1_regime(q, d, N):
    return {"q >= 2": q >= 2, "N >= d^(1/2+1/q)": N >= d ** (0.5 + 1.0 / q)}


def lemma2_regime(q, d, N, a, j=0):
    series = lemma2_series(q)[0]
    largeness = (a_q(q) + series) / a * d ** (-1.0 + 2.0 / q)
    return {
        "q >= 2": q >= 2,
        "a > 0": a > 0,
        "N >= a d": N >= a * d - 1e-12,
        "0 <= j <= N-1": 0 <= j <= N - 1,
        "a d >= d^(1/q)": a * d >= d ** (1.0 / q),
        "(A_q + S_q) a^-1 d^(-1+2/q) <= 1/2": largeness <= 0.5,
    }


def lemma3_threshold_j(q, a):
    """Smallest J whose Gaussian tail sum is at most e^(-c_tilde(q)/q)/4."""
    target = 0.25 * math.exp(-c_tilde(q) / q)
    c = 7.0 / (128.0 * q * q)

    def exponent(j):
        return -c * j * j + 2.0 * (j + 1) / (a * q)

    # Terms past j_end are below e^-60 and decay faster than geometrically.
    j_end = int(2.0 / (a * q * c)) + 1
    while exponent(j_end) > -60.0:
        j_end *= 2
    terms = np.exp([exponent(j) for j in range(j_end + 1)])
    tails = np.cumsum(terms[::-1])[::-1]
    return int(np.argmax(tails <= target)) if np.any(tails <= target) else j_end


def lemma3_regime(q, d, N, a):
    J = lemma3_threshold_j(q, a) if q >= 2 else None
    return {
        "q == 2": q == 2,
        "a >= max(23, 2J)": J is not None and a >= max(23.0, 2.0 * J),
        "N >= a d": N >= a * d - 1e-12,
    }, J


def lemma5_regime(q, d, N, eps1, eps2):
    k = kappa(q, d, N)
    return {
        "eps1 in (0, 1/(10q)]": 0 < eps1 <= 1.0 / (10 * q),
        "eps2 in (0, 1/(10q)]": 0 < eps2 <= 1.0 / (10 * q),
        "kappa >= 10": k >= 10,
    }


def lemma8_regime(q, d, N, eps, r):
    return {
        "eps in (0, 1/(50q)]": 0 < eps <= 1.0 / (50 * q),
        "kappa >= 10": kappa(q, d, N) >= 10,
        "1 <= r <= d": 1 <= r <= d,
    }


def shift_regime(q, r, R, delta):
    return {
        "R >= 1": R >= 1,
        "delta in (0, q/(q+1))": 0 < delta < q / (q + 1.0),
        "r <= R^delta": r <= R**delta,
    }


def lemma7_regime(d, I, J, u, delta0, delta1):
    u = list(u)
    d0 = d - len(J)
    return {
        "delta0 in (0, 1)": 0 < delta0 < 1,
        "delta1 in (0, 1]": 0 < delta1 <= 1,
        "u nonincreasing, >= 0": all(a >= b for a, b in zip(u, u[1:]))
        and min(u) >= 0,
        "u_1 <= (1-delta0)/2": u[0] <= (1 - delta0) / 2,
        "delta1 d <= |I| <= d": delta1 * d <= len(I) <= d,
        "J = (d0, d]": set(J) == set(range(d0 + 1, d + 1)),
    }


def in_regime(conditions):
    return all(conditions.values())


# ── Hanner ────────────────────────────────────────────────────────
def check_hanner(q, samples, seed, dim=8, N=10):
    """Hanner's inequality for lattice x in [-N, N]^d and y in the unit cube."""
    if q < 2:
        raise ValueError("Hanner's inequality is checked for q >= 2, got " + str(q))
    worst = (math.inf, 0.0, 0.0)
    for index, size in enumerate(chunk_sizes(samples, MC_CHUNK)):
        rng = stream(seed, index)
        x = rng.integers(-N, N + 1, size=(size, dim)).astype(float)
        y = rng.random((size, dim)) - 0.5
        nx = np.linalg.norm(x, ord=q, axis=1)
        ny = np.linalg.norm(y, ord=q, axis=1)
        lhs = (
            np.linalg.norm(x + y, ord=q, axis=1) ** q
            + np.linalg.norm(x - y, ord=q, axis=1) ** q
        )
        rhs = (nx + ny) ** q + np.abs(nx - ny) ** q
        relative = (rhs - lhs) / np.maximum(rhs, 1e-300)
        i = int(np.argmin(relative))
        if relative[i] < worst[0]:
            worst = (float(relative[i]), float(lhs[i]), float(rhs[i]))
    margin, lhs, rhs = worst
    return report(
        "hanner",
        {"q": q, "d": dim, "N": N, "samples": samples},
        lhs,
        rhs,
        True,
        {"q >= 2": True},
        margin=margin,
        slack=1e-10,
        oracle={"kind": "sampled", "samples": samples, "seed": seed},
        notes="margin is the smallest relative gap (rhs - lhs)/rhs",
    )


# ── Counting versus volume ────────────────────────────────────────
def _relative_gap(lower, upper):
    return (upper - lower) / upper if upper else 0.0


def check_count_volume(q, d, N, a=None):
    """Lemma 1 chain, Lemma 4 sandwich and the Lemma 3 volume/count ratio."""
    body = BodySpec.qball(q, d)
    count = lattice_count(body, N).count
    params = {"q": q, "d": d, "N": N, "count": count}
    reports = []

    conditions = lemma1_regime(q, d, N)
    if q >= 2:
        ct = c_tilde(q)
        n1 = N * (1 + ct / d) ** (1.0 / q)
        middle = 2 * ball_volume(q, d, n1)
        upper = 2 * math.exp(ct / q) * ball_volume(q, d, N)
        margin = min(_relative_gap(count, middle), _relative_gap(middle, upper))
        reports.append(
            report(
                "lemma1",
                dict(params, c_tilde=ct, N1=n1, upper=upper),
                count,
                middle,
                in_regime(conditions),
                conditions,
                margin=margin,
                slack=1e-9,
            )
        )
    else:
        reports.append(
            report(
                "lemma1",
                params,
                count,
                math.nan,
                False,
                conditions,
                margin=math.nan,
                notes="c_tilde is defined for q >= 2 only",
            )
        )

    lower = (2 * floor_kappa(q, d, N) + 1) ** d
    log_upper = log_ball_volume(q, d, N + d ** (1.0 / q))
    upper = math.exp(log_upper) if log_upper < 700 else math.inf
    margin = min(
        (count - lower) / count, -math.expm1(math.log(count) - log_upper)
    )
    reports.append(
        report(
            "lemma4",
            dict(params, lower=lower),
            count,
            upper,
            True,
            {"d, N >= 1": True},
            margin=margin,
            notes="margin is min of relative gaps lower->count and count->upper",
        )
    )

    a = N / d if a is None else a
    conditions, J = lemma3_regime(q, d, N, a)
    ratio = ball_volume(q, d, N) / count
    if in_regime(conditions):
        bound = 2.0 * math.exp(2.0 * J / (a * q))
        reports.append(
            report(
                "lemma3",
                dict(params, a=a, J=J, constant=bound),
                ratio,
                bound,
                True,
                conditions,
            )
        )
    else:
        reports.append(
            report(
                "lemma3",
                dict(params, a=a, J=J),
                ratio,
                math.nan,
                False,
                conditions,
                margin=math.nan,
                notes="measured |B_N|/|B_N cap Z^d|; constant unquantified here",
            )
        )
    return reports


# ── Small sets ────────────────────────────────────────────────────
def _sparse_convolve(a, b, budget):
    out = np.zeros_like(a)
    for s in np.nonzero(b)[0]:
        out[s:] += b[s] * a[: budget + 1 - s]
    return out


def count_few_large(q, d, N, threshold, m_max):
    """#{x in B^q_N cap Z^d : at most m_max coordinates with |x_i| >= threshold}."""
    q = int(q)
    budget = integer_budget(q, N)
    kmax = integer_root(budget, q)
    dtype = np.int64 if (2 * kmax + 1) ** d < 2**62 else object
    small = np.zeros(budget + 1, dtype=dtype)
    large = np.zeros(budget + 1, dtype=dtype)
    for k in range(kmax + 1):
        (large if k >= threshold else small)[k**q] += 1 if k == 0 else 2
    dp = np.zeros((m_max + 1, budget + 1), dtype=dtype)
    dp[0, 0] = 1
    for _ in range(d):
        new = np.zeros_like(dp)
        for m in range(m_max + 1):
            new[m] += _sparse_convolve(dp[m], small, budget)
            if m:
                new[m] += _sparse_convolve(dp[m - 1], large, budget)
        dp = new
    return int(dp.sum())


def count_small_head(q, d, N, r, threshold):
    """#{x in B^q_N cap Z^d : sum_{i<=r} |x_i|^q < threshold}."""
    q = int(q)
    budget = integer_budget(q, N)
    head = shell_table(q, r, budget)
    if d > r:
        tail = np.cumsum(shell_table(q, d - r, budget).astype(object))
    else:
        tail = np.ones(budget + 1, dtype=object)
    top = min(budget, math.ceil(threshold) - 1)
    return sum(int(head[l]) * int(tail[budget - l]) for l in range(top + 1))


def _shell_sample(q, d, radius, size, rng):
    g = rng.standard_normal((size, d))
    return g / np.linalg.norm(g, ord=q, axis=1)[:, None] * radius


def check_small_sets(
    q, d, N, eps1, eps2, eps, r, j=0, a=None, trials=20_000, seed=0, points=8
):
    """Lemma 5 and Lemma 8 by exact counting, Lemma 2 by Monte Carlo."""
    if not float(q).is_integer():
        raise ValueError("small-set counts need an integer q, got " + str(q))
    count = lattice_count(BodySpec.qball(q, d), N).count
    k = kappa(q, d, N)
    reports = []

    conditions = lemma5_regime(q, d, N, eps1, eps2)
    size = count_few_large(q, d, N, eps2 * k, int(math.floor(eps1 * d)))
    reports.append(
        report(
            "lemma5",
            {"q": q, "d": d, "N": N, "eps1": eps1, "eps2": eps2, "kappa": k},
            size,
            2 * math.exp(-d / 10.0) * count,
            in_regime(conditions),
            conditions,
        )
    )

    conditions = lemma8_regime(q, d, N, eps, r)
    threshold = eps ** (q + 1) * k**q * r
    size = count_small_head(q, d, N, r, threshold)
    reports.append(
        report(
            "lemma8",
            {"q": q, "d": d, "N": N, "eps": eps, "r": r, "threshold": threshold},
            size,
            4 * math.exp(-eps * r / 10.0) * count,
            in_regime(conditions),
            conditions,
        )
    )

    a = N / d if a is None else a
    conditions = lemma2_regime(q, d, N, a, j)
    radius = N * (1 + (j + 0.5) / N) ** (1.0 / q)
    estimates = []
    for index in range(points):
        rng = stream(seed, index)
        x = _shell_sample(q, d, radius, 1, rng)[0]
        hits = 0
        for size in chunk_sizes(trials, MC_CHUNK):
            y = rng.random((size, d)) - 0.5
            hits += int(np.sum(np.linalg.norm(x + y, ord=q, axis=1) <= N))
        estimates.append(hits / trials)
    worst = max(estimates)
    stderr = math.sqrt(max(worst * (1 - worst), 0.0) / trials)
    reports.append(
        report(
            "lemma2",
            {"q": q, "d": d, "N": N, "a": a, "j": j, "shell_radius": radius},
            worst,
            math.exp(-7.0 * j * j / (128.0 * q * q)),
            in_regime(conditions),
            conditions,
            oracle={
                "kind": "monte_carlo",
                "trials": trials,
                "points": points,
                "seed": seed,
                "stderr": stderr,
            },
        )
    )
    return reports


# ── Shifted balls ─────────────────────────────────────────────────
def check_shift_difference(q, r, R, delta, z):
    """Lemma 10 (shifted count versus volume) and Lemma 11 (symmetric difference)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (r,):
        raise ValueError("shift z must have r=%d coordinates" % r)
    body = BodySpec.qball(q, r)
    shifted = lattice_points_shifted(body, R, z)
    centered = lattice_points(body, R)
    volume = ball_volume(q, r, R)
    conditions = shift_regime(q, r, R, delta)
    params = {"q": q, "r": r, "R": R, "delta": delta, "z": z.tolist()}

    e = r ** ((q + 1.0) / q) / R
    lemma10 = report(
        "lemma10",
        dict(params, shifted_count=len(shifted), volume=volume),
        abs(len(shifted) - volume),
        volume * e * math.exp(e),
        in_regime(conditions),
        conditions,
    )

    common = set(map(tuple, shifted.tolist())) & set(map(tuple, centered.tolist()))
    difference = len(shifted) + len(centered) - 2 * len(common)
    s = r * float(np.linalg.norm(z)) / R
    growth = R ** (-1 + (q + 1) * delta / q)
    bound = 4 * math.e * (s * math.exp(s) + math.exp(s) * growth)
    lemma11 = report(
        "lemma11",
        dict(params, centered_count=len(centered), shifted_count=len(shifted)),
        difference,
        bound * volume,
        in_regime(conditions),
        conditions,
    )
    return [lemma10, lemma11]


# ── Permutation lemmas ────────────────────────────────────────────
def _permutation_sums(sigma, I0, J_mask, u, threshold):
    # sigma[:, i] is the image of i; returns sums of both lemma statistics.
    images = sigma[:, I0]
    hit = J_mask[images]
    few = np.count_nonzero(hit, axis=1) <= threshold
    weights = np.exp(-np.sum(np.where(hit, u[images], 0.0), axis=1))
    return (
        float(np.sum(few)),
        float(np.sum(weights)),
        float(np.sum(weights**2)),
    )


def monte_carlo_permutations(
    d, I, J, u, delta0, delta1, trials=100_000, seed=0, threads=1, method="auto"
):
    """Lemma 6 probability and Lemma 7 expectation over uniform permutations.

    I and J are 1-based index sets; u is indexed 1..d. method "auto" is
    exhaustive for d <= 8 and Monte Carlo otherwise.
    """
    if method not in ("auto", "exhaustive", "monte_carlo"):
        raise ValueError("Invalid permutation method: " + str(method))
    if method == "auto":
        method = "exhaustive" if d <= EXHAUSTIVE_MAX_DIM else "monte_carlo"
    if method == "exhaustive" and d > EXHAUSTIVE_MAX_DIM:
        raise ValueError(
            "exhaustive enumeration is limited to d <= %d" % EXHAUSTIVE_MAX_DIM
        )
    I = sorted(set(int(i) for i in I))
    J = sorted(set(int(j) for j in J))
    u = np.asarray(u, dtype=float)
    if len(u) != d or any(not 1 <= i <= d for i in I + J):
        raise ValueError("index sets must lie in 1..d and u must have d entries")
    I0 = np.array(I, dtype=np.int64) - 1
    J_mask = np.zeros(d, dtype=bool)
    J_mask[np.array(J, dtype=np.int64) - 1] = True
    r = len(J)
    threshold = r * len(I) / (5.0 * d)

    if method == "exhaustive":

        def by_first(first):
            rest = [i for i in range(d) if i != first]
            sigma = np.array(
                [(first,) + p for p in itertools.permutations(rest)], dtype=np.int64
            )
            return _permutation_sums(sigma, I0, J_mask, u, threshold)

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            parts = list(pool.map(by_first, range(d)))
        n = math.factorial(d)
        oracle = {"kind": "exhaustive", "permutations": n, "stderr": 0.0}
    else:

        def by_chunk(args):
            index, size = args
            rng = stream(seed, index)
            sigma = np.argsort(rng.random((size, d)), axis=1)
            return _permutation_sums(sigma, I0, J_mask, u, threshold)

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            chunks = enumerate(chunk_sizes(trials, MC_CHUNK))
            parts = list(pool.map(by_chunk, chunks))
        n = trials
        oracle = {"kind": "monte_carlo", "trials": trials, "seed": seed}

    few, total, squares = (sum(p[i] for p in parts) for i in range(3))
    p6 = few / n
    e7 = total / n
    params = {
        "d": d,
        "I": I,
        "J": J,
        "u": u.tolist(),
        "delta0": delta0,
        "delta1": delta1,
    }

    oracle6 = dict(oracle)
    oracle7 = dict(oracle)
    if oracle["kind"] == "monte_carlo":
        oracle6["stderr"] = math.sqrt(p6 * (1 - p6) / n)
        oracle7["stderr"] = math.sqrt(max(squares / n - e7 * e7, 0.0) / n)
    lemma6 = report(
        "lemma6",
        dict(params, r=r, threshold=threshold),
        p6,
        math.exp(-r * len(I) / (10.0 * d)),
        True,
        {"I, J subsets of 1..d": True},
        oracle=oracle6,
    )
    conditions = lemma7_regime(d, I, J, u, delta0, delta1)
    lemma7 = report(
        "lemma7",
        params,
        e7,
        3 * math.exp(-delta0 * delta1 / 20.0 * float(np.sum(u[J_mask]))),
        in_regime(conditions),
        conditions,
        oracle=oracle7,
    )
    return [lemma6, lemma7]
