# -*- coding: utf-8 -*-
"""
utils/multiplier_analysis.py

Fourier multipliers of the discrete averages (normalized exponential sums
over the lattice points of a dilate), the semigroup multiplier, the
continuous multipliers of q-balls, and sampled checks of the decay
estimates built on them.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, dblquad, tplquad

from utils.inequality_verifier import in_regime, report
from utils.lattice_geometry import (
    BodySpec,
    ball_volume,
    integer_budget,
    integer_root,
    kappa,
    lattice_count,
    shell_table,
    sign_orbits,
)
from utils.maximal_operators import semigroup_kernel
from utils.rng import stream

log = logging.getLogger("multiplier_analysis")

CHUNK_CELLS = 4_000_000
LADDER_MIN = 1e-4
LADDER_MAX = 0.5


def reduce_torus(x):
    """Representative of x mod 1 in [-1/2, 1/2)."""
    x = np.asarray(x, dtype=float)
    return x - np.floor(x + 0.5)


@dataclass(frozen=True)
class FrequencyPoint:
    xi: tuple
    torus_norm_sq: float = field(init=False)

    def __post_init__(self):
        reduced = reduce_torus(np.atleast_1d(self.xi))
        object.__setattr__(self, "xi", tuple(reduced.tolist()))
        object.__setattr__(self, "torus_norm_sq", float(np.sum(reduced**2)))

    @property
    def dim(self):
        return len(self.xi)

    @property
    def torus_norm(self):
        return math.sqrt(self.torus_norm_sq)

    def as_array(self):
        return np.array(self.xi)


def torus_norm(xis):
    return np.linalg.norm(reduce_torus(xis), axis=-1)


# ── Discrete multipliers ──────────────────────────────────────────
def _weighted_shells(q, budget, xis):
    # W[i, s]: sum over x with sum |x_j|^q = s of prod_j cos(2 pi x_j xi_ij).
    n, r = xis.shape
    kmax = integer_root(budget, q)
    ks = np.arange(1, kmax + 1)
    table = np.zeros((n, budget + 1))
    table[:, 0] = 1.0
    for j in range(r):
        coefficients = 2.0 * np.cos(2.0 * np.pi * xis[:, j][:, None] * ks[None, :])
        nxt = table.copy()
        for index, k in enumerate(ks):
            step = int(k) ** q
            shifted = table[:, : budget + 1 - step]
            nxt[:, step:] += coefficients[:, index : index + 1] * shifted
        table = nxt
    return table


def _chunks(n, per_row):
    size = max(1, CHUNK_CELLS // max(per_row, 1))
    return [(start, min(n, start + size)) for start in range(0, n, size)]


def multiplier_batch(body, N, xis):
    """Normalized exponential sums over G_N cap Z^d at each row of xis."""
    xis = reduce_torus(np.atleast_2d(xis))
    if xis.shape[1] != body.dim:
        raise ValueError(
            "frequencies have %d coordinates, body has d=%d" % (xis.shape[1], body.dim)
        )
    out = np.empty(len(xis))
    if body.is_cube:
        r = int(math.floor(N + 1e-9))
        ks = np.arange(1, r + 1)
        for lo, hi in _chunks(len(xis), body.dim * max(r, 1)):
            phases = 2.0 * np.pi * xis[lo:hi, :, None] * ks[None, None, :]
            dirichlet = (1.0 + 2.0 * np.cos(phases).sum(axis=-1)) / (2 * r + 1)
            out[lo:hi] = np.prod(dirichlet, axis=1)
    elif body.integer_q:
        q = int(body.q)
        budget = integer_budget(q, N)
        count = float(lattice_count(body, N).count)
        for lo, hi in _chunks(len(xis), budget + 1):
            out[lo:hi] = _weighted_shells(q, budget, xis[lo:hi]).sum(axis=1) / count
    else:
        points, sizes = sign_orbits(body, N)
        sizes = sizes.astype(float)
        count = sizes.sum()
        for lo, hi in _chunks(len(xis), len(points) * body.dim):
            phases = 2.0 * np.pi * xis[lo:hi, None, :] * points[None, :, :]
            out[lo:hi] = np.prod(np.cos(phases), axis=-1) @ sizes / count
    return out


def multiplier(body, N, xi):
    if not isinstance(xi, FrequencyPoint):
        xi = FrequencyPoint(xi)
    return float(multiplier_batch(body, N, xi.as_array()[None, :])[0])


def lower_dim_multiplier(q, r, R, eta):
    return multiplier(BodySpec.qball(q, r), R, eta)


def semigroup_multiplier(t, xi):
    if t < 0:
        raise ValueError("semigroup time must be >= 0, got " + str(t))
    xi = xi.as_array() if isinstance(xi, FrequencyPoint) else np.asarray(xi, float)
    return float(np.exp(-t * np.sum(np.sin(np.pi * xi) ** 2)))


def semigroup_transform(t, xis):
    """Fourier transform of the semigroup kernel itself, row by row."""
    kernel = semigroup_kernel(float(t))
    rho = len(kernel) // 2
    n = np.arange(-rho, rho + 1)
    xis = np.atleast_2d(xis)
    factors = np.cos(2.0 * np.pi * xis[..., None] * n) @ kernel
    return np.prod(factors, axis=-1)


def sample_frequencies(d, n, seed):
    """n frequencies in [-1/2, 1/2)^d: even rows uniform, odd rows on a
    log-spaced radial ladder along random directions. Prefix-stable in n."""
    uniform = stream(seed, 0).random((n, d)) - 0.5
    directions = stream(seed, 1).standard_normal((n, d))
    levels = stream(seed, 2).random(n)
    radii = LADDER_MIN * (LADDER_MAX / LADDER_MIN) ** levels
    norms = np.linalg.norm(directions, axis=1)
    ladder = directions / np.where(norms > 0, norms, 1.0)[:, None] * radii[:, None]
    out = uniform
    out[1::2] = ladder[1::2]
    return reduce_torus(out)


# ── Sampled checks ────────────────────────────────────────────────
def verify_prop1(q, d, N, samples, seed):
    """|m_N(xi) - 1| <= 2 pi^2 kappa^2 |xi|^2 on sampled frequencies."""
    body = BodySpec.qball(q, d)
    k = kappa(q, d, N)
    xis = sample_frequencies(d, samples, seed)
    lhs = np.abs(multiplier_batch(body, N, xis) - 1.0)
    rhs = 2.0 * math.pi**2 * k**2 * torus_norm(xis) ** 2
    i = int(np.argmin(rhs - lhs))
    conditions = {"q >= 2": q >= 2}
    return report(
        "prop1",
        {"q": q, "d": d, "N": N, "kappa": k, "worst_xi": xis[i].tolist()},
        lhs[i],
        rhs[i],
        in_regime(conditions),
        conditions,
        slack=1e-12,
        oracle={"kind": "sampled", "samples": samples, "seed": seed},
    )


def prop2_regime(q, d, N):
    k = kappa(q, d, N)
    return {
        "kappa >= 10": k >= 10,
        "kappa <= 50 q d^(1-1/q)": k <= 50 * q * d ** (1 - 1.0 / q),
    }


def prop2_bound(k, norms):
    return 1.0 / (k * norms) + k ** (-1.0 / 7.0)


@dataclass
class EnvelopeRow:
    d: int
    N: float
    q: float
    kappa: float
    samples: int
    in_regime: bool
    envelope: float = None
    argmax_xi: tuple = ()

    def values(self):
        xi = " ".join("%.17g" % x for x in self.argmax_xi)
        envelope = "" if self.envelope is None else "%.17g" % self.envelope
        kappa_text = "%.17g" % self.kappa
        return [self.d, self.N, self.q, kappa_text, self.samples, envelope, xi]


@dataclass
class EnvelopeReport:
    q: float
    samples: int
    seed: int
    rows: list

    header = ["d", "N", "q", "kappa", "samples", "envelope", "argmax_xi"]

    def recompute(self, row):
        """Ratio |m(xi)| / bound at the recorded worst frequency."""
        body = BodySpec.qball(self.q, row.d)
        xi = np.asarray(row.argmax_xi)
        value = abs(multiplier_batch(body, row.N, xi[None, :])[0])
        return value / prop2_bound(row.kappa, float(torus_norm(xi)))

    def to_record(self):
        return {
            "q": self.q,
            "samples": self.samples,
            "seed": self.seed,
            "rows": [dict(zip(self.header, r.values())) for r in self.rows],
        }


def _envelope_row(q, d, N, samples, seed):
    k = kappa(q, d, N)
    row = EnvelopeRow(d, N, q, k, samples, in_regime(prop2_regime(q, d, N)))
    if not row.in_regime:
        log.info("prop2 envelope: skipping d=%d N=%g (kappa=%.3g)", d, N, k)
        return row
    xis = sample_frequencies(d, samples, seed)
    norms = torus_norm(xis)
    keep = norms > 0
    xis, norms = xis[keep], norms[keep]
    values = np.abs(multiplier_batch(BodySpec.qball(q, d), N, xis))
    ratios = values / prop2_bound(k, norms)
    i = int(np.argmax(ratios))
    row.envelope = float(ratios[i])
    row.argmax_xi = tuple(xis[i].tolist())
    log.info("prop2 envelope: d=%d N=%g kappa=%.3g -> %.6g", d, N, k, row.envelope)
    return row


def verify_prop2_envelope(q, grid, samples, seed, threads=1):
    """Measured sup of |m_N(xi)| / ((kappa |xi|)^-1 + kappa^(-1/7)) per (d, N).

    Report only: grid points outside the kappa window are kept as rows
    flagged out of regime, without an envelope.
    """
    grid = [(int(d), float(N)) for d, N in grid]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda g: _envelope_row(q, *g, samples, seed), grid))
    return EnvelopeReport(q, samples, seed, rows)


def lemma9_regime(q, d, N, r, eps):
    return {
        "kappa >= 10": kappa(q, d, N) >= 10,
        "eps in (0, 1/(50q)]": 0 < eps <= 1.0 / (50 * q),
        "1 <= r <= d": 1 <= r <= d,
    }


def check_lemma9(q, d, N, r, eps, samples, seed):
    """|m_N(xi)| against the sup of r-dimensional multipliers over admissible
    radii l^(1/q), eps^(q+1) kappa^q r <= l <= N^q, plus 4 e^(-eps r/10)."""
    if not float(q).is_integer():
        raise ValueError("the radius decomposition needs an integer q, got " + str(q))
    q = int(q)
    k = kappa(q, d, N)
    budget = integer_budget(q, N)
    threshold = eps ** (q + 1) * k**q * r
    xis = sample_frequencies(d, samples, seed)
    lhs = np.abs(multiplier_batch(BodySpec.qball(q, d), N, xis))

    counts = np.cumsum(shell_table(q, r, budget).astype(float))
    first = max(0, math.ceil(threshold))
    sup = np.zeros(len(xis))
    for lo, hi in _chunks(len(xis), budget + 1):
        sums = np.cumsum(_weighted_shells(q, budget, xis[lo:hi, :r]), axis=1)
        if first <= budget:
            sup[lo:hi] = np.abs(sums[:, first:] / counts[first:]).max(axis=1)
    rhs = sup + 4.0 * math.exp(-eps * r / 10.0)
    i = int(np.argmin(rhs - lhs))
    conditions = lemma9_regime(q, d, N, r, eps)
    return report(
        "lemma9",
        {"q": q, "d": d, "N": N, "r": r, "eps": eps, "threshold": threshold},
        lhs[i],
        rhs[i],
        in_regime(conditions),
        conditions,
        slack=1e-12,
        oracle={"kind": "sampled", "samples": samples, "seed": seed},
        notes="sup over l taken up to N^q",
    )


def verify_sine_comparability(samples, seed):
    """2|eta| <= |sin(pi eta)| <= pi |eta| on [-1/2, 1/2)."""
    eta = np.abs(stream(seed, 0).random(samples) - 0.5)
    s = np.abs(np.sin(np.pi * eta))
    lower = s - 2.0 * eta
    upper = np.pi * eta - s
    i_low, i_up = int(np.argmin(lower)), int(np.argmin(upper))
    if lower[i_low] <= upper[i_up]:
        lhs, rhs = 2.0 * eta[i_low], s[i_low]
    else:
        lhs, rhs = s[i_up], np.pi * eta[i_up]
    conditions = {"eta in [-1/2, 1/2)": True}
    return report(
        "sine_comparability",
        {"samples": samples},
        lhs,
        rhs,
        True,
        conditions,
        slack=1e-15,
        oracle={"kind": "sampled", "samples": samples, "seed": seed},
    )


# ── Continuous multipliers ────────────────────────────────────────
def continuous_multiplier(q, d, R, xi):
    """|B^q_R|^-1 times the Fourier transform of the indicator of B^q_R at xi."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if len(xi) != d:
        raise ValueError("xi has %d coordinates, expected d=%d" % (len(xi), d))
    if d > 3:
        raise ValueError("continuous multipliers are integrated for d <= 3 only")
    if not xi.any():
        return 1.0
    if math.isinf(q) or d == 1:
        # Product of interval averages.
        return float(np.prod(np.sinc(2.0 * xi * R)))

    def edge(x):
        return max(R**q - abs(x) ** q, 0.0) ** (1.0 / q)

    tol = 1e-9 * ball_volume(q, d, R)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            if d == 2:
                value, _ = dblquad(
                    lambda y, x: math.cos(2 * math.pi * (xi[0] * x + xi[1] * y)),
                    -R,
                    R,
                    lambda x: -edge(x),
                    edge,
                    epsabs=tol,
                    epsrel=1e-10,
                )
            else:

                def face(x, y):
                    return max(R**q - abs(x) ** q - abs(y) ** q, 0.0) ** (1.0 / q)

                value, _ = tplquad(
                    lambda z, y, x: math.cos(
                        2 * math.pi * (xi[0] * x + xi[1] * y + xi[2] * z)
                    ),
                    -R,
                    R,
                    lambda x: -edge(x),
                    edge,
                    lambda x, y: -face(x, y),
                    face,
                    epsabs=tol,
                    epsrel=1e-10,
                )
        except IntegrationWarning as exc:
            raise RuntimeError(
                "quadrature did not converge for q=%g d=%d R=%g xi=%s: %s"
                % (q, d, R, xi.tolist(), exc)
            )
    return value / ball_volume(q, d, R)


def continuous_envelope(q, d, R, radii, seed, directions=4):
    """Decay chart of the continuous multiplier: per |xi|, the worst |m| over
    random directions and its products with R d^(-1/q) |xi|."""
    rows = []
    scale = R * d ** (-1.0 / q) if math.isfinite(q) else R
    unit = stream(seed, 0).standard_normal((directions, d))
    unit /= np.linalg.norm(unit, axis=1)[:, None]
    for radius in radii:
        values = [continuous_multiplier(q, d, R, radius * u) for u in unit]
        worst = max(values, key=abs)
        rows.append(
            {
                "q": q,
                "d": d,
                "R": R,
                "radius": radius,
                "multiplier": worst,
                "decay_product": abs(worst) * scale * radius,
                "small_scale_ratio": max(abs(v - 1.0) for v in values)
                / (scale * radius),
            }
        )
    return rows
