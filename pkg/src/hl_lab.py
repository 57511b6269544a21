#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Batch front door of the maximal function lab.

Every subcommand prints a one-line summary on **stdout** and, with
-o/--output, writes its artifact (JSON, CSV or a binary function file)
together with the effective configuration as <artifact>.config.
Logging goes to **stderr**; the level comes from HL_LAB_LOG_LEVEL.

Exit codes: 0 success, 1 a verification failed inside its hypothesis
regime, 2 usage error.
"""
import argparse
import math
import sys

import numpy as np
from utils.config import RunConfig, config_tokens, read_config_file, setup_logging
from utils.constants_lab import (
    SearchConfig,
    atoms_of,
    compare_step_extension,
    ellipsoid_trend,
    sample_and_compare,
    search_weak_constant,
    strong_estimate,
    strong_ratio,
    weak_estimate,
)
from utils.file import (
    dumps_record,
    function_rows,
    load_function,
    save_function,
    write_csv,
    write_json,
)
from utils.inequality_verifier import (
    check_count_volume,
    check_hanner,
    check_shift_difference,
    check_small_sets,
    monte_carlo_permutations,
)
from utils.lattice_geometry import (
    BodySpec,
    BudgetExceeded,
    ball_volume_split,
    body_volume,
    ellipsoid_family,
    lattice_count,
)
from utils.maximal_operators import (
    GridFunction,
    LatticeFunction,
    ScaleSelector,
    average,
    maximal,
    semigroup_apply,
    square_function,
)
from utils.multiplier_analysis import (
    EnvelopeReport,
    check_lemma9,
    continuous_multiplier,
    multiplier_batch,
    sample_frequencies,
    verify_prop1,
    verify_prop2_envelope,
    verify_sine_comparability,
)
from utils.rng import stream

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# ── Logging setup ────────────────────────────────────────────────
log = setup_logging("hl_lab")


# ── Flag parsing helpers ─────────────────────────────────────────
def floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def parse_atoms(text, dim):
    """'n1,..,nd:mass;...' into a lattice function."""
    positions, masses = [], []
    for atom in filter(None, (a.strip() for a in text.split(";"))):
        if ":" not in atom:
            raise ValueError("--atoms entry %r needs the form position:mass" % atom)
        position, mass = atom.split(":", 1)
        position = ints(position)
        if len(position) != dim:
            raise ValueError(
                "--atoms position %s has %d coordinates, --dim is %d"
                % (position, len(position), dim)
            )
        positions.append(position)
        masses.append(float(mass))
    return LatticeFunction.from_atoms(positions, masses)


def format_atoms(f):
    positions, values = atoms_of(f)
    return ";".join(
        "%s:%.17g" % (",".join(str(x) for x in p), v) for p, v in zip(positions, values)
    )


def make_body(args, dim=None):
    dim = args.dim if dim is None else dim
    if args.body == "cube":
        return BodySpec.cube(dim)
    if args.body == "ellipsoid":
        if args.weights:
            weights = floats(args.weights)
            if len(weights) != dim:
                raise ValueError(
                    "--weights has %d entries, --dim is %d" % (len(weights), dim)
                )
            return BodySpec.ellipsoid(weights)
        return ellipsoid_family(dim)
    return BodySpec.qball(args.q, dim)


def make_selector(args, t_max=None):
    t_max = args.t_max if t_max is None else t_max
    if args.scales == "all":
        return ScaleSelector.all(t_max)
    if args.scales == "greater_than":
        return ScaleSelector.greater_than(args.D, t_max)
    if args.scales == "dyadic":
        return ScaleSelector.dyadic(args.c1, args.c2)
    if not args.radii:
        raise ValueError("--scales explicit needs --radii")
    return ScaleSelector.explicit(floats(args.radii))


def make_function(args, dim=None):
    dim = args.dim if dim is None else dim
    if args.input:
        f = load_function(args.input)
        if f.dim != dim:
            raise ValueError(
                "--input holds a d=%d function, --dim is %d" % (f.dim, dim)
            )
        return f
    if args.atoms:
        return parse_atoms(args.atoms, dim)
    s = args.support
    shape = (2 * s + 1,) * dim
    if args.generator == "delta":
        return LatticeFunction.delta(dim)
    if args.generator == "random":
        return LatticeFunction((-s,) * dim, stream(args.seed, 0).random(shape))
    if args.generator == "plateau":
        return LatticeFunction((-s,) * dim, np.ones(shape))
    # Triangular bump of half-width support + 1.
    n = LatticeFunction((-s,) * dim, np.zeros(shape)).points()
    values = np.prod(1.0 - np.abs(n) / (s + 1.0), axis=-1)
    return LatticeFunction((-s,) * dim, values)


def make_grid_function(args):
    if args.input:
        F = load_function(args.input)
        if not isinstance(F, GridFunction):
            raise ValueError("--input must hold a grid function for --mode sample")
        return F
    h = 1.0 / args.K if args.h is None else args.h
    extent = args.extent
    lower, upper = (-extent,) * args.dim, (extent,) * args.dim
    if args.generator == "plateau":
        return GridFunction.sample(lambda x: np.ones(x.shape[:-1]), lower, upper, h)
    if args.generator != "bump":
        raise ValueError("--mode sample takes --generator bump or plateau")
    return GridFunction.sample(
        lambda x: np.prod(np.maximum(0.0, 1.0 - np.abs(x) / extent), axis=-1),
        lower,
        upper,
        h,
    )


def require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError("--%s is required" % name.replace("_", "-"))


# ── Output ───────────────────────────────────────────────────────
def emit(args, summary, record=None, rows=None, header=None, function=None):
    """Write the artifact (if any), its config sidecar, and print the summary."""
    output = args.output
    if output:
        if function is not None and output == "-":
            header = ["n%d" % (i + 1) for i in range(function.dim)] + ["value"]
            write_csv(function_rows(function), header, output)
        elif function is not None:
            save_function(function, output)
        elif args.format == "csv" and header is not None:
            write_csv(rows or [], header, output)
        else:
            write_json(record, output)
        if output != "-":
            RunConfig.from_namespace(args).write_sidecar(output)
            log.info("Wrote %s", output)
    if summary is not None and output != "-":
        print(summary)


def report_rows(reports):
    header = ["check_name", "verdict", "lhs", "rhs", "margin", "hypothesis_regime"]
    rows = [[getattr(r, key) for key in header] for r in reports]
    return header, rows


def verdict_code(reports):
    return EXIT_FAILED if any(r.failed for r in reports) else EXIT_OK


def function_summary(name, f):
    return "%s: box %s at %s, l1 %.12g, sup %.12g" % (
        name,
        "x".join(str(n) for n in f.shape),
        ",".join(str(o) for o in f.offset),
        f.norm(1),
        f.norm(math.inf),
    )


# ── Subcommands ──────────────────────────────────────────────────
def run_count(args):
    require(args, "t")
    body = make_body(args)
    result = lattice_count(body, args.t)
    record = {
        "body": body.describe(),
        "t": args.t,
        "count": result.count,
        "exact": result.exact,
    }
    emit(args, str(result.count), record, [record], list(record))
    return EXIT_OK


def run_volume(args):
    require(args, "t")
    body = make_body(args)
    record = {"body": body.describe(), "t": args.t}
    try:
        record["volume"] = body_volume(body, args.t)
        summary = "%.17g" % record["volume"]
    except OverflowError:
        if body.kind != "qball":
            raise
        mantissa, exponent = ball_volume_split(body.q, body.dim, args.t)
        record.update(mantissa=mantissa, exponent=exponent)
        summary = "%.17g*2^%d" % (mantissa, exponent)
    emit(args, summary, record)
    return EXIT_OK


def run_average(args):
    require(args, "t")
    body = make_body(args)
    result = average(body, args.t, make_function(args))
    name = "average t=%g count=%d" % (args.t, result.meta["count"])
    summary = function_summary(name, result)
    emit(args, summary, function=result)
    return EXIT_OK


def run_maximal(args):
    body = make_body(args)
    selector = make_selector(args)
    result = maximal(body, selector, make_function(args))
    summary = function_summary(
        "maximal %s truncation %.3g"
        % (selector.describe(), result.meta["truncation_error"]),
        result,
    )
    emit(args, summary, function=result)
    return EXIT_OK


def run_semigroup(args):
    require(args, "time")
    result = semigroup_apply(args.time, make_function(args))
    emit(args, function_summary("semigroup t=%g" % args.time, result), function=result)
    return EXIT_OK


def run_squarefn(args):
    f = make_function(args)
    result = square_function(args.q, args.c1, args.c2, f)
    ratio = result.norm(2) / f.norm(2)
    summary = "square function window %s: |Sf|_2/|f|_2 = %.12g" % (
        result.meta["window"],
        ratio,
    )
    emit(args, summary, function=result)
    return EXIT_OK


def run_constant(args):
    body = make_body(args)
    explicit = args.input or args.atoms
    if args.kind == "strong":
        if args.p is None:
            raise ValueError("--kind strong needs --p")
        f = make_function(args)
        estimate = strong_estimate(body, make_selector(args), f, args.p)
    elif explicit:
        estimate = weak_estimate(body, make_selector(args), make_function(args))
    else:
        config = SearchConfig(
            atoms_max=args.atoms_max,
            radius=args.radius,
            value_grid=floats(args.value_grid),
            evaluations=args.evaluations,
            seed=args.seed,
            t_max=args.search_t_max,
            threads=args.threads,
            local_steps=args.local_steps,
        )
        estimate = search_weak_constant(body, config)
    summary = estimate.summary() + "\nwitness: " + format_atoms(estimate.witness)
    if args.witness:
        summary += "\n" + dumps_record(estimate.to_record()["witness"])
    emit(args, summary, estimate.to_record())
    return EXIT_OK


def run_transfer(args):
    body = make_body(args)
    if args.mode == "sample":
        result = sample_and_compare(
            make_grid_function(args), args.K, body, args.eta, args.t_max
        )
    else:
        if not body.is_cube:
            raise ValueError("--mode step compares cube maximal functions only")
        result = compare_step_extension(
            make_function(args), args.delta, args.h, args.t_max
        )
    summary = "%s %s: lhs %.12g rhs %.12g" % (
        result.check_name,
        result.verdict,
        result.lhs,
        result.rhs,
    )
    header, rows = report_rows([result])
    emit(args, summary, result.to_record(), rows, header)
    return verdict_code([result])


def run_multiplier(args):
    require(args, "N")
    body = make_body(args)
    if args.xi:
        xis = np.atleast_2d(floats(args.xi))
    elif args.samples:
        xis = sample_frequencies(body.dim, args.samples, args.seed)
    else:
        raise ValueError("multiplier needs --xi or --samples")
    if args.continuous:
        if body.kind != "qball":
            raise ValueError("--continuous is defined for q-balls only")
        values = np.array(
            [continuous_multiplier(body.q, body.dim, args.N, xi) for xi in xis]
        )
    else:
        values = multiplier_batch(body, args.N, xis)
    header = ["xi%d" % (i + 1) for i in range(body.dim)] + ["multiplier"]
    rows = [list(map(float, xi)) + [float(v)] for xi, v in zip(xis, values)]
    if len(values) == 1:
        summary = "%.17g" % values[0]
    else:
        summary = "%d frequencies: max |m| %.12g" % (len(values), np.abs(values).max())
    record = {"body": body.describe(), "N": args.N, "rows": rows}
    emit(args, summary, record, rows, header)
    return EXIT_OK


def run_verify(args):
    require(args, "suite")
    suite = args.suite
    if suite == "prop1":
        reports = [verify_prop1(args.q, args.dim, args.N, args.samples, args.seed)]
    elif suite == "prop2":
        envelope = verify_prop2_envelope(
            args.q, [(args.dim, args.N)], args.samples, args.seed, args.threads
        )
        row = envelope.rows[0]
        summary = "prop2 envelope d=%d N=%g: %s" % (
            row.d,
            row.N,
            "out of regime" if row.envelope is None else "%.12g" % row.envelope,
        )
        rows = [r.values() for r in envelope.rows]
        emit(args, summary, envelope.to_record(), rows, EnvelopeReport.header)
        return EXIT_OK
    elif suite == "lemma9":
        reports = [
            check_lemma9(
                args.q, args.dim, args.N, args.r, args.eps, args.samples, args.seed
            )
        ]
    elif suite == "sine":
        reports = [verify_sine_comparability(args.samples, args.seed)]
    elif suite == "hanner":
        reports = [check_hanner(args.q, args.samples, args.seed, args.dim, int(args.N))]
    elif suite == "count-volume":
        reports = check_count_volume(args.q, args.dim, args.N, args.a)
    elif suite == "small-sets":
        reports = check_small_sets(
            args.q,
            args.dim,
            args.N,
            args.eps1,
            args.eps2,
            args.eps,
            args.r,
            j=args.j,
            a=args.a,
            trials=args.trials,
            seed=args.seed,
        )
    elif suite == "shift":
        z = floats(args.z) if args.z else (0.0,) * args.r
        reports = check_shift_difference(args.q, args.r, args.R, args.delta, z)
    else:
        u = floats(args.u) if args.u else (0.0,) * args.dim
        reports = monte_carlo_permutations(
            args.dim,
            ints(args.I),
            ints(args.J),
            u,
            args.delta0,
            args.delta1,
            trials=args.trials,
            seed=args.seed,
            threads=args.threads,
            method=args.method,
        )
    summary = "\n".join(
        "%s %s: lhs %.12g rhs %.12g" % (r.check_name, r.verdict, r.lhs, r.rhs)
        for r in reports
    )
    header, rows = report_rows(reports)
    emit(args, summary, [r.to_record() for r in reports], rows, header)
    return verdict_code(reports)


# ── Sweeps ───────────────────────────────────────────────────────
def sweep_count(args):
    header = ["d", "t", "count", "exact", "error"]
    rows = []
    for d in ints(args.d_grid):
        for t in floats(args.t_grid):
            row = {"d": d, "t": t}
            try:
                result = lattice_count(make_body(args, d), t)
                row.update(count=result.count, exact=result.exact)
            except (ValueError, BudgetExceeded) as exc:
                row["error"] = str(exc)
            rows.append(row)
    return header, rows


def sweep_envelope(args):
    header = EnvelopeReport.header + ["in_regime", "error"]
    rows = []
    for d in ints(args.d_grid):
        for N in floats(args.N_grid):
            row = {"d": d, "N": N, "q": args.q}
            try:
                report = verify_prop2_envelope(
                    args.q, [(d, N)], args.samples, args.seed, args.threads
                )
                row.update(zip(EnvelopeReport.header, report.rows[0].values()))
                row["in_regime"] = report.rows[0].in_regime
            except (ValueError, BudgetExceeded) as exc:
                row["error"] = str(exc)
            rows.append(row)
    return header, rows


def sweep_weak_search(args):
    header = [
        "atoms_max",
        "lower_bound",
        "witness_level",
        "witness",
        "evaluations",
        "budget_exhausted",
        "error",
    ]
    rows = []
    body = make_body(args)
    initial = ()
    for k in ints(args.k_grid):
        row = {"atoms_max": k}
        try:
            config = SearchConfig(
                atoms_max=k,
                radius=args.radius,
                value_grid=floats(args.value_grid),
                evaluations=args.evaluations,
                seed=args.seed,
                t_max=args.search_t_max,
                threads=args.threads,
                local_steps=args.local_steps,
                initial=initial,
            )
            estimate = search_weak_constant(body, config)
            # Start the next budget from this witness: bounds never decrease.
            initial = (atoms_of(estimate.witness),)
            row.update(
                lower_bound=estimate.lower_bound,
                witness_level=estimate.witness_level,
                witness=format_atoms(estimate.witness),
                evaluations=estimate.search_trace["evaluations"],
                budget_exhausted=estimate.budget_exhausted,
            )
        except (ValueError, BudgetExceeded) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return header, rows


def sweep_strong_ratio(args):
    header = ["p", "t_max", "ratio", "error"]
    rows = []
    body = make_body(args)
    f = make_function(args)
    for p in floats(args.p_grid):
        for t in floats(args.t_grid):
            row = {"p": p, "t_max": t}
            try:
                row["ratio"] = strong_ratio(body, make_selector(args, t), f, p)
            except (ValueError, BudgetExceeded) as exc:
                row["error"] = str(exc)
            rows.append(row)
    return header, rows


def sweep_ellipsoid_trend(args):
    header = ["d", "p", "t_max", "ratio", "log_d_power", "error"]
    rows = []
    for d in ints(args.d_grid):
        try:
            rows.extend(ellipsoid_trend([d], args.p))
        except (ValueError, BudgetExceeded) as exc:
            rows.append({"d": d, "p": args.p, "error": str(exc)})
    return header, rows


SWEEPS = {
    "count": sweep_count,
    "multiplier-envelope": sweep_envelope,
    "weak-search": sweep_weak_search,
    "strong-ratio": sweep_strong_ratio,
    "ellipsoid-trend": sweep_ellipsoid_trend,
}


def run_sweep(args):
    require(args, "op")
    header, rows = SWEEPS[args.op](args)
    failed = sum(1 for row in rows if row.get("error"))
    output = args.output or "-"
    write_csv(rows, header, output)
    if output != "-":
        RunConfig.from_namespace(args).write_sidecar(output)
        print("sweep %s: %d rows, %d failed" % (args.op, len(rows), failed))
    return EXIT_OK


# ── Argument parsing ─────────────────────────────────────────────
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value config file")
    common.add_argument(
        "-o", "--output", metavar="FILE", help="artifact path, - for stdout"
    )
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)

    body = argparse.ArgumentParser(add_help=False)
    body.add_argument(
        "--body", choices=["qball", "cube", "ellipsoid"], default="qball"
    )
    body.add_argument("--q", type=float, default=2.0)
    body.add_argument("--dim", type=int, default=1)
    body.add_argument("--weights", metavar="L1,..,LD", help="ellipsoid axis weights")

    scales = argparse.ArgumentParser(add_help=False)
    scales.add_argument(
        "--scales",
        choices=["all", "greater_than", "dyadic", "explicit"],
        default="all",
    )
    scales.add_argument("--t-max", type=float, default=10.0)
    scales.add_argument("--D", type=float, default=0.0)
    scales.add_argument("--c1", type=float, default=10.0)
    scales.add_argument("--c2", type=float, default=10.0)
    scales.add_argument("--radii", metavar="T1,T2,..")

    function = argparse.ArgumentParser(add_help=False)
    function.add_argument("--atoms", metavar="N1,..,ND:MASS;..")
    function.add_argument(
        "--input", metavar="FILE", help="function file (.hlf or .csv)"
    )
    function.add_argument(
        "--generator",
        choices=["delta", "random", "bump", "plateau"],
        default="delta",
    )
    function.add_argument("--support", type=int, default=5)

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--atoms-max", type=int, default=4)
    search.add_argument("--radius", type=int, default=40)
    search.add_argument("--value-grid", default="0.25,0.5,0.75,1")
    search.add_argument("--evaluations", type=int, default=100_000)
    search.add_argument("--search-t-max", type=float)
    search.add_argument("--local-steps", type=int)

    parser = argparse.ArgumentParser(
        description="Discrete and continuous maximal function lab",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="subcommand")

    def add(name, parents, handler, description):
        sub = subparsers.add_parser(
            name,
            parents=[common] + parents,
            help=description,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        sub.set_defaults(handler=handler)
        return sub

    sub = add("count", [body], run_count, "lattice points of G_t")
    sub.add_argument("--t", type=float)

    sub = add("volume", [body], run_volume, "volume of G_t")
    sub.add_argument("--t", type=float)

    sub = add("average", [body, function], run_average, "discrete average")
    sub.add_argument("--t", type=float)

    add("maximal", [body, scales, function], run_maximal, "discrete maximal function")

    sub = add("semigroup", [function], run_semigroup, "heat semigroup P_t f")
    sub.add_argument("--time", type=float)
    sub.add_argument("--dim", type=int, default=1)

    sub = add("squarefn", [function], run_squarefn, "dyadic square function")
    sub.add_argument("--q", type=float, default=2.0)
    sub.add_argument("--dim", type=int, default=1)
    sub.add_argument("--c1", type=float, default=10.0)
    sub.add_argument("--c2", type=float, default=10.0)

    sub = add(
        "constant",
        [body, scales, function, search],
        run_constant,
        "strong or weak type constant lower bound",
    )
    sub.add_argument("--kind", choices=["weak11", "strong"], default="weak11")
    sub.add_argument("--p", type=float)
    sub.add_argument("--witness", action="store_true", help="dump the witness record")

    sub = add("transfer", [body, function], run_transfer, "transference checks")
    sub.add_argument("--mode", choices=["sample", "step"], default="sample")
    sub.add_argument("--K", type=int, default=100)
    sub.add_argument("--eta", type=float, default=0.1)
    sub.add_argument("--h", type=float)
    sub.add_argument("--extent", type=float, default=1.0)
    sub.add_argument("--delta", type=float, default=0.5)
    sub.add_argument("--t-max", type=float)

    sub = add("multiplier", [body], run_multiplier, "Fourier multiplier values")
    sub.add_argument("--N", type=float)
    sub.add_argument("--xi", metavar="X1,..,XD")
    sub.add_argument("--samples", type=int, default=0)
    sub.add_argument("--continuous", action="store_true")

    sub = add("verify", [], run_verify, "verification suites")
    sub.add_argument(
        "--suite",
        choices=[
            "prop1",
            "prop2",
            "lemma9",
            "sine",
            "hanner",
            "count-volume",
            "small-sets",
            "shift",
            "permutations",
        ],
    )
    sub.add_argument("--q", type=float, default=2.0)
    sub.add_argument("--dim", type=int, default=2)
    sub.add_argument("--N", type=float, default=10.0)
    sub.add_argument("--samples", type=int, default=10_000)
    sub.add_argument("--a", type=float)
    sub.add_argument("--eps", type=float, default=0.01)
    sub.add_argument("--eps1", type=float, default=0.05)
    sub.add_argument("--eps2", type=float, default=0.05)
    sub.add_argument("--r", type=int, default=1)
    sub.add_argument("--j", type=int, default=0)
    sub.add_argument("--R", type=float, default=100.0)
    sub.add_argument("--delta", type=float, default=0.5)
    sub.add_argument("--z", metavar="Z1,..,ZR")
    sub.add_argument("--trials", type=int, default=100_000)
    sub.add_argument("--I", default="1")
    sub.add_argument("--J", default="1")
    sub.add_argument("--u", metavar="U1,..,UD")
    sub.add_argument("--delta0", type=float, default=0.5)
    sub.add_argument("--delta1", type=float, default=0.5)
    sub.add_argument(
        "--method", choices=["auto", "exhaustive", "monte_carlo"], default="auto"
    )

    sub = add("sweep", [body, scales, function, search], run_sweep, "parameter sweeps")
    sub.add_argument("--op", choices=sorted(SWEEPS))
    sub.add_argument("--d-grid", default="1")
    sub.add_argument("--t-grid", default="1")
    sub.add_argument("--N-grid", default="12")
    sub.add_argument("--k-grid", default="1")
    sub.add_argument("--p-grid", default="2")
    sub.add_argument("--p", type=float, default=1.5)
    sub.add_argument("--samples", type=int, default=1000)
    return parser


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.error("a subcommand is required")
    if args.config:
        entries = read_config_file(args.config)
        if entries.get("subcommand", args.subcommand) != args.subcommand:
            log.warning(
                "config %s is for %s, running %s",
                args.config,
                entries["subcommand"],
                args.subcommand,
            )
        # Config first so command-line flags win.
        tail = argv[argv.index(args.subcommand) + 1 :]
        args = parser.parse_args([args.subcommand] + config_tokens(entries) + tail)
    log.debug("Effective arguments: %s", vars(args))
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code is None else exc.code
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE

    # ── Main execution ──────────────────────────────────────────────
    try:
        return args.handler(args)
    except (ValueError, BudgetExceeded, OverflowError, OSError) as exc:
        log.debug("%s failed", args.subcommand, exc_info=True)
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
