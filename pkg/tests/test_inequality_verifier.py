import json
import math

import numpy as np
import pytest
from scipy.stats import hypergeom

from utils.inequality_verifier import (
    VerificationReport,
    a_q,
    c_tilde,
    c_tilde_series,
    check_count_volume,
    check_hanner,
    check_shift_difference,
    check_small_sets,
    count_few_large,
    count_small_head,
    decide,
    generalized_binomial,
    lemma2_series,
    lemma3_threshold_j,
    lemma7_regime,
    monte_carlo_permutations,
    report,
    to_plain,
)
from utils.lattice_geometry import BodySpec, lattice_points


def test_generalized_binomial():
    assert generalized_binomial(4, 2) == 6.0
    assert generalized_binomial(2.5, 3) == pytest.approx(0.3125)
    assert generalized_binomial(2, 5) == 0.0
    assert generalized_binomial(0.5, 0) == 1.0
    with pytest.raises(ValueError):
        generalized_binomial(2, -1)


def test_series_constants():
    assert c_tilde(2) == 2.25
    assert c_tilde_series(2) == (0.25, 0.0)
    assert lemma2_series(2) == (0.5, 0.0)
    total, tail = c_tilde_series(2.5)
    assert total > 0 and 0 <= tail < 1e-14
    assert c_tilde(3) == 3.375
    assert a_q(2) == 1 + 2.25 + 2
    with pytest.raises(ValueError):
        c_tilde(1.5)


def test_decide():
    assert decide(0.1, True) == "pass"
    assert decide(-0.1, True) == "fail"
    assert decide(-0.1, True, stderr=0.05) == "pass"
    assert decide(-0.1, False) == "report_only"
    assert decide(math.nan, True) == "inconclusive"


def test_report_outside_regime_cannot_pass():
    with pytest.raises(ValueError):
        VerificationReport("x", {}, 1.0, 2.0, 1.0, False, verdict="pass")
    result = report("x", {"a": 1}, 3.0, 2.0, False, {"a > 5": False})
    assert result.verdict == "report_only"
    assert not result.failed
    assert result.parameters["regime"] == {"a > 5": False}


def test_report_record_is_json():
    result = report("x", {"v": np.float64(1.5)}, 1.0, math.nan, True, margin=None)
    record = result.to_record()
    assert record["verdict"] == "inconclusive"
    assert record["rhs"] == "nan"
    json.dumps(record)
    assert to_plain({"a": (np.int64(2), math.inf)}) == {"a": [2, "inf"]}


@pytest.mark.parametrize("q", [2, 2.5, 3, 4])
def test_hanner(q):
    result = check_hanner(q, 2000, 0, dim=6, N=5)
    assert result.verdict == "pass"


def test_hanner_needs_q_at_least_two():
    with pytest.raises(ValueError):
        check_hanner(1.5, 10, 0)


def test_count_volume_circle():
    lemma1, lemma4, lemma3 = check_count_volume(2, 2, 10)
    assert lemma1.parameters["count"] == 317
    assert lemma1.verdict == "pass"
    assert lemma4.verdict == "pass"
    assert lemma4.parameters["lower"] == 225
    assert lemma3.verdict == "report_only"


def test_count_volume_ratio_in_regime():
    reports = check_count_volume(2, 1, 100, a=100)
    lemma3 = reports[2]
    assert lemma3.hypothesis_regime
    assert lemma3.verdict == "pass"
    assert lemma3.lhs == pytest.approx(200 / 201)


def test_count_volume_below_q_two_is_report_only():
    lemma1, lemma4, _ = check_count_volume(1, 3, 6)
    assert lemma1.verdict == "report_only"
    assert lemma4.verdict == "pass"


def test_lemma3_threshold():
    J = lemma3_threshold_j(2, 100)
    assert isinstance(J, int) and J > 0
    assert lemma3_threshold_j(2, 1000) <= J


@pytest.mark.slow
@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_count_volume_sandwich_grid(q):
    for d in range(1, 7):
        for N in range(1, 21):
            lemma1, lemma4, _ = check_count_volume(q, d, N)
            assert lemma4.verdict == "pass", (q, d, N)
            assert lemma1.verdict != "fail", (q, d, N)


def test_count_few_large_matches_enumeration():
    points = lattice_points(BodySpec.qball(2, 3), 5)
    large = np.count_nonzero(np.abs(points) >= 2, axis=1)
    assert count_few_large(2, 3, 5, 2, 1) == int(np.sum(large <= 1))
    assert count_few_large(2, 3, 5, 2, 3) == len(points)


def test_count_small_head_matches_enumeration():
    points = lattice_points(BodySpec.qball(2, 3), 5)
    assert count_small_head(2, 3, 5, 1, 4) == int(np.sum(points[:, 0] ** 2 < 4))
    head = np.sum(points[:, :2] ** 2, axis=1)
    assert count_small_head(2, 3, 5, 2, 10.5) == int(np.sum(head < 10.5))


def test_small_sets():
    reports = check_small_sets(2, 2, 20, 0.05, 0.05, 0.01, 1, trials=2000, points=2)
    assert [r.check_name for r in reports] == ["lemma5", "lemma8", "lemma2"]
    assert not any(r.failed for r in reports)
    assert reports[2].oracle["kind"] == "monte_carlo"
    with pytest.raises(ValueError):
        check_small_sets(2.5, 2, 20, 0.05, 0.05, 0.01, 1)


def test_shift_difference():
    lemma10, lemma11 = check_shift_difference(2, 1, 100, 0.5, [0.4])
    assert lemma10.parameters["shifted_count"] == 200
    assert lemma10.lhs == pytest.approx(0.0)
    assert lemma10.verdict == "pass"
    assert lemma11.lhs == 1
    assert lemma11.verdict == "pass"
    with pytest.raises(ValueError):
        check_shift_difference(2, 2, 100, 0.5, [0.4])


def test_shift_outside_regime():
    _, lemma11 = check_shift_difference(2, 1, 100, 0.9, [0.4])
    assert lemma11.verdict == "report_only"


def test_permutations_exhaustive():
    lemma6, lemma7 = monte_carlo_permutations(
        4, [1, 2], [3, 4], [0.25, 0.2, 0.1, 0.05], 0.5, 0.5
    )
    assert lemma6.oracle["kind"] == "exhaustive"
    assert lemma6.lhs == pytest.approx(hypergeom(4, 2, 2).cdf(0), abs=1e-12)
    assert lemma6.verdict == "pass"
    assert lemma7.hypothesis_regime
    assert lemma7.verdict == "pass"


def test_permutations_monte_carlo_agrees():
    args = (6, [1, 2, 3], [4, 5, 6], [0.2, 0.2, 0.1, 0.1, 0.05, 0.0], 0.5, 0.5)
    exact, _ = monte_carlo_permutations(*args, method="exhaustive")
    sampled, _ = monte_carlo_permutations(*args, trials=20_000, seed=3, threads=2)
    sampled_mc, _ = monte_carlo_permutations(
        *args, trials=20_000, seed=3, method="monte_carlo"
    )
    assert sampled.oracle["kind"] == "exhaustive"
    stderr = sampled_mc.oracle["stderr"]
    assert abs(sampled_mc.lhs - exact.lhs) <= 6 * stderr + 1e-12
    assert exact.lhs == pytest.approx(hypergeom(6, 3, 3).cdf(0), abs=1e-12)


def test_permutations_are_reproducible():
    args = (10, [1, 2, 3, 4, 5], [9, 10], [0.1] * 10, 0.5, 0.5)
    first = monte_carlo_permutations(*args, trials=5000, seed=9)
    second = monte_carlo_permutations(*args, trials=5000, seed=9, threads=3)
    assert [r.lhs for r in first] == [r.lhs for r in second]
    with pytest.raises(ValueError):
        monte_carlo_permutations(*args, method="exhaustive")


def test_lemma7_regime():
    conditions = lemma7_regime(4, [1, 2], [3, 4], [0.25, 0.2, 0.1, 0.05], 0.5, 0.5)
    assert all(conditions.values())
    conditions = lemma7_regime(4, [1, 2], [2, 3], [0.25, 0.2, 0.1, 0.05], 0.5, 0.5)
    assert not conditions["J = (d0, d]"]


@pytest.mark.slow
@pytest.mark.parametrize("q", [2, 2.5, 3, 4])
def test_hanner_full(q):
    assert check_hanner(q, 100_000, 0, dim=8).verdict == "pass"


@pytest.mark.slow
@pytest.mark.parametrize("q", [2, 3, 4])
def test_lemma1_chain_grid(q):
    for d in range(1, 6):
        for N in range(1, 31):
            lemma1 = check_count_volume(q, d, N)[0]
            if lemma1.hypothesis_regime:
                assert lemma1.verdict == "pass", (q, d, N)


@pytest.mark.slow
def test_permutations_exhaustive_in_dimension_eight():
    u = [0.25, 0.2, 0.2, 0.15, 0.1, 0.05, 0.05, 0.0]
    lemma6, lemma7 = monte_carlo_permutations(
        8, [1, 2, 3, 4, 5], [5, 6, 7, 8], u, 0.5, 0.5, threads=4
    )
    assert lemma6.oracle["permutations"] == 40320
    assert lemma6.verdict == "pass"
    assert lemma7.hypothesis_regime
    assert lemma7.verdict == "pass"


@pytest.mark.slow
def test_permutations_monte_carlo_in_dimension_sixty_four():
    d = 64
    u = list(np.linspace(0.25, 0.0, d))
    lemma6, lemma7 = monte_carlo_permutations(
        d, range(1, 33), range(49, 65), u, 0.5, 0.5, trials=100_000, seed=1
    )
    assert lemma6.oracle["kind"] == "monte_carlo"
    assert lemma6.verdict == "pass"
    assert lemma7.hypothesis_regime
    assert lemma7.verdict == "pass"
