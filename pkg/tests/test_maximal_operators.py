import math

import numpy as np
import pytest
from scipy.special import ive

from utils.lattice_geometry import BodySpec, BudgetExceeded, lattice_points
from utils.maximal_operators import (
    GridFunction,
    LatticeFunction,
    ScaleSelector,
    average,
    continuous_average_grid,
    continuous_maximal_grid,
    dyadic_window,
    maximal,
    maximal_argmax,
    semigroup_apply,
    semigroup_kernel,
    square_function,
)


def brute_average(body, t, f, x):
    points = lattice_points(body, t)
    return sum(f.value_at(np.asarray(x) - y) for y in points) / len(points)


def test_lattice_function_basics():
    f = LatticeFunction.from_atoms([0, 2, 2], [1.0, 0.5, 0.25])
    assert f.offset == (0,)
    assert f.values.tolist() == [1.0, 0.0, 0.75]
    assert f.mass() == pytest.approx(1.75)
    assert f.norm(math.inf) == 1.0
    assert f.value_at(5) == 0.0
    assert f.shifted(3).value_at(5) == 0.75
    with pytest.raises(ValueError):
        LatticeFunction((0,), [1.0, math.nan])
    with pytest.raises(ValueError):
        LatticeFunction((0, 0), [1.0])


def test_sup_distance_aligns_boxes():
    f = LatticeFunction((0,), [1.0, 2.0])
    g = LatticeFunction((1,), [2.0, 5.0])
    assert f.sup_distance(g) == 5.0


def test_average_of_delta_on_cube():
    f = LatticeFunction.delta(1)
    out = average(BodySpec.cube(1), 1, f)
    assert out.offset == (-1,)
    assert out.values == pytest.approx([1 / 3.0] * 3)
    assert out.meta["count"] == 3


@pytest.mark.parametrize(
    "body",
    [BodySpec.qball(2, 2), BodySpec.qball(1.5, 2), BodySpec.ellipsoid([1.0, 1.3])],
)
def test_average_matches_brute_force(body):
    f = LatticeFunction((-1, 0), np.arange(6.0).reshape(2, 3))
    out = average(body, 2.2, f)
    for x in [(0, 0), (-2, 1), (1, 3), (-3, -2)]:
        assert out.value_at(x) == pytest.approx(brute_average(body, 2.2, f, x))


def test_separable_average_agrees_with_kernel():
    body = BodySpec.cube(2)
    f = LatticeFunction((0, 0), np.random.default_rng(3).random((4, 5)))
    a = average(body, 2, f, separable=True)
    b = average(body, 2, f, separable=False)
    assert a.sup_distance(b) < 1e-12
    with pytest.raises(ValueError):
        average(BodySpec.qball(2, 2), 2, f, separable=True)


def test_average_of_a_block_ramps_at_the_ends():
    f = LatticeFunction((0,), np.ones(10))
    out = average(BodySpec.cube(1), 2, f)
    assert out.offset == (-2,)
    ramp = [1 / 5, 2 / 5, 3 / 5, 4 / 5]
    assert out.values == pytest.approx(ramp + [1.0] * 6 + ramp[::-1], abs=1e-15)


@pytest.mark.parametrize(
    "body, t",
    [
        (BodySpec.cube(1), 3),
        (BodySpec.cube(2), 2),
        (BodySpec.qball(2, 2), 2.5),
        (BodySpec.qball(1.5, 3), 1.7),
        (BodySpec.ellipsoid([1.0, 0.6]), 2.0),
    ],
)
def test_average_preserves_mass(body, t):
    shape = (4,) * body.dim
    f = LatticeFunction((-1,) * body.dim, np.random.default_rng(5).random(shape))
    out = average(body, t, f)
    assert out.mass() == pytest.approx(f.mass(), rel=1e-12)
    assert out.norm(math.inf) <= f.norm(math.inf) + 1e-15


def test_average_needs_positive_scale():
    with pytest.raises(ValueError):
        average(BodySpec.cube(1), 0, LatticeFunction.delta(1))


def test_dyadic_window():
    assert dyadic_window(2, 4, 1, 2) == (2.0, 4.0, 8.0)
    assert dyadic_window(2, 1, 10, 10) == ()
    assert dyadic_window(math.inf, 3, 1, 1) == (1.0, 2.0)
    assert dyadic_window(2, 4, 0.1, 0.2) == (0.25, 0.5)


def test_scale_selectors():
    cube = BodySpec.cube(1)
    assert ScaleSelector.all(3).expand(cube) == (0.5, 1.0, 2.0, 3.0)
    assert ScaleSelector.greater_than(2, 3).expand(cube) == (3.0,)
    assert ScaleSelector.explicit([2, 1, 2]).expand(cube) == (1.0, 2.0)
    assert ScaleSelector.dyadic(1, 2).expand(BodySpec.qball(2, 4)) == (2.0, 4.0, 8.0)
    with pytest.raises(ValueError, match="empty scale set"):
        ScaleSelector.greater_than(5, 3).expand(cube)
    with pytest.raises(ValueError):
        ScaleSelector.dyadic(1, 2).expand(BodySpec.ellipsoid([1.0]))
    with pytest.raises(ValueError):
        ScaleSelector.explicit([0.0, 1.0])
    assert ScaleSelector.all(3).describe() == "all(t_max=3)"


def test_maximal_of_delta_on_cube():
    out = maximal(BodySpec.cube(1), ScaleSelector.all(3), LatticeFunction.delta(1))
    assert out.offset == (-3,)
    expected = [1 / 7, 1 / 5, 1 / 3, 1, 1 / 3, 1 / 5, 1 / 7]
    assert out.values == pytest.approx(expected)
    assert out.meta["truncation_error"] == pytest.approx(1 / 7)
    assert out.meta["scales"] == 4


def test_greater_than_drops_small_scales():
    scales = ScaleSelector.greater_than(2, 3)
    out = maximal(BodySpec.cube(1), scales, LatticeFunction.delta(1))
    assert out.values == pytest.approx([1 / 7] * 7)


@pytest.mark.parametrize(
    "body", [BodySpec.qball(2, 2), BodySpec.cube(2), BodySpec.qball(3, 2)]
)
def test_maximal_is_sup_of_averages(body):
    f = LatticeFunction((0, 0), np.random.default_rng(1).random((3, 3)) - 0.3)
    scales = ScaleSelector.all(3)
    out = maximal(body, scales, f)
    averages = [average(body, t, f) for t in scales.expand(body)]
    for x in [(0, 0), (2, 2), (-2, 1), (4, -1), (1, 5)]:
        best = max(abs(a.value_at(x)) for a in averages)
        assert out.value_at(x) == pytest.approx(best, abs=1e-12)


def test_larger_scale_sets_give_larger_maximal():
    body = BodySpec.qball(2, 2)
    f = LatticeFunction((0, 0), np.random.default_rng(4).random((4, 4)) - 0.5)
    selectors = [
        ScaleSelector.explicit([2.0]),
        ScaleSelector.explicit([1.0, 2.0]),
        ScaleSelector.greater_than(1.5, 3),
        ScaleSelector.all(3),
    ]
    outs = [maximal(body, s, f) for s in selectors]
    points = outs[-1].points().reshape(-1, 2)
    for small, large in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        for x in points:
            assert outs[large].value_at(x) >= outs[small].value_at(x) - 1e-12


def test_maximal_dominates_the_function():
    f = LatticeFunction((0,), [0.0, 3.0, 1.0, 2.0])
    out = maximal(BodySpec.cube(1), ScaleSelector.all(5), f)
    for x in range(4):
        assert out.value_at(x) >= f.value_at(x) - 1e-15
    assert out.norm(math.inf) <= f.norm(math.inf)


def test_maximal_argmax_prefers_small_scales():
    f = LatticeFunction((0,), [1.0, 1.0, 1.0])
    values, scales = maximal_argmax(BodySpec.cube(1), ScaleSelector.all(2), f)
    assert values.value_at(1) == pytest.approx(1.0)
    assert scales[1 - values.offset[0]] == 0.5


def test_semigroup_kernel_is_bessel():
    kernel = semigroup_kernel(3.0)
    rho = len(kernel) // 2
    n = np.arange(-rho, rho + 1)
    assert kernel == pytest.approx(ive(n, 1.5), abs=1e-13)
    assert kernel.sum() == pytest.approx(1.0, abs=1e-12)
    assert semigroup_kernel(0.0).tolist() == [1.0]


def test_semigroup_preserves_mass():
    f = LatticeFunction((0, 0), [[1.0, 2.0], [0.5, 0.0]])
    out = semigroup_apply(2.0, f)
    assert out.mass() == pytest.approx(f.mass(), rel=1e-12)
    assert out.is_nonnegative()
    assert semigroup_apply(0.0, f).sup_distance(f) == 0.0
    with pytest.raises(ValueError):
        semigroup_apply(-1.0, f)


def test_semigroup_is_a_semigroup():
    f = LatticeFunction.delta(1)
    once = semigroup_apply(3.0, f)
    twice = semigroup_apply(1.0, semigroup_apply(2.0, f))
    assert once.sup_distance(twice) < 1e-12


def test_square_function():
    f = LatticeFunction.delta(1)
    out = square_function(2, 1, 2, f)
    assert out.meta["window"] == [1.0, 2.0]
    assert out.is_nonnegative()
    with pytest.raises(ValueError, match="empty dyadic window"):
        square_function(2, 10, 10, f)


def test_square_function_of_delta_term_by_term():
    out = square_function(2, 1, 4, LatticeFunction.delta(1))
    assert out.meta["window"] == [1.0, 2.0, 4.0]
    # At 0: the average of the delta is 1/(2N+1), the heat kernel at time
    # N^2 is exp(-N^2/2) I_0(N^2/2).
    terms = [(1 / (2 * N + 1) - ive(0, N**2 / 2)) ** 2 for N in (1, 2, 4)]
    assert out.value_at(0) == pytest.approx(math.sqrt(sum(terms)), abs=1e-10)


def test_grid_function():
    F = GridFunction.sample(lambda x: x[..., 0] ** 2, [-1.0], [1.0], 0.5)
    assert F.offset == (-2,)
    assert F.values.tolist() == [1.0, 0.25, 0.0, 0.25, 1.0]
    assert F.integral() == pytest.approx(2.5 * 0.5)
    assert F.norm(1) == pytest.approx(1.25)
    assert F.lipschitz_estimate() == pytest.approx(1.5)
    with pytest.raises(ValueError):
        GridFunction((0,), [1.0], h=0.0)


def test_continuous_average_of_constant():
    F = GridFunction.sample(lambda x: np.ones(x.shape[:-1]), [-1.0], [1.0], 0.1)
    out = continuous_average_grid(BodySpec.cube(1), 0.3, F)
    assert out.value_at(0) == pytest.approx(1.0)
    assert out.meta["grid_error_bound"] == 0.0
    with pytest.raises(ValueError, match="empty kernel"):
        continuous_average_grid(BodySpec.cube(1), 0.05, F)


@pytest.mark.parametrize("h", [0.1, 0.05])
def test_continuous_average_of_a_parabola(h):
    F = GridFunction.sample(lambda x: x[..., 0] ** 2, [-3.0], [3.0], h)
    value = continuous_average_grid(BodySpec.cube(1), 1.0, F).value_at((0,))
    # Half weights at the ends make this the trapezoid rule.
    assert value == pytest.approx(1 / 3 + h**2 / 6, abs=1e-12)
    assert abs(value - 1 / 3) <= h**2


def test_continuous_maximal_sees_scales_between_breakpoints():
    F = GridFunction((-3,), [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], h=1.0)
    body = BodySpec.cube(1)
    out = continuous_maximal_grid(body, ScaleSelector.all(3), F)
    assert out.value_at((1,)) == pytest.approx(1 / 3)
    assert out.value_at((1,)) >= continuous_average_grid(body, 1.5, F).value_at((1,))

    above = continuous_maximal_grid(body, ScaleSelector.greater_than(1.5, 3), F)
    for t in (1.75, 2.5, 3.0):
        average_t = continuous_average_grid(body, t, F)
        for x in range(-4, 5):
            assert above.value_at((x,)) >= average_t.value_at((x,)) - 1e-15
    assert above.value_at((1,)) == pytest.approx(1 / 3)
    assert above.value_at((2,)) == pytest.approx(1 / 5)


def test_continuous_maximal_dominates_averages_in_its_range():
    F = GridFunction((-2, -2), np.random.default_rng(6).random((5, 5)), h=0.5)
    body = BodySpec.qball(2, 2)
    out = continuous_maximal_grid(body, ScaleSelector.all(2.0), F)
    for t in (0.8, 1.0, 1.3, 1.9, 2.0):
        average_t = continuous_average_grid(body, t, F)
        for x in average_t.points().reshape(-1, 2):
            assert out.value_at(x) >= abs(average_t.value_at(x)) - 1e-12


def test_continuous_maximal_matches_averages():
    F = GridFunction.sample(
        lambda x: np.maximum(0.0, 1.0 - np.abs(x[..., 0])), [-1.0], [1.0], 0.1
    )
    body = BodySpec.cube(1)
    radii = [0.3, 0.55, 1.0]
    out = continuous_maximal_grid(body, ScaleSelector.explicit(radii), F)
    averages = [continuous_average_grid(body, t, F) for t in radii]
    for x in range(-20, 21, 3):
        best = max(abs(a.value_at((x,))) for a in averages)
        assert out.value_at((x,)) == pytest.approx(best, abs=1e-12)


def test_box_cap(monkeypatch):
    import utils.maximal_operators as maximal_operators

    monkeypatch.setattr(maximal_operators, "MAX_BOX_CELLS", 10)
    with pytest.raises(BudgetExceeded):
        maximal(BodySpec.cube(1), ScaleSelector.all(20), LatticeFunction.delta(1))


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_semigroup_properties(t):
    kernel = semigroup_kernel(t)
    assert np.all(kernel >= 0)
    assert kernel.sum() == pytest.approx(1.0, abs=1e-10)
    f = LatticeFunction((0, 0), np.random.default_rng(2).random((3, 4)))
    once = semigroup_apply(2 * t, f)
    twice = semigroup_apply(t, semigroup_apply(t, f))
    assert once.sup_distance(twice) < 1e-8


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_semigroup_matches_its_multiplier(t):
    from utils.multiplier_analysis import semigroup_multiplier

    out = semigroup_apply(t, LatticeFunction.delta(3))
    n = out.points().reshape(-1, 3)
    values = out.values.reshape(-1)
    for xi in [(0.1, 0.2, -0.3), (0.5, 0.0, 0.25), (0.01, 0.02, 0.03)]:
        transform = float(values @ np.cos(2 * np.pi * n @ np.asarray(xi)))
        assert transform == pytest.approx(semigroup_multiplier(t, xi), abs=1e-8)


def test_square_function_shrinks_with_its_window():
    rng = np.random.default_rng(7)
    f = LatticeFunction((0, 0), rng.random((9, 9)))
    f = f.scaled(1.0 / f.norm(2))
    wide = square_function(2, 1, 10, f)
    narrow = square_function(2, 10, 10, f)
    assert narrow.meta["window"] == [16.0]
    assert len(wide.meta["window"]) > 1
    assert narrow.norm(2) <= wide.norm(2)
    assert np.isfinite(wide.norm(2))
    again = square_function(2, 1, 10, f)
    assert again.sup_distance(wide) == 0.0
