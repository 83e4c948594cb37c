import numpy as np
import pytest

from mildsim.grids import Grid, GridFunction, lattice_parts, norm
from mildsim.noise import NoiseConfig
from mildsim.operators import OperatorSuite, random_bumps
from mildsim.smoothing import (
    CONVEX_FUNCTIONS,
    MONOTONE_GRAPHS,
    apply_pointwise,
    ito_residual,
    jensen_integral_excess,
    jensen_pointwise_excess,
    monotone_pairing_excess,
    pairing_value,
    penalty_eval,
    run_jensen_battery,
    run_pairing_battery,
    smooth_energy,
    supermartingale_stat,
)


def test_penalty_validation():
    with pytest.raises(ValueError):
        penalty_eval(0.0, 1.0)
    with pytest.raises(ValueError):
        penalty_eval(-1.0, 1.0)
    with pytest.raises(ValueError):
        penalty_eval(1.0, 1.0, order=3)


def test_penalty_scalar_and_array_forms():
    out = penalty_eval(10.0, -0.05)
    assert isinstance(out, float)
    arr = penalty_eval(10.0, np.array([-0.05, 0.3]))
    assert arr.shape == (2,)
    assert arr[0] == out
    assert arr[1] == 0.0


def test_penalty_closed_forms():
    n = 10.0
    # strictly inside the ramp [-1/n, 0)
    r = -0.05
    assert penalty_eval(n, r, 0) == pytest.approx(-n * r**3 / 6.0, rel=1e-15)
    assert penalty_eval(n, r, 1) == pytest.approx(-n * r * r / 2.0, rel=1e-15)
    assert penalty_eval(n, r, 2) == pytest.approx(-n * r, rel=1e-15)
    # below the ramp
    r = -1.0
    assert penalty_eval(n, r, 0) == pytest.approx(0.5 - 1.0 / (2 * n) + 1.0 / (6 * n * n), rel=1e-15)
    assert penalty_eval(n, r, 1) == pytest.approx(r + 1.0 / (2 * n), rel=1e-15)
    assert penalty_eval(n, r, 2) == 1.0
    # nonnegative side is identically zero
    for order in (0, 1, 2):
        assert penalty_eval(n, 0.0, order) == 0.0
        assert penalty_eval(n, 2.0, order) == 0.0


def test_penalty_continuity_at_knee():
    for n in (1.0, 10.0, 100.0):
        knee = -1.0 / n
        eps = 1e-10
        for order in (0, 1):
            left = penalty_eval(n, knee - eps, order)
            right = penalty_eval(n, knee + eps, order)
            assert abs(left - right) < 1e-9


def test_penalty_derivative_bound_is_exact():
    r = np.linspace(-10.0, 10.0, 40001)
    target = -np.maximum(-r, 0.0)
    for n in (1.0, 10.0, 100.0, 1000.0):
        dev = np.abs(penalty_eval(n, r, 1) - target)
        bound = 1.0 / (2.0 * n)
        # cancellation noise ~ulp(10) when forming r + 1/(2n) - r
        assert dev.max() <= bound + 5e-13
        assert dev.max() >= bound - 5e-13


def test_penalty_approximates_from_below():
    r = np.linspace(-5.0, 1.0, 6001)
    target = np.maximum(-r, 0.0) ** 2 / 2.0
    prev = None
    for n in (10.0, 100.0, 1000.0):
        g = penalty_eval(n, r, 0)
        assert np.all(target - g >= -1e-15)
        if prev is not None:
            assert np.all(g >= prev - 1e-15)
        prev = g


def test_smooth_energy_flat_closed_form():
    g = Grid.uniform(40.0, 4001, 1.0)
    f = GridFunction.constant(g, -1.0)
    for n in (1.0, 10.0, 100.0):
        expect = 0.25 - 1.0 / (4.0 * n) + 1.0 / (12.0 * n * n)
        assert smooth_energy(n, f) == pytest.approx(expect, rel=1e-12)


def test_smooth_energy_converges_to_quarter_norm():
    g = Grid.uniform(10.0, 2001, 1.0)
    rng = np.random.default_rng(6)
    f = random_bumps(g, rng)
    target = 0.25 * norm(lattice_parts(f).negative, "l2") ** 2
    errs = [abs(smooth_energy(n, f) - target) for n in (50.0, 500.0)]
    assert errs[0] < float(np.abs(f.values).max()) / (2.0 * 50.0) / g.alpha
    assert 5.0 < errs[0] / errs[1] < 20.0


def test_apply_pointwise_maps_tail():
    g = Grid.uniform(1.0, 11, 1.0)
    f = GridFunction(g, np.linspace(-1, 1, 11), -0.5)
    out = apply_pointwise(f, np.abs)
    assert out.tail_value == 0.5
    assert np.array_equal(out.values, np.abs(f.values))


def test_graph_and_convex_catalogs():
    assert set(MONOTONE_GRAPHS) == {"identity", "tanh", "clipped-linear", "smoothed-sign"}
    assert set(CONVEX_FUNCTIONS) == {"square", "abs", "hinge-squared"}
    r = np.linspace(-3, 3, 101)
    for fn in MONOTONE_GRAPHS.values():
        v = fn(r)
        assert np.all(np.diff(v) >= -1e-15)
    for fn in CONVEX_FUNCTIONS.values():
        v = fn(r)
        # convexity on a uniform lattice: midpoint below chord
        assert np.all(v[1:-1] <= 0.5 * (v[:-2] + v[2:]) + 1e-12)


@pytest.fixture(scope="module")
def fine_suite():
    return OperatorSuite(Grid.uniform(10.0, 100001, 1.0), shifted=True)


def test_pairing_nonnegative_on_sign_changing_state(fine_suite):
    g = fine_suite.grid
    v = GridFunction.from_callable(g, lambda x: np.exp(-0.3 * x) * np.sin(2.0 * x))
    for name, graph in MONOTONE_GRAPHS.items():
        val = pairing_value(fine_suite, v, 0.1, graph)
        assert val > -1e-8, name
        assert monotone_pairing_excess(fine_suite, v, 0.1, graph) <= 1e-8


def test_jensen_identity_is_tight(fine_suite):
    g = fine_suite.grid
    v = GridFunction.from_callable(g, lambda x: np.cos(x) * np.exp(-0.2 * x))
    # linear image commutes with the resolvent exactly
    assert jensen_pointwise_excess(fine_suite, v, 0.5, lambda r: r) < 1e-14


def test_pairing_battery(fine_suite):
    rep = run_pairing_battery(fine_suite, 40, seed=20)
    assert rep.passed
    assert rep.worst_excess <= 1e-8


def test_jensen_battery(fine_suite):
    rep = run_jensen_battery(fine_suite, 40, seed=21)
    assert rep.passed
    assert rep.worst_excess <= 1e-8
    assert rep.label == "jensen-chain"


def _ito_setup():
    g = Grid.uniform(5.0, 251, 1.0)
    v0 = GridFunction.from_callable(g, lambda x: 0.3 * np.sin(1.7 * x) - 0.05)
    drift = GridFunction.from_callable(g, lambda x: 0.4 * np.cos(x) - 0.2)
    modes = [
        GridFunction.from_callable(g, lambda x: 0.25 * np.exp(-0.3 * x)),
        GridFunction.constant(g, 0.1),
    ]
    return g, v0, drift, modes


def test_ito_residual_validation():
    _, v0, drift, modes = _ito_setup()
    with pytest.raises(ValueError):
        ito_residual(50.0, v0, drift, modes)
    with pytest.raises(ValueError):
        ito_residual(50.0, v0, drift, modes, noise_cfg=NoiseConfig(1, 0))


def test_ito_residual_deterministic_first_order():
    _, v0, drift, _ = _ito_setup()
    totals = []
    for dt, n_steps in ((1e-2, 100), (5e-3, 200)):
        rep = ito_residual(50.0, v0, drift, dt=dt, n_steps=n_steps)
        assert rep.times.shape == (n_steps + 1,)
        assert rep.functional.shape == (n_steps + 1,)
        assert rep.residuals.shape == (n_steps,)
        totals.append(abs(rep.total_residual))
    order = np.log(totals[0] / totals[1]) / np.log(2.0)
    assert 0.9 < order < 1.1


def test_ito_residual_stochastic_shrinks_with_dt():
    _, v0, drift, modes = _ito_setup()
    means = []
    for dt, n_steps in ((1e-2, 100), (2.5e-3, 400)):
        acc = 0.0
        for p in range(100):
            rep = ito_residual(
                50.0, v0, drift, modes, dt=dt, n_steps=n_steps,
                noise_cfg=NoiseConfig(2, 314, stream_id=p),
            )
            acc += abs(rep.total_residual)
        means.append(acc / 100)
    assert means[1] < means[0]


def test_supermartingale_stat():
    times = np.array([0.0, 0.5, 1.0])
    neg = np.array([1.0, 1.0, 1.0])
    out = supermartingale_stat(times, neg, 0.5)
    assert np.allclose(out, np.exp(-times), rtol=1e-15)
    # c = 0 leaves the series untouched
    assert np.array_equal(supermartingale_stat(times, neg, 0.0), neg)
    # path-by-path broadcasting
    neg2 = np.ones((4, 3))
    out2 = supermartingale_stat(times, neg2, 1.0)
    assert out2.shape == (4, 3)
    assert np.allclose(out2[2], np.exp(-2.0 * times), rtol=1e-15)
