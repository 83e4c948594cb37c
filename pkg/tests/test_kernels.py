import numpy as np
import pytest

from mildsim import kernels
from mildsim.coefficients import CoefficientModel, ModeFunction
from mildsim.grids import Grid, GridFunction
from mildsim.noise import NoiseConfig, gaussian_block


def test_backend_flags():
    assert kernels.BACKEND in ("numba", "numpy")
    if kernels.HAVE_NUMBA:
        assert kernels.BACKEND == "numba"
        assert kernels.simulate_batch is kernels.simulate_batch_numba
    else:
        assert kernels.simulate_batch is kernels.simulate_batch_numpy


def test_resolvent_coeffs_validation():
    with pytest.raises(ValueError):
        kernels.resolvent_coeffs(0.01, 0.0, 1.0)
    with pytest.raises(ValueError):
        kernels.resolvent_coeffs(0.01, -1.0, 1.0)


def test_resolvent_coeffs_series_branch():
    # both branches must match an extended-precision evaluation of the exact
    # formulas; the probes straddle the series switch
    spacing = 1e-4
    alpha = 1.0
    for lam in (1.0 / 9.0, 1.0 / 19.0, 1.0 / 39.0, 1.0 / 59.0, 1.0 / 199.0):
        E, amb, b, denom = kernels.resolvent_coeffs(spacing, lam, alpha)
        z = np.longdouble((denom / lam) * spacing)
        E_ld = np.exp(-z)
        amb_ref = float((z - 1.0 + E_ld) / (z * denom))
        b_ref = float((1.0 - E_ld * (1.0 + z)) / (z * denom))
        assert amb == pytest.approx(amb_ref, rel=5e-11), lam
        assert b == pytest.approx(b_ref, rel=5e-11), lam


def test_resolvent_sweep_matches_quadrature():
    # independent oracle: dense trapezoid of the exponential integral
    g = Grid.uniform(10.0, 301, 1.0)
    rng = np.random.default_rng(11)
    f = np.cumsum(rng.normal(size=g.n)) * 0.1
    ftail = float(f[-1])
    lam = 0.3
    E, amb, b, denom = kernels.resolvent_coeffs(g.spacing, lam, g.alpha)
    y, ytail = kernels.resolvent_sweep_numpy(f, ftail, E, amb, b, denom)
    nu = denom / lam
    for i in (0, 100, 230):
        s = np.linspace(g.nodes[i], g.x_max, 200001)
        integrand = np.exp(-nu * (s - g.nodes[i])) * np.interp(s, g.nodes, f)
        body = np.trapezoid(integrand, s)
        tail = ftail * np.exp(-nu * (g.x_max - g.nodes[i])) / nu
        assert y[i] == pytest.approx((body + tail) / lam, abs=1e-8)
    assert ytail == ftail / denom


def test_resolvent_sweep_exact_on_linear_input():
    # the recursion integrates piecewise-linear data exactly, so a
    # globally linear f must reproduce the closed form away from the
    # truncated tail
    g = Grid.uniform(10.0, 1001, 1.0)
    lam = 0.1
    E, amb, b, denom = kernels.resolvent_coeffs(g.spacing, lam, g.alpha)
    f = g.nodes.copy()
    y, _ = kernels.resolvent_sweep_numpy(f, float(f[-1]), E, amb, b, denom)
    p = 1.0 / denom
    exact = p * g.nodes + lam * p * p
    keep = g.nodes <= 7.0
    assert np.abs(y[keep] - exact[keep]).max() < 1e-12


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba backend not available")
def test_resolvent_sweep_backends_agree():
    rng = np.random.default_rng(5)
    f = rng.normal(size=500)
    E, amb, b, denom = kernels.resolvent_coeffs(0.02, 0.7, 1.5)
    y1, t1 = kernels.resolvent_sweep_numpy(f, 0.3, E, amb, b, denom)
    y2, t2 = kernels.resolvent_sweep_numba(f, 0.3, E, amb, b, denom)
    assert t1 == t2
    np.testing.assert_allclose(y1, y2, rtol=0.0, atol=1e-12)


def _rich_args(scheme, lam=0.05, blow=1e12):
    g = Grid.uniform(3.0, 301, 0.5)
    table = GridFunction.from_callable(g, lambda x: 0.1 * np.cos(x))
    model = CoefficientModel(
        grid=g,
        modes=(
            ModeFunction("proportional-capped", c=0.4, cap=0.05),
            ModeFunction("exponential-decay", c=0.2, decay=0.8),
            ModeFunction("proportional", c=0.1),
            ModeFunction("custom", c=1.0, table=table),
        ),
        drift="hjm",
        alpha_correction=g.alpha,
    )
    ka = model.kernel_args()
    P, n_steps, K = 4, 40, model.n_modes
    rng = np.random.default_rng(17)
    v0 = 0.05 + 0.02 * rng.normal(size=(P, g.n))
    tail0 = 0.05 + 0.02 * rng.normal(size=P)
    dW = np.stack(
        [gaussian_block(NoiseConfig(K, 9, stream_id=p), n_steps) for p in range(P)]
    ) * np.sqrt(0.01)
    if lam > 0.0:
        E, amb, b, denom = kernels.resolvent_coeffs(g.spacing, lam, g.alpha)
    else:
        E, amb, b, denom = 0.0, 0.0, 0.0, 1.0
    snap = np.array([0, 20, 40], dtype=np.int64)
    args = (
        v0, tail0, dW, 1, float(np.exp(-g.alpha * 0.01)), 0.01, scheme,
        ka["profiles"], ka["profile_tails"], ka["level_codes"], ka["caps"],
        ka["drift_code"], ka["drift_c"], ka["drift_table"], ka["drift_table_tail"],
        ka["alpha_corr"], lam, E, amb, b, denom,
        g.spacing, g.weights, g.tail_weight, blow, snap,
    )
    return g, args


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba backend not available")
@pytest.mark.parametrize("scheme", [0, 1])
def test_simulate_batch_backends_agree(scheme):
    _, args = _rich_args(scheme)
    out_np = kernels.simulate_batch_numpy(*args)
    out_nb = kernels.simulate_batch_numba(*args)
    names = ["final", "final_tail", "neg_energy", "min_value", "aborted", "snaps", "snap_tails"]
    assert np.array_equal(out_np[4], out_nb[4])
    for a, b, name in zip(out_np, out_nb, names):
        if name == "aborted":
            continue
        np.testing.assert_allclose(a, b, rtol=0.0, atol=1e-12, err_msg=name)


def test_simulate_batch_numpy_deterministic():
    _, args = _rich_args(0)
    out1 = kernels.simulate_batch_numpy(*args)
    out2 = kernels.simulate_batch_numpy(*args)
    for a, b in zip(out1, out2):
        assert np.array_equal(a, b)


def test_simulate_batch_pure_shift_is_exact():
    # no reactions, no damping: the scheme is a bare node shift
    g = Grid.uniform(2.0, 201, 1.0)
    rng = np.random.default_rng(2)
    v0 = rng.normal(size=(1, g.n))
    tail0 = np.array([0.25])
    n_steps = 7
    dW = np.zeros((1, n_steps, 0))
    args = (
        v0, tail0, dW, 3, 1.0, 0.03, 0,
        np.zeros((0, g.n)), np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0),
        kernels.DRIFT_ZERO, 0.0, np.zeros(g.n), 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        g.spacing, g.weights, g.tail_weight, 1e12, np.zeros(0, dtype=np.int64),
    )
    out = kernels.simulate_batch_numpy(*args)
    m = 3 * n_steps
    expect = np.full(g.n, 0.25)
    expect[: g.n - m] = v0[0, m:]
    assert np.array_equal(out[0][0], expect)
    assert out[1][0] == 0.25
    if kernels.HAVE_NUMBA:
        out_nb = kernels.simulate_batch_numba(*args)
        assert np.array_equal(out_nb[0][0], expect)


def _exploding_args(blow):
    # growing linear drift, no noise: energy rises a fixed factor per step
    g = Grid.uniform(2.0, 101, 0.5)
    rng = np.random.default_rng(4)
    P = 3
    v0 = 0.1 + 0.05 * rng.normal(size=(P, g.n))
    tail0 = np.full(P, 0.1)
    dW = np.zeros((P, 60, 0))
    return (
        v0, tail0, dW, 0, 1.0, 0.02, 0,
        np.zeros((0, g.n)), np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0),
        kernels.DRIFT_DECAY, -10.0, np.zeros(g.n), 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        g.spacing, g.weights, g.tail_weight, blow, np.zeros(0, dtype=np.int64),
    )


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_simulate_batch_abort_freezes_path(backend):
    if backend == "numba" and not kernels.HAVE_NUMBA:
        pytest.skip("numba backend not available")
    fn = kernels.simulate_batch_numpy if backend == "numpy" else kernels.simulate_batch_numba
    out = fn(*_exploding_args(blow=1.0))
    aborted = out[4]
    assert (aborted >= 0).all()
    assert (aborted > 0).all() and (aborted < 59).all()
    for p, step in enumerate(aborted):
        assert np.isfinite(out[2][p, : step + 1]).all()
        assert np.isnan(out[2][p, step + 1 :]).all()
        assert np.isnan(out[3][p, step + 1 :]).all()
        # the final state is the frozen state at the abort step
        assert np.isfinite(out[0][p]).all()


def test_abort_step_agrees_across_backends():
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba backend not available")
    a = kernels.simulate_batch_numpy(*_exploding_args(blow=2.0))[4]
    b = kernels.simulate_batch_numba(*_exploding_args(blow=2.0))[4]
    assert np.array_equal(a, b)


def test_warm_up_runs():
    kernels.warm_up()
