"""Smoothed negative-part penalties and the estimates built on them.

penalty_eval gives a C^2 family indexed by n approximating r -> (r_-)^2/2
from below: zero on [0, inf), quadratic second derivative ramp on
[-1/n, 0), and exactly (r_-)^2/2 up to O(1/n) terms below -1/n.  Its
first derivative stays within 1/(2n) of -r_- everywhere, which is what
makes the penalized energies track the true negative-part energy.

The module also carries the two structural checks used by the proof
machinery (monotone pairing against the Yosida approximation, convex
contraction through the resolvent), the Ito residual probe for the
penalized energy along explicit paths, and the discounted
supermartingale statistic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import GridFunction, lattice_parts, norm, weighted_inner
from .noise import NoiseConfig, increment_block
from .operators import OperatorSuite, random_bumps, BatteryReport

__all__ = [
    "penalty_eval",
    "smooth_energy",
    "apply_pointwise",
    "MONOTONE_GRAPHS",
    "CONVEX_FUNCTIONS",
    "pairing_value",
    "monotone_pairing_excess",
    "jensen_pointwise_excess",
    "jensen_integral_excess",
    "run_pairing_battery",
    "run_jensen_battery",
    "ItoReport",
    "ito_residual",
    "supermartingale_stat",
]


def penalty_eval(n: float, r, order: int = 0):
    """The n-th penalty at r, or its first or second derivative.

    Closed forms, exact to roundoff:
      order 2: 0 on r >= 0, -n r on [-1/n, 0), 1 below -1/n
      order 1: 0, -n r^2 / 2, r + 1/(2n)
      order 0: 0, -n r^3 / 6, r^2/2 + r/(2n) + 1/(6 n^2)
    """
    if not (n > 0):
        raise ValueError("n must be positive")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    arr = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(arr)
    knee = -1.0 / n
    mid = (arr < 0.0) & (arr >= knee)
    lo = arr < knee
    rm = arr[mid]
    rl = arr[lo]
    if order == 0:
        out[mid] = -n * rm**3 / 6.0
        out[lo] = rl * rl / 2.0 + rl / (2.0 * n) + 1.0 / (6.0 * n * n)
    elif order == 1:
        out[mid] = -n * rm * rm / 2.0
        out[lo] = rl + 1.0 / (2.0 * n)
    else:
        out[mid] = -n * rm
        out[lo] = 1.0
    if np.ndim(r) == 0:
        return float(out)
    return out


def smooth_energy(n: float, f: GridFunction) -> float:
    """Half the weighted integral of the n-th penalty of f.

    Converges to a quarter of the squared weighted L2 norm of the
    negative part as n grows.
    """
    g = f.grid
    core = float(np.dot(g.weights, penalty_eval(n, f.values, 0)))
    return 0.5 * (core + g.tail_weight * penalty_eval(n, f.tail_value, 0))


def apply_pointwise(f: GridFunction, fn: Callable) -> GridFunction:
    return GridFunction(f.grid, fn(f.values), float(fn(np.float64(f.tail_value))))


MONOTONE_GRAPHS: dict[str, Callable] = {
    "identity": lambda r: r,
    "tanh": np.tanh,
    "clipped-linear": lambda r: np.clip(r, -0.7, 0.7),
    "smoothed-sign": lambda r: r / np.sqrt(r * r + 0.01),
}

CONVEX_FUNCTIONS: dict[str, Callable] = {
    "square": lambda r: r * r,
    "abs": np.abs,
    "hinge-squared": lambda r: np.minimum(r, 0.0) ** 2,
}


def pairing_value(suite: OperatorSuite, v: GridFunction, lam: float, graph: Callable) -> float:
    """Weighted pairing of the Yosida approximation with a monotone image.

    Nonnegative for nondecreasing graphs vanishing at zero; the checks
    treat any negative value as a violation.
    """
    return weighted_inner(suite.yosida(v, lam), apply_pointwise(v, graph))


def monotone_pairing_excess(suite: OperatorSuite, v: GridFunction, lam: float, graph: Callable) -> float:
    return max(0.0, -pairing_value(suite, v, lam, graph))


def jensen_pointwise_excess(suite: OperatorSuite, v: GridFunction, lam: float, fn: Callable) -> float:
    """Worst pointwise failure of fn(resolvent v) <= resolvent fn(v).

    Holds for convex fn with fn(0) <= 0 because the resolvent kernel is
    sub-Markovian.
    """
    lhs = apply_pointwise(suite.resolvent(v, lam), fn)
    rhs = suite.resolvent(apply_pointwise(v, fn), lam)
    d = lhs - rhs
    return max(0.0, float(d.values.max()), d.tail_value)


def jensen_integral_excess(suite: OperatorSuite, v: GridFunction, lam: float, fn: Callable) -> float:
    """Growth of the weighted integral of fn through the resolvent.

    For nonnegative convex images the chain fn(Jv) <= J fn(v) plus the
    integral contraction makes this nonpositive up to quadrature error.
    """
    before = norm(apply_pointwise(v, fn), "l1")
    after = norm(apply_pointwise(suite.resolvent(v, lam), fn), "l1")
    return max(0.0, after - before)


_BATTERY_LAMS = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


def run_pairing_battery(
    suite: OperatorSuite,
    n_samples: int,
    seed: int,
    lams: tuple[float, ...] = _BATTERY_LAMS,
    tol: float = 1e-8,
) -> BatteryReport:
    rng = np.random.default_rng(seed)
    names = sorted(MONOTONE_GRAPHS)
    worst = 0.0
    bad = 0
    for i in range(n_samples):
        v = random_bumps(suite.grid, rng)
        lam = lams[i % len(lams)]
        graph = MONOTONE_GRAPHS[names[i % len(names)]]
        e = monotone_pairing_excess(suite, v, lam, graph)
        worst = max(worst, e)
        if e > tol:
            bad += 1
    return BatteryReport("monotone-pairing", n_samples, worst, bad, tol)


def run_jensen_battery(
    suite: OperatorSuite,
    n_samples: int,
    seed: int,
    lams: tuple[float, ...] = _BATTERY_LAMS,
    tol: float = 1e-8,
) -> BatteryReport:
    rng = np.random.default_rng(seed)
    names = sorted(CONVEX_FUNCTIONS)
    worst = 0.0
    bad = 0
    for i in range(n_samples):
        v = random_bumps(suite.grid, rng)
        lam = lams[i % len(lams)]
        fn = CONVEX_FUNCTIONS[names[i % len(names)]]
        e = max(
            jensen_pointwise_excess(suite, v, lam, fn),
            jensen_integral_excess(suite, v, lam, fn),
        )
        worst = max(worst, e)
        if e > tol:
            bad += 1
    return BatteryReport("jensen-chain", n_samples, worst, bad, tol)


@dataclass(frozen=True)
class ItoReport:
    times: np.ndarray
    functional: np.ndarray
    residuals: np.ndarray

    @property
    def total_residual(self) -> float:
        return float(self.residuals.sum())


def ito_residual(
    n: float,
    v0: GridFunction,
    drift: GridFunction,
    modes: Sequence[GridFunction] = (),
    dt: float = 1e-2,
    n_steps: int = 100,
    noise_cfg: NoiseConfig | None = None,
) -> ItoReport:
    """Per-step defect of the Ito expansion of the penalized energy.

    Evolves v by the transport-free update v + drift*dt + sum modes*dW
    and compares each increment of the weighted penalty integral with
    its predicted drift and martingale parts evaluated at the step
    start.  Deterministic runs (no modes) leave a residual of one order
    higher than dt per step; noisy runs leave a mean-zero residual
    shrinking with dt.
    """
    g = v0.grid
    k = len(modes)
    if k > 0:
        if noise_cfg is None:
            raise ValueError("modes given but no noise_cfg")
        if noise_cfg.n_modes != k:
            raise ValueError("noise_cfg.n_modes does not match modes")
        dW = increment_block(noise_cfg, dt, n_steps)
    else:
        dW = np.zeros((n_steps, 0))
    w = g.weights
    tw = g.tail_weight

    def penalty_integral(v, tail):
        return float(np.dot(w, penalty_eval(n, v, 0))) + tw * penalty_eval(n, tail, 0)

    v = v0.values.copy()
    tail = v0.tail_value
    times = np.arange(n_steps + 1) * dt
    func = np.empty(n_steps + 1)
    res = np.empty(n_steps)
    func[0] = penalty_integral(v, tail)
    for j in range(n_steps):
        d1 = penalty_eval(n, v, 1)
        d1t = penalty_eval(n, tail, 1)
        d2 = penalty_eval(n, v, 2)
        d2t = penalty_eval(n, tail, 2)
        ds_term = float(np.dot(w, d1 * drift.values)) + tw * d1t * drift.tail_value
        dw_term = 0.0
        for kk in range(k):
            m = modes[kk]
            ds_term += 0.5 * (float(np.dot(w, d2 * m.values**2)) + tw * d2t * m.tail_value**2)
            dw_term += (float(np.dot(w, d1 * m.values)) + tw * d1t * m.tail_value) * dW[j, kk]
        v = v + drift.values * dt
        tail = tail + drift.tail_value * dt
        for kk in range(k):
            v = v + modes[kk].values * dW[j, kk]
            tail = tail + modes[kk].tail_value * dW[j, kk]
        func[j + 1] = penalty_integral(v, tail)
        res[j] = func[j + 1] - func[j] - ds_term * dt - dw_term
    return ItoReport(times, func, res)


def supermartingale_stat(times: np.ndarray, neg_energy: np.ndarray, c_const: float) -> np.ndarray:
    """Discount the negative-part energy so it should trend downward.

    neg_energy may be (n_times,) or (paths, n_times); times broadcasts
    along the last axis.
    """
    return np.exp(-2.0 * c_const * np.asarray(times)) * neg_energy
