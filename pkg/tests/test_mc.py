"""Monte Carlo engine: path generation, estimators, and reproducibility.

Every test here runs with a fixed seed, so the assertions are deterministic
replays, not flaky statistical coin flips.  Tolerances are 3-sigma bands
around values frozen from the closed form, plus a small discretization
allowance where the Euler grid biases the estimate.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from cancelput.errors import ConfigError
from cancelput.mc import (
    McConfig,
    McMode,
    collect_traces,
    estimate_discounted_terminal,
    estimate_passage_factors,
    estimate_value,
    grid_search_threshold,
    simulate_to_threshold,
)
from cancelput.model import ModelParams, make_model
from cancelput.pricer import Contract

A_STAR_JUMPS = 63.18132384302513
VALUE_JUMPS = 18.989794468567634
CREEP_JUMPS = 0.09927709796458127
UNDER_JUMPS = 0.8493179387324855


def _cfg(**kw):
    base = dict(n_paths=400, dt=0.01, horizon=200.0, seed=11)
    base.update(kw)
    return McConfig(**base)


# ------------------------------------------------------------ configuration


@pytest.mark.parametrize(
    "kw",
    [
        dict(n_paths=99),
        dict(n_paths=0),
        dict(dt=0.0),
        dict(dt=-0.001),
        dict(dt=0.02),
        dict(horizon=0.0),
        dict(seed=-1),
        dict(seed=2**64),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        _cfg(**kw)


def test_estimator_preconditions(model_jumps, contract):
    cfg = _cfg()
    with pytest.raises(ConfigError):
        estimate_value(model_jumps, contract, 150.0, cfg)  # above strike and spot
    with pytest.raises(ConfigError):
        estimate_value(model_jumps, contract, -5.0, cfg)
    # horizon must cover ~10 discount half-lives: 10/r = 200 here
    with pytest.raises(ConfigError):
        estimate_value(model_jumps, contract, A_STAR_JUMPS, _cfg(horizon=100.0))


# ------------------------------------------------------------- single paths


def test_immediate_stop_when_threshold_above_spot(model_jumps, contract):
    tau, s_tau = simulate_to_threshold(model_jumps, contract, 115.0, _cfg(), 0)
    assert tau == 0.0 and s_tau == contract.spot


def test_single_path_is_reproducible(model_jumps, contract):
    cfg = _cfg()
    first = simulate_to_threshold(model_jumps, contract, A_STAR_JUMPS, cfg, 7)
    second = simulate_to_threshold(model_jumps, contract, A_STAR_JUMPS, cfg, 7)
    assert first == second
    other = simulate_to_threshold(model_jumps, contract, A_STAR_JUMPS, _cfg(seed=12), 7)
    assert first != other


def test_deterministic_drift_crossing():
    # Shrink the volatility to almost nothing: the log-price is a straight
    # line with slope mu and the first passage time is log(s0/a)/|mu|,
    # resolved by the walk to within one grid step.
    m = ModelParams(r=0.05, sigma2=1e-12, lam=0.0, rho=1.0, mu=-0.05, alpha=-0.5)
    c = Contract(strike=100.0, barrier=120.0, spot=110.0)
    cfg = _cfg(n_paths=100, dt=0.01, seed=3)
    tau, s_tau = simulate_to_threshold(m, c, 50.0, cfg, 0)
    expect = math.log(110.0 / 50.0) / 0.05
    assert tau is not None and abs(tau - expect) <= 2 * cfg.dt
    assert s_tau == 50.0  # diffusive touch is recorded exactly at the level


def test_trace_structure(model_jumps, contract):
    cfg = _cfg(seed=5)
    traces = collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg)
    assert [t.path_index for t in traces] == list(range(cfg.n_paths))
    for t in traces:
        if t.crossing == "creep":
            assert t.s_tau == A_STAR_JUMPS  # continuous touch lands on the level
        elif t.crossing == "jump":
            assert t.s_tau is not None and t.s_tau < A_STAR_JUMPS
            assert t.tau is not None and t.tau > 0.0
        else:
            assert t.crossing == "none" and t.tau is None and t.s_tau is None
    # with lam=5 and a 200-year horizon effectively every path stops
    stopped = sum(1 for t in traces if t.tau is not None)
    assert stopped == cfg.n_paths


def test_undershoot_is_exponential(model_jumps, contract):
    # Memorylessness: the overshoot below the threshold at a jump crossing
    # is Exp(rho) regardless of the grid, so its mean is 1/rho = 0.5.
    cfg = _cfg(seed=5)
    traces = collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg)
    unders = [
        math.log(A_STAR_JUMPS) - math.log(t.s_tau)
        for t in traces
        if t.crossing == "jump"
    ]
    assert len(unders) > 200
    se = float(np.std(unders, ddof=1)) / math.sqrt(len(unders))
    assert abs(float(np.mean(unders)) - 0.5) <= 3.0 * se


def test_bridge_detects_crossings_earlier(model_jumps, contract):
    # Common random numbers: the bridge can only add detections between
    # grid points, so mean passage time with it on is <= with it off.
    cfg_on = _cfg(seed=5, bridge_correction=True)
    cfg_off = dataclasses.replace(cfg_on, bridge_correction=False)
    tau_on = [t.tau for t in collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg_on) if t.tau]
    tau_off = [t.tau for t in collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg_off) if t.tau]
    assert float(np.mean(tau_on)) <= float(np.mean(tau_off)) + 1e-12


# --------------------------------------------------------------- estimators


def test_survival_estimate_brackets_closed_form(model_jumps, contract):
    cfg = McConfig(n_paths=2000, dt=0.005, horizon=200.0, seed=11)
    est = estimate_value(model_jumps, contract, A_STAR_JUMPS, cfg)
    assert est.n_paths == 2000
    band = 3.0 * est.stderr + 0.015 * VALUE_JUMPS + est.truncation_bound
    assert abs(est.mean - VALUE_JUMPS) <= band
    assert est.truncation_bound == pytest.approx(math.exp(-0.05 * 200.0) * 100.0)
    assert "dt=" in est.discretization_note


def test_passage_factor_estimates(model_jumps, contract):
    cfg = McConfig(n_paths=2000, dt=0.005, horizon=200.0, seed=11)
    creep, under = estimate_passage_factors(model_jumps, contract, A_STAR_JUMPS, cfg)
    assert abs(creep.mean - CREEP_JUMPS) <= 3.0 * creep.stderr + 0.01
    assert abs(under.mean - UNDER_JUMPS) <= 3.0 * under.stderr + 0.01


def test_no_jumps_means_no_undershoot(model_nojump, contract):
    cfg = _cfg(n_paths=200, seed=2)
    creep, under = estimate_passage_factors(model_nojump, contract, 50.0, cfg)
    assert under.mean == 0.0 and under.stderr == 0.0
    assert creep.mean > 0.0


def test_direct_mode_runs(model_jumps, contract):
    cfg = McConfig(
        n_paths=150, dt=0.01, horizon=200.0, seed=4, mode=McMode.DIRECT_LAST_PASSAGE
    )
    est = estimate_value(model_jumps, contract, A_STAR_JUMPS, cfg)
    # crude band: direct mode at 150 paths is noisy but must be in the
    # right neighbourhood of the closed form
    assert abs(est.mean - VALUE_JUMPS) <= 4.0 * est.stderr + est.truncation_bound


def test_discounted_terminal_martingale(model_jumps, contract):
    # e^{-rt} E[S_t] = S_0 under the pricing measure.
    cfg = McConfig(n_paths=2000, dt=0.005, horizon=200.0, seed=11)
    est = estimate_discounted_terminal(model_jumps, contract, 1.0, cfg)
    assert abs(est.mean - contract.spot) <= 3.0 * est.stderr
    assert est.truncation_bound == 0.0
    assert "exact" in est.discretization_note


# ----------------------------------------------------------- reproducibility


def test_estimates_bit_identical_across_workers(model_jumps, contract):
    cfg = _cfg(n_paths=200, seed=17)
    one = estimate_value(model_jumps, contract, A_STAR_JUMPS, cfg, workers=1)
    two = estimate_value(model_jumps, contract, A_STAR_JUMPS, cfg, workers=2)
    assert one.mean == two.mean
    assert one.stderr == two.stderr


def test_traces_bit_identical_across_workers(model_jumps, contract):
    cfg = _cfg(n_paths=200, seed=17)
    t1 = collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg, workers=1)
    t3 = collect_traces(model_jumps, contract, A_STAR_JUMPS, cfg, workers=3)
    assert t1 == t3


def test_seed_matters(model_jumps, contract):
    a = estimate_value(model_jumps, contract, A_STAR_JUMPS, _cfg(n_paths=200, seed=1))
    b = estimate_value(model_jumps, contract, A_STAR_JUMPS, _cfg(n_paths=200, seed=2))
    assert a.mean != b.mean


# ---------------------------------------------------------------- threshold


def test_grid_search_validation(model_jumps, contract):
    cfg = _cfg()
    with pytest.raises(ConfigError):
        grid_search_threshold(model_jumps, contract, cfg, [])
    with pytest.raises(ConfigError):
        grid_search_threshold(model_jumps, contract, cfg, [50.0, 40.0])  # not increasing
    with pytest.raises(ConfigError):
        grid_search_threshold(model_jumps, contract, cfg, [50.0, 120.0])  # above strike


def test_grid_search_closed_form(model_jumps, contract):
    cfg = _cfg()
    grid = [float(x) for x in np.arange(10.0, 100.0, 10.0)]
    a_hat, vals = grid_search_threshold(model_jumps, contract, cfg, grid)
    assert a_hat == 60.0  # closest grid point to the true 63.18
    assert len(vals) == len(grid)
    assert vals[grid.index(a_hat)] == max(vals)


def test_grid_search_single_point(model_jumps, contract):
    a_hat, vals = grid_search_threshold(model_jumps, contract, _cfg(), [42.0])
    assert a_hat == 42.0 and len(vals) == 1


def test_grid_search_monte_carlo(model_jumps, contract):
    cfg = _cfg(n_paths=400, seed=9)
    grid = [40.0, A_STAR_JUMPS, 85.0]
    a_hat, vals = grid_search_threshold(model_jumps, contract, cfg, grid, use_mc=True)
    assert a_hat == A_STAR_JUMPS  # the true optimum wins even at 400 paths
    assert len(vals) == 3
