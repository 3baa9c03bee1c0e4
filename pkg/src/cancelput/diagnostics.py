"""Self-check suites: closed-form identities and simulator cross-checks.

Each check returns a record rather than asserting, so the CLI can print a
table and exit nonzero only at the end.  Tolerances are the ones the
closed forms are actually built to meet; the Monte Carlo comparisons use
3-sigma bands plus explicit bias budgets for grid effects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .model import ModelParams, laplace_exponent, _psi_rational
from .pricer import (
    Contract,
    bs_reference,
    creeping_factor,
    g_payoff,
    generator_apply,
    h_function,
    optimal_threshold,
    price,
    undershoot_factor,
    value_at_threshold,
)
from .scale import basis_for, w_r, z_r
from .mc import (
    McConfig,
    McMode,
    collect_traces,
    estimate_discounted_terminal,
    estimate_value,
    _run_all_paths,
    _K_NONE,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    observed: float
    bound: float
    note: str = ""


def _check(name: str, observed: float, bound: float, note: str = "") -> CheckResult:
    return CheckResult(name, bool(observed <= bound), float(observed), float(bound), note)


def _right_derivative(f, s: float) -> float:
    """One-sided forward-difference ladder with two Richardson levels."""
    steps = (1e-4 * s, 5e-5 * s, 2.5e-5 * s)
    f0 = f(s)
    d = [(f(s + h) - f0) / h for h in steps]
    r1 = 2.0 * d[1] - d[0]
    r2 = 2.0 * d[2] - d[1]
    return (4.0 * r2 - r1) / 3.0


def _central_derivative(f, s: float) -> float:
    steps = (1e-4 * s, 5e-5 * s, 2.5e-5 * s)
    d = [(f(s + h) - f(s - h)) / (2.0 * h) for h in steps]
    t1 = (4.0 * d[1] - d[0]) / 3.0
    t2 = (4.0 * d[2] - d[1]) / 3.0
    return (16.0 * t2 - t1) / 15.0


def analytic_suite(m: ModelParams, c: Contract) -> list[CheckResult]:
    """Closed-form identity checks for one parameter set."""
    b = basis_for(m)
    out: list[CheckResult] = []

    out.append(
        _check("martingale identity", abs(laplace_exponent(m, 1.0) - m.r), 1e-12 * m.r)
    )
    out.append(
        _check("cancellation exponent residual", abs(laplace_exponent(m, -m.alpha)), 1e-12)
    )

    live = [(e, cc) for e, cc in zip(b.eta, b.c) if cc != 0.0]
    worst_root = max(abs(_psi_rational(m, e) - m.r) for e, _ in live)
    out.append(_check("root residuals", worst_root, 1e-10))

    coef_scale = max(abs(cc) for _, cc in live)
    out.append(_check("coefficients sum to zero", abs(sum(cc for _, cc in live)), 1e-12 * coef_scale))
    slope = sum(cc * e for e, cc in live)
    out.append(
        _check(
            "derivative normalization",
            abs(slope - 2.0 / m.sigma2) / (2.0 / m.sigma2),
            1e-10,
        )
    )
    recip = sum(cc / e for e, cc in live)
    out.append(
        _check("reciprocal-root identity", abs(recip - 1.0 / m.r) * m.r, 1e-10)
    )

    if m.lam > 0.0:
        in_band = sum(1 for e, _ in live if -m.rho < e < 0.0)
        below = sum(1 for e, _ in live if e < -m.rho)
        out.append(
            CheckResult(
                "root layout around the pole",
                in_band == 1 and below == 1,
                float(in_band),
                1.0,
                "one root each side of the jump pole",
            )
        )

    # Transform identity: the truncated transform of W must reproduce the
    # resolvent 1/(psi(beta) - r).  The tail beyond the truncation point is
    # bounded by the leading exponential alone because the other
    # coefficients are negative.
    x_hi = 40.0
    for beta in (1.5, 2.0, 3.0):
        target = 1.0 / (laplace_exponent(m, beta) - m.r)
        val, _err = integrate.quad(
            lambda x: math.exp(-beta * x) * w_r(b, x), 0.0, x_hi, limit=400
        )
        tail = abs(b.c[0]) * math.exp((1.0 - beta) * x_hi) / (beta - 1.0)
        out.append(
            _check(f"transform identity (beta={beta:g})", abs(val - target), tail + 1e-8)
        )

    worst = 0.0
    for x in np.linspace(0.01, 5.0, 25):
        h = 1e-6 * max(1.0, x)
        dz = (z_r(b, m, x + h) - z_r(b, m, x - h)) / (2.0 * h)
        ref = m.r * w_r(b, x)
        worst = max(worst, abs(dz - ref) / abs(ref))
    out.append(_check("Z' = r W", worst, 1e-6))

    xs = np.arange(0.0, 5.0 + 1e-9, 1e-3)
    ws = np.array([w_r(b, float(x)) for x in xs])
    # worst excursion below zero or downward step; pure roundoff stays ~1e-16
    violation = max(float(-ws.min()), float(-np.diff(ws).min()), 0.0)
    out.append(_check("W nonnegative and nondecreasing", violation, 1e-12))

    a_star = optimal_threshold(b, m, c)
    k = c.strike
    gap = abs(value_at_threshold(b, m, c, a_star, a_star) - g_payoff(m, c, a_star))
    out.append(_check("value matching at the threshold", gap, 1e-10 * k))

    v_right = _right_derivative(lambda s: value_at_threshold(b, m, c, s, a_star), a_star)
    g_prime = _central_derivative(lambda s: g_payoff(m, c, s), a_star)
    out.append(
        _check(
            "smooth fit at the threshold",
            abs(v_right - g_prime),
            1e-6 * abs(g_prime),
        )
    )

    worst_foc = 0.0
    for s in (1.1 * a_star, c.spot, 2.0 * k):
        h1, h2 = 1e-4 * a_star, 5e-5 * a_star
        d1 = (
            value_at_threshold(b, m, c, s, a_star + h1)
            - value_at_threshold(b, m, c, s, a_star - h1)
        ) / (2.0 * h1)
        d2 = (
            value_at_threshold(b, m, c, s, a_star + h2)
            - value_at_threshold(b, m, c, s, a_star - h2)
        ) / (2.0 * h2)
        worst_foc = max(worst_foc, abs((4.0 * d2 - d1) / 3.0))
    out.append(_check("first-order condition at the threshold", worst_foc, 1e-6))

    rep = price(b, m, c)
    worst_dom = 0.0
    for s in np.geomspace(0.1 * a_star, 5.0 * c.barrier, 500):
        v = (
            g_payoff(m, c, float(s))
            if s <= a_star
            else value_at_threshold(b, m, c, float(s), a_star)
        )
        worst_dom = max(worst_dom, g_payoff(m, c, float(s)) - v)
    out.append(_check("value dominates the payoff", worst_dom, 1e-9))

    n_hjb = 10**4
    grid = a_star * (np.arange(1, n_hjb + 1) / (n_hjb + 1))
    worst_h = max(h_function(m, c, float(s)) for s in grid)
    out.append(
        CheckResult(
            "drift of discounted payoff negative below the threshold",
            worst_h < 0.0,
            worst_h,
            0.0,
        )
    )

    worst_gen = 0.0
    for s in np.linspace(0.1 * k, 0.9 * a_star, 100):
        s = float(s)
        lhs = generator_apply(m, lambda u: g_payoff(m, c, u), s) - m.r * g_payoff(m, c, s)
        ref = h_function(m, c, s)
        worst_gen = max(worst_gen, abs(lhs - ref) / abs(ref))
    out.append(_check("generator cross-check", worst_gen, 1e-6))

    if m.lam == 0.0:
        ref = bs_reference(m, c)
        eta2 = b.eta[1]
        worst_w = 0.0
        for x in np.linspace(0.0, 5.0, 101):
            known = (math.exp(x) - math.exp(eta2 * x)) / (m.sigma2 / 2.0 * (1.0 - eta2))
            worst_w = max(worst_w, abs(w_r(b, float(x)) - known) / max(1.0, known))
        out.append(_check("two-root W matches the Brownian form", worst_w, 1e-12))

        worst_rel = 0.0
        for s in np.geomspace(0.2 * a_star, 3.0 * c.barrier, 100):
            cc = Contract(strike=c.strike, barrier=c.barrier, spot=float(s))
            plain = bs_reference(m, cc).plain_put
            v = price(b, m, cc).value
            worst_rel = max(worst_rel, v - plain)
        out.append(
            _check("cancellable never exceeds the plain put", worst_rel, 1e-12, f"plain at spot: {ref.plain_put:.4f}")
        )

    return out


def mc_suite(
    m: ModelParams, c: Contract, cfg: McConfig, workers: int = 1
) -> list[CheckResult]:
    """Simulator cross-checks against the closed forms."""
    b = basis_for(m)
    a_star = optimal_threshold(b, m, c)
    closed = value_at_threshold(b, m, c, c.spot, a_star)
    out: list[CheckResult] = []

    survival_cfg = replace(cfg, mode=McMode.SURVIVAL_WEIGHTED)
    traces = collect_traces(m, c, a_star, survival_cfg, workers=workers)
    n = len(traces)

    pay = np.zeros(n)
    creep_ind = np.zeros(n)
    jump_ind = np.zeros(n)
    unders: list[float] = []
    for i, tr in enumerate(traces):
        if tr.tau is None:
            continue
        disc = math.exp(-m.r * tr.tau)
        pay[i] = disc * g_payoff(m, c, tr.s_tau)
        if tr.crossing == "creep":
            creep_ind[i] = disc
        else:
            jump_ind[i] = disc
            unders.append(math.log(a_star) - math.log(tr.s_tau))

    floor = 0.01 if m.lam == 0.0 else 0.015
    pay_mean = float(np.mean(pay))
    pay_se = float(np.std(pay, ddof=1) / math.sqrt(n))
    out.append(
        _check(
            "policy value vs closed form",
            abs(pay_mean - closed),
            max(3.0 * pay_se, floor * abs(closed)),
            f"mc {pay_mean:.4f} vs closed {closed:.4f}",
        )
    )

    cf = creeping_factor(b, m, c.spot, a_star)
    uf = undershoot_factor(b, m, c.spot, a_star)
    for label, ind, ref in (("creeping", creep_ind, cf), ("undershoot", jump_ind, uf)):
        se = float(np.std(ind, ddof=1) / math.sqrt(n))
        out.append(
            _check(
                f"{label} factor vs closed form",
                abs(float(np.mean(ind)) - ref),
                3.0 * se + 0.01 * max(ref, 0.01),
                f"mc {np.mean(ind):.4f} vs closed {ref:.4f}",
            )
        )

    if m.lam > 0.0:
        if len(unders) >= 30:
            u = np.array(unders)
            se = float(np.std(u, ddof=1) / math.sqrt(len(u)))
            out.append(
                _check(
                    "undershoot law (mean vs 1/rho)",
                    abs(float(np.mean(u)) - 1.0 / m.rho),
                    3.0 * se,
                    f"{len(u)} jump crossings",
                )
            )
        else:
            out.append(
                CheckResult(
                    "undershoot law (mean vs 1/rho)", True, float(len(unders)), 30.0,
                    "too few jump crossings to test",
                )
            )

    term = estimate_discounted_terminal(m, c, 1.0, cfg, workers=workers)
    out.append(
        _check(
            "discounted asset is a martingale",
            abs(term.mean - c.spot),
            3.0 * term.stderr,
            f"mc {term.mean:.4f} vs spot {c.spot:.4f}",
        )
    )

    # Bridge bias ordering under common random numbers: turning the bridge
    # on can only make detected passage times earlier.
    small = replace(cfg, n_paths=max(100, cfg.n_paths // 4))
    taus_on, _, kinds_on, _ = _run_all_paths(
        m, c, a_star, replace(small, bridge_correction=True), False, workers
    )
    taus_off, _, kinds_off, _ = _run_all_paths(
        m, c, a_star, replace(small, bridge_correction=False), False, workers
    )
    mean_on = float(np.mean(np.where(kinds_on != _K_NONE, np.nan_to_num(taus_on), cfg.horizon)))
    mean_off = float(np.mean(np.where(kinds_off != _K_NONE, np.nan_to_num(taus_off), cfg.horizon)))
    out.append(
        _check(
            "bridge detects crossings earlier",
            mean_on - mean_off,
            1e-12,
            f"mean passage {mean_on:.4f} (on) vs {mean_off:.4f} (off)",
        )
    )

    # The trace payoffs above ARE the survival-weighted estimate (same seed,
    # same streams), so only the direct mode needs a fresh, smaller run.
    direct_cfg = replace(
        cfg,
        n_paths=max(100, cfg.n_paths // 10),
        mode=McMode.DIRECT_LAST_PASSAGE,
    )
    est_d = estimate_value(m, c, a_star, direct_cfg, workers=workers)
    combined = math.hypot(pay_se, est_d.stderr)
    out.append(
        _check(
            "survival and direct modes agree",
            abs(pay_mean - est_d.mean),
            3.0 * combined + est_d.truncation_bound,
            f"survival {pay_mean:.4f} vs direct {est_d.mean:.4f}",
        )
    )

    return out
