"""Risk-neutral jump-diffusion model for the log-price.

The log-price moves as a Brownian motion with drift plus a compound Poisson
stream of exponentially distributed downward jumps.  Under the pricing
measure the drift is pinned so that the discounted asset is a martingale,
which fixes ``mu`` in terms of the other parameters.  The cancellation
exponent ``alpha`` is the negative root of the Laplace exponent in (-1, 0);
it controls how fast the option's cancellation discount decays with the
distance below the barrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateCancellation, InvalidParams, PoleError

#: Residual tolerance for the Newton polish of the cancellation exponent.
_ALPHA_RESIDUAL_TOL = 1e-14
_ALPHA_MAX_NEWTON = 50


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter bundle.  Build through :func:`make_model`.

    Direct construction skips validation on purpose: tests and diagnostics
    sometimes need deliberately extreme bundles (e.g. near-zero volatility).
    """

    r: float
    sigma2: float
    lam: float
    rho: float
    mu: float
    alpha: float


def make_model(r: float, sigma2: float, lam: float, rho: float) -> ModelParams:
    """Validate raw inputs, pin the martingale drift, solve for ``alpha``.

    Raises
    ------
    InvalidParams
        If ``r`` or ``sigma2`` is not positive, ``lam`` is negative, or
        ``rho`` is not positive.
    DegenerateCancellation
        If the log-price drifts upward (Laplace exponent has nonnegative
        slope at zero), in which case no cancellation exponent exists.
    """
    if not (r > 0.0):
        raise InvalidParams(f"interest rate must be positive, got r={r}")
    if not (sigma2 > 0.0):
        raise InvalidParams(f"variance must be positive, got sigma2={sigma2}")
    if lam < 0.0:
        raise InvalidParams(f"jump intensity must be nonnegative, got lambda={lam}")
    if not (rho > 0.0):
        raise InvalidParams(f"jump-size rate must be positive, got rho={rho}")

    # Martingale condition: the Laplace exponent equals r at 1.
    mu = r - sigma2 / 2.0 + (lam / (1.0 + rho) if lam > 0.0 else 0.0)

    # Slope of the Laplace exponent at 0 is the long-run log-price drift.
    drift = mu - (lam / rho if lam > 0.0 else 0.0)
    if drift >= 0.0:
        raise DegenerateCancellation(
            "log-price drifts upward (drift=%g >= 0); the time above the "
            "barrier is infinite and the cancellation exponent does not exist"
            % drift
        )

    if lam == 0.0:
        alpha = 2.0 * mu / sigma2
    else:
        half_rho = rho / 2.0
        ratio = mu / sigma2
        alpha = half_rho + ratio - math.sqrt((half_rho - ratio) ** 2 + 2.0 * lam / sigma2)

    model = ModelParams(r=r, sigma2=sigma2, lam=lam, rho=rho, mu=mu, alpha=alpha)
    model = _polish_alpha(model)

    if not (-1.0 < model.alpha < 0.0):
        raise DegenerateCancellation(
            f"cancellation exponent {model.alpha} escaped (-1, 0)"
        )
    return model


def _polish_alpha(model: ModelParams) -> ModelParams:
    """Newton-polish ``alpha`` until the Laplace exponent residual is ~0."""
    alpha = model.alpha
    for _ in range(_ALPHA_MAX_NEWTON):
        resid = laplace_exponent(model, -alpha)
        if abs(resid) <= _ALPHA_RESIDUAL_TOL:
            break
        slope = -_laplace_exponent_deriv(model, -alpha)
        if slope == 0.0:
            break
        step = resid / slope
        alpha -= step
        if abs(step) < 1e-18:
            break
        model = ModelParams(
            r=model.r, sigma2=model.sigma2, lam=model.lam, rho=model.rho,
            mu=model.mu, alpha=alpha,
        )
    return model


def laplace_exponent(model: ModelParams, theta: float) -> float:
    """E[exp(theta * X_1)] = exp(psi(theta)); this returns psi(theta).

    With jumps present the jump term has a pole at ``-rho``; evaluation at
    or left of the pole raises :class:`PoleError`.  Without jumps the
    function is an entire quadratic.
    """
    if model.lam > 0.0 and theta <= -model.rho:
        raise PoleError(
            f"theta={theta} is at or beyond the jump-term pole at {-model.rho}"
        )
    return _psi_rational(model, theta)


def _psi_rational(model: ModelParams, theta: float) -> float:
    """Rational continuation of the Laplace exponent -- no pole check.

    Used internally for root residuals on the far side of the pole.
    """
    out = model.mu * theta + model.sigma2 * theta * theta / 2.0
    if model.lam > 0.0:
        out -= model.lam * theta / (theta + model.rho)
    return out


def _laplace_exponent_deriv(model: ModelParams, theta: float) -> float:
    out = model.mu + model.sigma2 * theta
    if model.lam > 0.0:
        out -= model.lam * model.rho / (theta + model.rho) ** 2
    return out
