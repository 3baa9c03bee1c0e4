"""Scale functions of the jump-diffusion, in exponential-sum form.

Discounted first-passage identities for a spectrally negative process are
expressed through a pair of functions (W, Z) indexed by the discount rate.
For this model both admit finite exponential sums: the cubic

    (psi(theta) - r) * (theta + rho) = 0

has three simple real roots, one of which is exactly 1 under the martingale
drift, and partial fractions of 1/(psi - r) over those roots give the sum
coefficients.  Without jumps the cubic collapses to a quadratic and the sum
has two terms; we keep a zeroed third slot so downstream code is branch-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BranchError, DegenerateRoots
from .model import ModelParams, _psi_rational

#: Two roots closer than this are treated as coincident.
_ROOT_SEP_TOL = 1e-10
_POLISH_TOL = 1e-14
_MAX_EXP_ARG = 700.0  # exp() overflows just above 709; saturate before that


@dataclass(frozen=True)
class ScaleBasis:
    """Exponents and coefficients of the exponential-sum scale functions.

    ``eta`` holds the three exponents (first is always 1, the positive
    root), ``c`` the matching coefficients (zero marks an unused slot),
    ``phi_r`` the largest root of psi(theta)=r, and ``omega`` the scaled
    discriminant of the quadratic factor (kept for diagnostics).
    """

    eta: tuple[float, float, float]
    c: tuple[float, float, float]
    phi_r: float
    omega: float


def _cubic(m: ModelParams, theta: float) -> float:
    """(psi(theta) - r)(theta + rho), expanded so the pole is cleared."""
    s2 = m.sigma2
    return (
        (s2 / 2.0) * theta**3
        + (m.mu + s2 * m.rho / 2.0) * theta**2
        + (m.mu * m.rho - m.lam - m.r) * theta
        - m.r * m.rho
    )


def _cubic_deriv(m: ModelParams, theta: float) -> float:
    s2 = m.sigma2
    return (
        1.5 * s2 * theta**2
        + 2.0 * (m.mu + s2 * m.rho / 2.0) * theta
        + (m.mu * m.rho - m.lam - m.r)
    )


def _polish_root(m: ModelParams, theta: float) -> float:
    scale = max(1.0, m.r * m.rho)
    for _ in range(20):
        val = _cubic(m, theta)
        if abs(val) <= _POLISH_TOL * scale:
            break
        slope = _cubic_deriv(m, theta)
        if slope == 0.0:
            break
        theta -= val / slope
    return theta


def _partial_fraction_weights(
    etas: tuple[float, float, float], sigma2: float, rho: float
) -> tuple[float, float, float]:
    """Coefficients C_i = 2(eta_i + rho) / (sigma2 * prod_{j!=i}(eta_i - eta_j)).

    Pure helper so degenerate inputs can be exercised directly in tests;
    the quadratic-factor discriminant is strictly positive for every
    parameter set that passes model validation, which makes the coincident
    case unreachable through the public constructor.
    """
    out = []
    for i, ei in enumerate(etas):
        denom = sigma2 / 2.0
        for j, ej in enumerate(etas):
            if j == i:
                continue
            gap = ei - ej
            if abs(gap) <= _ROOT_SEP_TOL:
                raise DegenerateRoots(
                    f"roots {ei} and {ej} coincide within {_ROOT_SEP_TOL}"
                )
            denom *= gap
        out.append((ei + rho) / denom)
    return (out[0], out[1], out[2])


def build_scale_basis(m: ModelParams) -> ScaleBasis:
    """Three-exponential basis for a model with jumps (``lam > 0``).

    The negative exponents come from the quadratic factor of the cleared
    cubic; they are computed in the numerically stable product form and
    Newton-polished on the cubic itself.  One lies in (-rho, 0), the other
    below -rho; any other layout means the partial-fraction representation
    is invalid for these parameters.
    """
    if m.lam <= 0.0:
        raise BranchError("three-root basis requires a positive jump intensity")

    s2 = m.sigma2
    # Quadratic factor: (s2/2) theta^2 + b theta + r*rho, after dividing
    # out the exact root at theta = 1.
    b = m.mu + s2 * (m.rho + 1.0) / 2.0
    disc = b * b - 2.0 * s2 * m.r * m.rho
    omega = (m.rho + 1.0) ** 2 * disc
    if disc <= 0.0:
        raise DegenerateRoots(
            f"quadratic-factor discriminant {disc} is not positive"
        )
    # Both roots are negative: avoid cancellation by computing the large
    # one directly and the small one from the root product 2*r*rho/s2.
    root_lo = (-b - math.sqrt(disc)) / s2
    root_hi = (2.0 * m.r * m.rho / s2) / root_lo
    root_lo = _polish_root(m, root_lo)
    root_hi = _polish_root(m, root_hi)

    in_band = sum(1 for e in (root_lo, root_hi) if -m.rho < e < 0.0)
    below = sum(1 for e in (root_lo, root_hi) if e < -m.rho)
    if in_band != 1 or below != 1:
        raise DegenerateRoots(
            "negative roots do not straddle the jump pole: "
            f"got {root_lo}, {root_hi} around {-m.rho}"
        )

    etas = (1.0, root_lo, root_hi)
    coeffs = _partial_fraction_weights(etas, s2, m.rho)
    return ScaleBasis(eta=etas, c=coeffs, phi_r=1.0, omega=omega)


def build_scale_basis_bs(m: ModelParams) -> ScaleBasis:
    """Two-exponential basis for the jump-free model (``lam = 0``).

    The exponents solve mu*theta + s2*theta^2/2 = r; the positive one is 1
    under the martingale drift.  The third slot is zeroed.
    """
    if m.lam > 0.0:
        raise BranchError("two-root basis requires zero jump intensity")

    s2 = m.sigma2
    disc = m.mu * m.mu + 2.0 * s2 * m.r
    eta2 = (-m.mu - math.sqrt(disc)) / s2
    # One or two Newton steps on the quadratic tighten the root to an ulp.
    for _ in range(3):
        val = m.mu * eta2 + s2 * eta2 * eta2 / 2.0 - m.r
        slope = m.mu + s2 * eta2
        if slope == 0.0 or abs(val) <= 1e-16:
            break
        eta2 -= val / slope

    c1 = 1.0 / ((s2 / 2.0) * (1.0 - eta2))
    return ScaleBasis(eta=(1.0, eta2, 0.0), c=(c1, -c1, 0.0), phi_r=1.0, omega=disc)


def basis_for(m: ModelParams) -> ScaleBasis:
    """Dispatch to the branch matching the jump intensity."""
    return build_scale_basis(m) if m.lam > 0.0 else build_scale_basis_bs(m)


def w_r(b: ScaleBasis, x: float) -> float:
    """W at ``x``; zero for ``x < 0`` by convention.

    Evaluated as e^x * (c1 + sum_i c_i e^{(eta_i - 1) x}) so that large
    arguments never exponentiate a positive multiple of x twice.
    """
    if x < 0.0:
        return 0.0
    acc = 0.0
    for ei, ci in zip(b.eta, b.c):
        if ci == 0.0:
            continue
        acc += ci * math.exp(min((ei - 1.0) * x, _MAX_EXP_ARG))
    return math.exp(min(x, _MAX_EXP_ARG)) * acc


def w_r_prime(b: ScaleBasis, x: float) -> float:
    """dW/dx at ``x``; zero for ``x < 0`` (left limit is out of contract)."""
    if x < 0.0:
        return 0.0
    acc = 0.0
    for ei, ci in zip(b.eta, b.c):
        if ci == 0.0:
            continue
        acc += ci * ei * math.exp(min((ei - 1.0) * x, _MAX_EXP_ARG))
    return math.exp(min(x, _MAX_EXP_ARG)) * acc


def z_r(b: ScaleBasis, m: ModelParams, x: float) -> float:
    """Z at ``x``: 1 + r * integral of W from 0 to x; one for ``x < 0``."""
    if x < 0.0:
        return 1.0
    acc = 0.0
    for ei, ci in zip(b.eta, b.c):
        if ci == 0.0:
            continue
        acc += ci * (math.exp(min(ei * x, _MAX_EXP_ARG)) - 1.0) / ei
    return 1.0 + m.r * acc
