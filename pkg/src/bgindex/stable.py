"""Symmetric stable laws: sampling, tail probabilities and scale calibration.

A component is described by its index ``beta`` and its *tail intensity*
``a = lim_{u->0} u**beta * F([-u, u]^c)``.  For the symmetric Levy density
``a' * beta / |x|**(1 + beta)`` the tail intensity is ``a = 2 a'``, and the
characteristic exponent of the process at time ``t`` is
``-t * a' * C(beta) * |u|**beta`` with ``C`` given by :func:`tail_constant`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special


class AccuracyWarning(RuntimeWarning):
    """Raised (as a warning) when a quadrature misses its error target."""


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 2.0:
        raise ValueError(f"stability index must lie in (0, 2), got {beta!r}")


@dataclass(frozen=True)
class StableLaw:
    """One symmetric stable jump component.

    Attributes
    ----------
    beta : float
        Stability (Blumenthal-Getoor) index in (0, 2).
    tail_intensity : float
        Coefficient of ``u**-beta`` in the two-sided tail ``F([-u,u]^c)``.
    """

    beta: float
    tail_intensity: float

    def __post_init__(self):
        _check_beta(self.beta)
        if not self.tail_intensity > 0:
            raise ValueError("tail_intensity must be positive")

    @property
    def density_coefficient(self) -> float:
        """``a'`` in the Levy density ``a' beta / |x|^(1+beta)``."""
        return 0.5 * self.tail_intensity

    def scale(self, dt: float) -> float:
        """Scale ``s`` such that the time-``dt`` increment has CF ``exp(-|s u|^beta)``."""
        return (self.density_coefficient * tail_constant(self.beta) * dt) ** (1.0 / self.beta)


def tail_constant(beta: float) -> float:
    """``C(beta) = 2 beta * int_0^inf (1 - cos y) y^(-1-beta) dy``.

    Uses the closed form ``pi * Gamma(2 - beta) * sinc((1 - beta) / 2)``, which is
    smooth through ``beta = 1`` (where it equals pi).
    """
    _check_beta(beta)
    return math.pi * special.gamma(2.0 - beta) * float(np.sinc(0.5 * (1.0 - beta)))


def tail_constant_derivative(beta: float) -> float:
    """Derivative of :func:`tail_constant` with respect to ``beta``."""
    _check_beta(beta)
    z = 0.5 * (1.0 - beta)
    # d/dz log sinc(z) = pi cot(pi z) - 1/z, expanded near 0
    if abs(z) < 1e-4:
        dlogsinc = -(math.pi**2) * z / 3.0 - (math.pi**4) * z**3 / 45.0
    else:
        dlogsinc = math.pi / math.tan(math.pi * z) - 1.0 / z
    dlog = -special.digamma(2.0 - beta) - 0.5 * dlogsinc
    return tail_constant(beta) * dlog


def sample_standard(beta: float, rng: np.random.Generator, size=None):
    """Draw from the symmetric stable law with characteristic function ``exp(-|u|^beta)``.

    Chambers-Mallows-Stuck; ``beta == 1`` uses the Cauchy closed form.
    """
    _check_beta(beta)
    phi = np.pi * (rng.random(size) - 0.5)
    if beta == 1.0:
        return np.tan(phi)
    w = rng.standard_exponential(size)
    return (
        np.sin(beta * phi)
        / np.cos(phi) ** (1.0 / beta)
        * (np.cos((1.0 - beta) * phi) / w) ** ((1.0 - beta) / beta)
    )


def increment(law: StableLaw, dt: float, rng: np.random.Generator, size=None):
    """Time-``dt`` increment(s) of the symmetric stable Levy process ``law``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return 0.0 if size is None else np.zeros(size)
    return law.scale(dt) * sample_standard(law.beta, rng, size)


def _zolotarev_v(theta, beta):
    # Nolan's V(theta) for the symmetric case (theta_0 = 0)
    return (np.cos(theta) / np.sin(beta * theta)) ** (beta / (beta - 1.0)) * (
        np.cos((beta - 1.0) * theta) / np.cos(theta)
    )


def _log_v(theta, cos_theta, beta):
    """``log V(theta)`` with ``cos(theta)`` passed in (accurate near pi/2)."""
    e = beta / (beta - 1.0)
    return (
        e * (math.log(cos_theta) - math.log(math.sin(beta * theta)))
        + math.log(math.cos((beta - 1.0) * theta))
        - math.log(cos_theta)
    )


def _zolotarev_integral(beta, z, tol):
    """``int_0^{pi/2} exp(-z^e V(theta)) dtheta`` with ``e = beta / (beta - 1)``.

    The integrand switches between 0 and 1 where ``z^e V = 1``; the switch gets
    sharp as ``beta -> 1`` and moves to an endpoint as ``z -> 0`` or ``z -> inf``.
    It is located first and both sides are integrated in ``log`` of the
    distance to the endpoint nearest the switch.
    """
    logzc = beta / (beta - 1.0) * math.log(z)
    d_min = 1e-3 * tol  # f <= 1, so [0, d_min] contributes at most d_min

    def h_left(d):  # theta = d
        return logzc + _log_v(d, math.cos(d), beta)

    def h_right(d):  # theta = pi/2 - d
        return logzc + _log_v(math.pi / 2 - d, math.sin(d), beta)

    def h_theta(t):
        return h_left(t) if t <= math.pi / 4 else h_right(math.pi / 2 - t)

    lo, hi = d_min, math.pi / 2 - d_min
    if h_theta(lo) * h_theta(hi) < 0:
        r = optimize.brentq(h_theta, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        r = math.pi / 4
    h, split = (h_left, r) if r <= math.pi / 4 else (h_right, math.pi / 2 - r)

    def f(s):
        g = h(math.exp(s))
        return 0.0 if g > 700.0 else math.exp(-math.exp(g) + s)

    # geometric breakpoints towards the switch keep a sharp step at a segment
    # end from slipping between quadrature nodes
    s0 = math.log(split)
    offsets = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    val = err = 0.0
    for a, b in ((math.log(d_min), s0), (s0, math.log(math.pi / 2))):
        if b - a <= 1e-12:
            continue
        pts = [s0 + o * (1 if b > s0 else -1) for o in offsets]
        pts = [t for t in pts if a < t < b]
        v, e = integrate.quad(f, a, b, points=pts or None, epsabs=tol * 1e-2, epsrel=1e-12, limit=400)
        val += v
        err += e
    return val, err


def standard_tail(beta: float, z: float, tol: float = 1e-12) -> float:
    """``P(|S| >= z)`` for ``S`` standard symmetric stable (CF ``exp(-|u|^beta)``).

    Evaluated through Zolotarev's integral representation of the distribution
    function, whose integrand is monotone and free of oscillation.
    """
    _check_beta(beta)
    if z <= 0:
        return 1.0
    if math.isinf(z):
        return 0.0
    if beta == 1.0:
        return 1.0 - 2.0 / math.pi * math.atan(z)
    val, err = _zolotarev_integral(beta, z, tol)
    if err > 1e3 * tol:
        warnings.warn(f"tail quadrature error {err:.2e} exceeds target", AccuracyWarning)
    if beta > 1.0:
        p = 2.0 / math.pi * val
    else:
        p = 1.0 - 2.0 / math.pi * val
    return min(max(p, 0.0), 1.0)


def tail_prob(law: StableLaw, dt: float, x: float) -> float:
    """``P(|Y_dt| >= x)`` for the Levy process with law ``law``."""
    if x <= 0:
        raise ValueError("threshold must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return standard_tail(law.beta, x / law.scale(dt))


def calibrate_intensity(beta: float, dt: float, threshold: float, target: float) -> float:
    """Tail intensity ``a`` with ``tail_prob(StableLaw(beta, a), dt, threshold) == target``."""
    _check_beta(beta)
    if not 0.0 < target < 1.0:
        raise ValueError("target probability must lie in (0, 1)")

    def f(log_a):
        return tail_prob(StableLaw(beta, math.exp(log_a)), dt, threshold) - target

    lo, hi = math.log(1e-12), math.log(1e12)
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError(
            f"target {target} not attainable for tail intensity in [1e-12, 1e12]"
        )
    log_a = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-13, maxiter=200)
    return math.exp(log_a)
