"""Fisher information of one increment of ``b t + sigma W_t + Y^1_t + Y^2_t``.

``Y^i`` are independent symmetric stable processes with Levy densities
``a_i beta_i / |x|^(1 + beta_i)``.  The density of ``X_delta`` and its
parameter derivatives are obtained by FFT inversion of the characteristic
function; the parameter derivatives of the characteristic exponent are
analytic.  Two corrections make the grid exact up to ``O(delta^2)`` terms
in the far tail:

* the periodic images that the DFT folds onto the grid are subtracted using
  the first-order tail ``p(x) ~ delta * f(x)`` (Hurwitz zeta sums);
* the information carried by ``|x| > H`` is integrated from the same
  first-order tail.

The module also tabulates the rate exponents implied by the information and
compares them with the rates of the contrast estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import integrate, optimize, special

from .stable import AccuracyWarning, tail_constant, tail_constant_derivative

PARAMS = ("beta1", "a1", "beta2", "a2")
_LOG_EPS = math.log(1e-16)


@dataclass(frozen=True)
class ParametricModel:
    """Parameters of the two-stable-plus-Brownian model.

    ``a1``/``a2`` are Levy-density coefficients; zero switches a component off
    (useful for validating the quadrature against the Gaussian case).
    """

    c: float
    beta1: float
    a1: float
    beta2: float
    a2: float
    b: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not 0 < self.beta2 < self.beta1 < 2:
            raise ValueError("need 0 < beta2 < beta1 < 2")
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError("a1, a2 must be nonnegative")

    def components(self):
        return ((self.beta1, self.a1), (self.beta2, self.a2))

    def levy_density(self, x):
        x = np.abs(x)
        return sum(a * b * x ** (-1.0 - b) for b, a in self.components() if a > 0)


def char_exponent(model: ParametricModel, u):
    """``psi(u) = i u b - c u^2 / 2 - sum_i a_i C(beta_i) |u|^beta_i``."""
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    re = -0.5 * model.c * u**2
    for beta, a in model.components():
        if a > 0:
            re = re - a * tail_constant(beta) * au**beta
    return re + 1j * model.b * u


def _dpsi(model: ParametricModel, which: str, u):
    """Analytic derivative of ``psi`` with respect to ``which``."""
    au = np.abs(u)
    idx = 0 if which.endswith("1") else 1
    beta, a = model.components()[idx]
    pw = au**beta
    if which.startswith("a"):
        return -tail_constant(beta) * pw
    with np.errstate(divide="ignore", invalid="ignore"):
        logu = np.where(au > 0, np.log(au), 0.0)
    return -a * (tail_constant_derivative(beta) * pw + tail_constant(beta) * pw * logu)


@dataclass
class DensityGrid:
    x: np.ndarray
    p: np.ndarray
    delta: float
    dx: float
    half_width: float
    u_max: float
    grid_mass: float
    tail_mass: float
    doublings: int = 0

    @property
    def captured_mass(self) -> float:
        return self.grid_mass + self.tail_mass


def _cutoff_frequency(model: ParametricModel, delta: float) -> float:
    """Smallest ``u`` with ``|exp(delta psi(u))| <= 1e-16``."""

    def g(u):
        return delta * float(np.real(char_exponent(model, u))) - _LOG_EPS

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    return optimize.brentq(g, hi / 2.0 if hi > 1 else 0.0, hi, xtol=1e-12)


def _image_sums(x, L, s):
    """``sum_{k != 0} |x + k L|^(-s)`` for ``|x| <= L / 2``."""
    q = x / L
    return L ** (-s) * (special.zeta(s, 1.0 + q) + special.zeta(s, 1.0 - q))


def _alias(model: ParametricModel, delta: float, x, L, which: Optional[str] = None):
    """First-order DFT image contribution to ``p`` (or to ``d p / d which``)."""
    y = x - model.b * delta
    out = np.zeros_like(y)
    for k, (beta, a) in enumerate(model.components()):
        if a == 0:
            continue
        s = 1.0 + beta
        tag = str(k + 1)
        if which is None:
            out += delta * a * beta * _image_sums(y, L, s)
        elif which == "a" + tag:
            out += delta * beta * _image_sums(y, L, s)
        elif which == "beta" + tag:
            h = 1e-6
            ds = (_image_sums(y, L, s + h) - _image_sums(y, L, s - h)) / (2 * h)
            # d/dbeta [a beta |y|^-(1+beta)] = a |y|^-s - a beta log|y| |y|^-s
            out += delta * a * (_image_sums(y, L, s) + beta * ds)
    return out


def _tail_mass(model: ParametricModel, delta: float, H: float) -> float:
    m = sum(2.0 * a * H ** (-beta) for beta, a in model.components() if a > 0)
    m *= delta
    sd = math.sqrt(model.c * delta)
    return m + float(special.erfc(H / (sd * math.sqrt(2.0))))


def _invert(model, delta, n_points, dx, weights=None):
    du = 2.0 * math.pi / (n_points * dx)
    k = np.arange(n_points) - n_points // 2
    u = k * du
    phi = np.exp(delta * char_exponent(model, u))
    if weights is not None:
        phi = phi * weights(u)
    # x_j = (j - N/2) dx, sum_k phi(u_k) exp(-i u_k x_j) du / (2 pi)
    out = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(phi)))
    return np.real(out) * du / (2.0 * math.pi), k * dx


def density_grid(
    model: ParametricModel,
    delta: float,
    n_points: int = 2**18,
    half_width: Optional[float] = None,
    mass_tol: float = 1e-10,
    max_doublings: int = 5,
) -> DensityGrid:
    """Density of ``X_delta`` on a uniform grid of ``n_points`` (a power of two).

    The mesh follows from the frequency cutoff; the grid is doubled (same mesh)
    until grid mass plus analytic far-tail mass is within ``mass_tol`` of one.
    """
    if n_points < 2 or n_points & (n_points - 1):
        raise ValueError("n_points must be a power of two")
    if not delta > 0:
        raise ValueError("delta must be positive")
    u_max = _cutoff_frequency(model, delta)
    dx = math.pi / u_max if half_width is None else 2.0 * half_width / n_points
    if dx > math.pi / u_max * (1 + 1e-12):
        raise ValueError("half_width too large for the frequency cutoff at this n_points")
    n = n_points
    for doubling in range(max_doublings + 1):
        p, x = _invert(model, delta, n, dx)
        L = n * dx
        p = p - _alias(model, delta, x, L)
        H = 0.5 * L
        grid_mass = float(integrate.trapezoid(p, x))
        tail = _tail_mass(model, delta, H)
        if abs(grid_mass + tail - 1.0) <= mass_tol:
            return DensityGrid(x, np.maximum(p, 1e-300), delta, dx, H, math.pi / dx, grid_mass, tail, doubling)
        n *= 2
    raise RuntimeError(
        f"density grid did not reach mass tolerance {mass_tol:g} after {max_doublings} doublings "
        f"(defect {abs(grid_mass + tail - 1.0):.3g})"
    )


def density_derivative(model: ParametricModel, grid: DensityGrid, which: str, method: str = "analytic"):
    """``d p_delta / d which`` on ``grid.x``.

    ``method="analytic"`` differentiates the characteristic exponent under the
    inversion integral; ``method="fd"`` takes central differences (step 1e-4
    for indices, relative 1e-4 for intensities) of the inverted density.
    """
    if which not in PARAMS + ("c",):
        raise ValueError(f"unknown parameter {which!r}")
    n = grid.x.size
    L = n * grid.dx
    if method == "analytic":
        if which == "c":
            wfun = lambda u: -0.5 * grid.delta * u**2  # noqa: E731
            d, _ = _invert(model, grid.delta, n, grid.dx, wfun)
            return d
        d, _ = _invert(model, grid.delta, n, grid.dx, lambda u: grid.delta * _dpsi(model, which, u))
        return d - _alias(model, grid.delta, grid.x, L, which)
    if method != "fd":
        raise ValueError("method must be 'analytic' or 'fd'")
    val = getattr(model, which)
    h = 1e-4 if which.startswith("beta") else 1e-4 * max(abs(val), 1e-8)
    dens = []
    for sgn in (1, -1):
        m = replace(model, **{which: val + sgn * h})
        p, _ = _invert(m, grid.delta, n, grid.dx)
        dens.append(p - _alias(m, grid.delta, grid.x, L))
    return (dens[0] - dens[1]) / (2 * h)


def _tail_information(model: ParametricModel, delta: float, H: float, which: str) -> float:
    """``2 * int_H^inf (d f)^2 / f dx`` times ``delta`` for the first-order tail."""
    if which == "c":
        return 0.0
    idx = 0 if which.endswith("1") else 1
    beta, a = model.components()[idx]
    if a == 0 and which.startswith("beta"):
        return 0.0

    def integrand(t):
        # x = H e^t
        x = H * math.exp(t)
        if which.startswith("a"):
            df = beta * x ** (-1.0 - beta)
        else:
            df = a * x ** (-1.0 - beta) * (1.0 - beta * math.log(x))
        f = float(model.levy_density(x))
        return df * df / f * x if f > 0 else 0.0

    val, _ = integrate.quad(integrand, 0.0, 700.0, limit=500, epsrel=1e-10, epsabs=0.0)
    return 2.0 * delta * val


@dataclass
class FisherResult:
    delta: float
    entries: dict
    fd_entries: dict = field(default_factory=dict)
    grid_mass: float = float("nan")
    tail_mass: float = float("nan")
    tail_information: dict = field(default_factory=dict)
    max_derivative_discrepancy: dict = field(default_factory=dict)
    accurate: bool = True

    @property
    def captured_mass(self) -> float:
        return self.grid_mass + self.tail_mass


_NOISE = 1e-13


def _first_order_integrand(model: ParametricModel, delta: float, x, which: str):
    """``delta * (d f)^2 / f`` with ``f`` the Levy density (zero without jumps)."""
    f = model.levy_density(x) if model.a1 + model.a2 > 0 else np.zeros_like(x)
    if which == "c" or not np.any(f > 0):
        return np.zeros_like(x)
    idx = 0 if which.endswith("1") else 1
    beta, a = model.components()[idx]
    ax = np.abs(x)
    if which.startswith("a"):
        df = beta * ax ** (-1.0 - beta)
    else:
        df = a * ax ** (-1.0 - beta) * (1.0 - beta * np.log(ax))
    return delta * df * df / f


def _information(model: ParametricModel, grid: DensityGrid, dp: np.ndarray, which: str) -> float:
    # below the FFT roundoff level the first-order tail is used instead
    noisy = grid.p < _NOISE * grid.p.max()
    integrand = np.where(noisy, 0.0, dp * dp / grid.p)
    if np.any(noisy):
        integrand[noisy] = _first_order_integrand(model, grid.delta, grid.x[noisy], which)
    return float(integrate.trapezoid(integrand, grid.x))


def fisher_diagonal(model: ParametricModel, delta: float, which: str, method: str = "analytic",
                    grid: Optional[DensityGrid] = None, **grid_kw) -> float:
    """``I_delta^{theta theta} = int (d_theta p)^2 / p dx`` for one parameter.

    ``which`` is one of ``beta1, a1, beta2, a2`` (``c`` is accepted for
    validation against the Gaussian closed form).
    """
    if grid is None:
        grid = density_grid(model, delta, **grid_kw)
    dp = density_derivative(model, grid, which, method)
    return _information(model, grid, dp, which) + _tail_information(model, delta, grid.half_width, which)


def fisher_result(model: ParametricModel, delta: float, params=PARAMS, rtol: float = 1e-3, **grid_kw) -> FisherResult:
    """All requested diagonal entries, with the analytic/finite-difference cross-check."""
    grid = density_grid(model, delta, **grid_kw)
    res = FisherResult(delta, {}, grid_mass=grid.grid_mass, tail_mass=grid.tail_mass)
    for w in params:
        da = density_derivative(model, grid, w, "analytic")
        df = density_derivative(model, grid, w, "fd")
        tail = _tail_information(model, delta, grid.half_width, w)
        res.entries[w] = _information(model, grid, da, w) + tail
        res.fd_entries[w] = _information(model, grid, df, w) + tail
        res.tail_information[w] = tail
        disc = float(np.sqrt(integrate.trapezoid((da - df) ** 2, grid.x) / integrate.trapezoid(da**2, grid.x)))
        res.max_derivative_discrepancy[w] = disc
        if disc > rtol:
            res.accurate = False
            warnings.warn(f"{w}: analytic and finite-difference derivatives differ by {disc:.2e}", AccuracyWarning)
    return res


# ----------------------------------------------------------------------------
# rate exponents


def theoretical_exponents(beta1, beta2) -> dict:
    """Delta- and log(1/Delta)-exponents of the diagonal information entries."""
    h = beta1 / 2
    return {
        "beta1": (1 - h, 2 - h),
        "a1": (1 - h, -h),
        "beta2": (1 - beta2 + h, 2 - beta2 + h),
        "a2": (1 - beta2 + h, -(beta2 - h)),
    }


def fit_exponent(deltas, values, log_exponent=None) -> float:
    """Slope of ``log I`` against ``log Delta``.

    With ``log_exponent`` given, ``log_exponent * log log(1/Delta)`` is removed
    first; with ``log_exponent="fit"`` it is estimated jointly.
    """
    d = np.asarray(deltas, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    ll = np.log(np.log(1.0 / d))
    if log_exponent == "fit":
        X = np.column_stack([np.log(d), ll, np.ones_like(d)])
        return float(np.linalg.lstsq(X, y, rcond=None)[0][0])
    if log_exponent is not None:
        y = y - float(log_exponent) * ll
    return float(np.polyfit(np.log(d), y, 1)[0])


@dataclass(frozen=True)
class Rate:
    """Error scale ``Delta^delta_exponent * log(1/Delta)^log_exponent``."""

    delta_exponent: object
    log_exponent: object


def _num(x):
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, str) else x


def optimal_rates(beta1, beta2) -> dict:
    """Best attainable error scales for ``(beta1, a1, beta2, a2)``.

    Accepts floats or :class:`fractions.Fraction` (results then stay exact).
    The second pair is ``None`` when ``beta2 < beta1 / 2`` (not identifiable);
    at ``beta2 = beta1 / 2`` its exponent is 0.
    """
    b1, b2 = _num(beta1), _num(beta2)
    q = b1 / 4
    out = {
        "beta1": Rate(q, -(1 - q)),
        "a1": Rate(q, q),
        "beta2": None,
        "a2": None,
    }
    if b2 >= b1 / 2:
        e = b2 / 2 - q
        out["beta2"] = Rate(e, -(1 - b2 / 2 + q))
        out["a2"] = Rate(e, e)
    return out


BRANCH_POINT = (math.sqrt(97.0) - 1.0) / 6.0
BRANCH_POINT_TEXT = "(sqrt(97)-1)/6"


def rho_bound(beta1):
    """Supremum of admissible truncation exponents for a given leading index."""
    b = _num(beta1)
    return min(1 / (2 + b), 2 / (b * (3 + b)), 4 / (b * (5 + 3 * b)))


def rate_comparison(beta1, beta2, rho=None) -> dict:
    """Optimal exponents ``gamma_i = (2 beta_i - beta1) / 4`` against the contrast estimator's.

    The contrast estimator converges at ``u_n^(beta_i - beta1/2) = Delta^(rho (beta_i - beta1/2))``;
    with ``rho=None`` the supremum :func:`rho_bound` is used, and the
    arbitrarily small slack below it is reported as ``epsilon_slack``.
    ``efficiency`` is the ratio ``gamma'_i / gamma_i`` (1 means rate-optimal).
    """
    b1, b2 = _num(beta1), _num(beta2)
    bound = rho_bound(b1)
    if rho is None:
        r, slack = bound, "arbitrarily small"
    else:
        r = _num(rho)
        if not 0 < r <= bound:
            raise ValueError(f"rho={rho} not admissible (must lie in (0, {bound}])")
        slack = 0
    out = {}
    for name, bi in (("beta1", b1), ("beta2", b2)):
        g = (2 * bi - b1) / 4
        gp = 2 * r * g
        out[name] = {"gamma": g, "gamma_prime": gp,
                     "efficiency": (gp / g) if g != 0 else None}
    out["rho"] = r
    out["epsilon_slack"] = slack
    out["branch"] = "low" if float(b1) <= BRANCH_POINT else "high"
    return out


def efficiency_limit(beta1):
    """``gamma'_i / gamma_i`` at the admissibility bound (same for every index)."""
    return 2 * rho_bound(beta1)
