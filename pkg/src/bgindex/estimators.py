"""Estimators of the successive jump-activity indices and their intensities.

Two stages:

* :func:`preliminary_estimate` -- log-ratios of tail counts at a ladder of
  thresholds, peeling off one index at a time.
* :func:`final_estimate` -- weighted least-squares fit of the multi-power-law
  tail ``sum_i gamma_i / u^x_i`` to the counts at ``v_l * u_n``.  The
  intensities enter linearly and are profiled out, so the search runs over the
  ordered exponents only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from .counts import ABSOLUTE, TailCountCurve, exceedance_counts, tail_curve
from .simulate import SamplingScheme


class Status(str, Enum):
    OK = "ok"
    CLIPPED = "clipped"
    FAILED = "failed"


class RankDeficientError(np.linalg.LinAlgError):
    """The power-law design matrix has dependent columns (coinciding exponents)."""


@dataclass
class EstimateSet:
    """Estimated ``(beta_i, Gamma_i)`` pairs with per-index status.

    Failed entries hold ``nan``; they never carry a numeric sentinel.
    """

    beta: np.ndarray
    gamma: np.ndarray
    status: tuple
    u_n: float
    thresholds: np.ndarray
    kind: str = "preliminary"
    contrast: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.status = tuple(Status(s) for s in self.status)
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if not (self.beta.shape == self.gamma.shape == (len(self.status),)):
            raise ValueError("beta, gamma and status must have the same length")

    @property
    def j(self) -> int:
        return len(self.status)

    @property
    def usable(self) -> np.ndarray:
        return np.array([s != Status.FAILED for s in self.status], dtype=bool)

    def to_dict(self) -> dict:
        def num(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "kind": self.kind,
            "beta": [num(b) for b in self.beta],
            "gamma": [num(g) for g in self.gamma],
            "status": [s.value for s in self.status],
            "u_n": float(self.u_n),
            "thresholds": [float(u) for u in self.thresholds],
            "contrast": None if self.contrast is None else float(self.contrast),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateSet":
        def num(v):
            return np.nan if v is None else float(v)

        return cls(
            beta=[num(b) for b in d["beta"]],
            gamma=[num(g) for g in d["gamma"]],
            status=d["status"],
            u_n=d["u_n"],
            thresholds=d["thresholds"],
            kind=d.get("kind", "preliminary"),
            contrast=d.get("contrast"),
            diagnostics=d.get("diagnostics", {}),
        )


# ----------------------------------------------------------------------------
# preliminary stage


@dataclass(frozen=True)
class PrelimConfig:
    """Settings of the preliminary estimator.

    The base threshold is, in order of precedence, ``u_n`` if given, else
    ``alpha * sqrt(eta * delta)`` if ``alpha`` is given (``eta`` estimated from
    the data when omitted), else ``K * delta**rho``.
    """

    j: int = 2
    gamma: float = 2.0
    epsilon: float = 0.1
    rho: float = 2.0 / 11.0
    K: float = 1.0
    u_n: Optional[float] = None
    alpha: Optional[float] = None
    eta: Optional[float] = None
    allow_large_rho: bool = False

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("j must be >= 1")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.rho > 2.0 / 11.0 + 1e-15 and not self.allow_large_rho:
            raise ValueError("rho above 2/11 requires allow_large_rho=True")
        if self.u_n is not None and not self.u_n > 0:
            raise ValueError("u_n must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")


def bipower_variance_rate(series) -> float:
    """Jump-robust estimate of the average variance per unit time."""
    x = np.abs(np.asarray(series.increments, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two increments")
    return float(0.5 * np.pi * np.dot(x[1:], x[:-1]) / (x.size * series.delta))


def default_threshold(scheme: SamplingScheme, config: PrelimConfig, eta_hat: Optional[float] = None) -> float:
    """Base truncation level ``u_n``."""
    if config.u_n is not None:
        return float(config.u_n)
    if config.alpha is not None:
        eta = config.eta if config.eta is not None else eta_hat
        if eta is None:
            raise ValueError("practical threshold needs eta (config.eta or eta_hat)")
        return float(config.alpha * math.sqrt(eta * scheme.delta))
    return float(config.K * scheme.delta**config.rho)


def aux_thresholds(u_n: float, epsilon: float, j: int) -> np.ndarray:
    """``u_{n,i} = u_n ** ((epsilon / 2) ** (i - 1))`` for ``i = 1..j``."""
    if not 0 < u_n < 1:
        raise ValueError("u_n must lie in (0, 1)")
    return np.array([u_n ** ((epsilon / 2.0) ** (i - 1)) for i in range(1, j + 1)])


def _alternating_count(count, x, k, u_k, gamma, prev_beta):
    """``U^n(k, x)`` as the alternating sum over subsets of the previous indices."""
    total = 0.0
    for l in range(k):
        coef = sum(
            gamma ** sum(prev_beta[i] for i in subset)
            for subset in itertools.combinations(range(k - 1), l)
        )
        total += (-1) ** l * count(x * gamma**l * u_k) * coef
    return total


def preliminary_estimate(series, scheme: SamplingScheme, config: PrelimConfig, side: str = ABSOLUTE) -> EstimateSet:
    """First-stage estimates ``(beta~_i, Gamma~_i)``, ``i = 1..j``, by induction on ``i``."""
    eta_hat = None
    if config.u_n is None and config.alpha is not None and config.eta is None:
        eta_hat = bipower_variance_rate(series)
    u_n = default_threshold(scheme, config, eta_hat)
    us = aux_thresholds(u_n, config.epsilon, config.j)
    g = config.gamma
    lg = math.log(g)

    # every threshold the induction can touch: u_{n,k} * gamma^m, m <= k
    wanted = sorted({float(us[k - 1] * g**m) for k in range(1, config.j + 1) for m in range(k + 1)})
    table = dict(zip(wanted, exceedance_counts(series, wanted, side)))

    def count(u):
        key = min(table, key=lambda t: abs(t - u))
        return float(table[key])

    beta = np.full(config.j, np.nan)
    gam = np.full(config.j, np.nan)
    status = [Status.FAILED] * config.j
    counts_used = {}

    c1, c2 = count(us[0]), count(g * us[0])
    counts_used[1] = (c1, c2)
    if c2 > 0:
        beta[0] = math.log(c1 / c2) / lg
        gam[0] = us[0] ** beta[0] * c1
        status[0] = Status.OK
    for k in range(2, config.j + 1):
        if status[k - 2] == Status.FAILED:
            break
        u_k = us[k - 1]
        prev = beta[: k - 1]
        n1 = _alternating_count(count, 1.0, k, u_k, g, prev)
        n2 = _alternating_count(count, g, k, u_k, g, prev)
        counts_used[k] = (n1, n2)
        if n1 > 0 and n2 > 0:
            beta[k - 1] = math.log(n1 / n2) / lg
            resid = count(u_k) - sum(gam[l] * u_k ** (-beta[l]) for l in range(k - 1))
            gam[k - 1] = u_k ** beta[k - 1] * resid
            status[k - 1] = Status.OK
    return EstimateSet(
        beta, gam, status, u_n, us, kind="preliminary",
        diagnostics={"counts": {str(k): list(map(float, v)) for k, v in counts_used.items()},
                     "eta_hat": eta_hat},
    )


def sanitize(est: EstimateSet) -> EstimateSet:
    """Clip negative intensities to 0 and reorder indices decreasingly.

    Failed entries are moved behind the usable ones; the operation is idempotent.
    """
    beta, gam = est.beta.copy(), est.gamma.copy()
    status = list(est.status)
    for i, s in enumerate(status):
        if s != Status.FAILED and gam[i] < 0:
            gam[i] = 0.0
            status[i] = Status.CLIPPED
    usable = [i for i, s in enumerate(status) if s != Status.FAILED]
    failed = [i for i, s in enumerate(status) if s == Status.FAILED]
    order = sorted(usable, key=lambda i: -beta[i]) + failed
    return EstimateSet(
        beta[order], gam[order], [status[i] for i in order], est.u_n, est.thresholds,
        kind=est.kind, contrast=est.contrast, diagnostics=dict(est.diagnostics),
    )


def stop_rule(est: EstimateSet, epsilon: float) -> int:
    """Number of indices kept: stop at the first ``beta~_i <= epsilon + beta~_1 / 2``."""
    if est.status[0] == Status.FAILED:
        return 0
    cut = epsilon + est.beta[0] / 2.0
    for i in range(est.j):
        if est.status[i] == Status.FAILED or not est.beta[i] > cut:
            return i
    return est.j


def bias_constant(betas: Sequence[float], intensities: Sequence[float], i: int, gamma: float) -> float:
    """Asymptotic bias constant ``H_i`` (1-based ``i``, ``1 <= i <= j - 1``) of the first stage."""
    j = len(betas)
    if len(intensities) != j:
        raise ValueError("betas and intensities must have equal length")
    if not 1 <= i <= j - 1:
        raise IndexError(f"H_i is defined for 1 <= i <= {j - 1}, got i={i}")
    if any(a <= 0 for a in intensities):
        raise ValueError("intensities must be positive")
    b = list(betas)
    num = math.prod(gamma ** (b[l] - b[i]) - 1.0 for l in range(i))
    den = math.prod(gamma ** (b[l] - b[i - 1]) - 1.0 for l in range(i - 1))
    return intensities[i] / (intensities[i - 1] * math.log(gamma)) * num / den


# ----------------------------------------------------------------------------
# contrast stage

# alpha_l in units of sqrt(eta * delta), divided by the smallest one
DEFAULT_ALPHAS = (7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0, 90.0, 120.0)
DEFAULT_V_GRID = tuple(a / 7.0 for a in DEFAULT_ALPHAS)


@dataclass(frozen=True)
class ContrastConfig:
    """Contrast settings: multipliers ``v_l`` (``v_1 = 1``), weights and optimizer controls.

    ``box`` is an optional pair ``(beta_half_width, gamma_half_width)`` restricting
    the search to a box around the preliminary estimates.  ``u_n`` overrides the
    base threshold carried by the preliminary estimates.
    """

    v_grid: tuple = DEFAULT_V_GRID
    weights: Optional[tuple] = None
    tol: float = 1e-8
    max_iter: int = 500
    n_starts: int = 8
    box: Optional[tuple] = None
    u_n: Optional[float] = None
    seed: int = 0
    polish: bool = True

    def __post_init__(self):
        v = np.asarray(self.v_grid, dtype=float)
        object.__setattr__(self, "v_grid", tuple(float(t) for t in v))
        if v.size < 2 or v[0] != 1.0 or np.any(np.diff(v) <= 0):
            raise ValueError("v_grid must start at 1 and increase strictly")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != v.shape or np.any(w <= 0):
                raise ValueError("weights must be positive, one per v_l")
            object.__setattr__(self, "weights", tuple(float(t) for t in w))
        if self.n_starts < 1 or self.max_iter < 1:
            raise ValueError("n_starts and max_iter must be positive")

    @property
    def w(self) -> np.ndarray:
        return np.ones(len(self.v_grid)) if self.weights is None else np.asarray(self.weights)

    @classmethod
    def decreasing_weights(cls, **kw) -> "ContrastConfig":
        """Preset with ``w_l = 1 / v_l`` (less weight on the sparse high thresholds)."""
        v = kw.pop("v_grid", DEFAULT_V_GRID)
        return cls(v_grid=v, weights=tuple(1.0 / np.asarray(v, dtype=float)), **kw)


def _curve_u_n(curve: TailCountCurve, config: ContrastConfig) -> float:
    v = np.asarray(config.v_grid)
    if len(curve) != v.size:
        raise ValueError(f"curve has {len(curve)} thresholds, config expects {v.size}")
    u_n = float(curve.thresholds[0])
    if not np.allclose(curve.thresholds, v * u_n, rtol=1e-9, atol=0):
        raise ValueError("curve thresholds must be v_l * u_n")
    return u_n


def _design(v, u_n, x):
    # columns v_l^(-x_i); the intensity of column i is g_i * u_n^x_i
    return v[:, None] ** (-np.asarray(x, dtype=float)[None, :])


def contrast_value(curve: TailCountCurve, config: ContrastConfig, params, ordered: bool = True) -> float:
    """``sum_l w_l (U_l - sum_i gamma_i / (v_l u_n)^x_i)^2`` for ``params = [(x_i, gamma_i), ...]``."""
    p = np.asarray(params, dtype=float).reshape(-1, 2)
    x, g = p[:, 0], p[:, 1]
    if np.any(x < 0) or np.any(x > 2) or np.any(g < 0):
        raise ValueError("parameters outside the domain 0 <= x <= 2, gamma >= 0")
    if ordered and np.any(np.diff(x) > 0):
        raise ValueError("exponents must be nonincreasing")
    u_n = _curve_u_n(curve, config)
    thr = np.asarray(config.v_grid) * u_n
    model = (g[None, :] * thr[:, None] ** (-x[None, :])).sum(axis=1)
    return float(np.sum(config.w * (curve.counts - model) ** 2))


def _profile(U, v, w, u_n, x, bounds=None):
    """Nonnegative (or box-bounded) weighted LS intensities for fixed exponents."""
    M = _design(v, u_n, x)
    sw = np.sqrt(w)
    scale = u_n ** np.asarray(x, dtype=float)
    if bounds is None:
        g, _ = optimize.nnls(sw[:, None] * M, sw * U)
    else:
        lo, hi = bounds
        res = optimize.lsq_linear(sw[:, None] * M, sw * U, bounds=(lo / scale, hi / scale), method="bvls")
        g = res.x
    gamma = g * scale
    resid = U - M @ g
    return gamma, float(np.sum(w * resid**2))


def profile_gammas(curve: TailCountCurve, config: ContrastConfig, exponents) -> np.ndarray:
    """Intensities minimizing the contrast for fixed exponents (constrained to be >= 0)."""
    u_n = _curve_u_n(curve, config)
    v = np.asarray(config.v_grid)
    x = np.atleast_1d(np.asarray(exponents, dtype=float))
    M = _design(v, u_n, x)
    if np.linalg.matrix_rank(M) < x.size:
        raise RankDeficientError(f"design matrix rank-deficient for exponents {x.tolist()}")
    gamma, _ = _profile(np.asarray(curve.counts, dtype=float), v, config.w, u_n, x)
    return gamma


# ordered exponents 2 >= x_1 >= ... >= x_j >= 0 <-> unconstrained t
def _to_x(t):
    x = np.empty_like(t)
    x[0] = 2.0 * special.expit(t[0])
    for i in range(1, t.size):
        x[i] = x[i - 1] * special.expit(t[i])
    return x


def _to_t(x):
    x = np.asarray(x, dtype=float)
    t = np.empty_like(x)
    t[0] = special.logit(x[0] / 2.0)
    for i in range(1, x.size):
        t[i] = special.logit(x[i] / x[i - 1])
    return t


def _clean_start(x, lo=0.02, hi=1.98):
    x = np.sort(np.clip(np.asarray(x, dtype=float), lo, hi))[::-1]
    # keep strictly ordered so the transform is finite
    for i in range(1, x.size):
        x[i] = min(x[i], x[i - 1] * (1 - 1e-3))
    return x


def _starts(j, prelim, config):
    rng = np.random.default_rng(config.seed)
    base = None
    if prelim is not None:
        b = prelim.beta[:j]
        if b.size == j and np.all(np.isfinite(b)):
            base = _clean_start(b)
    starts = []
    if base is not None:
        starts.append(base)
    n_pert = (config.n_starts - len(starts)) // 2 if base is not None else 0
    for _ in range(n_pert):
        starts.append(_clean_start(base + rng.normal(0.0, 0.15, j)))
    while len(starts) < config.n_starts:
        starts.append(_clean_start(rng.uniform(0.05, 1.95, j)))
    return starts


def minimize_contrast(
    curve: TailCountCurve,
    config: ContrastConfig,
    j: int,
    prelim: Optional[EstimateSet] = None,
    starts: Optional[Sequence] = None,
) -> EstimateSet:
    """Minimize the contrast over ``D`` (or over the box around ``prelim``).

    Nelder-Mead runs on unconstrained coordinates mapping onto the ordered
    exponents; intensities are profiled at every evaluation.  The lowest
    contrast across starts wins (ties go to the earlier start).
    """
    if len(config.v_grid) < 2 * j:
        raise ValueError(f"need at least 2j = {2 * j} thresholds, got {len(config.v_grid)}")
    u_n = _curve_u_n(curve, config)
    v = np.asarray(config.v_grid)
    w = config.w
    U = np.asarray(curve.counts, dtype=float)
    scale = float(np.sum(w * U**2)) + 1.0

    gbounds = None
    xbox = None
    if config.box is not None:
        if prelim is None or not np.all(prelim.usable[:j]):
            raise ValueError("a box needs complete preliminary estimates")
        hb, hg = config.box
        pb, pg = prelim.beta[:j], prelim.gamma[:j]
        xbox = (np.maximum(pb - hb, 0.0), np.minimum(pb + hb, 2.0))
        gbounds = (np.maximum(pg - hg, 0.0), np.maximum(pg + hg, 0.0))

    def objective(t):
        x = _to_x(t)
        if xbox is not None and (np.any(x < xbox[0]) or np.any(x > xbox[1])):
            return np.inf
        return _profile(U, v, w, u_n, x, gbounds)[1] / scale

    def residuals(t):
        x = _to_x(t)
        g, _ = _profile(U, v, w, u_n, x, gbounds)
        return np.sqrt(w) * (U - (g[None, :] * (v[:, None] * u_n) ** (-x[None, :])).sum(axis=1)) / math.sqrt(scale)

    if starts is None:
        starts = _starts(j, prelim, config)
    if xbox is not None:
        starts = [_clean_start(np.clip(s, xbox[0], xbox[1]), 0.0, 2.0) for s in starts]
    runs = []
    for k, s in enumerate(starts):
        t0 = _to_t(_clean_start(s))
        f0 = objective(t0)
        res = optimize.minimize(
            objective, t0, method="Nelder-Mead",
            options={"xatol": config.tol, "fatol": config.tol * 1e-8, "maxiter": config.max_iter,
                     "maxfev": 4 * config.max_iter, "adaptive": j > 2},
        )
        t_best, f_best, ok = res.x, float(res.fun), bool(res.success)
        if config.polish and np.isfinite(f_best) and xbox is None:
            try:
                pol = optimize.least_squares(residuals, t_best, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
                f_pol = objective(pol.x)
                if np.isfinite(f_pol) and f_pol <= f_best:
                    ok = ok or (pol.status > 0 and f_pol < f_best)
                    t_best, f_best = pol.x, f_pol
            except (ValueError, np.linalg.LinAlgError):
                pass
        runs.append({"start": [float(a) for a in _to_x(t0)], "start_value": f0 * scale,
                     "value": f_best * scale, "nit": int(res.nit), "nfev": int(res.nfev),
                     "converged": ok, "t": t_best})

    converged = [r for r in runs if r["converged"] and np.isfinite(r["value"])]
    diag = {"runs": [{k: r[k] for k in r if k != "t"} for r in runs]}
    if not converged:
        return EstimateSet(np.full(j, np.nan), np.full(j, np.nan), [Status.FAILED] * j, u_n,
                           v * u_n, kind="final", contrast=None,
                           diagnostics={**diag, "error": "no start converged"})
    best = min(range(len(runs)), key=lambda k: (not runs[k]["converged"], runs[k]["value"], k))
    x = _to_x(runs[best]["t"])
    g, phi = _profile(U, v, w, u_n, x, gbounds)
    diag["best_start"] = best
    return EstimateSet(x, g, [Status.OK] * j, u_n, v * u_n, kind="final", contrast=phi, diagnostics=diag)


def final_estimate(
    series,
    scheme: SamplingScheme,
    prelim: EstimateSet,
    config: ContrastConfig,
    side: str = ABSOLUTE,
    j: Optional[int] = None,
) -> EstimateSet:
    """Contrast-minimizing estimates from ``series`` (or a ready :class:`TailCountCurve`).

    ``j`` defaults to the number of preliminary indices; failed preliminary
    entries are simply replaced by spread-out starting points.
    """
    if not np.any(prelim.usable):
        raise ValueError("preliminary estimates carry no usable index")
    j = prelim.j if j is None else int(j)
    if isinstance(series, TailCountCurve):
        curve = series
    else:
        u_n = config.u_n if config.u_n is not None else prelim.u_n
        curve = tail_curve(series, np.asarray(config.v_grid) * u_n, side)
    return minimize_contrast(curve, config, j, prelim)


IDENTIFIABLE, BOUNDARY, NOT_IDENTIFIABLE = "identifiable", "boundary", "not-identifiable"


def identifiable_indices(betas: Sequence[float], rtol: float = 1e-12) -> list:
    """Per-index identifiability: index ``i >= 2`` needs ``beta_i > beta_1 / 2``."""
    b = [float(t) for t in betas]
    if not b:
        return []
    if any(not 0 < t < 2 for t in b):
        raise ValueError("indices must lie in (0, 2)")
    if any(b1 <= b2 for b1, b2 in zip(b, b[1:])):
        raise ValueError("indices must be strictly decreasing")
    out = [IDENTIFIABLE]
    half = b[0] / 2.0
    for t in b[1:]:
        if math.isclose(t, half, rel_tol=rtol, abs_tol=0.0):
            out.append(BOUNDARY)
        elif t > half:
            out.append(IDENTIFIABLE)
        else:
            out.append(NOT_IDENTIFIABLE)
    return out
