"""Discretely sampled paths of Levy sums and of a Heston-type model with stable jumps.

Time is measured in trading days (one day = 6.5 h = 23 400 s); all rates
(mean reversion, jump intensities, tail intensities) are per day.

Random streams
--------------
``simulate_path(..., seed=s)`` draws the Brownian/volatility part from the
stream ``SeedSequence(s, spawn_key=(0,))`` and jump component ``i`` (0-based)
from ``SeedSequence(s, spawn_key=(i + 1,))``.  The total increment is the sum
of the parts in that order, so a multi-component path is exactly the sum of the
parts simulated separately with :func:`diffusion_increments` and
:func:`component_increments` on the same streams.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .stable import StableLaw, increment

SECONDS_PER_DAY = 6.5 * 3600.0

EXACT = "exact"
JUMP_RESOLVED = "jump-resolved"


@dataclass(frozen=True)
class ConstantVolatility:
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class HestonJumpVolatility:
    """``dv = kappa (eta - v) dt + gamma_vol sqrt(v) dB + dJ`` with ``d<W,B> = rho_corr dt``.

    ``J`` is compound Poisson with rate ``jump_intensity`` and marks uniform on
    ``[-jump_half_width, jump_half_width]``.
    """

    kappa: float
    eta: float
    gamma_vol: float
    rho_corr: float
    v0: float
    jump_intensity: float = 0.0
    jump_half_width: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if abs(self.rho_corr) > 1:
            raise ValueError("rho_corr must lie in [-1, 1]")
        if self.v0 < 0:
            raise ValueError("v0 must be nonnegative")
        if self.jump_intensity < 0 or self.jump_half_width < 0:
            raise ValueError("volatility jump parameters must be nonnegative")


VolatilitySpec = Union[ConstantVolatility, HestonJumpVolatility]


@dataclass(frozen=True)
class ModelSpec:
    """``dX = b dt + sigma_t dW + sum_i dY^i`` with independent symmetric stable ``Y^i``."""

    components: tuple = ()
    vol: VolatilitySpec = ConstantVolatility(0.0)
    drift: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            if not isinstance(c, StableLaw):
                raise TypeError("components must be StableLaw instances")
        betas = [c.beta for c in comps]
        if any(b1 <= b2 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("component indices must be strictly decreasing")

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.components])

    @property
    def tail_intensities(self) -> np.ndarray:
        return np.array([c.tail_intensity for c in self.components])


@dataclass(frozen=True)
class SamplingScheme:
    horizon: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.n < 1:
            raise ValueError("the scheme must contain at least one increment")

    @property
    def n(self) -> int:
        # guard against T/delta landing a hair below an integer
        return int(math.floor(self.horizon / self.delta * (1 + 1e-12)))

    @classmethod
    def from_count(cls, n: int, delta: float) -> "SamplingScheme":
        return cls(horizon=n * delta, delta=delta)


@dataclass
class IncrementSeries:
    """Observed increments at mesh ``delta``.

    ``jump_record`` is an ``(k, 2)`` array of ``(time, size)`` rows sorted by
    time, holding every simulated jump with ``|size| > floor``.
    """

    delta: float
    increments: np.ndarray
    jump_record: Optional[np.ndarray] = None
    floor: Optional[float] = None

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=np.float64)
        if self.jump_record is not None:
            rec = np.asarray(self.jump_record, dtype=np.float64).reshape(-1, 2)
            if rec.size and np.any(np.diff(rec[:, 0]) < 0):
                raise ValueError("jump record must be sorted by time")
            self.jump_record = rec

    @property
    def n(self) -> int:
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return self.n * self.delta


def stream(seed: int, key: int) -> np.random.Generator:
    """Random stream number ``key`` of a path seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def truncated_variance(law: StableLaw, floor: float) -> float:
    """``int_{|x|<=floor} x^2 F(dx)`` per unit time."""
    b = law.beta
    return law.tail_intensity * b * floor ** (2.0 - b) / (2.0 - b)


def integrated_tail(model: ModelSpec, u: float, t: float) -> float:
    """``t * sum_i a_i / u^beta_i``, the integrated jump tail of a Levy model."""
    if u <= 0:
        raise ValueError("threshold must be positive")
    if t < 0:
        raise ValueError("time must be nonnegative")
    return float(t * sum(c.tail_intensity / u**c.beta for c in model.components))


def component_increments(
    law: StableLaw,
    scheme: SamplingScheme,
    rng: np.random.Generator,
    mode: str = EXACT,
    floor: Optional[float] = None,
):
    """Increments of one stable component, plus its jump record in jump-resolved mode.

    Jump-resolved mode draws the jumps with ``|x| > floor`` as a compound Poisson
    process and replaces the remaining small jumps by a centered Gaussian with the
    truncated-measure variance.
    """
    n, dt = scheme.n, scheme.delta
    if mode == EXACT:
        return increment(law, dt, rng, size=n), None
    if mode != JUMP_RESOLVED:
        raise ValueError(f"unknown simulation mode {mode!r}")
    if floor is None or not floor > 0:
        raise ValueError("jump-resolved mode needs a positive floor")
    s2 = truncated_variance(law, floor)
    if math.sqrt(s2) / floor < 5.0:
        raise ValueError(
            f"floor {floor} too coarse for the Gaussian small-jump approximation "
            f"(sigma(floor)/floor = {math.sqrt(s2) / floor:.3g} < 5)"
        )
    horizon = n * dt
    njumps = rng.poisson(law.tail_intensity * floor ** (-law.beta) * horizon)
    times = np.sort(rng.uniform(0.0, horizon, njumps))
    sizes = floor * rng.random(njumps) ** (-1.0 / law.beta)
    sizes *= np.where(rng.random(njumps) < 0.5, -1.0, 1.0)
    idx = np.minimum((times / dt).astype(np.int64), n - 1)
    out = np.bincount(idx, weights=sizes, minlength=n)
    out += math.sqrt(s2 * dt) * rng.standard_normal(n)
    return out, np.column_stack([times, sizes])


@numba.njit(cache=True)
def _heston_kernel(z1, z2, vjumps, v0, kappa, eta, gam, rho, dt, m):
    n = z1.shape[0] // m
    dx = np.empty(n)
    vpath = np.empty(n)
    sq = math.sqrt(dt)
    r2 = math.sqrt(max(1.0 - rho * rho, 0.0))
    v = v0
    k = 0
    for i in range(n):
        acc = 0.0
        vpath[i] = v if v > 0.0 else 0.0
        for _ in range(m):
            vp = v if v > 0.0 else 0.0
            s = math.sqrt(vp)
            acc += s * sq * (rho * z1[k] + r2 * z2[k])
            v = v + kappa * (eta - vp) * dt + gam * s * sq * z1[k] + vjumps[k]
            k += 1
        dx[i] = acc
    return dx, vpath


def heston_increments(
    vol: HestonJumpVolatility, scheme: SamplingScheme, rng: np.random.Generator, substeps: int = 1
):
    """Full-truncation Euler for the variance; returns ``(sigma dW increments, variance path)``.

    The variance path holds the truncated variance ``max(v, 0)`` at the start of
    each observation interval.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n, m = scheme.n, int(substeps)
    dt = scheme.delta / m
    z1 = rng.standard_normal(n * m)
    z2 = rng.standard_normal(n * m)
    vjumps = np.zeros(n * m)
    if vol.jump_intensity > 0 and vol.jump_half_width > 0:
        horizon = n * scheme.delta
        k = rng.poisson(vol.jump_intensity * horizon)
        times = rng.uniform(0.0, horizon, k)
        marks = rng.uniform(-vol.jump_half_width, vol.jump_half_width, k)
        idx = np.minimum((times / dt).astype(np.int64), n * m - 1)
        vjumps = np.bincount(idx, weights=marks, minlength=n * m)
    return _heston_kernel(
        z1, z2, vjumps, vol.v0, vol.kappa, vol.eta, vol.gamma_vol, vol.rho_corr, dt, m
    )


def diffusion_increments(
    model: ModelSpec, scheme: SamplingScheme, rng: np.random.Generator, substeps: int = 1
) -> np.ndarray:
    """Drift plus continuous martingale increments."""
    n, dt = scheme.n, scheme.delta
    vol = model.vol
    if isinstance(vol, ConstantVolatility):
        out = vol.sigma * math.sqrt(dt) * rng.standard_normal(n)
    elif isinstance(vol, HestonJumpVolatility):
        out, _ = heston_increments(vol, scheme, rng, substeps)
    else:
        raise TypeError(f"unsupported volatility spec {type(vol).__name__}")
    if model.drift:
        out = out + model.drift * dt
    return out


def simulate_path(
    model: ModelSpec,
    scheme: SamplingScheme,
    mode: str = EXACT,
    seed: int = 0,
    floor: Optional[float] = None,
    substeps: int = 1,
) -> IncrementSeries:
    """Simulate the increments of ``model`` on ``scheme``.

    Parameters
    ----------
    mode : {"exact", "jump-resolved"}
        ``"exact"`` draws every stable increment exactly; ``"jump-resolved"``
        records individual jumps above ``floor`` (see :func:`component_increments`).
    seed : int
        Master seed; identical arguments give bit-identical output.
    """
    if mode not in (EXACT, JUMP_RESOLVED):
        raise ValueError(f"unknown simulation mode {mode!r}")
    if mode == JUMP_RESOLVED and (floor is None or not floor > 0):
        raise ValueError("jump-resolved mode needs a positive floor")
    total = diffusion_increments(model, scheme, stream(seed, 0), substeps)
    records = []
    for i, law in enumerate(model.components):
        inc, rec = component_increments(law, scheme, stream(seed, i + 1), mode, floor)
        total = total + inc
        if rec is not None:
            records.append(rec)
    jump_record = None
    if mode == JUMP_RESOLVED:
        rec = np.concatenate(records) if records else np.empty((0, 2))
        jump_record = rec[np.argsort(rec[:, 0], kind="stable")]
    return IncrementSeries(scheme.delta, total, jump_record, floor if mode == JUMP_RESOLVED else None)


# binary increment dump: little-endian header then float64 payload
_MAGIC = b"BGIX"
_HEADER = struct.Struct("<4sIqdqd")  # magic, version, n, delta, n_jumps (-1: none), floor


def write_increments(path, series: IncrementSeries) -> None:
    """Write ``series`` as ``BGIX`` v1: header, ``n`` increments, then ``2 * n_jumps`` floats."""
    rec = series.jump_record
    njumps = -1 if rec is None else rec.shape[0]
    floor = float("nan") if series.floor is None else float(series.floor)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, series.n, float(series.delta), njumps, floor))
        fh.write(np.ascontiguousarray(series.increments, dtype="<f8").tobytes())
        if rec is not None:
            fh.write(np.ascontiguousarray(rec, dtype="<f8").tobytes())


def read_increments(path) -> IncrementSeries:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, delta, njumps, floor = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a BGIX v1 increment file")
    off = _HEADER.size
    need = off + 8 * n + (16 * njumps if njumps > 0 else 0)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(data)}")
    inc = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
    rec = None
    if njumps >= 0:
        rec = np.frombuffer(data, dtype="<f8", count=2 * njumps, offset=off + 8 * n)
        rec = rec.astype(np.float64).reshape(-1, 2)
    return IncrementSeries(delta, inc, rec, None if math.isnan(floor) else floor)


def stochvol_model(
    beta1: float = 1.0,
    beta2: float = 0.75,
    p1: float = 0.05,
    p2: float = 0.005,
    delta: float = 0.01 / SECONDS_PER_DAY,
    sqrt_eta: float = 0.25,
) -> ModelSpec:
    """Stochastic-volatility model with two stable jump components and calibrated tails.

    Each component's tail intensity is chosen so that
    ``P(|Delta Y^i| >= 4 sqrt(eta) sqrt(delta)) = p_i``.
    """
    from .stable import calibrate_intensity

    eta = sqrt_eta**2
    thr = 4.0 * sqrt_eta * math.sqrt(delta)
    comps = tuple(
        StableLaw(b, calibrate_intensity(b, delta, thr, p))
        for b, p in ((beta1, p1), (beta2, p2))
    )
    vol = HestonJumpVolatility(
        kappa=5.0, eta=eta, gamma_vol=0.5, rho_corr=-0.5, v0=eta,
        jump_intensity=10.0, jump_half_width=0.3,
    )
    return ModelSpec(components=comps, vol=vol, drift=0.0, x0=1.0)
