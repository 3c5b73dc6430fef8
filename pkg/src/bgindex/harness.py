"""Experiment configuration, Monte Carlo orchestration and result tables.

An experiment is described by a JSON document::

    {
      "schema_version": 1,
      "model": {"type": "stochvol", "beta1": 1.0, "beta2": 0.75, "p1": 0.05, "p2": 0.005},
      "scheme": {"n": 5000000},
      "prelim": {"j": 2},
      "contrast": {},
      "replicates": 100,
      "seed": 12345
    }

``model.type`` is ``"stochvol"`` (stochastic volatility with calibrated
stable components) or ``"explicit"`` (components listed with their tail
intensities).  ``scheme`` takes ``delta`` plus either ``n`` or ``horizon``.

Replicate ``r`` of master seed ``s`` is simulated with sub-seed
:func:`replicate_seed` ``(s, r)``, the first 64 bits of
``numpy.random.SeedSequence(s, spawn_key=(r,))``.  Results therefore do not
depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .counts import ABSOLUTE, _SIDES
from .estimators import ContrastConfig, PrelimConfig, Status, final_estimate, preliminary_estimate, sanitize
from .simulate import (
    EXACT,
    JUMP_RESOLVED,
    SECONDS_PER_DAY,
    ConstantVolatility,
    HestonJumpVolatility,
    ModelSpec,
    SamplingScheme,
    stochvol_model,
    simulate_path,
)
from .stable import StableLaw

SCHEMA_VERSION = 1
JOBS_ENV = "BGINDEX_JOBS"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


# ----------------------------------------------------------------------------
# configuration


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    extra = sorted(set(data) - names)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _model_from_dict(d) -> ModelSpec:
    if not isinstance(d, dict):
        raise ConfigError("model: expected an object")
    d = dict(d)
    kind = d.pop("type", "stochvol")
    try:
        if kind == "stochvol":
            allowed = {"beta1", "beta2", "p1", "p2", "delta", "sqrt_eta"}
            extra = sorted(set(d) - allowed)
            if extra:
                raise ConfigError(f"model: unknown field(s) {', '.join(extra)}")
            return stochvol_model(**d)
        if kind == "explicit":
            comps = tuple(
                _build(StableLaw, c, f"model.components[{i}]") for i, c in enumerate(d.pop("components", []))
            )
            vol = dict(d.pop("vol", {"type": "constant", "sigma": 0.0}))
            vkind = vol.pop("type", "constant")
            if vkind == "constant":
                v = _build(ConstantVolatility, vol, "model.vol")
            elif vkind == "heston":
                v = _build(HestonJumpVolatility, vol, "model.vol")
            else:
                raise ConfigError(f"model.vol.type: unknown volatility type {vkind!r}")
            extra = sorted(set(d) - {"drift", "x0"})
            if extra:
                raise ConfigError(f"model: unknown field(s) {', '.join(extra)}")
            return ModelSpec(components=comps, vol=v, **d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None
    raise ConfigError(f"model.type: unknown model type {kind!r}")


def _scheme_from_dict(d, default_delta) -> SamplingScheme:
    if not isinstance(d, dict):
        raise ConfigError("scheme: expected an object")
    extra = sorted(set(d) - {"n", "horizon", "delta"})
    if extra:
        raise ConfigError(f"scheme: unknown field(s) {', '.join(extra)}")
    delta = d.get("delta", default_delta)
    if delta is None:
        raise ConfigError("scheme.delta: required")
    if ("n" in d) == ("horizon" in d):
        raise ConfigError("scheme: give exactly one of n, horizon")
    try:
        if "n" in d:
            n = d["n"]
            if isinstance(n, float) and n.is_integer():
                n = int(n)
            if not isinstance(n, int) or isinstance(n, bool):
                raise ConfigError("scheme.n: must be an integer")
            return SamplingScheme.from_count(n, float(delta))
        return SamplingScheme(float(d["horizon"]), float(delta))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scheme: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a Monte Carlo experiment.

    ``raw`` keeps the validated JSON document; :meth:`to_dict` returns it so
    that configurations round-trip exactly.
    """

    model: ModelSpec
    scheme: SamplingScheme
    prelim: PrelimConfig = PrelimConfig()
    contrast: ContrastConfig = ContrastConfig()
    replicates: int = 1
    seed: int = 0
    mode: str = EXACT
    floor: Optional[float] = None
    substeps: int = 1
    side: str = ABSOLUTE
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("replicates: must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed: must be a nonnegative integer")
        if self.mode not in (EXACT, JUMP_RESOLVED):
            raise ConfigError(f"mode: must be {EXACT!r} or {JUMP_RESOLVED!r}")
        if self.mode == JUMP_RESOLVED and not (self.floor and self.floor > 0):
            raise ConfigError("floor: jump-resolved mode needs a positive floor")
        if self.side not in _SIDES:
            raise ConfigError(f"side: must be one of {_SIDES}")
        if not isinstance(self.substeps, int) or self.substeps < 1:
            raise ConfigError("substeps: must be an integer >= 1")

    @property
    def truth(self) -> dict:
        """True indices and integrated intensities ``A^i_T = a_i T``."""
        return {
            "beta": [float(b) for b in self.model.betas],
            "gamma": [float(a) * self.scheme.horizon for a in self.model.tail_intensities],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("top level: expected an object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
        known = {"schema_version", "model", "scheme", "prelim", "contrast", "replicates", "seed",
                 "mode", "floor", "substeps", "side", "output"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"top level: unknown field(s) {', '.join(extra)}")
        if "model" not in d or "scheme" not in d:
            raise ConfigError("top level: 'model' and 'scheme' are required")
        model_d = d["model"]
        default_delta = None
        if isinstance(model_d, dict) and model_d.get("type", "stochvol") == "stochvol":
            default_delta = model_d.get("delta", 0.01 / SECONDS_PER_DAY)
        scheme = _scheme_from_dict(d["scheme"], default_delta)
        if default_delta is not None and not math.isclose(scheme.delta, default_delta, rel_tol=1e-12):
            raise ConfigError("scheme.delta: must equal the mesh the model was calibrated at")
        return cls(
            model=_model_from_dict(model_d),
            scheme=scheme,
            prelim=_build(PrelimConfig, d.get("prelim"), "prelim"),
            contrast=_build(ContrastConfig, d.get("contrast"), "contrast"),
            replicates=d.get("replicates", 1),
            seed=d.get("seed", 0),
            mode=d.get("mode", EXACT),
            floor=d.get("floor"),
            substeps=d.get("substeps", 1),
            side=d.get("side", ABSOLUTE),
            output=dict(d.get("output") or {}),
            raw=json.loads(json.dumps(d)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(kw)
        return ExperimentConfig.from_dict(d)


# ----------------------------------------------------------------------------
# replicates


def replicate_seed(master: int, replicate: int) -> int:
    """64-bit sub-seed of ``replicate`` under ``master`` (stable across versions of this package)."""
    lo, hi = np.random.SeedSequence(master, spawn_key=(replicate,)).generate_state(2, np.uint32)
    return int(hi) << 32 | int(lo)


def _columns(j: int) -> list:
    cols = ["replicate", "seed"]
    for stage in ("prelim", "final"):
        for i in range(1, j + 1):
            cols += [f"{stage}_beta{i}", f"{stage}_gamma{i}", f"{stage}_status{i}"]
    return cols + ["u_n", "contrast", "error", "wall_time"]


def run_replicate(config: ExperimentConfig, replicate: int) -> dict:
    """simulate -> preliminary -> sanitize -> final, for one replicate.

    Failures are caught and reported in the ``error`` field.
    """
    j = config.prelim.j
    seed = replicate_seed(config.seed, replicate)
    row = {c: None for c in _columns(j)}
    row.update(replicate=replicate, seed=seed, error="")
    for stage in ("prelim", "final"):
        for i in range(1, j + 1):
            row[f"{stage}_beta{i}"] = math.nan
            row[f"{stage}_gamma{i}"] = math.nan
            row[f"{stage}_status{i}"] = Status.FAILED.value
    row["u_n"] = math.nan
    row["contrast"] = math.nan
    t0 = time.perf_counter()
    try:
        series = simulate_path(config.model, config.scheme, config.mode, seed, config.floor, config.substeps)
        pre = sanitize(preliminary_estimate(series, config.scheme, config.prelim, config.side))
        row["u_n"] = pre.u_n
        for i in range(j):
            row[f"prelim_beta{i + 1}"] = float(pre.beta[i])
            row[f"prelim_gamma{i + 1}"] = float(pre.gamma[i])
            row[f"prelim_status{i + 1}"] = pre.status[i].value
        if not np.any(pre.usable):
            row["error"] = "preliminary estimator failed"
        else:
            fin = final_estimate(series, config.scheme, pre, config.contrast, config.side, j)
            for i in range(j):
                row[f"final_beta{i + 1}"] = float(fin.beta[i])
                row[f"final_gamma{i + 1}"] = float(fin.gamma[i])
                row[f"final_status{i + 1}"] = fin.status[i].value
            row["contrast"] = math.nan if fin.contrast is None else float(fin.contrast)
            if Status.FAILED in fin.status:
                row["error"] = str(fin.diagnostics.get("note", "contrast minimization failed"))
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - t0
    return row


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV}: not an integer: {raw!r}") from None
    return max(1, n)


# ----------------------------------------------------------------------------
# results


def _stats(x: np.ndarray, truth: Optional[float]) -> dict:
    x = x[np.isfinite(x)]
    out = {"count": int(x.size)}
    if x.size == 0:
        out.update(mean=None, median=None, std=None, mad=None, rmse=None)
        return out
    med = float(np.median(x))
    out.update(
        mean=float(np.mean(x)),
        median=med,
        std=float(np.std(x, ddof=1)) if x.size > 1 else 0.0,
        mad=float(np.median(np.abs(x - med))),
        rmse=None if truth is None else float(np.sqrt(np.mean((x - truth) ** 2))),
    )
    return out


def summarize(rows: list, j: int, truth: Optional[dict] = None) -> dict:
    """Per-column summary (mean, median, std, MAD, RMSE against ``truth``)."""
    out = {}
    for stage in ("prelim", "final"):
        for i in range(1, j + 1):
            for name in ("beta", "gamma"):
                col = f"{stage}_{name}{i}"
                t = None
                if truth is not None and i <= len(truth[name]):
                    t = truth[name][i - 1]
                vals = np.array([r[col] for r in rows], dtype=float)
                out[col] = _stats(vals, t)
    out["failures"] = sum(1 for r in rows if r["error"])
    return out


@dataclass
class ResultTable:
    """One row per replicate plus a summary recomputable from the rows."""

    rows: list
    summary: dict
    j: int
    truth: Optional[dict] = None
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def columns(self) -> list:
        return _columns(self.j)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def recompute_summary(self) -> dict:
        return summarize(self.rows, self.j, self.truth)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\r\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _csv_value(r[k]) for k in self.columns})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    def to_json(self, path=None) -> str:
        doc = {"config": self.config, "truth": self.truth, "summary": self.summary,
               "rows": [{k: _json_value(v) for k, v in r.items()} for r in self.rows]}
        text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        rows = [{k: (math.nan if v is None and k != "error" else v) for k, v in r.items()} for r in doc["rows"]]
        j = sum(1 for k in rows[0] if k.startswith("final_beta")) if rows else 0
        return cls(rows, doc["summary"], j, doc.get("truth"), doc.get("config", {}))


def _csv_value(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def run_monte_carlo(config: ExperimentConfig, jobs: Optional[int] = None, progress=None) -> ResultTable:
    """Run ``config.replicates`` independent replicates.

    ``jobs`` defaults to the ``BGINDEX_JOBS`` environment variable (else 1).
    Rows are ordered by replicate index whatever the degree of parallelism.
    ``progress``, if given, is called with each finished row (serial runs only).
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    idx = range(config.replicates)
    if jobs == 1:
        rows = []
        for r in idx:
            rows.append(run_replicate(config, r))
            if progress is not None:
                progress(rows[-1])
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=jobs)(delayed(run_replicate)(config, r) for r in idx)
    rows.sort(key=lambda r: r["replicate"])
    truth = config.truth
    return ResultTable(rows, summarize(rows, config.prelim.j, truth), config.prelim.j, truth, config.to_dict())


def config_template() -> dict:
    """A minimal valid configuration (reduced-scale stochastic-volatility design)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "model": {"type": "stochvol", "beta1": 1.0, "beta2": 0.75, "p1": 0.05, "p2": 0.005},
        "scheme": {"n": 5_000_000},
        "prelim": asdict(PrelimConfig()),
        "contrast": {},
        "replicates": 100,
        "seed": 0,
    }
