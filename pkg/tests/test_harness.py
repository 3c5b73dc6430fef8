import csv
import io
import json
import math

import numpy as np
import pytest

from bgindex.estimators import PrelimConfig, final_estimate, preliminary_estimate, sanitize
from bgindex.harness import (
    JOBS_ENV,
    ConfigError,
    ExperimentConfig,
    ResultTable,
    config_template,
    default_jobs,
    replicate_seed,
    run_monte_carlo,
    run_replicate,
)
from bgindex.simulate import HestonJumpVolatility, simulate_path


def levy_config(**over):
    d = {
        "schema_version": 1,
        "model": {"type": "explicit", "components": [
            {"beta": 1.5, "tail_intensity": 1.0}, {"beta": 1.0, "tail_intensity": 1.0}]},
        "scheme": {"horizon": 1.0, "delta": 1e-5},
        "prelim": {"j": 2},
        "contrast": {"n_starts": 4},
        "replicates": 3,
        "seed": 7,
    }
    d.update(over)
    return ExperimentConfig.from_dict(d)


def strip_time(rows):
    return [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]


def same_rows(a, b):
    for x, y in zip(strip_time(a), strip_time(b)):
        assert x.keys() == y.keys()
        for k in x:
            if isinstance(x[k], float) and math.isnan(x[k]):
                assert isinstance(y[k], float) and math.isnan(y[k])
            else:
                assert x[k] == y[k], k
    assert len(a) == len(b)


# ----------------------------------------------------------------------------
# configuration


def test_template_is_valid():
    cfg = ExperimentConfig.from_dict(config_template())
    assert cfg.scheme.n == 5_000_000
    assert cfg.truth["beta"] == [1.0, 0.75]
    assert cfg.scheme.delta == pytest.approx(0.01 / 23400)


def test_truth_scales_with_horizon():
    cfg = levy_config(scheme={"horizon": 2.0, "delta": 1e-3})
    assert cfg.truth == {"beta": [1.5, 1.0], "gamma": [2.0, 2.0]}


def test_explicit_heston_model():
    cfg = levy_config(model={"type": "explicit", "components": [{"beta": 1.2, "tail_intensity": 0.5}],
                             "vol": {"type": "heston", "kappa": 5.0, "eta": 0.06, "gamma_vol": 0.5,
                                     "rho_corr": -0.5, "v0": 0.06}, "drift": 0.1})
    assert isinstance(cfg.model.vol, HestonJumpVolatility)
    assert cfg.model.drift == 0.1


def test_round_trip_and_overrides():
    cfg = levy_config()
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.with_overrides(seed=9).seed == 9


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"schema_version": 2}, "schema_version"),
        ({"replicates": 0}, "replicates"),
        ({"seed": -1}, "seed"),
        ({"bogus": 1}, "bogus"),
        ({"prelim": {"j": 0}}, "prelim"),
        ({"prelim": {"jj": 2}}, "prelim"),
        ({"contrast": {"v_grid": [2.0, 3.0]}}, "contrast"),
        ({"scheme": {"n": 10, "horizon": 1.0, "delta": 0.1}}, "scheme"),
        ({"scheme": {"n": 10.5, "delta": 0.1}}, "scheme.n"),
        ({"mode": "jump-resolved"}, "floor"),
        ({"mode": "fast"}, "mode"),
        ({"side": "both"}, "side"),
        ({"model": {"type": "explicit", "components": [{"beta": 2.5, "tail_intensity": 1.0}]}},
         "model.components[0]"),
        ({"model": {"type": "explicit", "vol": {"type": "garch"}}}, "model.vol.type"),
        ({"model": {"type": "mystery"}}, "model.type"),
        ({"model": {"type": "stochvol", "beta3": 0.2}}, "model"),
    ],
)
def test_config_errors_name_the_field(patch, field):
    d = levy_config().to_dict()
    d.update(patch)
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        ExperimentConfig.from_dict(d)


def test_stochvol_mesh_must_match():
    d = config_template()
    d["scheme"] = {"n": 1000, "delta": 1e-3}
    with pytest.raises(ConfigError, match="scheme.delta"):
        ExperimentConfig.from_dict(d)


def test_load_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  "model": \n}\n')
    with pytest.raises(ConfigError, match="line 4 column 1"):
        ExperimentConfig.load(p)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


# ----------------------------------------------------------------------------
# seeds and replicates


def test_replicate_seed_rule():
    s = np.random.SeedSequence(7, spawn_key=(3,)).generate_state(2, np.uint32)
    assert replicate_seed(7, 3) == int(s[1]) << 32 | int(s[0])
    seeds = {replicate_seed(7, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert replicate_seed(7, 0) != replicate_seed(8, 0)


def test_single_replicate_equals_direct_run():
    cfg = levy_config(replicates=1)
    table = run_monte_carlo(cfg)
    seed = replicate_seed(7, 0)
    x = simulate_path(cfg.model, cfg.scheme, seed=seed)
    pre = sanitize(preliminary_estimate(x, cfg.scheme, cfg.prelim))
    fin = final_estimate(x, cfg.scheme, pre, cfg.contrast, j=2)
    row = table.rows[0]
    assert row["seed"] == seed
    for i in range(2):
        for stage, e in (("prelim", pre), ("final", fin)):
            got, want = row[f"{stage}_beta{i + 1}"], float(e.beta[i])
            assert got == want or (math.isnan(got) and math.isnan(want))


def test_determinism():
    cfg = levy_config()
    same_rows(run_monte_carlo(cfg).rows, run_monte_carlo(cfg).rows)


def test_parallel_matches_serial():
    cfg = levy_config()
    same_rows(run_monte_carlo(cfg, jobs=1).rows, run_monte_carlo(cfg, jobs=2).rows)


def test_failures_are_recorded_not_raised():
    # a threshold far above every increment makes the preliminary stage fail
    cfg = levy_config(prelim={"j": 2, "u_n": 1e6}, replicates=2)
    table = run_monte_carlo(cfg)
    assert len(table) == 2
    assert all(r["error"] for r in table.rows)
    assert table.summary["failures"] == 2


def test_progress_callback():
    seen = []
    run_monte_carlo(levy_config(replicates=2), progress=seen.append)
    assert [r["replicate"] for r in seen] == [0, 1]


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv(JOBS_ENV, "3")
    assert default_jobs() == 3
    monkeypatch.setenv(JOBS_ENV, "lots")
    with pytest.raises(ConfigError):
        default_jobs()
    monkeypatch.delenv(JOBS_ENV)
    assert default_jobs() == 1


# ----------------------------------------------------------------------------
# result tables


@pytest.fixture(scope="module")
def table():
    return run_monte_carlo(levy_config(replicates=4))


def test_row_count_and_columns(table):
    assert len(table) == 4
    assert list(table.rows[0]) == table.columns


def test_summary_recomputes_exactly(table):
    assert table.recompute_summary() == table.summary


def test_summary_against_direct_statistics(table):
    b = table.column("final_beta1")
    b = b[np.isfinite(b)]
    s = table.summary["final_beta1"]
    assert s["mean"] == pytest.approx(b.mean(), rel=1e-15)
    assert s["rmse"] == pytest.approx(math.sqrt(np.mean((b - 1.5) ** 2)), rel=1e-15)
    assert s["count"] == b.size


def test_csv_layout(table):
    text = table.to_csv()
    assert text.endswith("\r\n")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 4
    assert rows[0]["seed"] == str(replicate_seed(7, 0))
    assert float(rows[0]["final_beta1"]) == table.rows[0]["final_beta1"]


def test_csv_writes_nan_as_empty():
    t = ResultTable([{**{c: math.nan for c in ResultTable([], {}, 1).columns},
                      "replicate": 0, "seed": 1, "error": "x", "final_status1": "failed",
                      "prelim_status1": "failed"}], {}, 1)
    row = next(csv.DictReader(io.StringIO(t.to_csv())))
    assert row["final_beta1"] == "" and row["error"] == "x"


def test_json_round_trip(table, tmp_path):
    text = table.to_json(tmp_path / "t.json")
    json.loads(text)
    back = ResultTable.from_json((tmp_path / "t.json").read_text())
    assert back.j == 2
    assert back.summary == table.summary
    same_rows(back.rows, table.rows)
    assert back.recompute_summary() == table.summary


def test_prelim_defaults_in_template_round_trip():
    d = config_template()
    assert ExperimentConfig.from_dict(d).prelim == PrelimConfig()
