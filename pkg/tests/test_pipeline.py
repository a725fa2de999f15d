import json
import os

import numpy as np
import pytest

from spinmarket.data import TickRecord, write_tick_csv
from spinmarket.errors import InvalidParameterError, ParseError, StageError
from spinmarket.pipeline import (
    SEED_ENV,
    RunConfig,
    build_config,
    partition_specs,
    read_config_file,
    run_pipeline,
)


def cfg_file(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_and_validation():
    with pytest.raises(InvalidParameterError):
        RunConfig().validate()
    cfg = RunConfig(input="gbm")
    cfg.validate()
    assert "out" not in cfg.parameters()
    for bad in (dict(levels=1), dict(window=2), dict(tolerance=0), dict(dt_mode="x"), dict(partitions="weekly")):
        with pytest.raises(InvalidParameterError):
            RunConfig(input="gbm", **bad).validate()


def test_partition_specs_repeat_last():
    assert partition_specs("day,fixed:5", 4) == ["day", "fixed:5", "fixed:5"]
    assert partition_specs("period:3600000", 2) == ["period:3600000"]
    with pytest.raises(InvalidParameterError):
        partition_specs("fixed:0", 2)


def test_config_file_parsing(tmp_path):
    p = cfg_file(tmp_path, "# comment\nwindow = 20  # trailing\n\nseed=3\n")
    assert read_config_file(p) == {"window": "20", "seed": "3"}
    with pytest.raises(ParseError) as info:
        read_config_file(cfg_file(tmp_path, "window = 20\nbogus = 1\n", "bad.cfg"))
    assert info.value.row == 2
    with pytest.raises(ParseError):
        read_config_file(cfg_file(tmp_path, "window 20\n", "bad2.cfg"))


def test_precedence(tmp_path):
    p = cfg_file(tmp_path, "input = gbm\nwindow = 20\nseed = 3\ntolerance = 0.2\n")
    cfg = build_config(p, {}, {})
    assert (cfg.window, cfg.seed, cfg.tolerance, cfg.levels) == (20, 3, 0.2, 3)
    cfg = build_config(p, {}, {SEED_ENV: "11"})
    assert cfg.seed == 11
    cfg = build_config(p, {"seed": 5, "window": None}, {SEED_ENV: "11"})
    assert (cfg.seed, cfg.window) == (5, 20)
    with pytest.raises(InvalidParameterError):
        build_config(p, {}, {SEED_ENV: "eleven"})


def test_relative_input_resolved_against_config(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    cfg = build_config(cfg_file(sub, "input = data/x.csv\n"), {}, {})
    assert cfg.input == os.path.join(str(sub), "data/x.csv")


def test_boolean_coercion(tmp_path):
    cfg = build_config(cfg_file(tmp_path, "input = gbm\nopen_close_only = yes\n"), {}, {})
    assert cfg.open_close_only is True
    with pytest.raises(InvalidParameterError):
        build_config(cfg_file(tmp_path, "input = gbm\nopen_close_only = maybe\n", "b.cfg"), {}, {})


def small_gbm(out, **kw):
    base = dict(input="gbm", out=str(out), gbm_n=3000, partitions="fixed:10,fixed:5", window=12, trend_window=8)
    base.update(kw)
    return build_config(None, base, {})


def test_gbm_run_layout(tmp_path):
    result = run_pipeline(small_gbm(tmp_path / "run"))
    files = sorted(os.listdir(tmp_path / "run"))
    assert files == sorted(
        ["alignment.csv", "events.csv", "manifest.json", "plot_stack.csv", "plot_stack.svg"]
        + [f"prices_level{k}.csv" for k in range(3)]
        + [f"temperature_level{k}.csv" for k in range(3)]
    )
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert set(manifest) == {"inputs", "seeds", "parameters", "stages", "levels", "events", "outputs"}
    assert manifest["events"] == result.n_events
    assert [lvl["samples"] for lvl in manifest["levels"]] == [3000, 300, 60]
    assert set(manifest["outputs"]) == set(files) - {"manifest.json"}
    # nothing but the run directory is left in the parent
    assert os.listdir(tmp_path) == ["run"]


def test_reruns_byte_identical(tmp_path):
    run_pipeline(small_gbm(tmp_path / "a", seed=4))
    run_pipeline(small_gbm(tmp_path / "b", seed=4))
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_seed_changes_output(tmp_path):
    run_pipeline(small_gbm(tmp_path / "a", seed=4))
    run_pipeline(small_gbm(tmp_path / "b", seed=5))
    assert (tmp_path / "a" / "prices_level0.csv").read_bytes() != (tmp_path / "b" / "prices_level0.csv").read_bytes()


def test_existing_output_needs_force(tmp_path):
    run_pipeline(small_gbm(tmp_path / "run"))
    with pytest.raises(StageError):
        run_pipeline(small_gbm(tmp_path / "run"))
    run_pipeline(small_gbm(tmp_path / "run"), force=True)


def test_constant_prices(tmp_path):
    src = tmp_path / "flat.csv"
    write_tick_csv(src, [TickRecord(1000 * i, 25.0, 1.0) for i in range(1, 2001)])
    run_pipeline(build_config(None, dict(input=str(src), out=str(tmp_path / "run"),
                                         partitions="fixed:10,fixed:4", window=8, trend_window=4), {}))
    assert (tmp_path / "run" / "events.csv").read_text().splitlines() == ["timestamp,spread,T0,T1,T2"]
    for k in range(3):
        lines = (tmp_path / "run" / f"temperature_level{k}.csv").read_text().splitlines()[1:]
        values = [ln.split(",")[1] for ln in lines]
        assert all(v in ("", "0") for v in values)
        assert values.count("0") > 0


def test_planted_golden(tmp_path, fixtures_dir, golden_dir):
    cfg = build_config(os.path.join(fixtures_dir, "planted_pipeline.cfg"), {"out": str(tmp_path / "run")}, {})
    result = run_pipeline(cfg)
    assert result.n_events == 2
    with open(os.path.join(golden_dir, "planted_events.csv"), "rb") as fh:
        assert (tmp_path / "run" / "events.csv").read_bytes() == fh.read()
    assert len(result.manifest["inputs"]) == 4


def test_missing_input_names_ingest(tmp_path):
    cfg = build_config(None, dict(input=str(tmp_path / "nope.csv"), out=str(tmp_path / "run")), {})
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "ingest"
    assert "ingest" in str(info.value)
    assert info.value.exit_code == 4
    assert os.listdir(tmp_path) == []


def test_too_short_names_stage(tmp_path):
    with pytest.raises(StageError) as info:
        run_pipeline(small_gbm(tmp_path / "run", gbm_n=200))
    assert info.value.stage == "renormalize"
    assert info.value.exit_code == 2
    assert os.listdir(tmp_path) == []


def test_ticks_fixture_runs(tmp_path, fixtures_dir):
    cfg = build_config(os.path.join(fixtures_dir, "ticks_pipeline.cfg"), {"out": str(tmp_path / "run")}, {})
    result = run_pipeline(cfg)
    levels = result.manifest["levels"]
    assert [lvl["samples"] for lvl in levels] == [9600, 120, 30]
    assert levels[0]["dt"] == 1.0
    assert np.all(np.diff([lvl["dt"] for lvl in levels]) > 0)
