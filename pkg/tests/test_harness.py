import csv
import json

import numpy as np
import pytest

from roughfou import harness
from roughfou.errors import ValidationError
from roughfou.fbm import SampleGrid, sample_fbm
from roughfou.fou import ModelSpec
from roughfou.harness import (Cell, ExperimentConfig, MCReport, PathFactory, aggregate,
                              emit_outputs, holder_exponent, pairwise_sum, run_cell, run_mc)

G2 = [[1.0, 2.0], [2.0, 5.0]]


def small_config(**kw):
    base = dict(model=ModelSpec([[2.0]], 1.0, 0.45), schedule=[(5.0, 256), (10.0, 512)],
                mc_paths=8, seed=3, mode="table1")
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValidationError):
        small_config(mode="table3")
    with pytest.raises(ValidationError):
        small_config(mc_paths=0)
    with pytest.raises(ValidationError):
        small_config(schedule=[(1.0,)])
    with pytest.raises(ValidationError):
        small_config(schedule=[(0.0, 10)])
    with pytest.raises(ValidationError):
        small_config(seed=-1)
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"model": {"gamma": [[1.0]], "hurst": 0.4}, "bogus": 1})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"schedule": []})


def test_config_json_roundtrip(tmp_path):
    cfg = small_config(hursts=[0.4, 0.5], schedule=[(5.0, 256), (7.0, 128, 0.35)])
    f = tmp_path / "c.json"
    f.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_json(f)
    assert back.to_dict() == cfg.to_dict()
    assert back.cells() == [Cell(0.4, 5.0, 256), Cell(0.5, 5.0, 256), Cell(0.35, 7.0, 128)]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        ExperimentConfig.from_json(bad)


def test_presets_shape():
    assert len(harness.table1_config().cells()) == 36
    t2 = harness.table2_config().cells()
    assert len(t2) == 12
    assert Cell(0.45, 40.0, 2 ** 13) in t2 and Cell(0.35, 14.0, 2 ** 11) in t2
    assert [c.n for c in harness.freq_sweep_config().cells()][:7] == [2 ** k for k in range(8, 15)]
    assert all(c.T == 80.0 and c.n == 2 ** 13 for c in harness.boxplot_config().cells())


def test_pairwise_sum_and_aggregate():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((37, 2, 2))
    assert np.allclose(pairwise_sum(a), a.sum(axis=0), rtol=1e-13)
    mean, std = aggregate(a)
    assert np.allclose(mean, a.mean(axis=0), rtol=1e-13)
    assert np.allclose(std, a.std(axis=0, ddof=1), rtol=1e-12)
    m1, s1 = aggregate(a[:1])
    assert np.array_equal(m1, a[0]) and not s1.any()
    assert np.isnan(aggregate(a[:0])[0]).all()
    assert pairwise_sum(a[:0]).shape == (2, 2)


def test_noiseless_single_path():
    # sigma = 0: the trapezoid areas 1/2 dX^2 telescope the numerator to -X_0^2 / 2 and the
    # Euler path gives h sum X_l^2 = 1 / (g (2 - g h)), so the estimate is g (1 - g h / 2)
    for n in (4096, 8192):
        cfg = ExperimentConfig(ModelSpec([[2.0]], 0.0, 0.4, x0=[1.0]), [(40.0, n)], mc_paths=1, seed=0)
        rep = run_mc(cfg)[0]
        h = 40.0 / n
        assert rep.mean[0, 0] == pytest.approx(2.0 * (1 - h), rel=1e-12)
        assert rep.std[0, 0] == 0.0 and rep.ok
    # with the default x0 = 0 the noiseless path is identically zero: every path is singular
    rep = run_mc(ExperimentConfig(ModelSpec([[2.0]], 0.0, 0.4), [(4.0, 64)], mc_paths=1))[0]
    assert rep.n_failed == 1 and not rep.ok


def test_serial_parallel_equivalence():
    cfg = small_config(model=ModelSpec(G2, 1.0, 0.45), mc_paths=24)
    serial = run_cell(cfg, cfg.cells()[1])
    cfg.threads = 4
    parallel = run_cell(cfg, cfg.cells()[1])
    assert np.array_equal(serial.samples, parallel.samples)
    assert np.max(np.abs(serial.mean - parallel.mean)) <= 1e-12
    assert np.max(np.abs(serial.std - parallel.std)) <= 1e-12
    assert np.all(serial.std >= 0)


def test_failures_are_counted(monkeypatch):
    real = PathFactory.estimate

    def flaky(self, i):
        return None if i in (2, 5) else real(self, i)

    monkeypatch.setattr(PathFactory, "estimate", flaky)
    rep = run_cell(small_config(mc_paths=10), Cell(0.45, 5.0, 256))
    assert rep.n_failed == 2 and rep.samples.shape == (8, 1, 1) and not rep.ok
    rep = run_cell(small_config(mc_paths=300), Cell(0.45, 5.0, 256))
    assert rep.n_failed == 2 and rep.ok


def test_emit_outputs_table(tmp_path):
    cfg = small_config()
    reports = run_mc(cfg)
    files = emit_outputs(reports, cfg, tmp_path)
    rows = list(csv.reader(files["table"].open()))
    assert rows[0] == ["H", "T", "n", "h", "entry_i", "entry_j", "mean", "std"]
    assert len(rows) == 1 + 2
    assert float(rows[1][3]) == 5.0 / 256
    manifest = json.loads(files["manifest"].read_text())
    assert manifest["seed"] == 3 and manifest["config"]["mode"] == "table1"
    assert {"roughfou", "numpy", "scipy", "python", "kernel_backend"} <= set(manifest["versions"])


def test_table_row_counts(tmp_path):
    cfg = harness.table1_config(mc_paths=2)
    reports = run_mc(cfg)
    f = harness.write_table_csv(reports, tmp_path / "t1.csv")
    assert len(f.read_text().splitlines()) == 1 + 36
    cfg = harness.table2_config(mc_paths=2)
    cfg.schedule = [(T / 8, n // 8, H) for T, n, H in cfg.schedule]
    reports = run_mc(cfg)
    assert len(reports) == 12 and all(r.mean.shape == (2, 2) for r in reports)
    f = harness.write_table_csv(reports, tmp_path / "t2.csv")
    assert len(f.read_text().splitlines()) == 1 + 12 * 4


def test_empty_schedule_header_only(tmp_path):
    cfg = small_config(schedule=[])
    files = emit_outputs(run_mc(cfg), cfg, tmp_path)
    assert files["table"].read_text() == "H,T,n,h,entry_i,entry_j,mean,std\n"


def test_boxplot_and_freq_sweep_outputs(tmp_path):
    cfg = small_config(mode="boxplot", hursts=[0.4, 0.5], schedule=[(5.0, 256)])
    files = emit_outputs(run_mc(cfg), cfg, tmp_path / "box")
    rows = list(csv.reader(files["boxplot_H0.4"].open()))
    assert rows[0] == ["path", "gamma_11"] and len(rows) == 1 + 8
    cfg = small_config(mode="freq_sweep", model=ModelSpec(G2, 1.0, 0.45),
                       schedule=[(5.0, 2 ** k) for k in (6, 7, 8)])
    files = emit_outputs(run_mc(cfg), cfg, tmp_path / "fs")
    rows = list(csv.reader(files["freq_sweep"].open()))
    assert rows[0] == ["H", "T", "n", "h", "entry_i", "entry_j", "mean"]
    assert [r[2] for r in rows[1:]] == ["64", "128", "256"]
    assert all(r[4:6] == ["1", "2"] for r in rows[1:])


def test_emit_outputs_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small_config(schedule=[])
    with pytest.raises(OSError, match=str(blocker)):
        emit_outputs([], cfg, blocker / "sub")


def test_deterministic_bytes(tmp_path):
    cfg = small_config(model=ModelSpec(G2, 1.0, 0.4))
    a = emit_outputs(run_mc(cfg), cfg, tmp_path / "a")["table"].read_bytes()
    b = emit_outputs(run_mc(cfg), cfg, tmp_path / "b")["table"].read_bytes()
    assert a == b


def test_holder_exponent_brownian():
    g = SampleGrid(40.0, 2 ** 14)
    slopes = [holder_exponent(sample_fbm(0.5, g, 1, s).values[0]) for s in range(5)]
    assert all(abs(s - 0.5) < 0.05 for s in slopes)
    with pytest.raises(ValidationError):
        holder_exponent(np.zeros(100))


def test_diagnostics_small():
    cfg = small_config(model=ModelSpec([[2.0]], 1.0, 0.5), mc_paths=200)
    rep = harness.diagnostics(cfg, zero_n=2 ** 10, ergodic_T=50.0, ergodic_paths=5, area_T=100.0)
    names = [c.name for c in rep.checks]
    assert names == ["chen_defect", "zero_expectation", "c1_limit", "c2_limit",
                     "strat_area_decay", "holder_exponent"]
    assert all(line.startswith(("[PASS]", "[FAIL]")) for line in rep.lines())
    assert rep.checks[0].passed
