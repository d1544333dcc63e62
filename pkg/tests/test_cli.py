import csv
import io
import json

import numpy as np
import pytest

from ospc import power, validation
from ospc.cli import cmd_compare_pfs, cmd_convergence, cmd_simulate, cmd_tradeoff, main
from ospc.config import ConfigError, ExperimentConfig, ResultTable
from ospc.analysis import pfs_curve


def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"detla": 0.1})


@pytest.mark.parametrize("bad", [{"delta": 0.0}, {"delta": 1.0}, {"alpha": 0.5}, {"spectral_efficiencies": [0.0]}, {"fading": {"law": "exp", "bands": 0}}, {"fading": {"law": "rice"}}, {"arrival": {"law": "bernoulli", "p": 0.0}}, {"rate_unit": "bytes"}])
def test_range_checks(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_round_trip():
    cfg = ExperimentConfig(delta=0.05, fading={"law": "uniform", "B": 2.0, "bands": 3})
    again = ExperimentConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg
    assert again.fading_law().B == 2.0


def test_csv_is_plain_rfc_style():
    t = ResultTable(["a", "b"])
    t.add(0.1, 'x,"y"')
    t.add(np.float64(1e-20), 3)
    text = t.to_csv()
    assert text.splitlines()[0] == "a,b"
    assert text.endswith("\r\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1] == ["0.1", 'x,"y"'] and rows[2] == ["1e-20", "3"]
    with pytest.raises(ValueError):
        t.add(1)


def test_tradeoff_rows_non_increasing_in_delay():
    cfg = ExperimentConfig(spectral_efficiencies=[0.5, 4.0], delays=[1, 2, 3, 6])
    t = cmd_tradeoff(cfg)
    for g in (0.5, 4.0):
        e = [r[4] for r in t.rows if r[0] == g]
        assert all(a >= b for a, b in zip(e, e[1:]))


def test_tradeoff_gap_consistent_across_loads():
    t = cmd_tradeoff(ExperimentConfig(spectral_efficiencies=[0.5, 8.0], delays=[1, 3]))
    gaps = [t.rows[i][5] - t.rows[i + 1][5] for i in (0, 2)]
    assert abs(gaps[0] - gaps[1]) < 1.0


def test_tradeoff_bits_unit():
    nats = cmd_tradeoff(ExperimentConfig(spectral_efficiencies=[1.0], delays=[1]))
    bits = cmd_tradeoff(ExperimentConfig(spectral_efficiencies=[1.0 / np.log(2)], delays=[1], rate_unit="bits"))
    assert bits.rows[0][4] == pytest.approx(nats.rows[0][4] * np.log(2), rel=1e-9)


def test_compare_pfs_passes_pfs_curve_through():
    cfg = ExperimentConfig(kappas=[0.0, 2.0], spectral_efficiencies=[1.0, 4.0], snr_db=[-10, 20, 7], pfs_users=20)
    t = cmd_compare_pfs(cfg)
    pfs = [r for r in t.rows if r[0] == "pfs"]
    ref = pfs_curve(10 ** (np.linspace(-10, 20, 7) / 10), 20)
    assert [r[3] for r in pfs] == [p.energy("nats") for p in ref]
    ospc = {(r[1], r[2]): r[3] for r in t.rows if r[0] == "ospc"}
    assert all(ospc[(2.0, g)] < ospc[(0.0, g)] for g in (1.0, 4.0))


def test_convergence_small():
    cfg = ExperimentConfig(users=[4, 16], systems=6, ensemble_horizon=150, convergence_loads=[1.0])
    t = cmd_convergence(cfg)
    assert len(t.rows) == 2
    assert len(set(t.column("asymptotic"))) == 1
    assert all(lo <= hi for lo, hi in zip(t.column("min"), t.column("max")))


def test_simulate_seeded_and_delay_limited():
    cfg = ExperimentConfig(n_users=10, horizon=400, delay=1.0)
    t = cmd_simulate(cfg)
    assert np.allclose(t.column("mean_delay"), 1.0, rtol=1e-9)
    a = cmd_simulate(ExperimentConfig(n_users=10, horizon=2000, delay=3.0, seed=5))
    b = cmd_simulate(ExperimentConfig(n_users=10, horizon=2000, delay=3.0, seed=5))
    assert a.rows == b.rows
    assert np.mean(a.column("mean_delay")) == pytest.approx(3.0, rel=0.1)


def test_main_writes_csv_and_metadata(tmp_path):
    path = _write(tmp_path, {"spectral_efficiencies": [1.0], "delays": [1, 3]})
    out = tmp_path / "t.csv"
    assert main(["tradeoff", "--config", path, "--out", str(out), "--seed", "4"]) == 0
    rows = _rows(out.read_text())
    assert len(rows) == 2 and float(rows[1]["delay"]) == 3.0
    meta = json.loads((tmp_path / "t.csv.meta.json").read_text())
    assert meta["seed"] == 4 and meta["config"]["delays"] == [1, 3]


def test_main_json_is_reproducible_from_metadata(tmp_path, capsys):
    path = _write(tmp_path, {"n_users": 5, "horizon": 300})
    assert main(["simulate", "--config", path, "--format", "json"]) == 0
    first = json.loads(capsys.readouterr().out)
    again = _write(tmp_path, first["metadata"]["config"], "echo.json")
    assert main(["simulate", "--config", again, "--format", "json"]) == 0
    second = json.loads(capsys.readouterr().out)
    assert first["rows"] == second["rows"]


def test_main_error_exits(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tradeoff", "--config", str(tmp_path / "missing.json")])
    assert exc.value.code != 0
    assert main(["tradeoff", "--config", _write(tmp_path, {"bogus": 1})]) != 0
    assert main(["tradeoff", "--config", _write(tmp_path, {"delta": 2.0}, "d.json")]) != 0
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_validate_subset_exit_code(capsys):
    assert main(["validate", "--check", "10", "--check", "12"]) == 0
    assert "PASS" in capsys.readouterr().err


def test_flipped_exponent_breaks_optimality_check(monkeypatch):
    def corrupted(gains, rates, order, n0=1.0):
        d, r = np.asarray(gains, float), np.asarray(rates, float)
        order = np.asarray(order, int)
        rs = r[order]
        before = np.concatenate(([0.0], np.cumsum(rs)[:-1]))
        e = np.empty_like(d)
        e[order] = n0 / d[order] * np.exp(-before) * np.expm1(rs)
        return e

    monkeypatch.setattr(power, "decode_chain", corrupted)
    res = validation.run_check(5)
    assert not res.passed


def test_high_load_deviates_more_at_small_k():
    cfg = ExperimentConfig(users=[8], systems=20, ensemble_horizon=500, convergence_loads=[1.0, 4.0])
    t = cmd_convergence(cfg)
    dev = [abs(r[4] / r[6] - 1.0) for r in t.rows]
    assert dev[1] > dev[0]
