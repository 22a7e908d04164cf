import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from kerrmet.cli import (
    ConfigError,
    ExperimentConfig,
    OptimizeCache,
    build_config,
    main,
    parse_eta_list,
    parse_n_range,
)
from kerrmet.optimizer import OptimizationProblem


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    rows = list(csv.DictReader(body))
    return comments, rows


def body_without_timing(path):
    comments, rows = read_csv(path)
    for row in rows:
        row.pop("wall_time_ms")
    return comments, rows


def test_parse_n_range():
    assert parse_n_range("1:5:2") == (1, 3, 5)
    assert parse_n_range("4:6") == (4, 5, 6)
    assert parse_n_range("7") == (7,)
    with pytest.raises(ConfigError):
        parse_n_range("abc")
    with pytest.raises(ConfigError):
        parse_n_range("1:5:0")


def test_parse_eta_list():
    assert parse_eta_list("0.9,1.0") == (0.9, 1.0)
    with pytest.raises(ConfigError):
        parse_eta_list("0.9,x")


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(command="nope", n_range=(1,), eta_list=(1.0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(command="pure-qfi", n_range=(), eta_list=(1.0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(command="pure-qfi", n_range=(1,), eta_list=(1.5,))
    with pytest.raises(ConfigError):
        ExperimentConfig(command="single", n_range=(2,), eta_list=(1.0,))


def test_config_file_with_flag_override(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps(
        {"command": "pure-qfi", "n_range": "2:3", "chi": 0.5, "seed": 9}))
    config = build_config(["--config", str(config_file), "--chi", "0.125"])
    assert config.command == "pure-qfi"
    assert config.n_range == (2, 3)
    assert config.chi == 0.125  # flag wins
    assert config.seed == 9


def test_unknown_config_field_rejected(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"command": "pure-qfi", "bogus": 1}))
    with pytest.raises(ConfigError):
        build_config(["--config", str(config_file)])


def test_missing_command_is_config_error():
    assert main([]) == 2


def test_pure_qfi_records(tmp_path):
    out = tmp_path / "pure.csv"
    code = main(["--command", "pure-qfi", "--n-range", "1:6:1",
                 "--chi", "0.1", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    assert len(rows) == sum(n + 1 for n in range(1, 7))
    for row in rows:
        qfi = float(row["qfi"])
        analytic = float(row["qfi_analytic"])
        assert abs(qfi - analytic) <= 1e-9 * max(1.0, analytic)
        qcrb = float(row["qcrb"])
        if qfi > 0:
            assert qcrb == pytest.approx(1 / math.sqrt(qfi), rel=1e-12)
        else:
            assert math.isinf(qcrb)


def test_single_photon_interferometer_record(tmp_path):
    out = tmp_path / "single.csv"
    code = main(["--command", "single", "--n-range", "1", "--k", "0",
                 "--chi", "0", "--m", "1", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    (row,) = rows
    assert float(row["qfi"]) == pytest.approx(1.0, rel=1e-12)
    assert float(row["qcrb"]) == pytest.approx(1.0, rel=1e-12)
    assert float(row["delta_phi_min"]) == pytest.approx(1.0, rel=1e-9)


def test_single_near_balanced_moments(tmp_path):
    out = tmp_path / "single3.csv"
    code = main(["--command", "single", "--n-range", "3", "--k", "1",
                 "--chi", "0", "--m", "1", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    (row,) = rows
    assert float(row["mean"]) == pytest.approx(0.0, abs=1e-12)
    assert float(row["variance"]) == pytest.approx(7.0, abs=1e-10)


def test_single_lossy_matches_brute_force(tmp_path):
    out = tmp_path / "single2.csv"
    code = main(["--command", "single", "--n-range", "2", "--k", "0",
                 "--eta", "0.5", "--chi", "0", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    (row,) = rows
    # closed form N^2 eta^N for the k=0 family
    assert float(row["qfi"]) == pytest.approx(1.0, rel=1e-10)


def test_qfi_scan_emits_slopes(tmp_path):
    out = tmp_path / "scan.csv"
    code = main(["--command", "qfi-scan", "--n-range", "2:10:4",
                 "--eta", "0.9,1.0", "--out", str(out)])
    assert code == 0
    comments, rows = read_csv(out)
    assert len(rows) == 6
    assert any("loglog_slopes" in c for c in comments)
    for row in rows:
        assert row["k_or_alpha_digest"].startswith("k=")


def test_readout_scan_lossless_noon(tmp_path):
    out = tmp_path / "readout.csv"
    code = main(["--command", "readout-scan", "--n-range", "1:4:1",
                 "--eta", "1.0", "--k", "0", "--chi", "1e-8",
                 "--grid-points", "801", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    for row in rows:
        n = int(row["N"])
        want = n + 1e-8 * n * n / 2
        assert float(row["inv_delta_phi"]) == pytest.approx(want, rel=1e-6)
        assert float(row["delta_phi_min"]) >= float(row["qcrb"]) - 1e-9


def test_readout_scan_near_balanced_single_photon_counting(tmp_path):
    # k = (N-1)/2 input read out at m = 1: 1/delta_phi = C1 theta / sqrt(A)
    out = tmp_path / "readout_m1.csv"
    code = main(["--command", "readout-scan", "--n-range", "5", "--k", "2",
                 "--eta", "1.0", "--m", "1", "--chi", "0",
                 "--grid-points", "801", "--out", str(out)])
    assert code == 0
    _, rows = read_csv(out)
    (row,) = rows
    n = 5
    a = (n * n + 2 * n - 1) / 2
    c1 = (n + 1) / 2
    assert float(row["inv_delta_phi"]) == pytest.approx(c1 / math.sqrt(a), rel=1e-9)


def test_optimize_scan_uses_cache(tmp_path):
    out1 = tmp_path / "opt1.csv"
    out2 = tmp_path / "opt2.csv"
    cache = tmp_path / "cache"
    args = ["--command", "optimize-scan", "--n-range", "1:3:1",
            "--eta", "0.9", "--cache", str(cache)]
    assert main(args + ["--out", str(out1)]) == 0
    assert len(list(cache.glob("opt-*.json"))) == 3
    assert main(args + ["--out", str(out2)]) == 0
    comments1, rows1 = body_without_timing(out1)
    comments2, rows2 = body_without_timing(out2)
    assert comments1 == comments2
    cached_flags = {row["cached"] for row in rows2}
    for row1, row2 in zip(rows1, rows2):
        row1.pop("cached"), row2.pop("cached")
        assert row1 == row2
    assert cached_flags == {"true"}


def test_cache_integrity_recomputes_stale_entries(tmp_path):
    cache = OptimizeCache(tmp_path / "cache")
    problem = OptimizationProblem(N=2, eta=0.9, chi=1e-8, restarts=2,
                                  max_evals=2000)
    outcome, from_cache = cache.get_or_run(problem)
    assert not from_cache
    # corrupt the stored value; the re-validation must reject and recompute
    path = cache._path(problem)
    data = json.loads(path.read_text())
    data["qfi_star"] += 0.5
    path.write_text(json.dumps(data))
    again, from_cache = cache.get_or_run(problem)
    assert not from_cache
    assert again.qfi_star == pytest.approx(outcome.qfi_star, rel=1e-12)


def test_rerun_reproduces_csv_body(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--command", "pure-qfi", "--n-range", "1:5:2", "--chi", "1e-8"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert body_without_timing(out1) == body_without_timing(out2)


def test_json_output_mirror(tmp_path):
    out = tmp_path / "records.json"
    code = main(["--command", "pure-qfi", "--n-range", "2", "--format", "json",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["command"] == "pure-qfi"
    assert len(doc["records"]) == 3
    for record in doc["records"]:
        if record["qfi"] > 0:
            assert record["qcrb"] == pytest.approx(
                1 / math.sqrt(record["qfi"]), rel=1e-12)


def test_bad_flag_values_exit_2(capsys):
    assert main(["--command", "pure-qfi", "--n-range", "oops"]) == 2
    assert main(["--command", "pure-qfi", "--eta", "2.0"]) == 2
    assert main(["--command", "single", "--n-range", "2"]) == 2


def test_max_n_extends_range(tmp_path):
    config = build_config(["--command", "optimize-scan", "--n-range", "1:4:1",
                           "--max-n", "6"])
    assert config.n_range == (1, 2, 3, 4, 5, 6)


def test_numerical_error_flushes_partial_results(tmp_path, monkeypatch):
    import kerrmet.cli as cli
    from kerrmet.fock import NumericalError

    calls = []

    def flaky(n, eta, chi, phi=0.0):
        if len(calls) >= 2:
            raise NumericalError("synthetic failure")
        calls.append(n)
        return 0, float(n * n)

    monkeypatch.setattr(cli, "max_qfi_over_k", flaky)
    out = tmp_path / "partial.csv"
    code = main(["--command", "qfi-scan", "--n-range", "1:4:1",
                 "--eta", "1.0", "--out", str(out)])
    assert code == 3
    comments, rows = read_csv(out)
    assert len(rows) == 2  # completed points were flushed
    assert any("error" in c for c in comments)
