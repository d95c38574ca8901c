import csv
import io
import json
import subprocess
import sys

import pytest

from markovqs import cli
from markovqs.weights import fourier_coefficients


def run(argv):
    return cli.run(argv)


def test_coeffs_csv(tmp_path):
    out = tmp_path / "a.csv"
    assert cli.main(["coeffs", "--K", "16", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 33
    assert [int(r["n"]) for r in rows] == list(range(-16, 17))
    sums = [float(r["running_sum"]) for r in rows]
    assert all(b >= a for a, b in zip(sums, sums[1:]))
    assert abs(sums[-1] - fourier_coefficients(16).total()) <= 1e-15
    # 17 significant digits round-trip every double
    for r in rows:
        assert float(r["a_n"]) == float(format(float(r["a_n"]), ".17g"))


def test_coeffs_convergence_failure_exits_nonzero(monkeypatch):
    def boom(*_a, **_k):
        raise cli.ConvergenceError(3, 1.0)

    monkeypatch.setattr(cli, "fourier_coefficients", boom)
    text, code = run(["coeffs", "--K", "4"])
    assert code == 1 and "a_3" in text


def test_verify_default_config_passes():
    text, code = run(["verify"])
    report = json.loads(text)
    assert code == 0 and report["passed"]
    assert set(report) >= {"config_echo", "intertwine_residual", "markov_flags", "kernel_margins", "xi_max_dev", "zeta_max_dev"}
    assert set(report["kernel_margins"]) == {"J", "J_adjoint", "empty_sector"}
    assert float(report["kernel_margins"]["J"]) > 0


def test_reports_are_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 8, "M": 4, "K": 2, "seed": 11}))
    first, _ = run(["verify", "--config", str(cfg)])
    second, _ = run(["verify", "--config", str(cfg)])
    assert first == second
    other, _ = run(["verify", "--config", str(cfg), "--seed", "12"])
    assert json.loads(other)["config_echo"]["seed"] == 12


def test_report_round_trips_through_json():
    text, _ = run(["kernel-scan"])
    report = json.loads(text)
    assert cli.dumps(report) == text


def test_unnormalized_weights_rejected(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"K": 2, "weights": [0.1, 0.2, 0.3, 0.2, 0.1]}))
    assert cli.main(["verify", "--config", str(cfg)]) == 2
    with pytest.raises(ValueError):
        cli.RunConfig.from_dict({"K": 2, "weights": [0.1, 0.2, 0.3, 0.2, 0.1]})


def test_config_validation():
    with pytest.raises(ValueError):
        cli.RunConfig.from_dict({"N": 8, "s": 2})
    with pytest.raises(ValueError):
        cli.RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        cli.RunConfig.from_dict({"tolerances": {"nope": 1}})
    rc = cli.RunConfig.from_dict({"K": 1, "M": 3, "weights": [0.25, 0.5, 0.25]})
    assert rc.markov_weights().values.tolist() == [0.25, 0.5, 0.25]


def test_explicit_weights_drive_the_run(tmp_path):
    cfg = tmp_path / "w.json"
    cfg.write_text(json.dumps({"N": 4, "M": 3, "K": 1, "weights": [0.25, 0.5, 0.25]}))
    text, code = run(["construct", "--config", str(cfg)])
    report = json.loads(text)
    assert code == 0 and report["weights"] == {"-1": "0.25", "0": "0.5", "1": "0.25"}


def test_verify_intertwine_and_construct():
    report = json.loads(run(["verify-intertwine"])[0])
    assert report["passed"] and set(report["In_residuals"]) == {"-2", "-1", "0", "1", "2"}
    report = json.loads(run(["construct"])[0])
    assert report["passed"] and report["dim"] == 4096


def test_counterexample_K8():
    text, code = run(["counterexample", "--K", "8"])
    r = json.loads(text)["runs"][0]
    assert code == 0
    assert float(r["bound"]) == 2.0**-10
    assert float(r["JstarF_norm"]) <= float(r["bound"])


def test_counterexample_scaling_checks():
    report = json.loads(run(["counterexample", "--K", "6", "7", "8"])[0])
    assert report["checks"]["K6_to_K7_scaling"] and report["checks"]["K7_to_K8_scaling"]


def test_spectral_compare_conjugate_permutations():
    text, code = run(["spectral-compare", '{"permutation": [1, 2, 0]}', '{"permutation": [2, 0, 1]}'])
    assert code == 0 and json.loads(text)["equivalent"]
    text, _ = run(["spectral-compare", '{"diagonal_angles": [0, 0.5]}', '{"matrix": [[1, 0], [0, [0, 1]]]}'])
    assert not json.loads(text)["equivalent"]


def test_spectral_compare_model_operators(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps({"N": 4, "M": 2, "K": 1}))
    text, _ = run(["spectral-compare", "--config", str(cfg), '{"model": "T1"}', '{"model": "T2"}'])
    report = json.loads(text)
    assert report["left"]["dim"] == 4 * 2**5
    assert isinstance(report["equivalent"], bool)


def test_joinings_command(tmp_path):
    left = tmp_path / "z2.json"
    left.write_text(json.dumps({"n": 2, "permutation": [1, 0], "p": ["1/2", "1/2"]}))
    text, code = run(["joinings", str(left), '{"n": 3, "permutation": [1, 2, 0], "p": ["1/3", "1/3", "1/3"]}', "--markov"])
    report = json.loads(text)
    assert code == 0 and report["d"] == 0 and report["disjoint"]
    assert report["product_markov"] == [["0.5", "0.5"]] * 3
    report = json.loads(run(["joinings", '{"permutation": [1, 2, 3, 0]}', '{"permutation": [1, 2, 3, 0]}'])[0])
    assert report["d"] == 3 and len(report["basis"]) == 3


def test_csv_only_for_coeffs():
    with pytest.raises(SystemExit):
        run(["verify", "--format", "csv"])


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "markovqs.cli", "coeffs", "--K", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("n,a_n,running_sum")
