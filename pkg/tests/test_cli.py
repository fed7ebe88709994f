import csv
import json
import subprocess
import sys

import pytest

from gamcal.cli import SCENARIOS, config_hash, load_config, main

FAST = {
    "mechanics": {"numeric": {"dt": 1e-2, "t_end": 1.0}},
    "scalar-field": {},
    "geodesic": {"numeric": {"s_end": 1.0, "ds": 0.1}},
    "hj-check": {"numeric": {"samples": 20}},
    "ga-selftest": {"numeric": {"cases": 10}},
}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(tmp_path, scenario, name="out", extra=()):
    cfg = write(tmp_path / f"{scenario}.json", FAST[scenario])
    out = tmp_path / name
    code = main([scenario, "--config", cfg, "--out", str(out), *extra])
    return code, out


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_runs_are_byte_identical(tmp_path, scenario, capsys):
    code_a, a = run(tmp_path, scenario, "a")
    code_b, b = run(tmp_path, scenario, "b")
    assert code_a == code_b == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "summary.json" in names and "config.json" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["config_hash"] == config_hash(json.loads((a / "config.json").read_text()))
    assert summary["seed"] == 42


@pytest.mark.parametrize("scenario", ["mechanics", "scalar-field", "geodesic", "hj-check"])
def test_verify_round_trip(tmp_path, scenario, capsys):
    code, out = run(tmp_path, scenario)
    assert code == 0
    for data in sorted(out.glob("*.csv")):
        capsys.readouterr()
        assert main(["verify", "--config", str(out / "config.json"), "--data", str(data)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True


def test_verify_ga_selftest_report(tmp_path):
    _, out = run(tmp_path, "ga-selftest")
    assert main(["verify", "--config", str(out / "config.json"),
                 "--data", str(out / "identities.json")]) == 0


@pytest.mark.parametrize("scenario, column", [("mechanics", "p_2"), ("geodesic", "p_1"),
                                              ("scalar-field", "pi_1")])
def test_verify_fails_on_corrupted_momentum(tmp_path, scenario, column, capsys):
    _, out = run(tmp_path, scenario)
    src = out / ("field.csv" if scenario == "scalar-field" else "motion.csv")
    rows = list(csv.reader(src.open()))
    k = rows[0].index(column)
    for row in rows[1:]:
        row[k] = repr(float(row[k]) + 0.05)
    bad = tmp_path / "bad.csv"
    with bad.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    capsys.readouterr()
    assert main(["verify", "--config", str(out / "config.json"), "--data", str(bad)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is False
    assert any(not c["passed"] for c in report["checks"])


def test_verify_empty_file(tmp_path):
    _, out = run(tmp_path, "mechanics")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["verify", "--config", str(out / "config.json"), "--data", str(empty)]) == 2


def test_verify_schema_mismatch(tmp_path):
    _, out = run(tmp_path, "mechanics")
    assert main(["verify", "--config", str(out / "config.json"),
                 "--data", str(tmp_path / "mechanics.json")]) == 2


def test_negative_spacing_is_invalid(tmp_path, capsys):
    cfg = write(tmp_path / "bad.json", {"grid": {"spacing": [-0.1, 0.1]}})
    assert main(["scalar-field", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "spacing" in capsys.readouterr().err


@pytest.mark.parametrize("numeric", [{"dt": -1e-3}, {"dt": 0}, {"t_end": "long"}])
def test_non_positive_numeric_is_invalid(tmp_path, numeric):
    cfg = write(tmp_path / "bad.json", {"numeric": numeric})
    assert main(["mechanics", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unknown_scenario_names_valid_ones(capsys):
    assert main(["wobble"]) == 2
    err = capsys.readouterr().err
    assert all(name in err for name in SCENARIOS)


def test_scenario_conflict_is_invalid(tmp_path):
    cfg = write(tmp_path / "c.json", {"scenario": "geodesic"})
    assert main(["mechanics", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_non_convergence_exit_code(tmp_path):
    cfg = write(tmp_path / "c.json", {"numeric": {"max_iter": 2}})
    assert main(["scalar-field", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_numeric_failure_exit_code(tmp_path):
    cfg = write(tmp_path / "c.json", {
        "hamiltonian": {"type": "mechanics", "potential": [0, 0, 0, 0, -1], "dims": {"n": 2}},
        "numeric": {"dt": 0.5, "t_end": 100.0},
        "initial": {"q0": [0.0, 10.0], "p0": [0.0, 0.0]},
    })
    with pytest.warns(RuntimeWarning):
        assert main(["mechanics", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_seed_changes_random_geodesic(tmp_path):
    _, a = run(tmp_path, "geodesic", "a", ["--seed", "1"])
    _, b = run(tmp_path, "geodesic", "b", ["--seed", "2"])
    assert (a / "motion.csv").read_bytes() != (b / "motion.csv").read_bytes()
    assert json.loads((a / "summary.json").read_text())["seed"] == 1


def test_mechanics_summary_values(tmp_path):
    out = tmp_path / "osc"
    assert main(["run", "mechanics", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["energy_drift"] <= 1e-8
    assert summary["final_point"][1] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("hamiltonian, hj", [
    ({"type": "mechanics", "potential": [0, 0, 0.5], "dims": {"n": 2}}, {"energy": 2.0}),
    ({"type": "dw", "potential": [-0.3], "dims": {"D": 3}}, {"alpha": 0.5}),
])
def test_hj_check_families(tmp_path, hamiltonian, hj):
    cfg = write(tmp_path / "c.json", {"hamiltonian": hamiltonian, "hj": hj, "numeric": {"samples": 15}})
    out = tmp_path / "o"
    assert main(["hj-check", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "summary.json").read_text())["max_H_residual"] < 1e-6


def test_hj_check_rejects_nonconstant_field_potential(tmp_path):
    cfg = write(tmp_path / "c.json", {"hamiltonian": {"type": "dw", "potential": [0, 0, 1]}})
    assert main(["hj-check", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_config_defaults_and_hash():
    a = load_config(None, "mechanics")
    b = load_config(None, "mechanics", seed=42)
    assert a == b and config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(load_config(None, "mechanics", seed=7))


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gamcal.cli", "ga-selftest", "--out", str(tmp_path)],
                          capture_output=True, text=True, input=None,
                          env=None, cwd=tmp_path, timeout=120, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["all_passed"] is True
