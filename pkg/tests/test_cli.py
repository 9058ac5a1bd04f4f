"""End-to-end command-line runs against real output files."""

import math

import pytest

from qdiosim.cli import build_run_config, main, read_config_file
from qdiosim.diophantine import parse


def sweep_args(tmp_path, *extra):
    return [
        "--equation", "x - 1",
        "--T-list", "2",
        "--out-dir", str(tmp_path),
        *extra,
    ]


# --- configuration layering -------------------------------------------------


def test_build_run_config_defaults():
    config = build_run_config(["--equation", "x - 1"])
    assert config.equation == "x - 1"
    assert config.mode == "sweep"
    assert config.evolution.alphas is None
    assert config.evolution.epsilon == 1e-2
    assert config.evolution.integrator.dt_tolerance == 1e-3
    assert config.evolution.integrator.solver_tolerance == 1e-10
    assert config.evolution.growth.mode == "threshold"


def test_build_run_config_requires_equation():
    with pytest.raises(ValueError):
        build_run_config([])


def test_config_file_and_flag_precedence(tmp_path):
    config_file = tmp_path / "run.conf"
    config_file.write_text(
        "# reproduction settings\n"
        "equation = x + 20\n"
        "eps = 1e-3\n"
        "alpha = 1.5,0.0; 2.5,0.0\n"
        "T_list = 5, 10\n"
        "dt_tol = 0.05\n"
        "initial_cutoff = 6; 7\n"
    )
    entries = read_config_file(config_file)
    assert entries["equation"] == "x + 20"
    config = build_run_config(["--config", str(config_file)])
    assert config.equation == "x + 20"
    assert config.evolution.alphas == (1.5 + 0j, 2.5 + 0j)
    assert config.evolution.cutoff_floors == (6, 7)
    assert config.evolution.sweep.T_values == (5.0, 10.0)
    assert config.evolution.integrator.dt_tolerance == 0.05
    # flags override file entries
    overridden = build_run_config(
        ["--config", str(config_file), "--equation", "x - 3", "--dt-tol", "0.2"]
    )
    assert overridden.equation == "x - 3"
    assert overridden.evolution.integrator.dt_tolerance == 0.2


def test_stop_on_majority_config_key(tmp_path):
    config_file = tmp_path / "run.conf"
    config_file.write_text("equation = x - 1\nstop_on_majority = no\n")
    config = build_run_config(["--config", str(config_file)])
    assert config.evolution.sweep.stop_on_majority is False
    # default stays on when the key is absent
    assert build_run_config(["--equation", "x - 1"]).evolution.sweep.stop_on_majority


def test_alpha_flag_parsing():
    config = build_run_config(["--equation", "x*y - 1", "--alpha", "2.0,0.5"])
    assert config.evolution.alphas == (2.0 + 0.5j,)
    with pytest.raises(SystemExit):
        build_run_config(["--mode", "bad-mode", "--equation", "x"])


def test_grow_always_flag():
    config = build_run_config(["--equation", "x - 1", "--grow-always"])
    assert config.evolution.growth.mode == "always"
    threshold = build_run_config(["--equation", "x - 1", "--growth-threshold", "inf"])
    assert threshold.evolution.growth.mode == "threshold"
    assert math.isinf(threshold.evolution.growth.threshold)


# --- sweep mode -------------------------------------------------------------


def test_sweep_writes_records_and_verdict(tmp_path, capsys):
    status = main(sweep_args(tmp_path))
    assert status == 0
    out = capsys.readouterr().out
    assert "has_solution = true" in out
    assert "witness = 1" in out

    records = (tmp_path / "records.csv").read_text().splitlines()
    header = records[0].split(",")
    assert header[:6] == ["T", "top1", "top2", "top3", "top4", "top5"]
    assert header[6:] == ["N_x", "HP", "norm", "steps", "cutoffs"]
    assert len(records) == 2
    row = records[1].split(",")
    assert row[0] == "2"
    state, probability = row[1].split("=")
    assert state == "1"
    assert float(probability) > 0.5

    verdict = (tmp_path / "verdict.txt").read_text().splitlines()
    assert verdict[0] == "ground = 1"
    assert verdict[2] == "E_g = 0"
    assert verdict[3] == "has_solution = true"
    assert verdict[4] == "witness = 1"


def test_sweep_rows_probabilities_sum_below_one(tmp_path):
    assert main(sweep_args(tmp_path)) == 0
    for line in (tmp_path / "records.csv").read_text().splitlines()[1:]:
        cells = line.split(",")
        total = sum(
            float(cell.split("=")[1]) for cell in cells[1:6] if "=" in cell
        )
        assert total <= 1.0 + 1e-6


def test_sweep_reruns_are_byte_identical(tmp_path):
    first_dir = tmp_path / "a"
    second_dir = tmp_path / "b"
    assert main(sweep_args(first_dir)) == 0
    assert main(sweep_args(second_dir)) == 0
    assert (first_dir / "records.csv").read_bytes() == (
        second_dir / "records.csv"
    ).read_bytes()
    assert (first_dir / "verdict.txt").read_bytes() == (
        second_dir / "verdict.txt"
    ).read_bytes()


def test_sweep_without_majority_exits_2(tmp_path):
    status = main(
        ["--equation", "x + 3", "--T-list", "0.01", "--out-dir", str(tmp_path)]
    )
    assert status == 2
    assert (tmp_path / "verdict.txt").read_text() == "verdict = none\n"
    assert (tmp_path / "records.csv").exists()


def test_sweep_dump_state_round_trips(tmp_path):
    from qdiosim.fock import load_state

    dump = tmp_path / "final.state"
    status = main(sweep_args(tmp_path, "--dump-state", str(dump)))
    assert status == 0
    state = load_state(dump)
    assert abs(state.norm() - 1.0) < 1e-6
    top = max(range(state.space.dimension), key=lambda i: abs(state.amplitudes[i]))
    assert state.space.multi_index(top) == (1,)


def test_sweep_step_logs_via_config_file(tmp_path):
    config_file = tmp_path / "run.conf"
    config_file.write_text("step_logs = yes\n")
    status = main(sweep_args(tmp_path, "--config", str(config_file)))
    assert status == 0
    log = tmp_path / "steps_T2.log"
    assert log.exists()
    lines = log.read_text().strip().splitlines()
    assert len(lines) > 10
    t, dt, norm, leakage, iterations = lines[-1].split()
    assert abs(float(t) - 2.0) < 1e-9
    assert float(dt) > 0.0
    assert abs(float(norm) - 1.0) < 1e-6
    assert int(iterations) > 0
    refined = tmp_path / "steps_T2_tol0.00025.log"
    assert refined.exists()


# --- other modes ------------------------------------------------------------


def test_gap_profile_mode(tmp_path, capsys):
    status = main(
        [
            "--equation", "x - 3",
            "--mode", "gap-profile",
            "--out-dir", str(tmp_path),
        ]
    )
    assert status == 0
    assert "min interior gap" in capsys.readouterr().out
    lines = (tmp_path / "gap.csv").read_text().splitlines()
    assert lines[0] == "s,E0,E1,E2,E3"
    assert len(lines) == 102
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0
    # ascending eigenvalue columns in every row
    for line in lines[1:]:
        values = [float(v) for v in line.split(",")]
        assert values[1:] == sorted(values[1:])


def test_oracle_check_mode(tmp_path, capsys):
    status = main(
        [
            "--equation", "x*y + x + 4*y - 11",
            "--mode", "oracle-check",
            "--out-dir", str(tmp_path),
        ]
    )
    assert status == 0
    text = (tmp_path / "oracle.txt").read_text()
    assert "num_zeros = 1" in text
    assert "zeros = 1:2" in text
    assert "min_square = 0" in text
    assert "has_solution_in_box = true" in text
    assert "diagonal_check = ok" in text
    assert "diagonal_check = ok" in capsys.readouterr().out


def test_oracle_check_reports_argmin_set(tmp_path):
    status = main(
        [
            "--equation", "x - 20",
            "--initial-cutoff", "25",
            "--mode", "oracle-check",
            "--out-dir", str(tmp_path),
        ]
    )
    assert status == 0
    text = (tmp_path / "oracle.txt").read_text()
    assert "num_zeros = 1" in text
    assert "zeros = 20" in text
    assert "argmin = 20" in text


# --- error paths ------------------------------------------------------------


def test_unparseable_equation_exits_1(tmp_path, capsys):
    status = main(["--equation", "x +", "--out-dir", str(tmp_path)])
    assert status == 1
    assert "error:" in capsys.readouterr().err


def test_constant_equation_exits_1(tmp_path, capsys):
    status = main(["--equation", "4", "--out-dir", str(tmp_path)])
    assert status == 1
    assert "error:" in capsys.readouterr().err


def test_malformed_config_file_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("equation x - 1\n")
    status = main(["--config", str(bad)])
    assert status == 1
    assert "error:" in capsys.readouterr().err
