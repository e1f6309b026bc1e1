import csv
import io
import json

import pytest

from cli.exponent_cli import ExponentCli, main, parse_args
from common.model import SchemeName
from common.repository import SqliteRepository
from theory import exponents


def _csv_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


class TestExponentCommand:
    def test_csv(self, capsys):
        assert main(["exponent", "--p", "0.1"]) == 0
        (row,) = _csv_rows(capsys.readouterr().out)
        assert float(row["F1"]) == pytest.approx(0.289433, rel=1e-4)
        assert float(row["t_star"]) == 0.0
        assert row["G2_at_t_star"] == "inf"

    def test_json(self, capsys):
        assert main(["--format", "json", "exponent", "--p", "0.1", "--p1", "0.02"]) == 0
        (row,) = json.loads(capsys.readouterr().out)
        assert row["F_over_E"] == pytest.approx(row["F"] / row["E"], rel=1e-10)
        assert row["active"] is not None

    def test_tiny_feedback_noise(self, capsys):
        assert main(["exponent", "--p", "0.1", "--p1", "1e-20"]) == 0
        (row,) = _csv_rows(capsys.readouterr().out)
        assert float(row["E"]) < float(row["F1"]) < 0.289433

    def test_no_switch_above_threshold(self, capsys):
        assert main(["--format", "json", "exponent", "--p", "0.2", "--p1", "0.5"]) == 0
        (row,) = json.loads(capsys.readouterr().out)
        assert row["gamma_star"] == 1.0
        assert row["F1"] == row["E"]

    def test_domain_error_exit_code(self, capsys):
        assert main(["exponent", "--p", "0.6"]) == 2
        assert capsys.readouterr().out == ""

    def test_missing_argument(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["exponent"])
        assert excinfo.value.code == 2

    def test_store(self, tmp_path, capsys):
        repo = SqliteRepository(str(tmp_path / "cli.db"))
        cli = ExponentCli(parse_args(["--store", "exponent", "--p", "0.2"]), repository=repo)
        assert cli.run() == 0
        assert len(repo.get_exponent_reports(0.2)) == 1


class TestTheoryCommands:
    def test_p0_sweep(self, capsys):
        assert main(["p0-sweep", "--p-grid", "0.01,0.1"]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert [float(r["p"]) for r in rows] == [0.01, 0.1]
        assert float(rows[1]["p0"]) == pytest.approx(exponents.threshold_p0(0.1), rel=1e-9)

    def test_p0_sweep_default_grid(self):
        assert len(parse_args(["p0-sweep"]).p_grid) == 40

    def test_lemma(self, capsys):
        assert main(["lemma", "--p", "0.1", "--t", "0.2", "--t1", "0.1", "--m", "30"]) == 0
        (row,) = _csv_rows(capsys.readouterr().out)
        assert row["feasible"] == "True"
        assert float(row["log_tail"]) >= float(row["log_point"])

    def test_lemma_rejects_bad_length(self):
        assert main(["lemma", "--p", "0.1", "--m", "10"]) == 2

    def test_oracle_ladder(self, capsys):
        assert main(["oracle", "--p", "0.1", "--p1", "0.05", "--t", "0.2", "--m-ladder", "30,60"]) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert [int(r["m"]) for r in rows] == [30, 60]
        assert float(rows[0]["G2"]) == pytest.approx(exponents.exponent_G2(0.2, 0.1, 0.05), rel=1e-9)


class TestSimulationCommands:
    def test_simulate_to_file(self, tmp_path):
        path = tmp_path / "summary.csv"
        argv = [
            "--output", str(path), "simulate", "--scheme", "noisy-switch",
            "--p", "0.1", "--p1", "0.02", "--n", "120", "--trials", "200",
        ]
        assert main(argv) == 0
        (row,) = _csv_rows(path.read_text(encoding="utf-8"))
        assert row["scheme"] == "noisy-switch"
        assert int(row["trials"]) == 200

    def test_optimal_defaults(self):
        cli = ExponentCli(parse_args(["simulate", "--scheme", "active", "--p", "0.1", "--p1", "0.05"]))
        params = cli.scheme_params(1200)
        active = exponents.exponent_active(0.1, 0.05)
        assert params.gamma == pytest.approx(active.gamma)
        assert params.gamma1 == pytest.approx(active.gamma1)

        cli = ExponentCli(parse_args(["simulate", "--p", "0.1", "--p1", "0.02"]))
        report = exponents.exponent_F1(0.1, 0.02)
        params = cli.scheme_params(1200)
        assert cli.config.scheme == SchemeName.NOISY_SWITCH
        assert params.gamma == pytest.approx(report.gamma_star)
        assert params.t == pytest.approx(report.t_star)

    def test_ladder(self, capsys):
        argv = ["ladder", "--scheme", "no-feedback", "--p", "0.3", "--M", "2", "--trials", "500", "--n-ladder", "10,20"]
        assert main(argv) == 0
        rows = _csv_rows(capsys.readouterr().out)
        assert [int(r["n"]) for r in rows] == [10, 20]

    def test_rejects_feedback_above_threshold(self, caplog):
        argv = ["simulate", "--p", "0.1", "--p1", "0.03", "--n", "120", "--trials", "10"]
        assert main(argv) == 2
        assert "--gamma" in caplog.text
        assert main([*argv, "--gamma", "0.5"]) == 0

    def test_rejects_zero_trials(self):
        assert main(["simulate", "--p", "0.1", "--trials", "0"]) == 2
