import json

import pandas as pd
import pytest
from click.testing import CliRunner

from main import cli


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def test_solve_prints_the_report(runner, fixture_path):
    result = runner.invoke(cli, ["solve", "--input", str(fixture_path("mot_spread.json")), "--quiet"])
    assert result.exit_code == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["mode"] == "mot"
    assert report["values"]["primal"] == pytest.approx(1.0, abs=1e-9)
    assert report["diagnostics"]["m_star"] == pytest.approx(3.0)


def test_reversed_marginals_exit_with_two(runner, fixture_path):
    result = runner.invoke(cli, ["solve", "--input", str(fixture_path("mot_not_ordered.json")), "--quiet"])
    assert result.exit_code == 2
    assert json.loads(result.stdout)["error"]["kind"] == "not_convex_order"


def test_inadmissible_constraints_exit_with_three(runner, fixture_path):
    result = runner.invoke(cli, ["solve", "--input", str(fixture_path("cot_inadmissible.json")), "--quiet"])
    assert result.exit_code == 3


def test_unparsable_input_exits_with_four(runner, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    result = runner.invoke(cli, ["solve", "--input", str(broken), "--quiet"])
    assert result.exit_code == 4
    assert json.loads(result.stdout)["error"]["kind"] == "shape"


def test_output_and_csv_files(runner, fixture_path, tmp_path):
    out = tmp_path / "report.json"
    rows = tmp_path / "rows.csv"
    result = runner.invoke(cli, ["solve", "--input", str(fixture_path("ot_2x2.json")),
                                 "--output", str(out), "--csv", str(rows)])
    assert result.exit_code == 0
    assert result.stdout == ""
    assert "Report saved to" in result.stderr
    assert json.loads(out.read_text())["status"] == "ok"
    assert list(pd.read_csv(rows).columns) == ["i", "j", "x", "y", "weight"]


def test_gap_demo_options(runner, tmp_path):
    rows = tmp_path / "gap.csv"
    result = runner.invoke(cli, ["gap-demo", "--n", "1001", "--shifts", "1,2,5",
                                 "--hedge-norms", "10,10,10", "--csv", str(rows), "--quiet"])
    assert result.exit_code == 0, result.stderr
    frame = pd.read_csv(rows)
    assert list(frame["shift"]) == [1, 2, 5]
    assert frame.loc[0, "shortfall_bound"] <= -0.9
    assert frame.loc[0, "payoff_mass"] == 1.0


def test_verify_round_trip_and_tamper(runner, fixture_path, tmp_path):
    problem = str(fixture_path("ot_2x2.json"))
    out = tmp_path / "report.json"
    assert runner.invoke(cli, ["solve", "--input", problem, "--output", str(out), "--quiet"]).exit_code == 0

    ok = runner.invoke(cli, ["verify", "--report", str(out), "--input", problem, "--quiet"])
    assert ok.exit_code == 0
    assert json.loads(ok.stdout)["values"]["checks_failed"] == 0

    report = json.loads(out.read_text())
    report["values"]["dual"] += 1.0
    out.write_text(json.dumps(report))
    bad = runner.invoke(cli, ["verify", "--report", str(out), "--input", problem, "--quiet"])
    assert bad.exit_code == 1
    assert json.loads(bad.stdout)["status"] == "failed"


def test_verify_needs_an_input(runner, tmp_path):
    result = runner.invoke(cli, ["verify", "--report", str(tmp_path / "r.json")])
    assert result.exit_code == 2
    assert "needs --input" in result.stderr


def test_polar_scan_of_a_martingale_problem(runner, fixture_path):
    result = runner.invoke(cli, ["polar-scan", "--input", str(fixture_path("polar_mot.json")),
                                 "--full-scan", "--quiet"])
    assert result.exit_code == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["values"]["kind"] == "mot"
    assert report["values"]["scanned_cells"] == 25
    assert [1, 4] in report["witnesses"]["certificate"]["polar_cells"]


def test_envelope_command(runner, fixture_path):
    result = runner.invoke(cli, ["envelope", "--input", str(fixture_path("envelope_tent.json")), "--quiet"])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["values"]["convex"] is False
    assert report["values"]["worst_violation"] == pytest.approx(1.0, abs=1e-9)
    assert report["values"]["envelope_alpha"] == pytest.approx(0.0, abs=1e-9)


def test_check_order_random_suite(runner):
    result = runner.invoke(cli, ["check-order", "--random", "9", "--seed", "3", "--quiet"])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["values"]["disagreements"] == 0


def test_highs_backend_option(runner, fixture_path):
    result = runner.invoke(cli, ["solve", "--input", str(fixture_path("ot_2x2.json")),
                                 "--solver", "highs", "--quiet"])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["values"]["primal"] == pytest.approx(1.0, abs=1e-9)


def test_status_line_on_stderr(runner, fixture_path):
    result = runner.invoke(cli, ["quotient-dist", "--input", str(fixture_path("quotient_square.json"))])
    assert result.exit_code == 0
    assert "quotient-dist (quotient) finished" in result.stderr
