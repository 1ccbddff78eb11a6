import csv
import json
import math

import pytest

import analytic
import charts
import main
from main import (
    run, parse_target, UsageError, EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO,
)
from models import FigureId, TargetKind
from montecarlo import TrialFailure
from schemas import ModelParams

FIG3_POINT = ["--n", "3000", "--K", "35", "--P", "10000", "--p", "0.5", "--q", "2"]


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# ============================================================================
# ANALYZE
# ============================================================================

def test_analyze_json_matches_library(capsys):
    assert run(["analyze", *FIG3_POINT, "--k", "2", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)

    params = ModelParams(n=3000, K=35, P=10000, p=0.5, q=2)
    levels = analytic.select_ell_gamma(params)
    assert report["p_eq"] == analytic.p_link(params).p_eq
    assert report["alpha"] == analytic.decompose_alpha(params, 2).alpha
    assert report["ell_star"] == levels.ell_star
    assert report["gamma_star"] == levels.gamma_star
    assert report["lambda"]["0"] == analytic.lambda_poisson(params, 0)
    assert report["zero_one_regime"] == "intermediate"


def test_analyze_level_zero(capsys):
    assert run(["analyze", *FIG3_POINT, "--k", "0", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["prob_min_degree_at_least"] == 1.0
    assert report["alpha"] is None


def test_analyze_text_output(capsys):
    assert run(["analyze", *FIG3_POINT, "--k", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "p_eq" in out
    assert "P[min deg >= 2]" in out


def test_analyze_missing_pool_size_is_usage_error(capsys):
    assert run(["analyze", "--n", "3000", "--K", "35", "--p", "0.5", "--q", "2", "--k", "2"]) == EXIT_USAGE
    assert "--P" in capsys.readouterr().err


def test_analyze_ring_larger_than_pool_is_usage_error():
    assert run(["analyze", "--n", "100", "--K", "20", "--P", "10", "--p", "0.5",
                "--q", "1", "--k", "1"]) == EXIT_USAGE


# ============================================================================
# DESIGN
# ============================================================================

def test_design_with_probability(capsys):
    args = ["design", "--n", "2000", "--P", "10000", "--p", "0.8", "--q", "2", "--k", "4"]
    assert run([*args, "--prob", "0.9", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    threshold = analytic.design_threshold(2000, 4, "with_prob", rho=0.9)
    assert report["K"] == analytic.solve_min_K(2000, 10000, 0.8, 2, threshold)
    assert report["goal"] == "with_prob"


def test_design_certain_probability_is_infeasible():
    args = ["design", "--n", "2000", "--P", "10000", "--p", "0.8", "--q", "2", "--k", "4"]
    assert run([*args, "--prob", "1.0"]) == EXIT_INFEASIBLE


def test_design_without_links_is_infeasible():
    args = ["design", "--n", "2000", "--P", "10000", "--p", "0", "--q", "2", "--k", "4"]
    assert run([*args, "--almost-sure", "0.1"]) == EXIT_INFEASIBLE


def test_design_needs_a_goal():
    args = ["design", "--n", "2000", "--P", "10000", "--p", "0.8", "--q", "2", "--k", "4"]
    assert run(args) == EXIT_USAGE


def test_design_goals_are_exclusive():
    args = ["design", "--n", "2000", "--P", "10000", "--p", "0.8", "--q", "2", "--k", "4"]
    with pytest.raises(SystemExit) as exc:
        run([*args, "--prob", "0.9", "--exact-k", "0.5"])
    assert exc.value.code == 2


# ============================================================================
# CONFIG FILES
# ============================================================================

def test_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "point.conf"
    config.write_text("# operating point\nn = 3000\nK = 35\nP = 10000\np = 0.5\nq = 2\nk = 2\n")
    assert run(["analyze", "--config", str(config), "--K", "30", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["params"]["K"] == 30
    assert report["params"]["n"] == 3000


def test_config_file_unknown_key(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("nodes = 3000\n")
    assert run(["analyze", "--config", str(config)]) == EXIT_USAGE


# ============================================================================
# SIMULATE
# ============================================================================

def test_parse_target():
    assert parse_target("ge:3").k == 3
    assert parse_target("pmf:5").kind == TargetKind.MIN_DEGREE_PMF
    phi = parse_target("phi:1:20")
    assert (phi.h, phi.max_count) == (1, 20)
    assert parse_target("density").kind == TargetKind.EDGE_DENSITY
    with pytest.raises(UsageError):
        parse_target("ge:x")
    with pytest.raises(UsageError):
        parse_target("phi:1")


def test_simulate_json_and_graph_dumps(tmp_path, capsys):
    dumps = tmp_path / "graphs"
    args = ["simulate", "--n", "100", "--K", "6", "--P", "200", "--p", "0.5", "--q", "1",
            "--trials", "6", "--seed", "5", "--target", "ge:1", "--target", "density",
            "--dump-graphs", str(dumps), "--dump-limit", "3", "--json"]
    assert run(args) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["trials"] == 6
    assert len(report["comparison"]["entries"]) == 2
    assert sorted(p.name for p in dumps.iterdir()) == [
        "trial_00000.txt", "trial_00001.txt", "trial_00002.txt"]


def test_simulate_malformed_target():
    args = ["simulate", "--n", "100", "--K", "6", "--P", "200", "--p", "0.5", "--q", "1",
            "--trials", "2", "--target", "ge"]
    assert run(args) == EXIT_USAGE


# ============================================================================
# REPRODUCE
# ============================================================================

def test_reproduce_into_a_file_path_is_io_error(tmp_path):
    blocker = tmp_path / "occupied"
    blocker.write_text("")
    args = ["reproduce", "fig1", "--trials", "2", "--out", str(blocker)]
    assert run(args) == EXIT_IO


def test_reproduce_fig1_and_rerender(tmp_path):
    out = tmp_path / "out"
    args = ["reproduce", "fig1", "--n", "200", "--P", "2000", "--K-values", "20", "22",
            "--k-values", "1", "2", "--trials", "10", "--out", str(out)]
    assert run(args) == EXIT_OK

    rows = read_rows(out / "fig1.csv")
    assert rows[0] == ["k", "K", "empirical", "analytic", "se"]
    assert len(rows) == 1 + 4

    again = tmp_path / "again"
    assert run(["reproduce", "fig1", "--from-csv", str(out / "fig1.csv"), "--out", str(again)]) == EXIT_OK
    assert (again / "fig1.svg").read_bytes() == (out / "fig1.svg").read_bytes()


def test_reproduce_fig3_table(tmp_path):
    out = tmp_path / "out"
    args = ["reproduce", "fig3", "--n", "300", "--P", "2000", "--K", "20",
            "--h-values", "0", "1", "--max-count", "5", "--trials", "10", "--out", str(out)]
    assert run(args) == EXIT_OK
    rows = read_rows(out / "fig3.csv")
    assert rows[0] == ["h", "M", "empirical", "poisson"]
    assert len(rows) == 1 + 2 * 7
    assert (out / "fig3.svg").exists()

    for h in ("0", "1"):
        block = [row for row in rows[1:] if row[0] == h]
        assert [row[1] for row in block] == ["0", "1", "2", "3", "4", "5", "6"]
        assert math.fsum(float(row[2]) for row in block) == pytest.approx(1.0, abs=1e-5)
        assert math.fsum(float(row[3]) for row in block) == pytest.approx(1.0, abs=1e-5)


def test_reproduce_fig3_tail_row_holds_counts_above_max_count(tmp_path):
    out = tmp_path / "out"
    args = ["reproduce", "fig3", "--n", "300", "--P", "2000", "--K", "20",
            "--h-values", "0", "1", "2", "--max-count", "5", "--trials", "40", "--out", str(out)]
    assert run(args) == EXIT_OK
    rows = read_rows(out / "fig3.csv")
    for h in ("0", "1", "2"):
        block = [row for row in rows[1:] if row[0] == h]
        assert math.fsum(float(row[2]) for row in block) == pytest.approx(1.0, abs=1e-5)
        assert block[-1][1] == "6"


def test_reproduce_fig3_needs_single_ring_size(tmp_path):
    args = ["reproduce", "fig3", "--K-values", "30", "35", "--trials", "2", "--out", str(tmp_path)]
    assert run(args) == EXIT_USAGE


def test_rerender_uses_the_named_figure_not_the_file_name(tmp_path):
    rows = [{"k": k, "K": K, "empirical": 0.1 * k, "analytic": 0.1 * k + 0.01, "se": 0.02}
            for k in (1, 2) for K in (30, 32)]
    renamed = charts.write_csv(FigureId.FIG2, rows, tmp_path / "renamed.csv")

    out = tmp_path / "out"
    assert run(["reproduce", "fig2", "--from-csv", str(renamed), "--out", str(out)]) == EXIT_OK
    fig2_svg = charts.render_chart(FigureId.FIG2, charts.read_csv(FigureId.FIG2, renamed), tmp_path / "fig2.svg")
    fig1_svg = charts.render_chart(FigureId.FIG1, charts.read_csv(FigureId.FIG1, renamed), tmp_path / "fig1.svg")
    assert (out / "renamed.svg").read_bytes() == fig2_svg.read_bytes()
    assert fig2_svg.read_bytes() != fig1_svg.read_bytes()


def test_rerender_with_the_wrong_figure_is_usage_error(tmp_path):
    rows = [{"h": 0, "M": M, "empirical": 0.5, "poisson": 0.5} for M in (0, 1)]
    path = charts.write_csv(FigureId.FIG3, rows, tmp_path / "fig1.csv")
    assert run(["reproduce", "fig1", "--from-csv", str(path), "--out", str(tmp_path / "out")]) == EXIT_USAGE


def test_failed_reproduction_leaves_no_csv(tmp_path, monkeypatch):
    def fail(cfg, progress=False):
        raise TrialFailure(0, "worker ran out of memory")

    monkeypatch.setattr(main, "run_experiment", fail)
    out = tmp_path / "out"
    args = ["reproduce", "fig1", "--n", "200", "--P", "2000", "--K-values", "20",
            "--k-values", "1", "--trials", "4", "--out", str(out)]
    assert run(args) == EXIT_FAILURE
    assert list(out.iterdir()) == []
