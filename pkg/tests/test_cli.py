import csv
import io
import json

import numpy as np
import pytest

from parampen import cli
from parampen.configs import parse_penalty
from parampen.descent import RsdConfig, _joint, estimate_rsd
from parampen.diagnostics import _ReducedGrid, exactness_detector
from parampen.registry import list_problems, load
from parampen.reports import csv_body
from parampen.solver import SolverConfig, penalty_continuation


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def table_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


class TestSolve:
    ARGS = ("solve", "--problem", "lianzhang-1d", "--lambda-ladder", "1:2:4", "--seed", "3")

    def test_deterministic_csv_body(self):
        c1, a, _ = run(*self.ARGS)
        c2, b, _ = run(*self.ARGS)
        assert c1 == c2 == cli.EXIT_OK
        assert csv_body(a) == csv_body(b)

    def test_numbers_match_direct_call(self, lianzhang):
        _, text, _ = run(*self.ARGS)
        header, *rows = table_rows(text)
        pen, _ = parse_penalty("singular:linear", lianzhang)
        seq = penalty_continuation(pen, SolverConfig(lambda_schedule=(1.0, 2.0, 4), seed=3))
        assert len(rows) == len(seq)
        for row, rec in zip(rows, seq.records):
            r = dict(zip(header, row))
            assert float(r["lambda"]) == rec.lam
            assert float(r["x1"]) == rec.x[0]
            assert float(r["p"]) == rec.p
            assert float(r["F_value"]) == rec.F_value
            assert float(r["phi_value"]) == rec.phi_value

    def test_out_dir(self, tmp_path):
        code, text, _ = run(*self.ARGS, "--out", str(tmp_path))
        assert code == 0
        assert (tmp_path / "sequence.csv").exists()
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert doc["verdicts"]["sequence"]["phi_to_zero"]["status"] == "pass"

    def test_json(self):
        code, text, _ = run(*self.ARGS, "--json")
        doc = json.loads(text)
        assert code == 0 and doc["metadata"]["problem"] == "lianzhang-1d"

    def test_smoothing_schedule(self):
        code, text, _ = run("solve", "--problem", "lianzhang-1d", "--penalty", "smooth:exp",
                            "--lambda-ladder", "2:2:1", "--p-schedule", "1,0.1,0.01")
        header, *rows = table_rows(text)
        assert code == 0 and [float(dict(zip(header, r))["p"]) for r in rows] == [1.0, 0.1, 0.01]

    def test_schedule_needs_smooth_penalty(self):
        code, _, err = run("solve", "--problem", "lianzhang-1d", "--p-schedule", "1,0.1")
        assert code == cli.EXIT_USAGE and "smooth" in err

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"problem": "lianzhang-1d", "lambda_ladder": "1:2:4", "seed": 3}))
        _, a, _ = run("solve", "--config-file", str(path))
        _, b, _ = run(*self.ARGS)
        assert csv_body(a) == csv_body(b)

    def test_config_file_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"bogus": 1}))
        assert run("solve", "--config-file", str(path))[0] == cli.EXIT_USAGE


class TestDiagnose:
    def test_exactness_matches_direct_call(self, lianzhang):
        code, text, _ = run("diagnose", "--problem", "lianzhang-1d", "--check", "exactness",
                            "--lambda-cap", "10", "--json", "--expect-exact")
        doc = json.loads(text)["verdicts"]["exactness"]
        pen, _ = parse_penalty("singular:linear", lianzhang)
        v = exactness_detector(pen, lianzhang, 10.0)
        assert code == cli.EXIT_OK
        assert doc["verdict"] == "EXACT_EVIDENCE"
        assert doc["lambda_star_estimate"] == list(v.lambda_star_estimate)

    def test_expect_exact_fails(self):
        code, text, _ = run("diagnose", "--problem", "lianzhang-1d", "--penalty", "lianzhang-term",
                            "--check", "exactness", "--lambda-cap", "10", "--json", "--expect-exact")
        assert code == cli.EXIT_EXPECTATION
        assert json.loads(text)["verdicts"]["exactness"]["verdict"] == "NOT_EXACT_WITNESS"

    @pytest.mark.parametrize("check", ["duality", "calmness", "local", "reduction"])
    def test_checks_run(self, check):
        code, text, _ = run("diagnose", "--problem", "lianzhang-1d", "--check", check,
                            "--lambda-ladder", "1:10:3", "--json")
        assert code == 0 and check in json.loads(text)["verdicts"]

    def test_feasibility(self):
        code, text, _ = run("diagnose", "--problem", "lianzhang-1d", "--check", "feasibility",
                            "--lambda-cap", "10", "--json")
        doc = json.loads(text)["verdicts"]["feasibility"]
        assert code == 0 and doc["infeasible_stationary"] == 0 and doc["grid_points"] == 1000

    def test_reduction_needs_singular(self):
        code, _, _ = run("diagnose", "--problem", "lianzhang-1d", "--penalty", "l1", "--check", "reduction")
        assert code == cli.EXIT_USAGE


class TestOtherCommands:
    def test_sweep_matches_grid(self, lianzhang):
        code, text, _ = run("sweep", "--problem", "lianzhang-1d", "--lambda-ladder", "0.25:2:3")
        header, *rows = table_rows(text)
        pen, _ = parse_penalty("singular:linear", lianzhang)
        grid = _ReducedGrid(pen, lianzhang)
        for row, lam in zip(rows, (0.25, 0.5, 1.0)):
            assert float(row[1]) == grid.inf_F(lam)[0]

    def test_verify_bounds(self):
        code, text, _ = run("verify-bounds", "--problem", "mfcq-nlp-2d", "--config", "w=1", "--samples", "300",
                            "--json")
        doc = json.loads(text)["verdicts"]["sandwich"]
        assert code == 0 and doc["lower_failures"] == 0 and doc["upper_failures"] == 0

    def test_rsd_matches_direct_call(self, lianzhang):
        code, text, _ = run("rsd", "--problem", "lianzhang-1d", "--point", "0.5", "--param", "0.3",
                            "--lam", "10", "--samples", "500", "--json")
        value = json.loads(text)["verdicts"]["rsd"]["value"]
        pen, _ = parse_penalty("singular:linear", lianzhang)
        g, member, _, metric = _joint(pen, 10.0)
        est = estimate_rsd(g, member, np.array([0.5, 0.3]), RsdConfig(samples_per_shell=500, metric=metric))
        assert code == 0 and value == est.value

    def test_rsd_dimension_mismatch(self):
        assert run("rsd", "--problem", "lianzhang-1d", "--point", "0.5,1")[0] == cli.EXIT_USAGE

    def test_list_problems(self):
        code, text, _ = run("list-problems")
        assert code == 0 and [ln.split("\t")[0] for ln in text.splitlines()] == list_problems()
        doc = json.loads(run("list-problems", "--json")[1])
        assert doc[0]["name"] == "lianzhang-1d" and doc[0]["fstar"] == 1.0


class TestErrors:
    def test_missing_problem_file(self, tmp_path):
        code, _, err = run("solve", "--problem-file", str(tmp_path / "missing.txt"))
        assert code == cli.EXIT_USAGE and "cannot read" in err

    def test_parse_error(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("d = 1; box = [0, 1]; f = x1 +; eq = [x1]")
        code, _, err = run("solve", "--problem-file", str(path))
        assert code == cli.EXIT_USAGE and "parse error" in err

    def test_unknown_problem(self):
        assert run("solve", "--problem", "nope")[0] == cli.EXIT_USAGE

    def test_bad_penalty(self):
        assert run("solve", "--penalty", "nope")[0] == cli.EXIT_USAGE

    def test_bad_ladder(self):
        assert run("solve", "--lambda-ladder", "1:2")[0] == cli.EXIT_USAGE

    def test_argparse_error(self):
        assert run("diagnose", "--check", "bogus")[0] == cli.EXIT_USAGE
        assert run()[0] == cli.EXIT_USAGE

    def test_solver_failure_exit_code(self, tmp_path):
        # f is undefined everywhere in the box, so every start fails
        path = tmp_path / "p.txt"
        path.write_text("d = 1; box = [2, 3]; f = ln(1 - x1); eq = [x1 - 2]")
        code, _, _ = run("solve", "--problem-file", str(path), "--lambda-ladder", "1:2:2")
        assert code == cli.EXIT_SOLVER


@pytest.mark.parametrize("name", list_problems())
def test_problem_file_fixpoint(tmp_path, name):
    # registry export -> file -> CLI parse -> export is a fixpoint
    path = tmp_path / f"{name}.txt"
    path.write_text(load(name).export())
    args = cli.build_parser().parse_args(["solve", "--problem-file", str(path)])
    assert cli._problem(args).name == name
    from parampen.problemfile import format_problem

    assert format_problem(cli._problem(args)) == load(name).export()
