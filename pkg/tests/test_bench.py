import json
from pathlib import Path

import numpy as np
import pytest

from greedyqn.bench import (
    BUDGET_EXHAUSTED,
    ExperimentPlan,
    LibsvmSpec,
    QuadraticSpec,
    ResultTable,
    emit_table,
    main,
    parse_method,
    run_hessian_error_plan,
    run_plan,
)
from greedyqn.data_io import SyntheticSpec
from greedyqn.errors import InvalidPlan
from greedyqn.objectives import QuadraticProblem
from greedyqn.operator_core import DenseSymmetric

GOLDEN = Path(__file__).parent / "golden"


def micro_plan(**overrides):
    kw = dict(
        problem=SyntheticSpec(n=6, m=5, gamma=1.0, seed=7),
        methods=["GM", "SR1", "GrSR1"],
        epsilons=[1e-1, 1e-3, 1e-6],
        seed=7,
    )
    kw.update(overrides)
    return ExperimentPlan(**kw)


class TestMethodParsing:
    @pytest.mark.parametrize(
        "name,family,random_dirs",
        [
            ("GM", "gm", False),
            ("SR1", "classical", False),
            ("BFGS", "classical", False),
            ("GrDFP", "general", False),
            ("RaBFGS", "general", True),
        ],
    )
    def test_known_names(self, name, family, random_dirs):
        spec = parse_method(name)
        assert spec.family == family
        assert spec.random_directions == random_dirs

    def test_unknown_name(self):
        with pytest.raises(InvalidPlan):
            parse_method("Newton")


class TestPlanValidation:
    def test_epsilons_must_decrease(self):
        with pytest.raises(InvalidPlan):
            micro_plan(epsilons=[1e-3, 1e-1])

    def test_epsilons_must_be_positive(self):
        with pytest.raises(InvalidPlan):
            micro_plan(epsilons=[1e-1, 0.0])

    def test_needs_methods(self):
        with pytest.raises(InvalidPlan):
            micro_plan(methods=[])

    def test_budget_factor_floor(self):
        with pytest.raises(InvalidPlan):
            micro_plan(iteration_budget_factor=0)

    def test_unknown_format(self):
        with pytest.raises(InvalidPlan):
            micro_plan(formats=("csv", "pdf"))


class TestEmitTable:
    def test_one_by_one_csv_is_two_lines(self):
        table = ResultTable(epsilons=[1e-2], methods=["GM"], cells=[[17]])
        text = emit_table(table, "csv")
        assert text == "epsilon,GM\n0.01,17\n"

    def test_sentinel_preserved(self):
        table = ResultTable(
            epsilons=[1e-2], methods=["GM", "SR1"], cells=[[BUDGET_EXHAUSTED, "!"]]
        )
        assert emit_table(table, "csv").splitlines()[1] == "0.01,-,!"

    def test_markdown_layout(self):
        table = ResultTable(
            epsilons=[1e-1], methods=["GM"], cells=[[3]], metadata={"problem": "p", "seed": 0}
        )
        lines = emit_table(table, "md").splitlines()
        assert lines[0] == "**p, seed 0**"
        assert lines[2] == "| epsilon | GM |"
        assert lines[4] == "| 0.1 | 3 |"

    def test_error_cells_are_lossless_in_csv(self):
        table = ResultTable(epsilons=[1e-1], methods=["SR1"], cells=[[1.5625e3]])
        assert emit_table(table, "csv").splitlines()[1] == "0.1,1562.5"


class TestRunPlan:
    def test_golden_micro_plan(self):
        table = run_plan(micro_plan())
        assert emit_table(table, "csv") == (GOLDEN / "micro_iterations.csv").read_text()

    def test_rerun_is_byte_identical(self):
        a = emit_table(run_plan(micro_plan()), "csv")
        b = emit_table(run_plan(micro_plan()), "csv")
        assert a.encode() == b.encode()

    def test_identity_quadratic_gm_one_step(self):
        prob = QuadraticProblem(DenseSymmetric.identity(4), np.full(4, 0.25))
        plan = ExperimentPlan(
            problem=prob, methods=["GM"], epsilons=[1e-1], seed=3
        )
        table = run_plan(plan)
        assert table.cells[0][0] <= 1

    def test_counts_nondecreasing_down_columns(self):
        table = run_plan(micro_plan(methods=["GM", "SR1", "GrSR1", "RaSR1"]))
        for j in range(len(table.methods)):
            col = [row[j] for row in table.cells if isinstance(row[j], int)]
            assert col == sorted(col)

    def test_budget_exhaustion_marks_cells(self):
        plan = micro_plan(methods=["GM"], epsilons=[1e-1, 1e-9], iteration_budget_factor=1)
        table = run_plan(plan)
        assert table.cells[-1][0] == BUDGET_EXHAUSTED

    def test_quadratic_spec_runs(self):
        plan = ExperimentPlan(
            problem=QuadraticSpec(n=8, seed=5),
            methods=["GM", "GrSR1"],
            epsilons=[1e-2, 1e-8],
            seed=5,
        )
        table = run_plan(plan)
        assert all(isinstance(c, int) for row in table.cells for c in row)

    def test_writes_tables_and_traces(self, tmp_path):
        plan = micro_plan(output=str(tmp_path), formats=("csv", "md"))
        run_plan(plan)
        assert (tmp_path / "iterations.csv").exists()
        assert (tmp_path / "iterations.md").exists()
        for name in ("GM", "SR1", "GrSR1"):
            trace = (tmp_path / f"trace_{name}.csv").read_text().splitlines()
            assert trace[0] == "k,f,grad_norm,r_k,dir_index,lambda_f,sigma,op_error"
            assert len(trace) >= 2

    def test_trace_diagnostic_columns_filled_when_requested(self, tmp_path):
        from greedyqn.solvers import TraceOptions

        plan = micro_plan(
            methods=["GrSR1"],
            output=str(tmp_path),
            trace_options=TraceOptions(lambda_f=True, sigma=True, op_error=True),
        )
        run_plan(plan)
        line = (tmp_path / "trace_GrSR1.csv").read_text().splitlines()[1]
        fields = line.split(",")
        assert all(fields[i] != "" for i in (5, 6, 7))


class TestThresholdExtraction:
    def make_trace(self, f_values, outcome):
        from greedyqn.solvers import IterationRecord, RunTrace

        records = [IterationRecord(k, f, 1.0) for k, f in enumerate(f_values)]
        return RunTrace(records=records, outcome=outcome)

    def test_first_crossing_index(self):
        from greedyqn.bench import _threshold_index
        from greedyqn.solvers import CONVERGED

        trace = self.make_trace([10.0, 5.0, 0.5, 0.05], CONVERGED)
        assert _threshold_index(trace, 0.5, 0.0) == 1  # 5 <= 0.5*10
        assert _threshold_index(trace, 1e-2, 0.0) == 3

    def test_budget_exhaustion_sentinel(self):
        from greedyqn.bench import _threshold_index
        from greedyqn.solvers import MAX_ITER_REACHED

        trace = self.make_trace([10.0, 9.0], MAX_ITER_REACHED)
        assert _threshold_index(trace, 1e-3, 0.0) == BUDGET_EXHAUSTED

    def test_failure_sentinel_with_partial_counts(self):
        from greedyqn.bench import _threshold_index
        from greedyqn.solvers import NUMERICAL_FAILURE

        trace = self.make_trace([10.0, 0.5], NUMERICAL_FAILURE)
        assert _threshold_index(trace, 0.1, 0.0) == 1  # met before the failure
        assert _threshold_index(trace, 1e-6, 0.0) == "!"

    def test_empty_trace_is_failure(self):
        from greedyqn.bench import _threshold_index
        from greedyqn.solvers import NUMERICAL_FAILURE

        trace = self.make_trace([], NUMERICAL_FAILURE)
        assert _threshold_index(trace, 0.1, 0.0) == "!"


class TestHessianErrorPlan:
    def test_rejects_gradient_method(self):
        with pytest.raises(InvalidPlan):
            run_hessian_error_plan(micro_plan(methods=["GM", "SR1"]))

    def test_quadratic_greedy_sr1_reaches_exact_hessian(self):
        plan = ExperimentPlan(
            problem=QuadraticSpec(n=8, seed=11),
            methods=["GrSR1"],
            epsilons=[1e-2, 1e-12],
            seed=11,
        )
        table = run_hessian_error_plan(plan)
        count_plan = ExperimentPlan(
            problem=QuadraticSpec(n=8, seed=11),
            methods=["GrSR1"],
            epsilons=[1e-2, 1e-12],
            seed=11,
        )
        counts = run_plan(count_plan)
        if counts.cells[-1][0] >= 8:  # identification complete by then
            assert table.cells[-1][0] <= 1e-10

    def test_classical_error_stays_near_initial(self):
        plan = micro_plan(methods=["SR1", "GrSR1"], epsilons=[1e-0, 1e-6])
        table = run_hessian_error_plan(plan)
        initial = table.cells[0][0]
        final = table.cells[-1][0]
        assert isinstance(initial, float) and isinstance(final, float)
        # greedy drives the error far below a classical run at tight accuracy
        assert table.cells[-1][1] < final


class TestLibsvmPlan:
    def test_missing_dataset_raises(self):
        plan = micro_plan(problem=LibsvmSpec(path="/nonexistent.libsvm", gamma=1.0))
        from greedyqn.errors import DatasetNotFound

        with pytest.raises(DatasetNotFound):
            run_plan(plan)

    def test_logistic_fixture_runs_and_caches_f_star(self, tmp_path):
        data = (GOLDEN / "tiny.libsvm").read_text()
        target = tmp_path / "tiny.libsvm"
        target.write_text(data)
        plan = ExperimentPlan(
            problem=LibsvmSpec(path=str(target), gamma=1.0),
            methods=["SR1", "GrSR1"],
            epsilons=[1e-1, 1e-6],
            seed=2,
        )
        table = run_plan(plan)
        assert all(isinstance(c, int) for row in table.cells for c in row)
        cache = tmp_path / "tiny.libsvm.fstar.json"
        assert cache.exists()
        stored = json.loads(cache.read_text())
        assert "1" in stored
        # cached value is reused on the second run
        table2 = run_plan(plan)
        assert table2.cells == table.cells


class TestCli:
    def test_full_run_writes_outputs(self, tmp_path, capsys):
        code = main(
            [
                "--problem",
                "logsumexp",
                "--n",
                "6",
                "--m",
                "5",
                "--gamma",
                "1.0",
                "--methods",
                "GM,GrSR1",
                "--epsilons",
                "1e-1,1e-4",
                "--seed",
                "7",
                "--out",
                str(tmp_path),
                "--format",
                "csv,md",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("epsilon,GM,GrSR1")
        assert (tmp_path / "iterations.csv").exists()

    def test_invalid_method_exits_two(self, capsys):
        assert main(["--methods", "Newton", "--epsilons", "1e-1"]) == 2

    def test_missing_dataset_exits_three(self, capsys):
        code = main(
            ["--problem", "libsvm", "--dataset", "/does/not/exist", "--epsilons", "1e-1"]
        )
        assert code == 3

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "bench.cfg"
        cfg.write_text(
            "# micro plan\n"
            "problem = logsumexp\n"
            "n = 6\n"
            "m = 5\n"
            "methods = GM\n"
            "epsilons = 1e-1,1e-3\n"
            "seed = 7\n"
        )
        code = main(["--config", str(cfg), "--methods", "GrSR1"])
        assert code == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header == "epsilon,GrSR1"

    def test_label_remap_flag(self, tmp_path, capsys):
        data = tmp_path / "two.libsvm"
        data.write_text("2 1:1 2:0.5\n1 2:1\n2 1:-1\n1 1:0.5 2:-0.25\n")
        code = main(
            [
                "--problem",
                "libsvm",
                "--dataset",
                str(data),
                "--label-remap",
                "2:-1,1:1",
                "--methods",
                "SR1",
                "--epsilons",
                "1e-1,1e-4",
                "--seed",
                "1",
            ]
        )
        assert code == 0

    def test_hessian_error_flag_emits_second_table(self, capsys):
        code = main(
            [
                "--n",
                "6",
                "--m",
                "5",
                "--methods",
                "SR1,GrSR1",
                "--epsilons",
                "1e-1,1e-4",
                "--seed",
                "7",
                "--hessian-error",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("epsilon,SR1,GrSR1") == 2
