"""Experiment driver: runs a (method x epsilon) matrix and emits result tables.

Each method runs once to the tightest requested accuracy; per-epsilon
iteration counts are extracted afterwards from the single trajectory, so a
looser threshold always reports a prefix of the same run.  Results are
emitted as CSV and/or Markdown tables plus one trace CSV per method.

The CLI reads a flat key-value config file (``key = value`` lines, ``#``
comments) whose keys match the command-line flag names; explicit flags
override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .broyden import UpdateRule
from .data_io import RngStream, SyntheticSpec, generate_logsumexp, generate_start, parse_libsvm
from .errors import DatasetNotFound, GreedyQnError, InvalidPlan
from .objectives import ObjectiveOracle, QuadraticProblem
from .operator_core import DenseSymmetric
from .solvers import (
    MAX_ITER_REACHED,
    DirectionStrategy,
    FunctionResidual,
    GradientNorm,
    SolverConfig,
    TraceOptions,
    classical_qn,
    gradient_method,
    solve_general,
)

BUDGET_EXHAUSTED = "-"
FAILED = "!"

_RULES = {
    "SR1": UpdateRule.sr1,
    "DFP": UpdateRule.dfp,
    "BFGS": UpdateRule.bfgs,
}


@dataclass(frozen=True)
class MethodSpec:
    """One column of the experiment matrix."""

    name: str
    family: str  # "gm" | "classical" | "general"
    rule: UpdateRule | None = None
    random_directions: bool = False
    correction: bool | None = None  # None: follow the problem default


def parse_method(name: str) -> MethodSpec:
    if name == "GM":
        return MethodSpec(name, "gm")
    if name in _RULES:
        return MethodSpec(name, "classical", rule=_RULES[name]())
    for prefix, random_dirs in (("Gr", False), ("Ra", True)):
        if name.startswith(prefix) and name[len(prefix):] in _RULES:
            return MethodSpec(
                name,
                "general",
                rule=_RULES[name[len(prefix):]](),
                random_directions=random_dirs,
            )
    raise InvalidPlan(f"unknown method {name!r}")


@dataclass(frozen=True)
class QuadraticSpec:
    """Seeded random SPD quadratic: A = M M^T / n + I with uniform M, b."""

    n: int
    seed: int

    def build(self) -> QuadraticProblem:
        rng = RngStream(self.seed, "data")
        m = rng.uniform(-1.0, 1.0, (self.n, self.n))
        a = m @ m.T / self.n + np.eye(self.n)
        b = rng.uniform(-1.0, 1.0, self.n)
        return QuadraticProblem(DenseSymmetric(a), b)


@dataclass(frozen=True)
class LibsvmSpec:
    """A local LIBSVM file plus the l2 coefficient of the logistic objective."""

    path: str
    gamma: float
    label_map: dict | None = None
    n_features: int | None = None


@dataclass
class ExperimentPlan:
    problem: object  # SyntheticSpec | LibsvmSpec | QuadraticSpec | ObjectiveOracle
    methods: list
    epsilons: list
    seed: int
    iteration_budget_factor: int = 1000
    output: str | None = None
    formats: tuple = ("csv",)
    diag_cap: int = 500
    trace_options: TraceOptions = field(default_factory=TraceOptions)

    def __post_init__(self):
        self.methods = [
            m if isinstance(m, MethodSpec) else parse_method(m) for m in self.methods
        ]
        if not self.methods:
            raise InvalidPlan("no methods requested")
        eps = [float(e) for e in self.epsilons]
        if not eps or any(e <= 0 for e in eps):
            raise InvalidPlan("epsilons must be positive")
        if any(later >= earlier for earlier, later in zip(eps, eps[1:])):
            raise InvalidPlan("epsilons must be strictly decreasing")
        self.epsilons = eps
        if self.iteration_budget_factor < 1:
            raise InvalidPlan("iteration budget factor must be at least 1")
        bad = set(self.formats) - {"csv", "md"}
        if bad:
            raise InvalidPlan(f"unknown output formats: {sorted(bad)}")


@dataclass
class ResultTable:
    """Rows indexed by epsilon, columns by method.

    Cells hold an iteration count (int), a final-error value (float), or a
    sentinel: "-" for budget exhausted, "!" for numerical failure.
    """

    epsilons: list
    methods: list
    cells: list  # cells[i][j] for epsilons[i], methods[j]
    metadata: dict = field(default_factory=dict)


@dataclass
class _Prepared:
    oracle: ObjectiveOracle
    f_star: float
    x0: np.ndarray
    description: str
    correction_default: bool
    m_const: float


def _reference_f_star(path: Path, oracle, budget: int) -> float:
    """Logistic optimum via a cached high-accuracy reference solve."""
    cache = path.with_name(path.name + ".fstar.json")
    key = f"{oracle.gamma:.17g}"
    if cache.exists():
        stored = json.loads(cache.read_text())
        if key in stored:
            return float(stored[key])
    else:
        stored = {}
    _, trace = classical_qn(
        oracle,
        np.zeros(oracle.n),
        UpdateRule.sr1(),
        oracle.lipschitz_l,
        GradientNorm(1e-13),
        budget,
    )
    f_star = float(min(trace.f_values()))
    stored[key] = f_star
    try:
        cache.write_text(json.dumps(stored, sort_keys=True))
    except OSError:
        pass  # read-only dataset directory: recompute next time
    return f_star


def _prepare(plan: ExperimentPlan) -> _Prepared:
    prob = plan.problem
    if isinstance(prob, SyntheticSpec):
        oracle = generate_logsumexp(prob)
        f_star = oracle.value(np.zeros(oracle.n))
        desc = f"logsumexp n={prob.n} m={prob.m} gamma={prob.gamma:g}"
        correction = True
    elif isinstance(prob, LibsvmSpec):
        path = Path(prob.path)
        if not path.is_file():
            raise DatasetNotFound(f"dataset file not found: {path}")
        dataset = parse_libsvm(
            path.read_text(), label_map=prob.label_map, n_features=prob.n_features
        )
        oracle = dataset.to_logistic(prob.gamma)
        f_star = _reference_f_star(path, oracle, 50 * oracle.n)
        desc = f"logistic {path.name} n={oracle.n} m={oracle.m} gamma={prob.gamma:g}"
        correction = False
    elif isinstance(prob, QuadraticSpec):
        oracle = prob.build()
        f_star = oracle.value(oracle.minimizer())
        desc = f"quadratic n={prob.n}"
        correction = False
    elif isinstance(prob, QuadraticProblem):
        oracle = prob
        f_star = oracle.value(oracle.minimizer())
        desc = f"quadratic n={oracle.n}"
        correction = False
    elif isinstance(prob, ObjectiveOracle):
        raise InvalidPlan("bare oracles need a known optimum; pass a problem spec")
    else:
        raise InvalidPlan(f"unsupported problem spec {type(prob).__name__}")
    x0 = generate_start(oracle.n, plan.seed)
    m_const = oracle.self_concordance_m
    if m_const is None or m_const <= 0:
        correction = False
        m_const = 0.0
    return _Prepared(oracle, f_star, x0, desc, correction, m_const)


def _run_methods(plan: ExperimentPlan, prepared: _Prepared, trace_opts: TraceOptions):
    """Run every method once to the tightest epsilon; return name -> trace."""
    oracle = prepared.oracle
    budget = plan.iteration_budget_factor * oracle.n
    termination = FunctionResidual(plan.epsilons[-1], prepared.f_star)
    traces = {}
    wall = {}
    for spec in plan.methods:
        t0 = time.perf_counter()
        if spec.family == "gm":
            _, trace = gradient_method(
                oracle, prepared.x0, oracle.lipschitz_l, termination, budget
            )
        elif spec.family == "classical":
            _, trace = classical_qn(
                oracle,
                prepared.x0,
                spec.rule,
                oracle.lipschitz_l,
                termination,
                budget,
                trace_options=trace_opts,
                diag_cap=plan.diag_cap,
            )
        else:
            correction = (
                prepared.correction_default
                if spec.correction is None
                else spec.correction
            )
            strategy = (
                DirectionStrategy.random_sphere(plan.seed)
                if spec.random_directions
                else DirectionStrategy.greedy()
            )
            config = SolverConfig(
                rule=spec.rule,
                strategy=strategy,
                termination=termination,
                max_iter=budget,
                correction=correction,
                m_const=prepared.m_const if correction else 0.0,
                trace=trace_opts,
                diag_cap=plan.diag_cap,
                seed=plan.seed,
            )
            _, trace = solve_general(oracle, prepared.x0, config)
        wall[spec.name] = time.perf_counter() - t0
        traces[spec.name] = trace
    return traces, wall


def _threshold_index(trace, epsilon: float, f_star: float):
    """First iteration meeting the residual threshold, or a sentinel."""
    f = trace.f_values()
    if f.size == 0:
        return FAILED
    gap0 = f[0] - f_star
    hit = np.nonzero(f - f_star <= epsilon * gap0)[0]
    if hit.size:
        return int(hit[0])
    return BUDGET_EXHAUSTED if trace.outcome == MAX_ITER_REACHED else FAILED


def _metadata(plan, prepared, wall) -> dict:
    return {
        "problem": prepared.description,
        "seed": plan.seed,
        "wall_times": wall,
    }


def run_plan(plan: ExperimentPlan) -> ResultTable:
    """Iteration-count table over the (method x epsilon) matrix."""
    prepared = _prepare(plan)
    traces, wall = _run_methods(plan, prepared, plan.trace_options)
    cells = [
        [_threshold_index(traces[m.name], eps, prepared.f_star) for m in plan.methods]
        for eps in plan.epsilons
    ]
    table = ResultTable(
        epsilons=list(plan.epsilons),
        methods=[m.name for m in plan.methods],
        cells=cells,
        metadata=_metadata(plan, prepared, wall),
    )
    if plan.output is not None:
        _write_outputs(plan, table, traces, "iterations")
    return table


def run_hessian_error_plan(plan: ExperimentPlan) -> ResultTable:
    """Final Hessian-approximation error per (method, epsilon).

    Cells hold the relative operator-norm error of the approximation at the
    first iterate meeting each threshold.  Gradient descent keeps no
    approximation and is rejected.
    """
    if any(m.family == "gm" for m in plan.methods):
        raise InvalidPlan("gradient descent has no Hessian approximation to report")
    prepared = _prepare(plan)
    if prepared.oracle.n > plan.diag_cap:
        raise InvalidPlan(
            f"n={prepared.oracle.n} exceeds diagnostics cap {plan.diag_cap}"
        )
    opts = TraceOptions(
        lambda_f=plan.trace_options.lambda_f,
        sigma=plan.trace_options.sigma,
        op_error=True,
    )
    traces, wall = _run_methods(plan, prepared, opts)
    cells = []
    for eps in plan.epsilons:
        row = []
        for m in plan.methods:
            trace = traces[m.name]
            idx = _threshold_index(trace, eps, prepared.f_star)
            if isinstance(idx, str):
                row.append(idx)
            else:
                err = trace.records[idx].op_error
                row.append(float(err) if err is not None else FAILED)
        cells.append(row)
    table = ResultTable(
        epsilons=list(plan.epsilons),
        methods=[m.name for m in plan.methods],
        cells=cells,
        metadata=_metadata(plan, prepared, wall),
    )
    if plan.output is not None:
        _write_outputs(plan, table, traces, "hessian_error")
    return table


def _format_cell(cell, markdown: bool) -> str:
    if isinstance(cell, str):
        return cell
    if isinstance(cell, int):
        return str(cell)
    return f"{cell:.2e}" if markdown else f"{cell:.17g}"


def emit_table(table: ResultTable, fmt: str) -> str:
    """Render a result table as "csv" or "md" text."""
    if fmt == "csv":
        lines = ["epsilon," + ",".join(table.methods)]
        for eps, row in zip(table.epsilons, table.cells):
            lines.append(
                f"{eps:g}," + ",".join(_format_cell(c, markdown=False) for c in row)
            )
        return "\n".join(lines) + "\n"
    if fmt == "md":
        header = "| epsilon | " + " | ".join(table.methods) + " |"
        rule = "|" + "---|" * (len(table.methods) + 1)
        lines = []
        desc = table.metadata.get("problem")
        if desc is not None:
            lines.append(f"**{desc}, seed {table.metadata.get('seed')}**")
            lines.append("")
        lines.extend([header, rule])
        for eps, row in zip(table.epsilons, table.cells):
            cells = " | ".join(_format_cell(c, markdown=True) for c in row)
            lines.append(f"| {eps:g} | {cells} |")
        return "\n".join(lines) + "\n"
    raise InvalidPlan(f"unknown format {fmt!r}")


def _trace_csv(trace) -> str:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, int):
            return str(v)
        return f"{v:.17g}"

    lines = ["k,f,grad_norm,r_k,dir_index,lambda_f,sigma,op_error"]
    for r in trace.records:
        lines.append(
            ",".join(
                fmt(v)
                for v in (
                    r.k,
                    r.f_value,
                    r.grad_norm,
                    r.r_k,
                    r.direction_index,
                    r.lambda_f,
                    r.sigma,
                    r.op_error,
                )
            )
        )
    return "\n".join(lines) + "\n"


def _write_outputs(plan: ExperimentPlan, table: ResultTable, traces, stem: str):
    out = Path(plan.output)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in plan.formats:
        (out / f"{stem}.{fmt}").write_text(emit_table(table, fmt))
    for name, trace in traces.items():
        (out / f"trace_{name}.csv").write_text(_trace_csv(trace))


# ---------------------------------------------------------------------------
# Command-line interface


def _parse_kv_config(path: str) -> dict:
    """Flat config file: one ``key = value`` per line, ``#`` comments."""
    values = {}
    text = Path(path).read_text()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidPlan(f"{path}:{line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_label_map(text: str) -> dict:
    out = {}
    for pair in text.split(","):
        pair = pair.strip()
        if not pair:
            continue
        try:
            src, dst = pair.split(":", 1)
            out[float(src)] = float(dst)
        except ValueError:
            raise InvalidPlan(f"bad label-remap pair {pair!r}") from None
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="greedyqn-bench",
        description="Run a (method x accuracy) quasi-Newton benchmark matrix.",
    )
    p.add_argument("--config", help="flat key-value config file; flags override it")
    p.add_argument("--problem", choices=["logsumexp", "libsvm", "quadratic"])
    p.add_argument("--n", type=int, help="dimension (logsumexp/quadratic)")
    p.add_argument("--m", type=int, help="number of data rows (logsumexp)")
    p.add_argument("--gamma", type=float, help="l2 regularization coefficient")
    p.add_argument("--dataset", help="LIBSVM file path (libsvm problem)")
    p.add_argument("--label-remap", help="comma list of from:to label pairs")
    p.add_argument("--n-features", type=int, help="override inferred feature count")
    p.add_argument("--methods", help="comma list, e.g. GM,SR1,GrSR1,RaBFGS")
    p.add_argument("--epsilons", help="comma list, strictly decreasing")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget-factor", type=int, help="iteration budget = factor * n")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", help="comma subset of csv,md")
    p.add_argument(
        "--trace",
        help="comma subset of lambda_f,sigma,op_error to record per iteration",
    )
    p.add_argument(
        "--hessian-error",
        action="store_true",
        help="also emit the final Hessian-approximation-error table",
    )
    return p


_DEFAULTS = {
    "problem": "logsumexp",
    "n": 50,
    "m": 50,
    "gamma": 1.0,
    "methods": "GM,DFP,BFGS,SR1,GrDFP,GrBFGS,GrSR1",
    "epsilons": "1e-1,1e-3,1e-5,1e-7,1e-9",
    "seed": 1,
    "budget-factor": 1000,
    "format": "csv",
}


def _plan_from_args(args) -> tuple[ExperimentPlan, bool]:
    settings = dict(_DEFAULTS)
    if args.config:
        settings.update(_parse_kv_config(args.config))
    overrides = {
        "problem": args.problem,
        "n": args.n,
        "m": args.m,
        "gamma": args.gamma,
        "dataset": args.dataset,
        "label-remap": args.label_remap,
        "n-features": args.n_features,
        "methods": args.methods,
        "epsilons": args.epsilons,
        "seed": args.seed,
        "budget-factor": args.budget_factor,
        "out": args.out,
        "format": args.format,
        "trace": args.trace,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if args.hessian_error:
        settings["hessian-error"] = "true"

    try:
        n = int(settings["n"])
        m = int(settings["m"])
        gamma = float(settings["gamma"])
        seed = int(settings["seed"])
        budget = int(settings["budget-factor"])
    except (TypeError, ValueError) as exc:
        raise InvalidPlan(f"bad numeric setting: {exc}") from None

    kind = settings["problem"]
    if kind == "logsumexp":
        problem = SyntheticSpec(n=n, m=m, gamma=gamma, seed=seed)
    elif kind == "quadratic":
        problem = QuadraticSpec(n=n, seed=seed)
    elif kind == "libsvm":
        if not settings.get("dataset"):
            raise InvalidPlan("libsvm problem needs --dataset")
        label_map = None
        if settings.get("label-remap"):
            label_map = _parse_label_map(settings["label-remap"])
        n_features = settings.get("n-features")
        problem = LibsvmSpec(
            path=settings["dataset"],
            gamma=gamma,
            label_map=label_map,
            n_features=int(n_features) if n_features is not None else None,
        )
    else:
        raise InvalidPlan(f"unknown problem kind {kind!r}")

    trace_fields = {"lambda_f": False, "sigma": False, "op_error": False}
    if settings.get("trace"):
        for name in str(settings["trace"]).split(","):
            name = name.strip()
            if name not in trace_fields:
                raise InvalidPlan(f"unknown trace column {name!r}")
            trace_fields[name] = True

    plan = ExperimentPlan(
        problem=problem,
        methods=[s for s in str(settings["methods"]).split(",") if s],
        epsilons=[float(e) for e in str(settings["epsilons"]).split(",") if e],
        seed=seed,
        iteration_budget_factor=budget,
        output=settings.get("out"),
        formats=tuple(f for f in str(settings["format"]).split(",") if f),
        trace_options=TraceOptions(**trace_fields),
    )
    want_error_table = str(settings.get("hessian-error", "")).lower() in (
        "true",
        "1",
        "yes",
    )
    return plan, want_error_table


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        plan, want_error_table = _plan_from_args(args)
        table = run_plan(plan)
        print(emit_table(table, "csv"), end="")
        for name, seconds in table.metadata["wall_times"].items():
            print(f"# {name}: {seconds:.2f}s", file=sys.stderr)
        if want_error_table:
            error_plan = ExperimentPlan(
                problem=plan.problem,
                methods=[m for m in plan.methods if m.family != "gm"],
                epsilons=plan.epsilons,
                seed=plan.seed,
                iteration_budget_factor=plan.iteration_budget_factor,
                output=plan.output,
                formats=plan.formats,
                diag_cap=plan.diag_cap,
            )
            err_table = run_hessian_error_plan(error_plan)
            print(emit_table(err_table, "csv"), end="")
    except DatasetNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidPlan, GreedyQnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
