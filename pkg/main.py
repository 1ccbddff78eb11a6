"""
q-composite Key Graph Toolkit
Command-Line Entry Point: analyze, design, simulate, reproduce
"""

from typing import Any, Dict, List, Optional, Tuple
from pathlib import Path
import argparse
import json
import logging
import sys
import tempfile

from pydantic import ValidationError

import analytic
import charts
import settings
from analytic import AnalyticDomainError, NoFeasibleDesign
from models import DesignGoal, FigureId, TargetKind
from montecarlo import TrialFailure, compare_to_theory, run_experiment
from sampler import dump_edge_list, mix_seed, sample_graph
from schemas import ModelParams, ExperimentConfig, Target, FigureSpec, TrialSummary

logger = logging.getLogger("keygraph")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


class UsageError(Exception):
    """Raised for missing or conflicting command-line values"""
    pass


def emit(text: str = ""):
    """Single writer for all terminal output"""
    sys.stdout.write(text + "\n")
    sys.stdout.flush()


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6g}"


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="Number of nodes")
    common.add_argument("--K", type=int, help="Key-ring size")
    common.add_argument("--P", type=int, help="Key-pool size")
    common.add_argument("--p", type=float, help="Channel-on probability")
    common.add_argument("--q", type=int, help="Required number of shared keys")
    common.add_argument("--k", type=int, help="Target minimum degree")
    common.add_argument("--trials", type=int, help="Monte Carlo trials (default 2000)")
    common.add_argument("--seed", type=int, help="Base seed")
    common.add_argument("--workers", type=int, help="Worker processes (env KEYGRAPH_WORKERS)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--config", help="key = value config file; flags override it")
    common.add_argument("--log-level", help="Logging level")
    common.add_argument("--progress", action="store_true", help="Show trial-block progress")
    common.add_argument("--json", action="store_true", help="Print a JSON report")

    parser = argparse.ArgumentParser(
        prog="keygraph",
        description="Topological laws of q-composite key graphs with on/off channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="Exact and asymptotic laws for one parameter set")

    design = sub.add_parser("design", parents=[common], help="Smallest key-ring size meeting a guideline")
    goal = design.add_mutually_exclusive_group()
    goal.add_argument("--almost-sure", type=float, metavar="C", help="Min degree >= k almost surely, c > 0")
    goal.add_argument("--prob", type=float, metavar="RHO", help="Min degree >= k with probability >= rho")
    goal.add_argument("--exact-k", type=float, metavar="C", help="Min degree exactly k, 0 < c < 1")

    simulate = sub.add_parser("simulate", parents=[common], help="Run a Monte Carlo experiment")
    simulate.add_argument(
        "--target", action="append", default=[],
        help="ge:K | pmf:MAXK | phi:H:MAXCOUNT | density (repeatable)",
    )
    simulate.add_argument("--dump-graphs", metavar="DIR", help="Write edge lists of the first trials")
    simulate.add_argument("--dump-limit", type=int, default=10, help="Number of graphs to dump")

    reproduce = sub.add_parser("reproduce", parents=[common], help="Reproduce a published figure")
    reproduce.add_argument("figure", choices=[f.value for f in FigureId])
    reproduce.add_argument("--K-values", type=int, nargs="+", help="Key-ring sizes to sweep")
    reproduce.add_argument("--k-values", type=int, nargs="+", help="Minimum-degree levels")
    reproduce.add_argument("--h-values", type=int, nargs="+", help="Degrees h for fig3")
    reproduce.add_argument("--max-count", type=int, help="Largest count M tabulated for fig3")
    reproduce.add_argument("--from-csv", metavar="FILE", help="Only re-render the chart of an emitted CSV of the named figure")
    return parser


def resolve_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Merge flags, config file and environment defaults"""
    flags = {
        "n": args.n, "K": args.K, "P": args.P, "p": args.p, "q": args.q, "k": args.k,
        "trials": args.trials, "seed": args.seed, "workers": args.workers,
        "out": args.out, "log_level": args.log_level,
    }
    for name in ("almost_sure", "prob", "exact_k", "max_count"):
        if hasattr(args, name):
            flags["rho" if name == "prob" else name] = getattr(args, name)
    file_values = settings.load_config_file(Path(args.config)) if args.config else {}
    return settings.merge_settings(flags, file_values, settings.runtime_defaults())


def require(values: Dict[str, Any], *names: str):
    missing = [name for name in names if values.get(name) is None]
    if missing:
        raise UsageError("missing required value(s): " + ", ".join("--" + m for m in missing))


def model_params(values: Dict[str, Any]) -> ModelParams:
    require(values, "n", "K", "P", "p", "q")
    return ModelParams(n=values["n"], K=values["K"], P=values["P"], p=values["p"], q=values["q"])


def parse_target(text: str) -> Target:
    """ge:K | pmf:MAXK | phi:H:MAXCOUNT | density"""
    parts = text.split(":")
    try:
        if parts[0] == "ge" and len(parts) == 2:
            return Target.min_degree_ge(int(parts[1]))
        if parts[0] == "pmf" and len(parts) == 2:
            return Target.min_degree_pmf(int(parts[1]))
        if parts[0] == "phi" and len(parts) == 3:
            return Target.phi_count_dist(int(parts[1]), int(parts[2]))
        if parts == ["density"]:
            return Target.edge_density()
    except ValueError:
        pass
    raise UsageError(f"malformed target '{text}'")


# ============================================================================
# ANALYZE
# ============================================================================

def analyze_report(params: ModelParams, k: int) -> Dict[str, Any]:
    """Every analytic quantity for one parameter set and level k"""
    if k < 0:
        raise UsageError(f"k must be >= 0, got {k}")
    links = analytic.p_link(params)
    levels = analytic.select_ell_gamma(params)
    probability, alpha = analytic.limit_min_degree_at_least(params.n, links.p_eq, k)
    pmf = analytic.pmf_from_levels(levels.ell_star, levels.gamma_star)
    return {
        "params": params.model_dump(),
        "k": k,
        "p_sq": links.p_sq,
        "p_eq": links.p_eq,
        "pool_size_warning": links.pool_size_warning,
        "alpha": alpha,
        "ell_star": levels.ell_star,
        "gamma_star": levels.gamma_star,
        "b": levels.ell_star - k if k >= 1 else None,
        "beta": levels.gamma_star,
        "lambda": {h: analytic.lambda_poisson(params, h) for h in range(k + 1)},
        "prob_min_degree_at_least": probability,
        "zero_one_regime": None if alpha is None else analytic.zero_one_regime(alpha).value,
        "min_degree_pmf": pmf.support,
        "min_degree_regime": pmf.regime.value,
        "key_ratio": analytic.key_ratio(params),
    }


def cmd_analyze(params: ModelParams, k: int, as_json: bool = False):
    report = analyze_report(params, k)
    if as_json:
        emit(json.dumps(report, indent=2))
        return
    emit(f"Parameters        {params.header()}")
    emit(f"p_sq              {_fmt(report['p_sq'])}")
    emit(f"p_eq              {_fmt(report['p_eq'])}")
    emit(f"alpha (k={k})       {_fmt(report['alpha'])}")
    emit(f"ell*, gamma*      {report['ell_star']}, {_fmt(report['gamma_star'])}")
    for h, lam in report["lambda"].items():
        emit(f"lambda_{{n,{h}}}      {_fmt(lam)}")
    emit(f"P[min deg >= {k}]   {_fmt(report['prob_min_degree_at_least'])}")
    support = ", ".join(f"P[min deg = {d}] = {_fmt(prob)}" for d, prob in report["min_degree_pmf"])
    emit(f"min degree law    {support}")
    emit(f"K^2/P             {_fmt(report['key_ratio'])}")
    if report["pool_size_warning"]:
        emit("warning           P < 2K")


# ============================================================================
# DESIGN
# ============================================================================

def design_goal(values: Dict[str, Any]):
    chosen = [name for name in ("almost_sure", "rho", "exact_k") if values.get(name) is not None]
    if len(chosen) != 1:
        raise UsageError("exactly one of --almost-sure, --prob, --exact-k is required")
    name = chosen[0]
    goal = {"almost_sure": DesignGoal.ALMOST_SURE, "rho": DesignGoal.WITH_PROB,
            "exact_k": DesignGoal.EXACT_K}[name]
    return goal, values[name]


def cmd_design(values: Dict[str, Any], as_json: bool = False):
    require(values, "n", "P", "p", "q", "k")
    goal, constant = design_goal(values)
    kwargs = {"rho": constant} if goal == DesignGoal.WITH_PROB else {"c": constant}
    report = analytic.solve_design(
        values["n"], values["P"], values["p"], values["q"], values["k"], goal, **kwargs
    )
    if as_json:
        emit(report.model_dump_json(indent=2))
        return
    emit(f"Goal              {goal.value} ({_fmt(constant)}), k={report.k}")
    emit(f"Threshold p_eq    {_fmt(report.threshold)}")
    emit(f"Chosen K          {report.K}")
    emit(f"Achieved p_eq     {_fmt(report.p_eq)}")
    emit(f"P[min deg >= {report.k}]   {_fmt(report.prob_min_degree_at_least)}")
    support = ", ".join(f"P[min deg = {d}] = {_fmt(p)}" for d, p in report.min_degree_pmf.support)
    emit(f"min degree law    {support}")
    emit(f"K^2/P             {_fmt(report.key_ratio)}")


# ============================================================================
# SIMULATE
# ============================================================================

def default_targets(k: Optional[int]) -> List[Target]:
    if k is None:
        return [Target.min_degree_pmf(5), Target.edge_density()]
    return [Target.min_degree_ge(k), Target.min_degree_pmf(k + 3), Target.edge_density()]


def cmd_simulate(values: Dict[str, Any], targets: List[Target], as_json: bool = False,
                 progress: bool = False, dump_dir: Optional[str] = None, dump_limit: int = 10):
    params = model_params(values)
    cfg = ExperimentConfig(
        params=params,
        trials=values["trials"],
        base_seed=values["seed"],
        targets=targets or default_targets(values.get("k")),
        workers=values["workers"],
    )
    summary = run_experiment(cfg, progress=progress)
    report = compare_to_theory(summary, params)

    if dump_dir:
        directory = Path(dump_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for trial in range(min(dump_limit, cfg.trials)):
            graph = sample_graph(params, mix_seed(cfg.base_seed, trial))
            dump_edge_list(graph, params, directory / f"trial_{trial:05d}.txt")

    if as_json:
        emit(json.dumps({"summary": summary.model_dump(mode="json"),
                         "comparison": report.model_dump(mode="json")}, indent=2))
        return
    emit(f"Parameters   {params.header()}  trials={summary.trials}  seed={summary.base_seed}")
    for entry in report.entries:
        header = entry.target.label
        if entry.total_variation is not None:
            header += f"  TV={_fmt(entry.total_variation)}"
        if entry.poisson_mean is not None:
            header += f"  lambda={_fmt(entry.poisson_mean)}"
        emit(header)
        for row in entry.rows:
            label = "" if row.value is None else f"{row.value:>4}"
            emit(f"  {label}  empirical={_fmt(row.empirical)}  analytic={_fmt(row.analytic)}"
                 f"  gap={_fmt(row.gap)}")
        if entry.target.kind in (TargetKind.MIN_DEGREE_PMF, TargetKind.PHI_COUNT_DIST):
            emit(f"  tail  empirical={_fmt(entry.empirical_tail)}  analytic={_fmt(entry.analytic_tail)}")


# ============================================================================
# REPRODUCE
# ============================================================================

def figure_rows(fig: FigureSpec, progress: bool = False) -> Tuple[List[Dict], List[TrialSummary]]:
    """Run the experiments behind a figure and tabulate empirical vs analytic values"""
    rows: List[Dict] = []
    summaries: List[TrialSummary] = []
    for K in fig.K_values:
        params = fig.params_for(K)
        if fig.figure == FigureId.FIG1:
            targets = [Target.min_degree_ge(k) for k in fig.k_values]
        elif fig.figure == FigureId.FIG2:
            targets = [Target.min_degree_pmf(max(fig.k_values))]
        else:
            targets = [Target.phi_count_dist(h, fig.max_count) for h in fig.h_values]

        cfg = ExperimentConfig(params=params, trials=fig.trials, base_seed=fig.base_seed,
                               targets=targets, workers=fig.workers)
        summary = run_experiment(cfg, progress=progress)
        summaries.append(summary)
        p_eq = analytic.p_link(params).p_eq

        if fig.figure == FigureId.FIG1:
            for target in targets:
                est = summary.estimate_for(target)
                predicted, _ = analytic.limit_min_degree_at_least(params.n, p_eq, target.k)
                rows.append({"k": target.k, "K": K, "empirical": est.estimates[0],
                             "analytic": predicted, "se": est.standard_errors[0]})
        elif fig.figure == FigureId.FIG2:
            est = summary.estimate_for(targets[0])
            pmf = analytic.min_degree_pmf_asymptotic(params)
            for k in fig.k_values:
                rows.append({"k": k, "K": K, "empirical": est.estimates[k],
                             "analytic": pmf.probability(k), "se": est.standard_errors[k]})
        else:
            for target in targets:
                est = summary.estimate_for(target)
                lam = analytic.lambda_from_p_eq(params.n, p_eq, target.h)
                poisson_pmf, poisson_tail = analytic.poisson_pmf_truncated(lam, fig.max_count)
                for M in est.support:
                    rows.append({"h": target.h, "M": M, "empirical": est.estimates[M],
                                 "poisson": float(poisson_pmf[M])})
                rows.append({"h": target.h, "M": fig.max_count + 1,
                             "empirical": est.tail_estimate, "poisson": poisson_tail})
                if est.tail_count:
                    logger.warning(
                        "h=%d: %d of %d trials counted more than max_count=%d nodes; "
                        "their mass is in the M=%d tail row",
                        target.h, est.tail_count, summary.trials, fig.max_count, fig.max_count + 1,
                    )
    return rows, summaries


def cmd_reproduce(fig: FigureSpec, progress: bool = False) -> Dict[str, Path]:
    """Write <figure>.csv and <figure>.svg into the output directory"""
    fig.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = fig.output_dir / f"{fig.figure.value}.csv"
    svg_path = fig.output_dir / f"{fig.figure.value}.svg"
    # fail on an unwritable directory before any trial runs, leaving nothing behind
    with tempfile.TemporaryFile(dir=fig.output_dir):
        pass

    rows, _ = figure_rows(fig, progress=progress)
    charts.write_csv(fig.figure, rows, csv_path)
    # the chart is drawn from the rounded CSV so re-rendering it is byte-identical
    charts.render_from_csv(fig.figure, csv_path, svg_path)
    emit(f"Wrote {csv_path}")
    emit(f"Wrote {svg_path}")
    return {"csv": csv_path, "svg": svg_path}


def figure_spec(args: argparse.Namespace, values: Dict[str, Any]) -> FigureSpec:
    require(values, "out")
    figure = FigureId(args.figure)
    return FigureSpec.default(
        figure,
        n=values.get("n"),
        P=values.get("P"),
        p=values.get("p"),
        q=values.get("q"),
        K_values=args.K_values or ([values["K"]] if values.get("K") is not None else None),
        k_values=args.k_values or ([values["k"]] if values.get("k") is not None else None),
        h_values=args.h_values,
        max_count=values.get("max_count"),
        trials=values["trials"],
        base_seed=values["seed"],
        workers=values["workers"],
        output_dir=Path(values["out"]),
    )


# ============================================================================
# ENTRY POINT
# ============================================================================

def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        values = resolve_settings(args)
        settings.configure_logging(values.get("log_level") or settings.DEFAULT_LOG_LEVEL)

        if args.command == "analyze":
            require(values, "k")
            cmd_analyze(model_params(values), values["k"], as_json=args.json)
        elif args.command == "design":
            cmd_design(values, as_json=args.json)
        elif args.command == "simulate":
            targets = [parse_target(text) for text in args.target]
            cmd_simulate(values, targets, as_json=args.json, progress=args.progress,
                         dump_dir=args.dump_graphs, dump_limit=args.dump_limit)
        elif args.command == "reproduce":
            if args.from_csv:
                csv_path = Path(args.from_csv)
                out_dir = Path(values["out"]) if values.get("out") else csv_path.parent
                out_dir.mkdir(parents=True, exist_ok=True)
                svg_path = charts.render_from_csv(
                    FigureId(args.figure), csv_path, out_dir / f"{csv_path.stem}.svg")
                emit(f"Wrote {svg_path}")
            else:
                cmd_reproduce(figure_spec(args, values), progress=args.progress)
    except (UsageError, ValidationError, AnalyticDomainError,
            settings.ConfigFileError, charts.CsvFormatError) as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {e}\n")
        return EXIT_USAGE
    except NoFeasibleDesign as e:
        sys.stderr.write(f"No feasible design: {e}\n")
        return EXIT_INFEASIBLE
    except TrialFailure as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except OSError as e:
        sys.stderr.write(f"I/O error: {e}\n")
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
