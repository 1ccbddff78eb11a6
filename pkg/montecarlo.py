"""
Monte Carlo Experiments
Seeded trials over a worker pool, integer tallies and comparison with the analytic laws
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from concurrent.futures.process import BrokenProcessPool
from typing import Dict, List, Optional, Tuple
import logging
import math
import time

from tqdm import tqdm

import analytic
from metrics import degree_stats
from models import TargetKind
from sampler import mix_seed, sample_graph
from schemas import (
    ModelParams,
    ExperimentConfig,
    Target,
    TargetEstimate,
    EdgeDensityEstimate,
    TrialSummary,
    ComparisonRow,
    ComparisonEntry,
    ComparisonReport,
)

logger = logging.getLogger(__name__)

# label -> integer bins; distribution targets keep their tail as the last bin
Tally = Dict[str, List[int]]


class TrialFailure(RuntimeError):
    """
    Raised when a trial cannot be completed.

    When only the enclosing block is known (a worker process died), `trial`
    is the first trial of the block and `block_end` its exclusive end.
    """

    def __init__(self, trial: int, reason: str, block_end: Optional[int] = None):
        where = f"Trial {trial}" if block_end is None else f"Block of trials [{trial}, {block_end})"
        super().__init__(f"{where} failed: {reason}")
        self.trial = trial
        self.reason = reason
        self.block_end = block_end

    def __reduce__(self):
        return (self.__class__, (self.trial, self.reason, self.block_end))


# ============================================================================
# TALLIES
# ============================================================================

def _empty_tally(targets: List[Target]) -> Tally:
    tally: Tally = {}
    for target in targets:
        if target.kind == TargetKind.MIN_DEGREE_GE:
            tally[target.label] = [0]
        elif target.kind == TargetKind.MIN_DEGREE_PMF:
            tally[target.label] = [0] * (target.max_k + 2)
        elif target.kind == TargetKind.PHI_COUNT_DIST:
            tally[target.label] = [0] * (target.max_count + 2)
        else:
            tally[target.label] = [0, 0]  # edge total, sum of squared edge counts
    return tally


def _record(tally: Tally, targets: List[Target], stats):
    for target in targets:
        bins = tally[target.label]
        if target.kind == TargetKind.MIN_DEGREE_GE:
            bins[0] += int(stats.min_degree >= target.k)
        elif target.kind == TargetKind.MIN_DEGREE_PMF:
            bins[min(stats.min_degree, target.max_k + 1)] += 1
        elif target.kind == TargetKind.PHI_COUNT_DIST:
            bins[min(stats.phi(target.h), target.max_count + 1)] += 1
        else:
            edges = stats.edge_count
            bins[0] += edges
            bins[1] += edges * edges


def merge_tallies(a: Tally, b: Tally) -> Tally:
    """Element-wise sum; associative and order independent"""
    if a.keys() != b.keys():
        raise ValueError("Cannot merge tallies of different targets")
    return {label: [x + y for x, y in zip(a[label], b[label])] for label in a}


def run_trial_block(
    params: ModelParams,
    targets: List[Target],
    base_seed: int,
    start: int,
    stop: int,
) -> Tally:
    """Run trials [start, stop) in this process"""
    tally = _empty_tally(targets)
    for trial in range(start, stop):
        try:
            graph = sample_graph(params, mix_seed(base_seed, trial))
            _record(tally, targets, degree_stats(graph))
        except MemoryError:
            raise TrialFailure(trial, "out of memory")
    return tally


def _blocks(offset: int, trials: int, block_size: int) -> List[Tuple[int, int]]:
    return [
        (start, min(start + block_size, offset + trials))
        for start in range(offset, offset + trials, block_size)
    ]


# ============================================================================
# EXPERIMENTS
# ============================================================================

def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> TrialSummary:
    """
    Run cfg.trials independent trials and tally every target.

    Trial t samples its graph from mix_seed(base_seed, t), so the tallies do
    not depend on the worker count or on the order in which blocks finish.
    """
    started = time.perf_counter()
    block_size = cfg.block_size or max(1, math.ceil(cfg.trials / (cfg.workers * 4)))
    blocks = _blocks(cfg.trial_offset, cfg.trials, block_size)
    tally = _empty_tally(cfg.targets)

    logger.info(
        "Running %d trials (%s) on %d worker(s), seed %d",
        cfg.trials, cfg.params.header(), cfg.workers, cfg.base_seed,
    )

    if cfg.workers == 1:
        for start, stop in tqdm(blocks, desc="Trial blocks", disable=not progress):
            part = run_trial_block(cfg.params, cfg.targets, cfg.base_seed, start, stop)
            tally = merge_tallies(tally, part)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            futures = {
                executor.submit(run_trial_block, cfg.params, cfg.targets, cfg.base_seed, start, stop): (start, stop)
                for start, stop in blocks
            }
            for future in tqdm(as_completed(futures), total=len(futures),
                               desc="Trial blocks", disable=not progress):
                try:
                    part = future.result()
                except BrokenProcessPool:
                    start, stop = futures[future]
                    raise TrialFailure(start, "worker process terminated", block_end=stop)
                tally = merge_tallies(tally, part)
                logger.debug("Block [%d, %d) merged", *futures[future])

    wall_time = time.perf_counter() - started
    logger.info("Finished %d trials in %.2fs", cfg.trials, wall_time)
    return summarize(cfg.params, cfg.targets, cfg.base_seed, cfg.trial_offset,
                     cfg.trials, tally, wall_time)


def summarize(
    params: ModelParams,
    targets: List[Target],
    base_seed: int,
    trial_offset: int,
    trials: int,
    tally: Tally,
    wall_time: float = 0.0,
) -> TrialSummary:
    """Turn integer tallies into estimates with standard errors"""
    estimates = []
    density = None
    for target in targets:
        bins = tally[target.label]
        if target.kind == TargetKind.EDGE_DENSITY:
            density = _density_estimate(params, trials, bins[0], bins[1])
            continue
        if target.kind == TargetKind.MIN_DEGREE_GE:
            support, counts, tail = [target.k], bins, 0
        else:
            counts, tail = bins[:-1], bins[-1]
            support = list(range(len(counts)))
        proportions = [c / trials for c in counts]
        estimates.append(TargetEstimate(
            target=target,
            support=support,
            counts=list(counts),
            tail_count=tail,
            estimates=proportions,
            tail_estimate=tail / trials,
            standard_errors=[math.sqrt(x * (1.0 - x) / trials) for x in proportions],
        ))
    return TrialSummary(
        params=params,
        trials=trials,
        base_seed=base_seed,
        trial_offset=trial_offset,
        estimates=estimates,
        edge_density=density,
        wall_time=wall_time,
    )


def _density_estimate(params: ModelParams, trials: int, total: int, square_total: int) -> EdgeDensityEstimate:
    pairs = params.n * (params.n - 1) // 2
    mean = total / (trials * pairs)
    if trials > 1:
        variance = (square_total - total * total / trials) / (trials - 1) / pairs ** 2
        se = math.sqrt(max(variance, 0.0) / trials)
    else:
        se = 0.0
    return EdgeDensityEstimate(
        edge_total=total,
        edge_square_total=square_total,
        pair_count=pairs,
        mean=mean,
        standard_error=se,
    )


def tally_of(summary: TrialSummary) -> Tally:
    """Recover the integer tallies behind a summary"""
    tally: Tally = {}
    for est in summary.estimates:
        if est.target.kind == TargetKind.MIN_DEGREE_GE:
            tally[est.target.label] = list(est.counts)
        else:
            tally[est.target.label] = list(est.counts) + [est.tail_count]
    if summary.edge_density is not None:
        tally["edge_density"] = [
            summary.edge_density.edge_total,
            summary.edge_density.edge_square_total,
        ]
    return tally


def _targets_of(summary: TrialSummary) -> List[Target]:
    targets = [est.target for est in summary.estimates]
    if summary.edge_density is not None:
        targets.append(Target.edge_density())
    return targets


def merge_summaries(a: TrialSummary, b: TrialSummary) -> TrialSummary:
    """Pool two runs over adjacent trial ranges of the same experiment"""
    if a.params != b.params or a.base_seed != b.base_seed:
        raise ValueError("Summaries belong to different experiments")
    if set(t.label for t in _targets_of(a)) != set(t.label for t in _targets_of(b)):
        raise ValueError("Summaries record different targets")
    first, second = sorted((a, b), key=lambda s: s.trial_offset)
    if first.trial_offset + first.trials != second.trial_offset:
        raise ValueError("Trial ranges are not adjacent")
    tally = merge_tallies(tally_of(first), tally_of(second))
    return summarize(
        first.params,
        _targets_of(first),
        first.base_seed,
        first.trial_offset,
        first.trials + second.trials,
        tally,
        first.wall_time + second.wall_time,
    )


# ============================================================================
# COMPARISON WITH THEORY
# ============================================================================

def compare_to_theory(summary: TrialSummary, params: ModelParams) -> ComparisonReport:
    """Attach the analytic prediction and the absolute gap to every target"""
    if summary.params != params:
        raise ValueError("Summary was produced for different parameters")
    p_eq = analytic.p_link(params).p_eq
    ell_star, gamma_star = analytic.ell_gamma_from_p_eq(params.n, p_eq)
    pmf = analytic.pmf_from_levels(ell_star, gamma_star)

    entries = []
    alpha_by_k = []
    for est in summary.estimates:
        target = est.target
        if target.kind == TargetKind.MIN_DEGREE_GE:
            predicted, alpha = analytic.limit_min_degree_at_least(params.n, p_eq, target.k)
            if alpha is not None:
                alpha_by_k.append((target.k, alpha))
            empirical = est.estimates[0]
            entries.append(ComparisonEntry(
                target=target,
                rows=[ComparisonRow(value=target.k, empirical=empirical,
                                    analytic=predicted, gap=abs(empirical - predicted))],
            ))
        elif target.kind == TargetKind.MIN_DEGREE_PMF:
            predicted = [pmf.probability(d) for d in est.support]
            entries.append(_distribution_entry(
                target, est, predicted, pmf.tail_above(target.max_k)))
        elif target.kind == TargetKind.PHI_COUNT_DIST:
            lam = analytic.lambda_from_p_eq(params.n, p_eq, target.h)
            predicted, tail = analytic.poisson_pmf_truncated(lam, target.max_count)
            entry = _distribution_entry(target, est, [float(x) for x in predicted], tail)
            entry.poisson_mean = lam
            entries.append(entry)

    if summary.edge_density is not None:
        empirical = summary.edge_density.mean
        entries.append(ComparisonEntry(
            target=Target.edge_density(),
            rows=[ComparisonRow(empirical=empirical, analytic=p_eq, gap=abs(empirical - p_eq))],
        ))

    return ComparisonReport(
        params=params,
        trials=summary.trials,
        entries=entries,
        alpha_by_k=alpha_by_k,
        ell_star=ell_star,
        gamma_star=gamma_star,
    )


def _distribution_entry(
    target: Target,
    est: TargetEstimate,
    predicted: List[float],
    predicted_tail: float,
) -> ComparisonEntry:
    rows = [
        ComparisonRow(value=value, empirical=emp, analytic=ana, gap=abs(emp - ana))
        for value, emp, ana in zip(est.support, est.estimates, predicted)
    ]
    total_variation = 0.5 * (
        math.fsum(row.gap for row in rows) + abs(est.tail_estimate - predicted_tail)
    )
    return ComparisonEntry(
        target=target,
        rows=rows,
        empirical_tail=est.tail_estimate,
        analytic_tail=predicted_tail,
        total_variation=total_variation,
    )
