"""
Analytic Laws for q-composite Key Graphs with On/Off Channels
Exact link probabilities, asymptotic minimum-degree laws and design solvers
"""

from typing import Optional, Tuple
import logging
import math
import warnings

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from models import DesignGoal, MinDegreeRegime, ZeroOneRegime
from schemas import (
    ModelParams,
    LinkProbabilities,
    AsymptoticDecomposition,
    MinDegreePmf,
    DesignReport,
)

logger = logging.getLogger(__name__)

# Residual magnitudes closer than this are treated as a tie when picking ell*
TIE_TOLERANCE = 1e-9

# exp(709) is the largest finite double exponential
_EXP_LIMIT = 709.0

# Above this K^2/P the small-overlap approximation is reported as unreliable
KEY_RATIO_LIMIT = 1.0


class AnalyticDomainError(ValueError):
    """Raised when inputs lie outside the domain of an asymptotic formula"""
    pass


class NoFeasibleDesign(Exception):
    """Raised when no admissible key-ring size meets a design threshold"""
    pass


class PoolSizeWarning(UserWarning):
    """Emitted when P < 2K, outside the stated range of the exact formula"""
    pass


# ============================================================================
# COMBINATORICS
# ============================================================================

def log_choose(a: int, b: int) -> float:
    """Natural log of C(a, b); -inf when b > a"""
    if a < 0 or b < 0:
        raise ValueError(f"log_choose needs non-negative arguments, got ({a}, {b})")
    if b > a:
        return -math.inf
    if b == 0 or b == a:
        return 0.0
    return float(gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1))


def log_choose_array(a, b) -> np.ndarray:
    """Vectorised log_choose; -inf wherever b > a or b < 0"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = np.broadcast_arrays(a, b)
    valid = (b >= 0) & (b <= a)
    out = np.full(a.shape, -np.inf)
    av, bv = a[valid], b[valid]
    out[valid] = gammaln(av + 1) - gammaln(bv + 1) - gammaln(av - bv + 1)
    return out


def _overlap_terms(K: int, P: int, u: np.ndarray) -> np.ndarray:
    """P[|S_i & S_j| = u] for two uniform K-subsets of a P-pool"""
    logs = log_choose_array(K, u) + log_choose_array(P - K, K - u) - log_choose(P, K)
    terms = np.exp(logs)
    return np.sort(terms)  # smallest first for summation


def _p_shared(K: int, P: int, q: int) -> float:
    """p_sq without the pool-size warning; callers check P < 2K themselves"""
    if K > P:
        raise AnalyticDomainError(f"K={K} exceeds P={P}")
    if q < 1:
        raise AnalyticDomainError(f"q must be >= 1, got {q}")
    if q > K:
        return 0.0

    lower = math.fsum(_overlap_terms(K, P, np.arange(0, q)))
    if lower >= 0.5:
        upper = math.fsum(_overlap_terms(K, P, np.arange(q, K + 1)))
    else:
        upper = 1.0 - lower
    return min(1.0, max(0.0, upper))


def p_shared_exact(K: int, P: int, q: int) -> float:
    """
    Probability that two random key rings share at least q keys.

    Both tails of the hypergeometric overlap law are available; the smaller
    one is summed directly so that tiny probabilities keep their precision.

    Args:
        K: Key-ring size
        P: Key-pool size
        q: Required number of shared keys

    Returns:
        p_sq in [0, 1]
    """
    value = _p_shared(K, P, q)
    if P < 2 * K:
        warnings.warn(
            f"P={P} < 2K={2 * K}: outside the stated range of the exact formula",
            PoolSizeWarning,
            stacklevel=2,
        )
    return value


def p_link(params: ModelParams) -> LinkProbabilities:
    """Secure-link probability p_eq = p * p_sq"""
    p_sq = _p_shared(params.K, params.P, params.q)
    flagged = params.P < 2 * params.K
    if flagged:
        logger.warning("Pool size P=%d is below 2K=%d", params.P, 2 * params.K)
    return LinkProbabilities(p_sq=p_sq, p_eq=params.p * p_sq, pool_size_warning=flagged)


def p_shared_approx(K: int, P: int, q: int) -> float:
    """Small-overlap approximation (1/q!) (K^2/P)^q, clamped to [0, 1]"""
    if K < 1 or P < 1:
        raise AnalyticDomainError(f"K and P must be positive, got K={K}, P={P}")
    log_value = q * (2.0 * math.log(K) - math.log(P)) - float(gammaln(q + 1))
    if log_value >= 0.0:
        return 1.0
    return math.exp(log_value)


def key_ratio(params: ModelParams) -> float:
    """K^2 / P, the small-overlap diagnostic"""
    ratio = params.K ** 2 / params.P
    if ratio >= KEY_RATIO_LIMIT:
        logger.warning("K^2/P = %.3g is not small; the small-overlap regime does not apply", ratio)
    return ratio


# ============================================================================
# POISSON DEGREE COUNTS
# ============================================================================

def lambda_poisson(params: ModelParams, h: int) -> float:
    """Mean n (h!)^-1 (n p_eq)^h e^{-n p_eq} of the degree-h node count"""
    if h < 0:
        raise AnalyticDomainError(f"h must be >= 0, got {h}")
    p_eq = p_link(params).p_eq
    return lambda_from_p_eq(params.n, p_eq, h)


def lambda_from_p_eq(n: int, p_eq: float, h: int) -> float:
    if p_eq == 0.0:
        return float(n) if h == 0 else 0.0
    mean_degree = n * p_eq
    log_lam = math.log(n) + h * math.log(mean_degree) - float(gammaln(h + 1)) - mean_degree
    return math.exp(log_lam)


def poisson_pmf_truncated(lam: float, max_count: int) -> Tuple[np.ndarray, float]:
    """Poisson(lam) pmf on 0..max_count and the mass above max_count"""
    counts = np.arange(0, max_count + 1)
    if lam == 0.0:
        pmf = np.zeros(max_count + 1)
        pmf[0] = 1.0
        return pmf, 0.0
    return poisson.pmf(counts, lam), float(poisson.sf(max_count, lam))


# ============================================================================
# ASYMPTOTIC DECOMPOSITIONS
# ============================================================================

def _log_log_n(n: int) -> float:
    if n <= 2:
        raise AnalyticDomainError(f"ln ln n is not positive for n={n}; need n >= 3")
    return math.log(math.log(n))


def alpha_from_p_eq(n: int, p_eq: float, k: int) -> float:
    return n * p_eq - math.log(n) - (k - 1) * _log_log_n(n)


def decompose_alpha(params: ModelParams, k: int) -> AsymptoticDecomposition:
    """alpha with p_eq = (ln n + (k-1) ln ln n + alpha) / n"""
    if k < 1:
        raise AnalyticDomainError(f"k must be >= 1, got {k}")
    _log_log_n(params.n)
    p_eq = p_link(params).p_eq
    return AsymptoticDecomposition(n=params.n, k=k, alpha=alpha_from_p_eq(params.n, p_eq, k))


def ell_gamma_from_p_eq(n: int, p_eq: float) -> Tuple[int, float]:
    loglog = _log_log_n(n)
    excess = n * p_eq - math.log(n)
    level = excess / loglog
    low = math.floor(level) + 1
    high = low + 1
    r_low = excess - (low - 1) * loglog
    r_high = excess - (high - 1) * loglog
    if abs(r_high) < abs(r_low) - TIE_TOLERANCE:
        return high, r_high
    return low, r_low


def select_ell_gamma(params: ModelParams) -> AsymptoticDecomposition:
    """
    Best-fit integer level ell* and residual gamma*.

    ell* minimises |p_eq - (ln n + (ell-1) ln ln n)/n| over integers, ties
    going to the smaller ell; gamma* satisfies
    p_eq = (ln n + (ell*-1) ln ln n + gamma*) / n.
    """
    p_eq = p_link(params).p_eq
    ell, gamma = ell_gamma_from_p_eq(params.n, p_eq)
    return AsymptoticDecomposition(n=params.n, ell_star=ell, gamma_star=gamma)


def decompose(params: ModelParams, k: int) -> AsymptoticDecomposition:
    """All decomposition fields for target level k"""
    if k < 1:
        raise AnalyticDomainError(f"k must be >= 1, got {k}")
    p_eq = p_link(params).p_eq
    ell, gamma = ell_gamma_from_p_eq(params.n, p_eq)
    return AsymptoticDecomposition(
        n=params.n,
        k=k,
        alpha=alpha_from_p_eq(params.n, p_eq, k),
        ell_star=ell,
        gamma_star=gamma,
    )


# ============================================================================
# MINIMUM-DEGREE LAWS
# ============================================================================

def prob_min_degree_at_least(k: int, alpha: float) -> float:
    """Limit exp(-e^{-alpha} / (k-1)!) of P[min degree >= k]"""
    if k < 1:
        raise AnalyticDomainError(f"k must be >= 1, got {k}")
    if math.isnan(alpha):
        raise AnalyticDomainError("alpha must not be NaN")
    if alpha == math.inf:
        return 1.0
    if alpha == -math.inf:
        return 0.0
    log_rate = -alpha - float(gammaln(k))
    if log_rate > _EXP_LIMIT:
        return 0.0
    return math.exp(-math.exp(log_rate))


def zero_one_regime(alpha: float) -> ZeroOneRegime:
    if alpha == math.inf:
        return ZeroOneRegime.ONE
    if alpha == -math.inf:
        return ZeroOneRegime.ZERO
    return ZeroOneRegime.INTERMEDIATE


def limit_min_degree_at_least(n: int, p_eq: float, k: int) -> Tuple[float, Optional[float]]:
    """
    Predicted P[min degree >= k] and the alpha it was computed from.

    k = 0 holds trivially (alpha is None). With every channel off alpha is
    taken as -inf rather than the finite formula value.
    """
    if k == 0:
        return 1.0, None
    alpha = -math.inf if p_eq == 0.0 else alpha_from_p_eq(n, p_eq, k)
    return prob_min_degree_at_least(k, alpha), alpha


def min_degree_pmf_asymptotic(params: ModelParams) -> MinDegreePmf:
    """Limiting distribution of the minimum degree at the best-fit level"""
    decomposition = select_ell_gamma(params)
    return pmf_from_levels(decomposition.ell_star, decomposition.gamma_star)


def pmf_from_levels(ell_star: int, gamma_star: float) -> MinDegreePmf:
    if ell_star <= 0:
        return MinDegreePmf(support=[(0, 1.0)], regime=MinDegreeRegime.DEGENERATE_ZERO)
    upper = prob_min_degree_at_least(ell_star, gamma_star)
    return MinDegreePmf(
        support=[(ell_star - 1, 1.0 - upper), (ell_star, upper)],
        regime=MinDegreeRegime.TWO_POINT,
    )


# ============================================================================
# DESIGN GUIDELINES
# ============================================================================

def design_threshold(
    n: int,
    k: int,
    goal: DesignGoal,
    c: Optional[float] = None,
    rho: Optional[float] = None,
) -> float:
    """
    Required p_eq for a design goal.

    Args:
        n: Number of nodes
        k: Target minimum degree
        goal: almost_sure (needs c > 0), with_prob (needs rho in (0, 1]),
              exact_k (needs 0 < c < 1)

    Returns:
        Lower bound on p_eq, or the target p_eq for exact_k
    """
    if k < 1:
        raise AnalyticDomainError(f"k must be >= 1, got {k}")
    loglog = _log_log_n(n)
    log_n = math.log(n)
    goal = DesignGoal(goal)

    if goal == DesignGoal.ALMOST_SURE:
        if c is None or c <= 0:
            raise AnalyticDomainError(f"almost_sure needs c > 0, got {c}")
        return (log_n + (k + c - 1) * loglog) / n

    if goal == DesignGoal.EXACT_K:
        if c is None or not 0 < c < 1:
            raise AnalyticDomainError(f"exact_k needs 0 < c < 1, got {c}")
        return (log_n + (k + c - 1) * loglog) / n

    if rho is None or not 0 < rho <= 1:
        raise AnalyticDomainError(f"with_prob needs rho in (0, 1), got {rho}")
    log_inv_rho = -math.log(rho)
    if log_inv_rho <= 0.0:
        raise NoFeasibleDesign("rho = 1 requires an infinite link probability")
    correction = float(gammaln(k)) + math.log(log_inv_rho)
    return (log_n + (k - 1) * loglog - correction) / n


def solve_min_K(n: int, P: int, p: float, q: int, threshold: float) -> int:
    """
    Smallest K in [q, P] with p * p_sq(K, P, q) >= threshold.

    p_sq is non-decreasing in K, so the search bisects the admissible range.
    """
    if not math.isfinite(threshold):
        raise NoFeasibleDesign(f"Threshold {threshold} is not finite")
    if q > P:
        raise NoFeasibleDesign(f"q={q} exceeds the pool size P={P}")
    if threshold > p:
        raise NoFeasibleDesign(f"Threshold {threshold:.6g} exceeds the channel probability p={p:g}")

    def achieved(K: int) -> float:
        return p * _p_shared(K, P, q)

    if achieved(P) < threshold:
        raise NoFeasibleDesign(f"Even K=P={P} gives p_eq={achieved(P):.6g} < {threshold:.6g}")

    low, high = q, P
    while low < high:
        mid = (low + high) // 2
        if achieved(mid) >= threshold:
            high = mid
        else:
            low = mid + 1
        logger.debug("Design search window [%d, %d]", low, high)
    return low


def solve_design(
    n: int,
    P: int,
    p: float,
    q: int,
    k: int,
    goal: DesignGoal,
    c: Optional[float] = None,
    rho: Optional[float] = None,
) -> DesignReport:
    """Threshold, smallest K meeting it, and the predicted laws at that K"""
    goal = DesignGoal(goal)
    threshold = design_threshold(n, k, goal, c=c, rho=rho)
    K = solve_min_K(n, P, p, q, threshold)

    params = ModelParams(n=n, K=K, P=P, p=p, q=q)
    decomposition = decompose(params, k)
    p_eq = p_link(params).p_eq
    if goal == DesignGoal.EXACT_K:
        logger.info("exact_k target p_eq=%.6g, achieved %.6g at K=%d", threshold, p_eq, K)

    return DesignReport(
        n=n,
        P=P,
        p=p,
        q=q,
        k=k,
        goal=goal,
        constant=rho if goal == DesignGoal.WITH_PROB else c,
        threshold=threshold,
        K=K,
        p_eq=p_eq,
        key_ratio=key_ratio(params),
        prob_min_degree_at_least=prob_min_degree_at_least(k, decomposition.alpha),
        min_degree_pmf=pmf_from_levels(decomposition.ell_star, decomposition.gamma_star),
    )
