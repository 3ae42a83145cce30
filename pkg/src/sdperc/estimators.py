"""Monte Carlo harness, one-arm estimation, and closed-form bound calculators.

Every estimate is a Bernoulli frequency with a Wilson score interval; the
sufficient statistics (successes, replicas) make shard merging exact and
order-independent.  Bound calculators are pure functions of their inputs;
the decimal value of float constants is used where exactness matters, so
e.g. eta=0.1 means one tenth, not the nearest double.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .clustering import ReachCounter, box_crossing, label_clusters
from .edgefield import SeedKey, realize, replica_bit_blocks
from .events import (
    CrossingEventEvaluator,
    EventReport,
    robust_crossing_witnessed,
)
from .geometry import BoxRegion, Region, membership_mask, slab_box
from .sdp import (
    ProxyRule,
    TouchesBoundary,
    infinite_cluster_proxy,
    proxy_rule_to_str,
    subtract_infinite_cluster,
)

log = logging.getLogger(__name__)

WILSON_Z = 1.96  # 95 per cent


def wilson_interval(successes: int, n: int, z: float = WILSON_Z):
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= n:
        raise ValueError("successes outside [0, n]")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class Estimate:
    """Bernoulli frequency with its replication bookkeeping."""

    successes: int
    replicas: int
    mean: float
    ci_low: float
    ci_high: float
    experiment_seed: int
    replica_range: tuple  # (start, end), end exclusive

    @staticmethod
    def from_counts(successes: int, replicas: int, experiment_seed: int,
                    start: int = 0) -> "Estimate":
        lo, hi = wilson_interval(successes, replicas)
        return Estimate(successes, replicas, successes / replicas, lo, hi,
                        experiment_seed, (start, start + replicas))

    def to_record(self) -> dict:
        return {
            "successes": self.successes, "replicas": self.replicas,
            "mean": self.mean, "ci_low": self.ci_low, "ci_high": self.ci_high,
            "experiment_seed": self.experiment_seed,
            "replica_range": list(self.replica_range),
        }


def merge_estimates(estimates) -> Estimate:
    """Combine shards; result is independent of merge order."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to merge")
    seed = estimates[0].experiment_seed
    if any(e.experiment_seed != seed for e in estimates):
        raise ValueError("cannot merge estimates from different seeds")
    successes = sum(e.successes for e in estimates)
    replicas = sum(e.replicas for e in estimates)
    start = min(e.replica_range[0] for e in estimates)
    end = max(e.replica_range[1] for e in estimates)
    lo, hi = wilson_interval(successes, replicas)
    return Estimate(successes, replicas, successes / replicas, lo, hi,
                    seed, (start, end))


# ---------------------------------------------------------------------------
# one-arm probability

def one_arm_estimate(experiment_seed: int, p: float, n: int, replicas: int,
                     dimension: int = 2, region: Region | None = None,
                     start: int = 0) -> Estimate:
    """Fraction of replicas in which the origin connects to distance n.

    ``region`` defaults to the full box B_0(n); a thinner region (e.g. a
    width-1 chain) confines the paths to it.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    if region is None:
        region = BoxRegion((0,) * dimension, n)
    origin = (0,) * region.dimension
    counter = ReachCounter(region, BoxRegion(origin, 0), n,
                           clip_to_region=True)
    successes = 0
    for _, bits in replica_bit_blocks(experiment_seed, region, p, replicas,
                                      start):
        successes += counter.count_bits(bits)
    return Estimate.from_counts(successes, replicas, experiment_seed, start)


@dataclass
class FitResult:
    slope: float
    stderr: float
    intercept: float
    points_used: int
    dropped: list


def exponent_fit(points, replicas: int | None = None) -> FitResult:
    """Least-squares slope of log(estimate) against log(n).

    Zero estimates are dropped with a diagnostic; positive estimates are
    clipped below at 1/(10*replicas) when a replica count is given.
    """
    floor = 1.0 / (10.0 * replicas) if replicas else 0.0
    xs, ys, dropped = [], [], []
    for n, est in points:
        v = est.mean if isinstance(est, Estimate) else float(est)
        if v <= 0.0:
            dropped.append(n)
            log.warning("exponent fit: dropping zero estimate at n=%s", n)
            continue
        xs.append(math.log(n))
        ys.append(math.log(max(v, floor)))
    k = len(xs)
    if k < 3:
        raise ValueError("need at least 3 positive points to fit")
    x = np.asarray(xs)
    y = np.asarray(ys)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    stderr = math.sqrt(float((resid ** 2).sum()) / (k - 2) / sxx)
    return FitResult(slope, stderr, float(intercept), k, dropped)


# ---------------------------------------------------------------------------
# closed-form bound calculators

def _decimal_fraction(x) -> Fraction:
    """The decimal value a human wrote, not the float's binary expansion."""
    try:
        return Fraction(str(x))
    except ValueError:
        return Fraction(x)


def markov_site_bound(ell: int, C, eta, d: int) -> int:
    """Smallest integer M with 49 (2 ell + 1)^(d-2) C / M < eta, exactly."""
    if ell < 0 or d < 2:
        raise ValueError("need ell >= 0 and d >= 2")
    C = _decimal_fraction(C)
    eta = _decimal_fraction(eta)
    if C <= 0 or eta <= 0:
        raise ValueError("C and eta must be positive")
    K = 49 * (2 * ell + 1) ** (d - 2) * C
    return math.floor(K / eta) + 1


def peierls_bound(ell: int, L: int) -> float:
    """(2/5)^(L/ell) * (6 L / ell)^2."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if L < ell:
        raise ValueError("L must be at least ell")
    r = L / ell
    return 0.4 ** r * (6.0 * r) ** 2


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the removal union bound.  p_c_input is a user-supplied
    reference value, never a computed critical point."""

    d: int
    ell: int
    L: int
    M: int
    eps: float
    eta: float
    p_c_input: float
    C: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_c_input < 1.0:
            raise ValueError("p_c_input must lie strictly inside (0, 1)")
        if self.d < 2 or self.L < 1 or self.M < 0:
            raise ValueError("need d >= 2, L >= 1, M >= 0")


@dataclass
class UnionBoundResult:
    value: float
    log_value: float
    min_L_below_eta: int


def _log_union_bound(params: BoundParams, L: int) -> float:
    dM = params.d * params.M
    return (-2.0 * dM * math.log(1.0 - params.p_c_input - params.eps)
            + dM * math.log(6.0 * L + 1.0) - params.c * L)


def removal_union_bound(params: BoundParams) -> UnionBoundResult:
    """(1 - p_c - eps)^(-2 d M) (6 L + 1)^(d M) exp(-c L), evaluated in
    log space, plus the smallest L from which the bound stays below eta."""
    if params.p_c_input + params.eps >= 1.0:
        raise ValueError("p_c_input + eps must be below 1")
    if params.c <= 0.0 or params.eta <= 0.0:
        raise ValueError("c and eta must be positive")
    logv = _log_union_bound(params, params.L)
    return UnionBoundResult(math.exp(logv), logv, _min_L_below(params))


def _min_L_below(params: BoundParams) -> int:
    """Smallest integer L such that the bound is below eta for every
    L' >= L (the bound is unimodal in L)."""
    log_eta = math.log(params.eta)
    dM = params.d * params.M

    def f(L):
        return _log_union_bound(params, L)

    peak = (6.0 * dM / params.c - 1.0) / 6.0 if dM > 0 else 0.0
    lc = max(1, math.ceil(peak))
    lf = max(1, math.floor(peak))
    if max(f(lc), f(lf)) < log_eta:
        return 1
    if f(lc) < log_eta:
        return lc
    lo, hi = lc, lc
    while f(hi) >= log_eta:
        hi = hi * 2 + 1
        if hi > 10 ** 15:
            raise ValueError("no feasible L below 1e15")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) < log_eta:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# event probability harness

@dataclass
class EventProbabilityReport:
    params: dict
    estimate: Estimate

    def to_record(self) -> dict:
        return {"params": self.params, "estimate": self.estimate.to_record()}


def event_probability(sampler, experiment_seed: int, replicas: int,
                      start: int = 0) -> EventProbabilityReport:
    """Monte Carlo frequency of an event sampler over a replica range.

    The sampler maps a SeedKey to a bool or an EventReport; its ``params``
    attribute, when present, is echoed into the report for replay.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    successes = 0
    for r in range(start, start + replicas):
        out = sampler(SeedKey(experiment_seed, r))
        outcome = out.outcome if isinstance(out, EventReport) else bool(out)
        successes += outcome
    est = Estimate.from_counts(successes, replicas, experiment_seed, start)
    return EventProbabilityReport(dict(getattr(sampler, "params", {})), est)


class ReachCountSampler:
    """Per-replica evaluation of the reach-count event at the origin."""

    def __init__(self, dimension: int, ell: int, L: int, M: int, p: float):
        x = (0,) * dimension
        self.region = BoxRegion(x, 4 * L)
        self.counter = ReachCounter(self.region, slab_box(x, ell, L), L)
        self.M = M
        self.p = p
        self.params = {"event": "reach_count", "dimension": dimension,
                       "ell": ell, "L": L, "M": M, "p": p}

    def __call__(self, key: SeedKey) -> bool:
        bits = realize(key, self.region, self.p).open_bits
        return self.counter.count_bits(bits) < self.M


class CrossingSampler:
    """Per-replica evaluation of the crossing event at the origin."""

    def __init__(self, dimension: int, ell: int, L: int, q: float):
        x = (0,) * dimension
        self.evaluator = CrossingEventEvaluator(x, ell, L, dimension)
        self.q = q
        self.params = {"event": "crossing", "dimension": dimension,
                       "ell": ell, "L": L, "q": q}

    def __call__(self, key: SeedKey) -> EventReport:
        config = realize(key, self.evaluator.sb, self.q)
        return self.evaluator.evaluate_config(config)


class RobustCrossingSampler:
    """Witnessed robust crossing with S taken from the coupled p-layer's
    infinite-cluster proxy restricted to the slab box."""

    def __init__(self, dimension: int, ell: int, L: int, p: float, q: float,
                 rule: ProxyRule):
        x = (0,) * dimension
        self.x = x
        self.ell = ell
        self.L = L
        self.p = p
        self.q = q
        self.rule = rule
        self.region = BoxRegion(x, 4 * L)
        self.sb_mask = membership_mask(self.region, slab_box(x, ell, L))
        self.params = {"event": "robust_crossing", "dimension": dimension,
                       "ell": ell, "L": L, "p": p, "q": q,
                       "proxy_rule": proxy_rule_to_str(rule)}

    def __call__(self, key: SeedKey) -> EventReport:
        config_p = realize(key, self.region, self.p)
        config_q = realize(key, self.region, self.q)
        proxy = infinite_cluster_proxy(label_clusters(config_p), self.rule)
        s_idx = np.flatnonzero(proxy.site_mask & self.sb_mask)
        S = [self.region.site_at(int(i)) for i in s_idx]
        return robust_crossing_witnessed(config_q, self.x, self.ell, self.L, S)


# ---------------------------------------------------------------------------
# Markov-inequality consistency

@dataclass
class MarkovConsistencyReport:
    lhs: float
    rhs: float
    sigma_combined: float
    holds: bool
    mean_count: float
    params: dict

    def to_record(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs,
                "sigma_combined": self.sigma_combined, "holds": self.holds,
                "mean_count": self.mean_count, "params": self.params}


def markov_consistency_check(experiment_seed: int, dimension: int, ell: int,
                             L: int, M: int, p: float, replicas: int,
                             start: int = 0) -> MarkovConsistencyReport:
    """Empirical check that P[count >= M] <= E[count] / M within noise.

    Both sides are estimated from the same replicas; the inequality is
    Markov's, exact in distribution, so it can only fail by noise.
    """
    x = (0,) * dimension
    region = BoxRegion(x, 4 * L)
    counter = ReachCounter(region, slab_box(x, ell, L), L)
    counts = np.empty(replicas, dtype=np.int64)
    for r, bits in replica_bit_blocks(experiment_seed, region, p, replicas,
                                      start):
        counts[r - start] = counter.count_bits(bits)
    lhs = float((counts >= M).mean())
    mean_count = float(counts.mean())
    rhs = mean_count / M
    var_lhs = lhs * (1.0 - lhs) / replicas
    var_rhs = (float(counts.var(ddof=1)) if replicas > 1 else 0.0) / (
        M * M * replicas)
    sigma = math.sqrt(var_lhs + var_rhs)
    return MarkovConsistencyReport(
        lhs=lhs, rhs=rhs, sigma_combined=sigma,
        holds=lhs <= rhs + 3.0 * sigma, mean_count=mean_count,
        params={"dimension": dimension, "ell": ell, "L": L, "M": M, "p": p,
                "replicas": replicas, "experiment_seed": experiment_seed},
    )


# ---------------------------------------------------------------------------
# the thin-minus-thinner scan

@dataclass
class ScanRow:
    p: float
    estimate: Estimate

    def to_record(self) -> dict:
        return {"p": self.p, **self.estimate.to_record()}


@dataclass
class ScanReport:
    rows: list
    monotone_trend: bool
    trend_violations: int
    params: dict
    report_only: bool = True

    def to_record(self) -> dict:
        return {
            "rows": [r.to_record() for r in self.rows],
            "monotone_trend": self.monotone_trend,
            "trend_violations": self.trend_violations,
            "params": self.params,
            "report_only": self.report_only,
        }


def subtraction_scan(experiment_seed: int, dimension: int, extent: int,
                     p_c_input: float, eps: float, p_grid, replicas: int,
                     rule: ProxyRule = TouchesBoundary(),
                     start: int = 0) -> ScanReport:
    """Crossing frequency of the q-layer minus the p-layer's proxy clusters,
    for each p in the grid, under the shared coupling.

    q = p_c_input + eps.  Within one seed the removed site set grows with
    p, so the crossing indicator is non-increasing along the grid; the
    report carries that trend flag.  Exploratory output only: there is no
    target value to pass or fail against.
    """
    q = p_c_input + eps
    if q > 1.0:
        raise ValueError("p_c_input + eps exceeds 1")
    grid = sorted(float(p) for p in p_grid)
    if not grid:
        raise ValueError("empty p grid")
    bad = [p for p in grid if p <= p_c_input]
    if bad:
        raise ValueError(f"grid values {bad} not above p_c_input={p_c_input}")
    region = BoxRegion((0,) * dimension, extent)
    successes = {p: 0 for p in grid}
    violations = 0
    for r in range(start, start + replicas):
        key = SeedKey(experiment_seed, r)
        config_q = realize(key, region, q)
        prev = None
        for p in grid:
            config_p = realize(key, region, p)
            proxy = infinite_cluster_proxy(label_clusters(config_p), rule)
            remainder = subtract_infinite_cluster(config_q, proxy)
            ind = box_crossing(label_clusters(remainder), axis=0)
            if prev is not None and ind and not prev:
                violations += 1
            prev = ind
            successes[p] += ind
    rows = [ScanRow(p, Estimate.from_counts(successes[p], replicas,
                                            experiment_seed, start))
            for p in grid]
    return ScanReport(
        rows=rows,
        monotone_trend=violations == 0,
        trend_violations=violations,
        params={"dimension": dimension, "extent": extent,
                "p_c_input": p_c_input, "eps": eps, "q": q,
                "p_grid": grid, "replicas": replicas,
                "experiment_seed": experiment_seed,
                "proxy_rule": proxy_rule_to_str(rule),
                "crossing_axis": 0},
    )
