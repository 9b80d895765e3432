"""Capacity and achievable rates of the pooled-strand storage channel.

The channel stores M unordered binary strands of length L, hands back
N = c*M reads drawn uniformly with replacement, and flips each read bit with
probability p. The coding scheme layers an outer code of rate r_out over
inner blocks of K strands coded at rate r_in, with each strand carrying its
position index behind an index code of rate r_ix. This module computes the
channel capacity, the largest outer rate the scheme can support (exactly by
enumeration or by Monte-Carlo), the large-K limit of the overall rate, its
supremum over index rates, and a grid optimizer for scheme parameters.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .multidraw import (
    binary_entropy,
    capacity_table,
    check_crossover,
    gated_capacity_table,
    multi_draw_capacity,
)
from .seeding import substream

__all__ = [
    "ChannelParams",
    "SchemeParams",
    "RateEstimate",
    "RMaxResult",
    "SchemeValidation",
    "OptimizeResult",
    "EnumerationCapError",
    "ENUM_CAP",
    "channel_capacity",
    "block_capacity",
    "mean_gated_capacity",
    "achievable_outer_rate_exact",
    "achievable_outer_rate_mc",
    "overall_rate",
    "asymptotic_rate",
    "r_max",
    "gap_to_capacity",
    "optimize_scheme",
    "validate_scheme",
]

# Samples per RNG substream chunk; partial counts are combined in chunk order,
# so estimates are identical for any worker count.
MC_CHUNK = 65536
# Uniform variates held in memory at once when drawing Poisson vectors.
_SUB_ELEMS = 1 << 22
# Hard ceiling on exactly enumerated draw vectors.
ENUM_CAP = 10**8
# "auto" method switches to Monte-Carlo above this; the full ENUM_CAP is only
# honoured when exact evaluation is requested explicitly.
AUTO_EXACT_VECTORS = 4_000_000


class EnumerationCapError(RuntimeError):
    """Exact enumeration would exceed the configured vector cap."""


@dataclass(frozen=True)
class ChannelParams:
    """Channel triple: reading rate c (expected reads per strand), strand
    density beta = log2(M)/L, and per-bit flip probability p."""

    c: float
    beta: float
    p: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c!r}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta!r}")
        check_crossover(self.p)


@dataclass(frozen=True)
class SchemeParams:
    """Code quadruple: inner block size K plus index, inner and outer rates."""

    K: int
    r_ix: float
    r_in: float
    r_out: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if not 0.0 < self.r_ix < 1.0:
            raise ValueError(f"r_ix must be in (0, 1), got {self.r_ix!r}")
        if not 0.0 < self.r_in < 1.0:
            raise ValueError(f"r_in must be in (0, 1), got {self.r_in!r}")
        if not 0.0 < self.r_out <= 1.0:
            raise ValueError(f"r_out must be in (0, 1], got {self.r_out!r}")

    def overall(self, beta):
        """Net rate of this scheme on a channel with strand density beta."""
        return overall_rate(self.r_in, self.r_out, self.r_ix, beta)


@dataclass(frozen=True)
class RateEstimate:
    """An achievable-outer-rate figure together with its uncertainty.

    Exact estimates carry zero stderr and report the Poisson mass left
    outside the enumerated set; Monte-Carlo estimates carry the binomial
    standard error of the success fraction.
    """

    value: float
    stderr: float
    method: str  # "exact" or "monte_carlo"
    samples: int
    truncation_mass: float


@dataclass(frozen=True)
class RMaxResult:
    """Supremum of the large-K rate over index rates, and where it is attained."""

    r_max: float
    d_star: int
    r_ix_used: float


@dataclass(frozen=True)
class SchemeValidation:
    """Verdict of validate_scheme: every violated condition, not just the first."""

    ok: bool
    violations: tuple


@dataclass(frozen=True)
class OptimizeResult:
    """Best scheme found by optimize_scheme for one block size."""

    scheme: SchemeParams
    rate: RateEstimate
    overall: float
    d_candidate: int


# ---------------------------------------------------------------------------
# Poisson tables

@lru_cache(maxsize=None)
def _poisson_tables(c):
    """(pmf, cdf) arrays of Poisson(c), tabulated until the cdf saturates.

    The last cdf entry is forced to 1.0 so that inversion sampling always
    lands inside the table; the lumped residual is below float resolution.
    """
    c = float(c)
    pmf = [math.exp(-c)]
    cdf = [pmf[0]]
    d = 0
    while d < 100_000:
        d += 1
        term = math.exp(-c + d * math.log(c) - math.lgamma(d + 1))
        nxt = min(1.0, cdf[-1] + term)
        pmf.append(term)
        cdf.append(nxt)
        if nxt >= 1.0 or (d > c and term < 1e-20 and 1.0 - nxt < 1e-15):
            break
    cdf[-1] = 1.0
    return np.array(pmf), np.array(cdf)


def _tail_cut(cdf, tail_eps):
    """Smallest d whose upper-tail mass 1 - cdf[d] is below tail_eps."""
    idx = int(np.searchsorted(cdf, 1.0 - tail_eps, side="right"))
    return min(idx, len(cdf) - 1)


def _check_tail_eps(tail_eps):
    if not tail_eps > 0:
        raise ValueError(f"tail_eps must be positive, got {tail_eps!r}")


# ---------------------------------------------------------------------------
# Capacity and per-block capacities

def channel_capacity(params, tail_eps=1e-12):
    """Capacity per stored bit of the pooled-strand channel.

    The Poisson mixture over per-strand draw counts is truncated at the
    smallest count whose tail mass is below tail_eps; since every capacity
    term is at most 1, the result is within tail_eps of the full sum.
    """
    _check_tail_eps(tail_eps)
    pmf, cdf = _poisson_tables(params.c)
    d_max = _tail_cut(cdf, tail_eps)
    ctab = capacity_table(params.p, d_max)
    mixture = float(np.dot(pmf[: d_max + 1], ctab))
    return mixture - params.beta * (1.0 - math.exp(-params.c))


def block_capacity(d, p, r_ix):
    """Mean index-gated capacity across the strands of one inner block.

    The block sees its K strands through independent observation channels
    with draw counts d; permuting d leaves the mean unchanged.
    """
    d = np.asarray(d, dtype=np.int64)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("d must be a nonempty draw vector")
    if (d < 0).any():
        raise ValueError("draw counts must be nonnegative")
    gtab = gated_capacity_table(p, int(d.max()), r_ix)
    return float(gtab[d].mean())


def mean_gated_capacity(params, r_ix, tail_eps=1e-12):
    """Expected index-gated capacity of a single strand's draw count."""
    _check_tail_eps(tail_eps)
    pmf, cdf = _poisson_tables(params.c)
    d_max = _tail_cut(cdf, tail_eps)
    gtab = gated_capacity_table(params.p, d_max, r_ix)
    return float(np.dot(pmf[: d_max + 1], gtab))


# ---------------------------------------------------------------------------
# Achievable outer rate, exact enumeration

def _compositions(total, k):
    """All k-vectors of nonnegative integers summing to exactly total."""
    if k == 1:
        return np.array([[total]], dtype=np.int32)
    parts = []
    for first in range(total + 1):
        rest = _compositions(total - first, k - 1)
        col = np.full((rest.shape[0], 1), first, dtype=np.int32)
        parts.append(np.hstack([col, rest]))
    return np.vstack(parts)


def _enum_draw_vectors(K, d_max):
    """Draw vectors with component sum <= d_max, in nondecreasing-total order."""
    return np.vstack([_compositions(t, K) for t in range(d_max + 1)])


def _exact_support(params, K, tail_eps, enum_cap):
    """Enumerated draw vectors, their log-probabilities and the tail mass."""
    _, cdf_k = _poisson_tables(K * params.c)
    d_max = _tail_cut(cdf_k, tail_eps)
    n_vectors = math.comb(d_max + K, K)
    if n_vectors > enum_cap:
        raise EnumerationCapError(
            f"exact enumeration needs {n_vectors} draw vectors "
            f"(cap {enum_cap}); use the Monte-Carlo estimator"
        )
    truncation = max(0.0, 1.0 - float(cdf_k[d_max]))
    vectors = _enum_draw_vectors(K, d_max)
    d = np.arange(d_max + 1)
    log_pmf = -params.c + d * math.log(params.c) - np.array(
        [math.lgamma(x + 1) for x in d]
    )
    log_w = log_pmf[vectors].sum(axis=1)
    return vectors, np.exp(log_w), truncation, d_max


def achievable_outer_rate_exact(params, scheme, tail_eps=1e-12, enum_cap=ENUM_CAP):
    """Largest supportable outer rate, by exact enumeration of draw vectors.

    Sums the joint Poisson mass of every draw vector whose gated block
    capacity strictly exceeds r_in, over the finite set of vectors with
    component sum below the certified tail cut. The neglected mass is
    reported as truncation_mass, never silently dropped.
    """
    _check_tail_eps(tail_eps)
    vectors, weights, truncation, d_max = _exact_support(
        params, scheme.K, tail_eps, enum_cap
    )
    gtab = gated_capacity_table(params.p, d_max, scheme.r_ix)
    v = gtab[vectors].mean(axis=1)
    value = float(weights[v > scheme.r_in].sum())
    return RateEstimate(value, 0.0, "exact", 0, truncation)


# ---------------------------------------------------------------------------
# Achievable outer rate, Monte-Carlo

def _poisson_chunk(rng, cdf, n, K):
    """Draw an (n, K) matrix of Poisson counts by inversion of the cdf table.

    Sub-batches the uniforms to bound memory; splitting requests along the
    sample axis does not change the underlying variate stream.
    """
    rows = max(1, _SUB_ELEMS // K)
    out = np.empty((n, K), dtype=np.int64)
    done = 0
    while done < n:
        b = min(rows, n - done)
        u = rng.random((b, K))
        out[done : done + b] = np.searchsorted(cdf, u, side="left")
        done += b
    return out


def _mc_chunk_count(seed, chunk_index, n, K, cdf, gtab, r_in):
    rng = substream(seed, "outer-rate-mc", chunk_index)
    d = _poisson_chunk(rng, cdf, n, K)
    v = gtab[d].mean(axis=1)
    return int((v > r_in).sum())


def _chunk_sizes(samples):
    sizes = []
    left = samples
    while left > 0:
        take = min(MC_CHUNK, left)
        sizes.append(take)
        left -= take
    return sizes


def achievable_outer_rate_mc(params, scheme, samples, seed=0, threads=1):
    """Monte-Carlo estimate of the largest supportable outer rate.

    Draws `samples` i.i.d. draw vectors and returns the fraction whose gated
    block capacity strictly exceeds r_in, with the binomial standard error.
    Each fixed-size chunk of samples owns its own substream of `seed` and the
    integer success counts are combined in chunk order, so the estimate is
    bit-identical for any thread count.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    _, cdf = _poisson_tables(params.c)
    gtab = gated_capacity_table(params.p, len(cdf) - 1, scheme.r_ix)
    sizes = _chunk_sizes(samples)
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(
                pool.map(
                    lambda i: _mc_chunk_count(
                        seed, i, sizes[i], scheme.K, cdf, gtab, scheme.r_in
                    ),
                    range(len(sizes)),
                )
            )
    else:
        counts = [
            _mc_chunk_count(seed, i, sizes[i], scheme.K, cdf, gtab, scheme.r_in)
            for i in range(len(sizes))
        ]
    successes = sum(counts)
    v = successes / samples
    stderr = math.sqrt(v * (1.0 - v) / samples)
    return RateEstimate(v, stderr, "monte_carlo", samples, 0.0)


# ---------------------------------------------------------------------------
# Rate algebra

def overall_rate(r_in, r_out, r_ix, beta):
    """Net information rate: outer times inner rate, discounted by the
    per-strand index overhead beta / r_ix."""
    r_ix = float(r_ix)
    if not 0.0 < r_ix < 1.0:
        raise ValueError(f"r_ix must be in (0, 1), got {r_ix!r}")
    if not beta < r_ix:
        raise ValueError(
            f"beta ({beta!r}) must be below r_ix ({r_ix!r}); "
            "the index overhead would consume the whole strand"
        )
    return r_out * r_in * (1.0 - beta / r_ix)


def asymptotic_rate(params, r_ix, tail_eps=1e-12):
    """Overall rate supported in the large-block-size limit at index rate r_ix.

    As K grows, the per-block mean of gated capacities concentrates at its
    expectation, so the inner rate can be set just below it and the outer
    rate approaches 1.
    """
    if not r_ix > params.beta:
        raise ValueError(f"r_ix ({r_ix!r}) must exceed beta ({params.beta!r})")
    mean = mean_gated_capacity(params, r_ix, tail_eps)
    return mean * (1.0 - params.beta / r_ix)


def r_max(params, epsilon=1e-3):
    """Maximise the large-K rate over index rates.

    Only index rates just below one of the discrete capacity levels matter,
    so candidates r_ix = (1 - epsilon) * C_d are scanned for d = 1, 2, ...
    until the remaining Poisson tail cannot beat the best value found.
    """
    if not 0.0 < epsilon <= 0.1:
        raise ValueError(f"epsilon must be in (0, 0.1], got {epsilon!r}")
    _, cdf = _poisson_tables(params.c)
    best_val = -math.inf
    best_d = 0
    best_rix = 0.0
    d_star = 0
    while d_star < 1000:
        d_star += 1
        r_ix = (1.0 - epsilon) * multi_draw_capacity(d_star, params.p)
        if params.beta < r_ix < 1.0:
            val = asymptotic_rate(params, r_ix)
            if val > best_val:
                best_val, best_d, best_rix = val, d_star, r_ix
        # Any later candidate is bounded by the tail mass of draws >= d*-1.
        if d_star >= 2 and best_val > 0:
            bound = 1.0 - float(cdf[min(d_star - 2, len(cdf) - 1)])
            if bound < best_val:
                break
    if best_d == 0:
        raise ValueError("no feasible index-rate candidate above beta")
    return RMaxResult(best_val, best_d, best_rix)


def gap_to_capacity(params, epsilon=1e-3, tail_eps=1e-12):
    """Shortfall of the best large-K scheme rate against channel capacity."""
    return channel_capacity(params, tail_eps) - r_max(params, epsilon).r_max


def validate_scheme(params, scheme):
    """Check a scheme against the conditions the decoding analysis needs.

    Returns a verdict listing every violated condition; nothing is raised.
    """
    violations = []
    if not 0.0 < scheme.r_ix < 1.0:
        violations.append(f"r_ix must be in (0, 1), got {scheme.r_ix}")
    if not 0.0 < scheme.r_in < 1.0:
        violations.append(f"r_in must be in (0, 1), got {scheme.r_in}")
    if not 0.0 < scheme.r_out <= 1.0:
        violations.append(f"r_out must be in (0, 1], got {scheme.r_out}")
    if not params.beta < scheme.r_ix:
        violations.append(
            f"index overhead: beta ({params.beta}) must be below r_ix ({scheme.r_ix})"
        )
    else:
        margin = (
            scheme.r_in
            * (1.0 - params.beta / scheme.r_ix)
            * (1.0 - binary_entropy(min(2.0 * params.p, 1.0)))
        )
        if not params.beta < margin:
            violations.append(
                "clustering margin: beta must be below "
                f"r_in * (1 - beta/r_ix) * (1 - h(2p)) = {margin:.6f}"
            )
    return SchemeValidation(not violations, tuple(violations))


# ---------------------------------------------------------------------------
# Scheme optimisation

def _sample_count_matrix(params, K, samples, seed, threads=1):
    """Per-sample histogram of draw counts, shared across index-rate candidates.

    Row j holds how many of sample j's K draws equal each count value; the
    gated block capacity for any index rate is then a single matrix-vector
    product. Uses the same substreams as achievable_outer_rate_mc.
    """
    _, cdf = _poisson_tables(params.c)
    n_vals = len(cdf)
    dtype = np.uint16 if K < 65536 else np.uint32
    counts = np.zeros((samples, n_vals), dtype=dtype)
    sizes = _chunk_sizes(samples)

    def fill(ci):
        rng = substream(seed, "outer-rate-mc", ci)
        d = _poisson_chunk(rng, cdf, sizes[ci], K)
        offs = np.arange(sizes[ci], dtype=np.int64)[:, None] * n_vals
        flat = np.bincount((d + offs).ravel(), minlength=sizes[ci] * n_vals)
        counts[ci * MC_CHUNK : ci * MC_CHUNK + sizes[ci]] = flat.reshape(
            sizes[ci], n_vals
        )

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(len(sizes))))
    else:
        for ci in range(len(sizes)):
            fill(ci)
    return counts


def _sorted_rate_fn(values, weights=None):
    """Map r -> total weight of values strictly above r, from sorted arrays."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    if weights is None:
        n = v.size

        def rate(r):
            return (n - int(np.searchsorted(v, r, side="right"))) / n

    else:
        w = weights[order]
        suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])

        def rate(r):
            return float(suffix[int(np.searchsorted(v, r, side="right"))])

    return rate


def _refine(objective, lo, x, hi, steps=16):
    """Shrink a bracket around the best objective value seen.

    The objective is piecewise linear with downward jumps, so plain interval
    halving around the incumbent recovers the supremum to bracket/2^steps.
    """
    fx = objective(x)
    for _ in range(steps):
        m1 = 0.5 * (lo + x)
        m2 = 0.5 * (x + hi)
        f1 = objective(m1)
        f2 = objective(m2)
        if f1 >= fx and f1 >= f2:
            hi, x, fx = x, m1, f1
        elif f2 >= fx:
            lo, x, fx = x, m2, f2
        else:
            lo, hi = m1, m2
    return x, fx


def _exact_feasible(params, K, tail_eps, cap):
    _, cdf_k = _poisson_tables(K * params.c)
    d_max = _tail_cut(cdf_k, tail_eps)
    return math.comb(d_max + K, K) <= cap


def optimize_scheme(
    params,
    K,
    rin_grid=512,
    samples=10_000,
    seed=0,
    method="auto",
    d_cap=8,
    epsilon=1e-3,
    tail_eps=1e-12,
    threads=1,
    enum_cap=ENUM_CAP,
):
    """Search index and inner rates maximising the overall rate at block size K.

    Index-rate candidates are (1 - epsilon) times each capacity level up to
    d_cap. For each candidate the inner rate sweeps a uniform grid on (0, 1)
    followed by one 16-step bracket refinement around the best grid point.
    The outer rate is evaluated exactly when the enumeration stays small,
    otherwise by Monte-Carlo with the given sample budget and seed; all
    candidates reuse the same draws, so the search is deterministic.
    """
    if rin_grid < 2:
        raise ValueError(f"rin_grid must be >= 2, got {rin_grid!r}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K!r}")
    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"method must be auto, exact or mc, got {method!r}")

    use_exact = method == "exact" or (
        method == "auto" and _exact_feasible(params, K, tail_eps, AUTO_EXACT_VECTORS)
    )

    if use_exact:
        vectors, weights, truncation, d_max_enum = _exact_support(
            params, K, tail_eps, enum_cap
        )
        counts = None
        d_max_tab = d_max_enum
    else:
        counts = _sample_count_matrix(params, K, samples, seed, threads)
        truncation = 0.0
        d_max_tab = counts.shape[1] - 1

    grid = np.linspace(0.0, 1.0, rin_grid + 2)[1:-1]
    spacing = grid[1] - grid[0]

    best = None  # (overall, d0, r_ix, r_in, r_out)
    for d0 in range(1, d_cap + 1):
        r_ix = (1.0 - epsilon) * multi_draw_capacity(d0, params.p)
        if not params.beta < r_ix < 1.0:
            continue
        factor = 1.0 - params.beta / r_ix
        gtab = gated_capacity_table(params.p, d_max_tab, r_ix)
        if use_exact:
            v = gtab[vectors].mean(axis=1)
            rate_fn = _sorted_rate_fn(v, weights)
        else:
            v = counts @ (gtab / K)
            rate_fn = _sorted_rate_fn(v)

        def objective(r):
            return r * rate_fn(r) * factor

        obj = np.array([objective(r) for r in grid])
        i = int(np.argmax(obj))
        lo = grid[i] - spacing if i == 0 else grid[i - 1]
        hi = grid[i] + spacing if i == rin_grid - 1 else grid[i + 1]
        r_in, val = _refine(objective, float(lo), float(grid[i]), float(hi))
        if best is None or val > best[0]:
            best = (float(val), d0, r_ix, float(r_in), float(rate_fn(r_in)))

    if best is None or best[0] <= 0.0 or best[4] <= 0.0:
        raise ValueError("no scheme with positive rate exists for these parameters")

    overall, d0, r_ix, r_in, r_out = best
    if use_exact:
        rate = RateEstimate(r_out, 0.0, "exact", 0, truncation)
    else:
        stderr = math.sqrt(r_out * (1.0 - r_out) / samples)
        rate = RateEstimate(r_out, stderr, "monte_carlo", samples, 0.0)
    scheme = SchemeParams(K, r_ix, r_in, r_out)
    return OptimizeResult(scheme, rate, overall, d0)
