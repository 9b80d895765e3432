#!/usr/bin/env python3
"""One end-to-end decode, stage by stage, at small scale.

Builds a random pool, pushes it through the channel, then runs clustering,
index decoding, inner decoding and the outer success test by hand, printing
what each stage sees. Finishes with a short trial batch on both sides of the
outer-rate threshold: just below it decoding succeeds, just above it the
erasures outrun the redundancy.
"""

from dnarate import (
    ChannelParams,
    ClusteringConfig,
    InstanceDims,
    SchemeParams,
    achievable_outer_rate_exact,
    count_wrong_clusters,
    greedy_cluster,
    multi_draw_capacity,
    oracle_index_decode,
    oracle_inner_decode,
    outer_success,
    random_pool,
    run_pipeline,
    simulate_channel,
)

params = ChannelParams(c=2, beta=0.05, p=0.1)
M, K = 1024, 4
r_ix = 0.999 * multi_draw_capacity(1, params.p)
scheme = SchemeParams(K=K, r_ix=r_ix, r_in=0.45, r_out=0.75)
config = ClusteringConfig(rho=0.30)

dims = InstanceDims.from_channel(params, M, K)
print(f"M = {dims.M} strands, L = {dims.L} bits, N = {dims.N} reads")

pool = random_pool(dims, seed=11)
output = simulate_channel(pool, params, seed=12)
print(f"mean flips per read: {output.flip_counts.mean():.1f} (expect ~{params.p * dims.L:.1f})")

clusters = greedy_cluster(output, config.resolved(params.p))
m_c = count_wrong_clusters(clusters, output)
print(f"{len(clusters)} clusters, {m_c} not matching a strand's read set")

ix = oracle_index_decode(clusters, output, params, scheme.r_ix)
print(f"{len(ix.assignments)} indices recovered, {ix.m_wrong_index} corrupted clusters dropped")

inner = oracle_inner_decode(ix.draws, params, scheme,
                            m_wrong_clusters=m_c, m_wrong_index=ix.m_wrong_index)
print(f"{int(inner.decoded.sum())} of {M // K} blocks decoded, "
      f"s = {inner.erasures}, t = {inner.errors} (outer symbols)")
print(f"outer decode: {outer_success(inner.erasures, inner.errors, M, scheme.r_out)}")

bound = achievable_outer_rate_exact(params, scheme).value
print(f"\nouter-rate threshold for these parameters: {bound:.4f}")
for frac in (0.85, 1.05):
    test = SchemeParams(K=K, r_ix=r_ix, r_in=scheme.r_in, r_out=min(1.0, frac * bound))
    res = run_pipeline(params, test, M, trials=10, seed=5, clustering=config)
    print(f"r_out = {test.r_out:.4f} ({frac:.2f} x threshold): "
          f"success rate {res.success_rate:.2f}")
