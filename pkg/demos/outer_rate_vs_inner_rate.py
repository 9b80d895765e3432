#!/usr/bin/env python3
"""Outer rate and overall rate as functions of the inner rate.

For a fixed index rate, raising the inner rate shrinks the set of draw
vectors an inner block can survive, so the supportable outer rate falls in
steps while the product R_in * R_out first rises and then collapses. The
maximum of the overall-rate curve is the design point for R_in. For large K
the curve approaches a step at the mean gated capacity.
"""

import numpy as np

from dnarate import (
    ChannelParams,
    SchemeParams,
    achievable_outer_rate_exact,
    achievable_outer_rate_mc,
    mean_gated_capacity,
    multi_draw_capacity,
    overall_rate,
)

params = ChannelParams(c=2, beta=0.05, p=0.1)
r_ix = 0.999 * multi_draw_capacity(1, params.p)
mean = mean_gated_capacity(params, r_ix)
print(f"r_ix = {r_ix:.4f}; large-K step sits at R_in = {mean:.4f}")

for K in (1, 10, 100):
    print(f"\nK = {K:>4}  {'R_in':>6} {'R_out':>8} {'R':>8}")
    for r_in in np.linspace(0.3, 0.75, 10):
        scheme = SchemeParams(K=K, r_ix=r_ix, r_in=float(r_in), r_out=1.0)
        if K <= 3:
            est = achievable_outer_rate_exact(params, scheme)
        else:
            est = achievable_outer_rate_mc(params, scheme, samples=10_000, seed=0)
        r = overall_rate(scheme.r_in, est.value, r_ix, params.beta)
        print(f"        {r_in:>6.3f} {est.value:>8.4f} {r:>8.4f}")
