#!/usr/bin/env python3
"""Capacity of the pooled-strand channel and the large-block-size rate limit.

Walks the reading rates c = 1..10 at fixed strand density beta = 0.05 and
flip probability p = 0.1, printing the channel capacity, the best achievable
rate in the K -> infinity limit, the draw threshold d* realising it, and the
gap between the two. The gap closes as reads get plentiful (large c) or clean
(small p), but note it is not monotone in c: it widens up to c = 4 before
shrinking.
"""

from dnarate import ChannelParams, channel_capacity, gap_to_capacity, r_max

BETA, P = 0.05, 0.1

print(f"beta = {BETA}, p = {P}")
print(f"{'c':>3} {'capacity':>10} {'rate limit':>10} {'d*':>3} {'gap':>9}")
for c in range(1, 11):
    params = ChannelParams(c=c, beta=BETA, p=P)
    cap = channel_capacity(params)
    best = r_max(params)
    print(
        f"{c:>3} {cap:>10.6f} {best.r_max:>10.6f} {best.d_star:>3} "
        f"{cap - best.r_max:>9.6f}"
    )

print()
print("gap over p at c = 4 (smaller p, smaller gap):")
for p in (0.1, 0.05, 0.01, 0.001):
    params = ChannelParams(c=4, beta=BETA, p=p)
    print(f"  p = {p:<6} gap = {gap_to_capacity(params):.6f}")
