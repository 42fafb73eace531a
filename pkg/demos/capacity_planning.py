"""
Capacity planning with the analytic bounds
==========================================

Before running any scenario you can ask the closed-form oracle what a
stage can sustain: the largest batch size that still meets a completion
budget, the highest arrival rate any batch size can absorb, and the
latency cost of batching bigger. This is the same math the calibrate
command uses to print a rate table.
"""

from trackflow.bounds import (
    avg_latency_increase,
    max_stable_batch,
    max_sustainable_rate,
    nob_table,
    smallest_feasible_batch,
)
from trackflow.model import AffineExecTime

# A stage whose batch of m events takes 100 + 100*m milliseconds, with
# 2000 ms of completion budget to spend on queueing plus execution.
xi = AffineExecTime(100, 100)
headroom = 2000

print("batch bound by arrival rate (headroom 2000 ms):")
for rate in (1, 2, 5, 10, 20, 50):
    m = max_stable_batch(rate, xi, headroom)
    print(f"  {rate:3d} ev/s -> largest stable batch {m}")

# The sustainable ceiling does not keep growing with batch size: the
# amortization gain flattens while the fill time keeps rising.
rate, at_m = max_sustainable_rate(xi, headroom)
print(f"\nhighest sustainable rate: {rate} ev/s, reached at batch size {at_m}")

# Batching trades latency for throughput. Going from streaming to m=8
# at 9 ev/s costs this much average latency per event:
extra = avg_latency_increase(8, xi, 9)
print(f"average latency increase at m=8, 9 ev/s: {extra} ms")

# A costlier stage, typical of a feature matcher: 54 + 67*m ms.
matcher = AffineExecTime(54, 67)
print("\nmatcher stage, 15 s budget:")
for rate in (1, 10, 20):
    m = smallest_feasible_batch(rate, matcher, 15000)
    print(f"  smallest feasible batch at {rate:3d} ev/s: {m}")

# The static rate-indexed table a non-adaptive batcher would use.
table = nob_table(matcher, 15000, [1, 10, 20, 1000])
print(f"rate table: {table}")
