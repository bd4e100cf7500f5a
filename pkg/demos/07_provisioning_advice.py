"""
Provisioning advice
===================

Turns interval predictions into allocations: take the upper bound, add
headroom, round up to whole units and never exceed the request. Jobs
predicted to use well beyond their request are flagged.
"""

from utilcast.advisor import AdvicePolicy, advise, batch_advise, estimate_savings
from utilcast.dataset import synthetic_benchmark
from utilcast.forest import TUNED_CONFIG, fit_forest

bench = synthetic_benchmark(n=5000, seed=7)
model = fit_forest(bench.train, config=TUNED_CONFIG)

one = advise(model, bench.test.values[0], requested=bench.test.column("resource_request_cpus")[0],
             policy=AdvicePolicy(granularity=0.25))
print(one.rationale)

policy = AdvicePolicy(alpha=0.1, headroom=0.1, risk_tolerance=0.1, granularity=0.25)
advice, summary = batch_advise(model, bench.test, bench.test.column("resource_request_cpus"), policy)
print(f"{summary.n} jobs: requested {summary.total_requested:.1f} CPUs, "
      f"recommended {summary.total_recommended:.1f}, {summary.risk_count} flagged")

# a trimmed share of the requests, applied to a whole cluster
fraction = min(1.0, max(0.0, summary.reduction_fraction))
for share in (0.10, fraction):
    est = estimate_savings(10000, share)
    print(f"trimming {share:.1%} of 10000 cores frees {est.saved_units:.0f}")
