"""
Where the errors are
====================

Breaks the test error down by requested CPUs and writes the plot-ready
report files (metrics, parity pairs, residuals, bins, correlations).
"""

import tempfile

from utilcast.dataset import correlation_matrix, synthetic_benchmark
from utilcast.evaluation import error_by_bin, evaluate, export_report
from utilcast.forest import TUNED_CONFIG, fit_forest, predict

bench = synthetic_benchmark(n=5000, seed=7)
model = fit_forest(bench.train, config=TUNED_CONFIG)
pred = predict(model, bench.test)

report = evaluate(bench.test.target, pred)
bins = error_by_bin(bench.test.target, pred, bench.test_full.column("resource_request_cpus"),
                    edges=(0, 5, 10, 20, 50), feature_name="resource_request_cpus")
for b in bins.bins:
    metrics = "no jobs" if b.count == 0 else f"MAE {b.mae:.4f}  RMSE {b.rmse:.4f}"
    print(f"[{b.lo:g}, {b.hi:g}) CPUs: {b.count:4d} jobs  {metrics}")
print(f"{bins.overflow} jobs at or above the last edge")

# small jobs dominate the trace and are predicted most accurately
out = tempfile.mkdtemp()
paths = export_report(report, bins, correlation_matrix(bench.train), out,
                      feature_names=bench.train.column_names)
for kind, path in sorted(paths.items()):
    print(f"{kind:12s} {path}")
