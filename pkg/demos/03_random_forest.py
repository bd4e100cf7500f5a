"""
Training the forest
===================

Fits the forest with the tuned settings on the standard synthetic
benchmark, then looks at intervals and feature importances.
"""

import numpy as np

from utilcast.dataset import synthetic_benchmark
from utilcast.evaluation import evaluate
from utilcast.forest import TUNED_CONFIG, fit_forest, predict_intervals, select_top_k

bench = synthetic_benchmark(n=5000, seed=7)
model = fit_forest(bench.train, config=TUNED_CONFIG, n_jobs=2)
point, lo, hi, conf = predict_intervals(model, bench.test, alpha=0.1)

report = evaluate(bench.test.target, point)
print(f"MAE {report.mae:.4f}  RMSE {report.rmse:.4f}  R2 {report.r2:.4f}")

# every tree votes; the spread of the votes gives the interval
for i in range(5):
    print(f"actual {bench.test.target[i]:.3f}  predicted {point[i]:.3f}  "
          f"[{lo[i]:.3f}, {hi[i]:.3f}]  confidence {conf[i]:.2f}")
inside = np.mean((bench.test.target >= lo) & (bench.test.target <= hi))
print(f"{inside:.1%} of test jobs fall inside their 90% tree interval")

print("most important features:")
top = select_top_k(model.importances, k=5)
for j in sorted(top, key=lambda j: -model.importances[j]):
    print(f"  {model.feature_names[j]:32s} {model.importances[j]:.3f}")
