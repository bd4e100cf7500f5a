"""
Comparing against simpler models
================================

Linear regression and gradient-boosted trees on the same split as the
forest. Which wins depends on the data; on this benchmark the target is
nonlinear in the request, so the linear model trails.
"""

from utilcast.baselines import GBTConfig, fit_gbt, fit_linear
from utilcast.dataset import synthetic_benchmark
from utilcast.evaluation import evaluate
from utilcast.forest import TUNED_CONFIG, fit_forest, predict

bench = synthetic_benchmark(n=5000, seed=7)
models = {
    "linear": fit_linear(bench.train),
    "gbt": fit_gbt(bench.train, config=GBTConfig(n_rounds=100, learning_rate=0.1, max_depth=3)),
}
print(f"{'model':8s} {'MAE':>8s} {'RMSE':>8s} {'R2':>8s}")
for name, model in models.items():
    r = evaluate(bench.test.target, model.predict(bench.test.values))
    print(f"{name:8s} {r.mae:8.4f} {r.rmse:8.4f} {r.r2:8.4f}")
forest = fit_forest(bench.train, config=TUNED_CONFIG)
r = evaluate(bench.test.target, predict(forest, bench.test))
print(f"{'forest':8s} {r.mae:8.4f} {r.rmse:8.4f} {r.r2:8.4f}")
