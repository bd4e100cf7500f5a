"""
Randomized search
=================

Samples forest settings from the search grid and scores each by 3-fold
cross-validated R2. A reduced grid keeps this demo quick; pass
``ParamGrid()`` for the full 144-point grid.
"""

from utilcast.dataset import synthetic_benchmark
from utilcast.tuning import ParamGrid, format_table, randomized_search

bench = synthetic_benchmark(n=2000, seed=7)
grid = ParamGrid(n_estimators=(20, 50), max_depth=(None, 10), min_samples_split=(2, 10), min_samples_leaf=(1, 4))
result = randomized_search(bench.train, grid=grid, n_samples=6, k=3, seed=7)
print(format_table(result))
print("best:", result.best)
