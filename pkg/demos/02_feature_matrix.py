"""
From records to a feature matrix
================================

Picks the target, removes columns derived from the same raw field, splits
train/test and prunes features that duplicate earlier ones.
"""

import numpy as np

from utilcast.dataset import (
    build_feature_matrix,
    correlation_matrix,
    prune_correlated,
    train_test_split,
)
from utilcast.trace_ingest import generate_synthetic_trace, preprocess

rows = preprocess(generate_synthetic_trace(2000, seed=3)).rows
matrix = build_feature_matrix(rows, target_name="average_usage_cpu", leakage_policy="exclude-siblings")
print(f"{matrix.rows} jobs x {len(matrix.column_names)} features, target {matrix.target_name}")

split = train_test_split(matrix.rows, test_fraction=0.2, seed=3)
train = matrix.take(split.train)
test = matrix.take(split.test)
print(f"train {train.rows}, test {test.rows}")

corr = correlation_matrix(train)
upper = np.abs(corr[np.triu_indices_from(corr, k=1)])
print(f"{int((upper > 0.95).sum())} feature pairs correlate above 0.95")

# pruning is decided on the training rows only
pruned = prune_correlated(train, threshold=0.95)
dropped = sorted(set(train.column_names) - set(pruned.column_names))
print(f"kept {len(pruned.column_names)}, dropped {dropped}")
