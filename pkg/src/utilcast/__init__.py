"""Predict cluster-job CPU utilization and turn the predictions into provisioning advice.

Modules
-------
trace_ingest  parse and clean raw trace rows, synthetic trace generator
dataset       feature matrices, correlation pruning, splits and folds
forest        random forest regression with prediction intervals
baselines     linear regression and gradient-boosted trees
tuning        randomized search with k-fold cross-validation
evaluation    metrics, error-by-bin tables and report files
advisor       recommendations, risk flags and savings estimates
cli           the ``utilcast`` command
"""

__version__ = "0.1.0"
