"""Random forests from scratch: CART trees, bagging, stratified CV grid search, metrics."""

from .metrics import METRICS, ConfusionMetrics, evaluate
from .model import ForestConfig, ForestModel, majority_vote, train_forest
from .selection import (
    DEFAULT_GRID, DESK_GRID, GridResult, RunReport, expand_grid, grid_search, repeated_runs, split_train_test,
    stratified_kfold,
)
from .tree import DecisionTree, train_tree
