from .bagging import aggregate, metric, resample
from .dataset import Dataset, load_csv, split_val_test, synthesize_dataset
from .splits import SplitPlan, partition_for_miners, split_dirichlet, split_iid
from .tree import DecisionTree, TrainedModel, fit_model, model_hash, train

__all__ = [
    "Dataset",
    "DecisionTree",
    "SplitPlan",
    "TrainedModel",
    "aggregate",
    "fit_model",
    "load_csv",
    "metric",
    "model_hash",
    "partition_for_miners",
    "resample",
    "split_dirichlet",
    "split_iid",
    "split_val_test",
    "synthesize_dataset",
    "train",
]
