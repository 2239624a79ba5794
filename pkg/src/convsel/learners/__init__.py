from .bayes import NaiveBayesModel, log_scores, predict_nb, train_naive_bayes
from .metrics import Evaluation, TrainReport, confusion_matrix, evaluate_accuracy, holdout_split
from .persist import MAGIC, load_model, save_model
from .tree import (
    DecisionTreeModel,
    Node,
    gini_index,
    predict_dt,
    prune_reduced_error,
    train_decision_tree,
)

__all__ = [
    "DecisionTreeModel",
    "Evaluation",
    "MAGIC",
    "NaiveBayesModel",
    "Node",
    "TrainReport",
    "confusion_matrix",
    "evaluate_accuracy",
    "gini_index",
    "holdout_split",
    "load_model",
    "log_scores",
    "predict_dt",
    "predict_nb",
    "prune_reduced_error",
    "save_model",
    "train_decision_tree",
    "train_naive_bayes",
]
