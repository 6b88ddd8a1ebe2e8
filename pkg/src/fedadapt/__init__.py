"""Federated training of a lightweight attention adapter over frozen
image-text features, with leave-one-domain-out evaluation and exact
communication-cost accounting."""

__version__ = "0.1.0"

from .adapter import (AdapterForward, AdapterParams, flatten, forward,
                      init_adapter, parameter_count, unflatten)
from .config import RunConfig, load_config
from .data import (FeatureDataset, SplitDataset, generate_synthetic_suite,
                   make_batches, read_feature_file, split_60_20_20,
                   write_feature_file)
from .errors import (ConfigError, DataValidationError, FedAdaptError,
                     FormatError, NumericError, ParameterError, ShapeError)
from .estimator import FederatedAdapterClassifier
from .evaluation import (EvalReport, accuracy, comprehensive_average,
                         evaluate_run, predict, select_best_round)
from .federation import (ClientState, CommLedger, RoundReport, TrainedRun,
                         aggregate, client_local_update, load_checkpoint,
                         run_federation, run_round, save_checkpoint)
from .loss import (DEFAULT_SCALE, LogitPair, LossGrad, compute_logits,
                   loss_and_grad, symmetric_ce_loss)
from .numerics import (finite_diff_grad, matmul, rowwise_l2_normalize,
                       rowwise_softmax)
from .optim import AdamState, adam_step, apply_prox, init_adam

__all__ = [
    "AdapterForward", "AdapterParams", "AdamState", "ClientState",
    "CommLedger", "ConfigError", "DataValidationError", "DEFAULT_SCALE",
    "EvalReport", "FeatureDataset", "FedAdaptError", "FederatedAdapterClassifier",
    "FormatError", "LogitPair", "LossGrad", "NumericError", "ParameterError",
    "RoundReport", "RunConfig", "ShapeError", "SplitDataset", "TrainedRun",
    "accuracy", "adam_step", "aggregate", "apply_prox", "client_local_update",
    "comprehensive_average", "compute_logits", "evaluate_run",
    "finite_diff_grad", "flatten", "forward", "generate_synthetic_suite",
    "init_adam", "init_adapter", "load_checkpoint", "load_config",
    "loss_and_grad", "make_batches", "matmul", "parameter_count", "predict",
    "read_feature_file", "rowwise_l2_normalize", "rowwise_softmax",
    "run_federation", "run_round", "save_checkpoint", "select_best_round",
    "split_60_20_20", "symmetric_ce_loss", "unflatten", "write_feature_file",
]
