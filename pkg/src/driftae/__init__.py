"""Anchored-ensemble autoencoders for multi-sensor condition monitoring.

The package trains an ensemble of heteroscedastic autoencoders on healthy
working cycles and scores new cycles with three signals: reconstruction
loss, epistemic uncertainty (across-member spread) and aleatoric
uncertainty (predicted data noise).  Real process degradation and injected
sensor faults move the trio differently, which makes them separable by
plain clustering.
"""

from .config import (DataConfig, DriftSweep, ExperimentConfig, ScenariosConfig,
                     load_experiment_config, parse_experiment)
from .drift import (DRIFT_KINDS, DriftSpec, inject, inject_noise,
                    inject_offset, make_drift_spec, sensor_reference_mean)
from .ensemble import (AnchorSet, EnsembleModel, PredictionRecord, TrainConfig,
                       anchor_penalty, gaussian_nll, load_model, predict,
                       sample_anchors, save_model, total_loss, train_ensemble,
                       train_member)
from .errors import (ConfigError, DimensionError, DriftAEError, IngestionError,
                     NumericError, PersistenceError, TrainingError)
from .evaluation import (METRIC_NAMES, ClusterReport, ScenarioResult,
                         cluster_purity, evaluate_clusters, export_metrics_csv,
                         export_trace_csv, kmeans, log_standardize,
                         read_metrics_csv, summarize)
from .network import (ACTIVATIONS, LossSpec, NetworkSpec, OptimizerState,
                      ParameterSet, adam_step, backward, derive_seed, forward,
                      init_params, init_std)
from .pipeline import (CYCLE_SECONDS, CycleDataset, ScalerParams, SensorChannel,
                       SplitIndices, apply_scaler, fit_scaler, flatten,
                       load_raw_dataset, resample_dataset, resample_to_1hz,
                       select_condition, split_healthy, to_features, unflatten,
                       write_dataset)
from .synthetic import SyntheticConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS", "AnchorSet", "CYCLE_SECONDS", "ClusterReport", "ConfigError",
    "CycleDataset", "DRIFT_KINDS", "DataConfig", "DimensionError", "DriftAEError",
    "DriftSpec", "DriftSweep", "EnsembleModel", "ExperimentConfig",
    "IngestionError", "LossSpec", "METRIC_NAMES", "NetworkSpec", "NumericError",
    "OptimizerState", "ParameterSet", "PersistenceError", "PredictionRecord",
    "ScalerParams", "ScenarioResult", "ScenariosConfig", "SensorChannel",
    "SplitIndices", "SyntheticConfig", "TrainConfig", "TrainingError",
    "adam_step", "anchor_penalty", "apply_scaler", "backward", "cluster_purity",
    "derive_seed", "evaluate_clusters", "export_metrics_csv", "export_trace_csv",
    "fit_scaler", "flatten", "forward", "gaussian_nll", "generate_synthetic",
    "inject", "inject_noise", "inject_offset", "init_params", "init_std",
    "kmeans", "load_experiment_config", "load_model", "load_raw_dataset",
    "log_standardize", "make_drift_spec", "parse_experiment", "predict",
    "read_metrics_csv", "resample_dataset", "resample_to_1hz", "sample_anchors",
    "save_model", "select_condition", "sensor_reference_mean", "split_healthy",
    "summarize", "to_features", "total_loss", "train_ensemble", "train_member",
    "unflatten", "write_dataset",
]
