"""Energy predictive models for ConvNet inference.

Layer cost features, power-trace integration, BIC feature selection and
layer-type regression models for whole-network energy estimates.
"""

__version__ = "0.1.0"

from .bundled import data_path, reference_model
from .energy_trace import (
    AnnotationLog,
    EnergyDataset,
    EnergyRow,
    PowerTrace,
    integrate_energy,
    layer_type_breakdown,
    load_annotations,
    load_energy_dataset,
    load_power_trace,
    per_layer_energy,
)
from .evaluation import (
    EvalReport,
    Metric,
    SplitPlan,
    cross_validate,
    relative_accuracy,
    rmspe_accuracy,
)
from .features import (
    FeatureVector,
    conv_macs,
    conv_weights,
    data_volume,
    layer_feature_vector,
    network_layer_type_aggregate,
    pool_opcount,
)
from .model_ir import ConvNetModel, LayerSpec, infer_shapes, load_model, parse_model
from .predictor import (
    EnergyEstimate,
    EnergyModelBundle,
    load_bundle,
    predict_layer_type,
    predict_total,
    save_bundle,
    train_bundle,
    train_layer_type_model,
)
from .regression import (
    RegressionModel,
    SelectionPath,
    best_subset_exhaustive,
    bic_score,
    fit_ols,
    forward_stepwise,
)
