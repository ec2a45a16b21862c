"""Train layer-type energy models and estimate whole-network energy.

Part one fits per-kind models on a bundled measurement table and predicts the
three reference networks. Part two checks the whole pipeline on synthetic
networks with a known energy law, using leave-networks-out validation.
"""

from __future__ import annotations

import warnings

import numpy as np

from convwatt import (
    SplitPlan,
    cross_validate,
    data_path,
    load_energy_dataset,
    predict_total,
    reference_model,
    train_bundle,
)
from convwatt.predictor import layer_type_recipe, train_layer_type_model
from convwatt.synthetic import linear_network_dataset

measured = load_energy_dataset(data_path("layer_type_Eigen-TX1.csv"))
bundle = train_bundle(measured)
for kind, model in bundle.models.items():
    print(f"{kind:5} intercept {model.intercept:10.2f}  slope {model.coefficients[0]:.4e} per {model.feature_names[0]}")

print()
for net in ("AlexNet", "GoogleNet", "VGG_CNN_S"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # tiny tables can give negative intercept-only parts
        est = predict_total(bundle, reference_model(net))
    print(f"{net:10} predicted {est.total:10.2f} mJ  (uncovered kinds: {', '.join(est.uncovered) or 'none'})")

# Synthetic check: energy = 1e-6 * MAC_sum + 500 with 5% noise.
dataset, _ = linear_network_dataset(np.random.default_rng(1))
report = cross_validate(dataset, SplitPlan.leave_networks_out(3, seed=1), layer_type_recipe())
slope = train_layer_type_model(dataset, "Conv").coefficients[0]
print(f"\nsynthetic networks: slope {slope:.4e} (true 1.0e-06)")
print(report.format_table())
