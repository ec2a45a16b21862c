"""Choose single-layer features by BIC on a synthetic convolution dataset.

Energies are generated from a handful of the cost features plus noise. The
demo compares exhaustive search over the 12 base features with forward
stepwise search over their 90-term quadratic expansion.
"""

from __future__ import annotations

import numpy as np

from convwatt import best_subset_exhaustive, fit_ols, forward_stepwise
from convwatt.features import polynomial_names, polynomial_values
from convwatt.synthetic import individual_layer_dataset

ds = individual_layer_dataset(np.random.default_rng(0), n_layers=200)
names = ds.feature_names
X, y = ds.matrix(names), ds.energies

path = best_subset_exhaustive(X, y, names)
print("exhaustive search, best subset per size:")
for e in path.entries:
    mark = "*" if e is path.selected else " "
    print(f" {mark} {e.size:2d}  BIC {e.bic:10.2f}  {' '.join(e.features)}")

quad_names = polynomial_names(names, 2)
Xq = np.asarray(polynomial_values(X, 2), dtype=float)
step = forward_stepwise(Xq, y, quad_names, max_size=15)
print(f"\nstepwise over {len(quad_names)} quadratic terms accepted {step.accepted} steps:")
print("  " + " ".join(step.selected.features))

cols = [names.index(f) for f in path.selected.features]
model = fit_ols(X[:, cols], y, feature_names=path.selected.features)
terms = " + ".join(f"{c:.4e}*{n}" for c, n in zip(model.coefficients, model.feature_names))
print(f"\nfitted on the exhaustive choice:\n  energy_mj = {model.intercept:.4f} + {terms}")
