"""Layer-type energy models and whole-network inference estimates.

Each layer type gets a one-feature linear model: energy against the
network's MAC sum (Conv, Fc) or pooling op sum (Pool). A network's inference
energy is the sum of the per-type predictions.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .energy_trace import EnergyDataset, EnergyRow
from .features import (
    MAC_SUM,
    OP_SUM,
    FeatureVector,
    Origin,
    aggregate_kind,
    network_layer_type_aggregate,
)
from .model_ir import AVG_POOL, MAX_POOL, ConvNetModel
from .regression import RegressionError, RegressionModel, fit_ols

FORMAT_VERSION = 1
POOL = "Pool"
MODEL_KINDS = ("Conv", "Fc", POOL)


class BundleError(ValueError):
    pass


class ProvenanceWarning(UserWarning):
    pass


class NegativePredictionWarning(UserWarning):
    pass


class DigestWarning(UserWarning):
    pass


def model_kind(kind: str) -> str:
    """Model bucket for a layer kind; max and average pooling share one model."""
    return POOL if kind in (MAX_POOL, AVG_POOL, POOL) else kind


def aggregate_feature(kind: str) -> str:
    return OP_SUM if model_kind(kind) == POOL else MAC_SUM


def network_aggregates(model: ConvNetModel) -> dict[str, FeatureVector]:
    """Per-network aggregates keyed by model bucket (Conv, Fc, Pool)."""
    out: dict[str, FeatureVector] = {}
    for kind, vec in network_layer_type_aggregate(model).items():
        bucket = model_kind(kind)
        total = vec.values[0] + (out[bucket].values[0] if bucket in out else 0)
        out[bucket] = FeatureVector(vec.names, (total,), origin=Origin.LAYER_TYPE_AGGREGATE, label=bucket)
    return out


def layer_type_dataset(
    measurements: Mapping[str, Mapping[str, float]],
    models: Mapping[str, ConvNetModel],
    provenance: str = "",
) -> EnergyDataset:
    """Build a layer-type dataset from measured per-kind energies.

    ``measurements[network][kind]`` is the measured energy (mJ) of all layers
    of that kind; features come from the network's spec. Every row carries
    both ``MAC_sum`` and ``Op_sum`` columns, with 0 in the one that does not
    apply.
    """
    rows = []
    for network, per_kind in measurements.items():
        aggregates = network_aggregates(models[network])
        for kind, energy in per_kind.items():
            bucket = model_kind(kind)
            value = aggregates[bucket].values[0] if bucket in aggregates else 0
            feats = (value, 0) if aggregate_feature(bucket) == MAC_SUM else (0, value)
            rows.append(
                EnergyRow(
                    network,
                    bucket,
                    f"{network}/{bucket}",
                    float(energy),
                    FeatureVector((MAC_SUM, OP_SUM), feats, origin=Origin.LAYER_TYPE_AGGREGATE, label=bucket),
                )
            )
    return EnergyDataset(rows, provenance, (MAC_SUM, OP_SUM))


def train_layer_type_model(dataset: EnergyDataset, kind: str) -> RegressionModel:
    """Fit ``energy ~ intercept + slope * aggregate`` over the rows of one kind."""
    bucket = model_kind(kind)
    rows = dataset.of_kind(bucket)
    if len(rows) < 2:
        raise RegressionError(f"{bucket} model needs at least 2 rows, got {len(rows)}")
    feature = aggregate_feature(bucket)
    x = rows.matrix([feature])
    if np.ptp(x[:, 0]) == 0:
        raise RegressionError(f"{bucket} rows have a zero-variance {feature}")
    return fit_ols(x, rows.energies, (feature,))


def predict_layer_type(model: RegressionModel, aggregate: FeatureVector) -> float:
    """Evaluate a layer-type model on a network aggregate (mJ).

    Negative results are returned unchanged with a warning.
    """
    if tuple(aggregate.names) != tuple(model.feature_names):
        raise BundleError(
            f"feature mismatch: model expects {list(model.feature_names)}, got {list(aggregate.names)}"
        )
    value = model.intercept + math.fsum(c * float(v) for c, v in zip(model.coefficients, aggregate.values))
    if value < 0:
        warnings.warn(
            f"negative energy prediction {value:.4g} mJ for {aggregate.label or 'aggregate'}",
            NegativePredictionWarning,
            stacklevel=2,
        )
    return value


@dataclass(frozen=True)
class EnergyModelBundle:
    provenance: str
    models: dict[str, RegressionModel]
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.provenance:
            raise BundleError("bundle provenance must be non-empty")


def dataset_digest(dataset: EnergyDataset) -> str:
    h = hashlib.sha256()
    for r in dataset.rows:
        values = r.features.values if r.features is not None else ()
        h.update(f"{r.network}|{r.layer_kind}|{r.layer_name}|{r.energy_mj!r}|{values}\n".encode())
    return h.hexdigest()


def train_bundle(
    dataset: EnergyDataset,
    kinds: tuple[str, ...] | None = None,
    provenance: str | None = None,
    seed: int | None = None,
) -> EnergyModelBundle:
    """Train one model per layer kind present in the dataset."""
    present = {r.layer_kind for r in dataset.rows}
    kinds = kinds or tuple(k for k in MODEL_KINDS if k in present)
    models = {model_kind(k): train_layer_type_model(dataset, k) for k in kinds}
    label = provenance or dataset.provenance
    meta = {"tool_version": __version__, "dataset_digest": dataset_digest(dataset)}
    if seed is not None:
        meta["seed"] = seed
    return EnergyModelBundle(label, models, meta)


def layer_type_recipe(kinds: tuple[str, ...] | None = None):
    """Cross-validation recipe: per-kind layer-type models, rows predicted by kind."""

    def train(ds: EnergyDataset):
        bundle = train_bundle(ds, kinds, provenance=ds.provenance or "cv")

        def predict(test: EnergyDataset) -> np.ndarray:
            out = np.empty(len(test))
            for i, row in enumerate(test.rows):
                bucket = model_kind(row.layer_kind)
                model = bundle.models[bucket]
                x = float(row.features[aggregate_feature(bucket)])  # type: ignore[index]
                out[i] = model.intercept + model.coefficients[0] * x
            return out

        return predict

    return train


@dataclass(frozen=True)
class EnergyEstimate:
    network: str
    provenance: str
    per_kind: dict[str, float]
    total: float
    uncovered: dict[str, FeatureVector] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["network,provenance,layer_kind,predicted_mj,status"]
        for kind, value in self.per_kind.items():
            lines.append(f"{self.network},{self.provenance},{kind},{value!r},predicted")
        for kind, vec in self.uncovered.items():
            detail = " ".join(f"{n}={v}" for n, v in zip(vec.names, vec.values))
            lines.append(f"{self.network},{self.provenance},{kind},,uncovered {detail}")
        lines.append(f"{self.network},{self.provenance},Total,{self.total!r},sum")
        return "\n".join(lines) + "\n"


def predict_total(
    bundle: EnergyModelBundle,
    model: ConvNetModel,
    provenance: str | None = None,
) -> EnergyEstimate:
    """Whole-inference estimate: the sum of every bundled layer-type prediction.

    Each kind in the bundle is evaluated on the network's aggregate, with a
    zero aggregate for kinds the network lacks (so it contributes the model
    intercept). Layer kinds without a bundled model are listed as uncovered
    and left out of the total.
    """
    if not bundle.models:
        raise BundleError("empty bundle")
    if provenance is not None and provenance != bundle.provenance:
        warnings.warn(
            f"bundle trained under {bundle.provenance!r} used for {provenance!r}",
            ProvenanceWarning,
            stacklevel=2,
        )
    aggregates = network_aggregates(model)
    per_kind: dict[str, float] = {}
    for kind in sorted(bundle.models):
        reg = bundle.models[kind]
        vec = aggregates.get(
            kind,
            FeatureVector(reg.feature_names, (0,) * len(reg.feature_names), origin=Origin.LAYER_TYPE_AGGREGATE, label=kind),
        )
        per_kind[kind] = predict_layer_type(reg, vec)

    uncovered: dict[str, FeatureVector] = {}
    for kind, vec in aggregates.items():
        if kind not in bundle.models:
            uncovered[kind] = vec
    other_counts: dict[str, int] = {}
    for layer in model.layers:
        if aggregate_kind(layer) is None:
            other_counts[layer.kind_name] = other_counts.get(layer.kind_name, 0) + 1
    for kind, count in other_counts.items():
        uncovered[kind] = FeatureVector(("layer_count",), (count,), origin=Origin.LAYER_TYPE_AGGREGATE, label=kind)

    total = 0.0
    for kind in per_kind:
        total += per_kind[kind]
    return EnergyEstimate(model.name, provenance or bundle.provenance, per_kind, total, uncovered)


# ---------------------------------------------------------------------------
# Persistence


def _models_payload(models: Mapping[str, RegressionModel]) -> dict[str, Any]:
    return {
        kind: {
            "feature_names": list(m.feature_names),
            "coefficients": [repr(float(c)) for c in m.coefficients],
            "intercept": repr(float(m.intercept)),
            "n_train": m.n_train,
            "rss": repr(float(m.rss)),
            "bic": repr(float(m.bic)),
            "degree": m.degree,
        }
        for kind, m in sorted(models.items())
    }


def _digest(payload: Mapping[str, Any]) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def bundle_to_json(bundle: EnergyModelBundle) -> str:
    payload = _models_payload(bundle.models)
    doc = {
        "format_version": FORMAT_VERSION,
        "provenance": bundle.provenance,
        "metadata": bundle.metadata,
        "models": payload,
        "digest": _digest({"provenance": bundle.provenance, "models": payload}),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def bundle_from_json(text: str) -> EnergyModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle is not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format version: expected {FORMAT_VERSION}, found {version!r}")
    payload = doc.get("models", {})
    if doc.get("digest") != _digest({"provenance": doc.get("provenance"), "models": payload}):
        warnings.warn("bundle digest mismatch; contents were modified after saving", DigestWarning, stacklevel=2)
    models = {}
    try:
        for kind, m in payload.items():
            models[kind] = RegressionModel(
                feature_names=tuple(m["feature_names"]),
                coefficients=tuple(float(c) for c in m["coefficients"]),
                intercept=float(m["intercept"]),
                n_train=int(m["n_train"]),
                rss=float(m["rss"]),
                bic=float(m["bic"]),
                degree=int(m.get("degree", 1)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"malformed model entry: {exc}") from exc
    return EnergyModelBundle(doc.get("provenance", ""), models, dict(doc.get("metadata", {})))


def save_bundle(bundle: EnergyModelBundle, path) -> None:
    Path(path).write_text(bundle_to_json(bundle), encoding="utf-8")


def load_bundle(path) -> EnergyModelBundle:
    return bundle_from_json(Path(path).read_text(encoding="utf-8"))
