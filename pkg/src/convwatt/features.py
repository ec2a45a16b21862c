"""Algorithmic cost features for ConvNet layers.

Counts are exact Python integers. They become floating point only inside
the regression code.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .model_ir import (
    AVG_POOL,
    CONV,
    CONV_FAMILY,
    DEPTHWISE_CONV,
    FC,
    MAX_POOL,
    POOL_KINDS,
    ConvNetModel,
    LayerSpec,
)

BASE_FEATURES = (
    "kernel",
    "padding",
    "stride",
    "Ix",
    "Ox",
    "Oz",
    "Iz",
    "input_volume",
    "output_volume",
    "weights",
    "data_volume",
    "MAC",
)

MAC_SUM = "MAC_sum"
OP_SUM = "Op_sum"


class FeatureError(ValueError):
    pass


class Origin(enum.Enum):
    SINGLE_LAYER = "single_layer"
    LAYER_TYPE_AGGREGATE = "layer_type_aggregate"


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one layer or one per-network kind aggregate."""

    names: tuple[str, ...]
    values: tuple[int, ...]
    degree: int = 1
    origin: Origin = Origin.SINGLE_LAYER
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise FeatureError("feature names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise FeatureError("duplicate feature names")
        if self.degree not in (1, 2):
            raise FeatureError(f"unsupported degree {self.degree}")

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> int:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.names, self.values))

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


def _require_resolved(layer: LayerSpec) -> tuple[int, int, int]:
    if not layer.resolved:
        raise FeatureError(f"layer {layer.name!r} has unresolved shapes; run infer_shapes first")
    return layer.output_dims


def _require_kind(layer: LayerSpec, kinds: tuple[str, ...], op: str) -> None:
    if layer.kind not in kinds:
        raise FeatureError(f"{op} is undefined for {layer.kind_name} layer {layer.name!r}")


def conv_macs(layer: LayerSpec) -> int:
    """Multiply-accumulates of a Conv, DepthwiseConv or Fc layer.

    Grouped convolutions see ``Iz / groups`` input channels per filter.
    A depthwise-separable block costs its per-channel spatial pass plus the
    1x1 pointwise projection.
    """
    _require_kind(layer, CONV_FAMILY, "conv_macs")
    ox, oy, oz = _require_resolved(layer)
    kx, ky = layer.kernel  # type: ignore[misc]
    iz = layer.input_dims[2]
    if layer.kind == DEPTHWISE_CONV:
        return ox * oy * kx * ky * iz + iz * oz * ox * oy
    return ox * oy * oz * kx * ky * (iz // layer.groups)


def conv_weights(layer: LayerSpec) -> int:
    """Filter weight count, biases excluded."""
    _require_kind(layer, CONV_FAMILY, "conv_weights")
    _require_resolved(layer)
    kx, ky = layer.kernel  # type: ignore[misc]
    iz, oz = layer.input_dims[2], layer.out_channels
    if layer.kind == DEPTHWISE_CONV:
        return kx * ky * iz + iz * oz
    return kx * ky * (iz // layer.groups) * oz


def input_volume(layer: LayerSpec) -> int:
    ix, iy, iz = layer.input_dims
    return ix * iy * iz


def output_volume(layer: LayerSpec) -> int:
    ox, oy, oz = _require_resolved(layer)
    return ox * oy * oz


def data_volume(layer: LayerSpec) -> int:
    """Input feature map + weights + output feature map, in elements."""
    _require_kind(layer, CONV_FAMILY, "data_volume")
    return input_volume(layer) + conv_weights(layer) + output_volume(layer)


def pool_opcount(layer: LayerSpec) -> int:
    """Comparison count of a pooling layer: ``K*K - 1`` per output element.

    Average pooling is counted the same way (window accumulations, the final
    division is ignored).
    """
    _require_kind(layer, POOL_KINDS, "pool_opcount")
    ox, oy, oz = _require_resolved(layer)
    kx, ky = layer.kernel  # type: ignore[misc]
    return ox * oy * oz * (kx * ky - 1)


def base_features(layer: LayerSpec) -> tuple[int, ...]:
    _require_kind(layer, CONV_FAMILY, "layer features")
    ox, _, oz = _require_resolved(layer)
    return (
        layer.kernel[0],  # type: ignore[index]
        layer.padding,
        layer.stride,
        layer.input_dims[0],
        ox,
        oz,
        layer.input_dims[2],
        input_volume(layer),
        output_volume(layer),
        conv_weights(layer),
        data_volume(layer),
        conv_macs(layer),
    )


def polynomial_names(names: tuple[str, ...] | list[str], degree: int) -> tuple[str, ...]:
    """Feature names after expansion: base names, then ``a^2`` / ``a*b`` terms."""
    names = tuple(names)
    if degree == 1:
        return names
    if degree != 2:
        raise FeatureError(f"unsupported polynomial degree {degree} (1 or 2)")
    quad = tuple(
        f"{a}^2" if i == j else f"{a}*{b}"
        for (i, a), (j, b) in itertools.combinations_with_replacement(enumerate(names), 2)
    )
    return names + quad


def polynomial_values(values, degree: int):
    """Expand values in the order of :func:`polynomial_names`.

    Works on tuples of ints (exact) and on 2-D numpy arrays (column-wise).
    """
    if degree == 1:
        return values
    if degree != 2:
        raise FeatureError(f"unsupported polynomial degree {degree} (1 or 2)")
    if isinstance(values, np.ndarray):
        m = values.shape[1]
        cols = [values[:, i] * values[:, j] for i, j in itertools.combinations_with_replacement(range(m), 2)]
        return np.column_stack([values] + cols) if cols else values
    values = tuple(values)
    quad = tuple(a * b for a, b in itertools.combinations_with_replacement(values, 2))
    return values + quad


def layer_feature_vector(layer: LayerSpec, degree: int = 1) -> FeatureVector:
    """The 12 base features of a conv-family layer, optionally expanded to degree 2 (90 terms)."""
    if degree not in (1, 2):
        raise FeatureError(f"unsupported polynomial degree {degree} (1 or 2)")
    base = base_features(layer)
    return FeatureVector(
        names=polynomial_names(BASE_FEATURES, degree),
        values=polynomial_values(base, degree),
        degree=degree,
        origin=Origin.SINGLE_LAYER,
        label=layer.name,
    )


def aggregate_kind(layer: LayerSpec) -> str | None:
    """Aggregation bucket of a layer: depthwise convs count with Conv."""
    if layer.kind in (CONV, DEPTHWISE_CONV):
        return CONV
    if layer.kind in (FC, MAX_POOL, AVG_POOL):
        return layer.kind
    return None


def layer_cost(layer: LayerSpec) -> int:
    """MACs for conv-family layers, op count for pooling layers."""
    if layer.kind in POOL_KINDS:
        return pool_opcount(layer)
    return conv_macs(layer)


def network_layer_type_aggregate(model: ConvNetModel) -> dict[str, FeatureVector]:
    """Per-kind MAC_sum (Conv, Fc) and Op_sum (MaxPool, AvgPool) of one network.

    Kinds appear in order of first occurrence in the model.
    """
    totals: dict[str, int] = {}
    for layer in model.layers:
        kind = aggregate_kind(layer)
        if kind is None:
            continue
        totals[kind] = totals.get(kind, 0) + layer_cost(layer)
    return {
        kind: FeatureVector(
            names=(OP_SUM if kind in POOL_KINDS else MAC_SUM,),
            values=(total,),
            origin=Origin.LAYER_TYPE_AGGREGATE,
            label=kind,
        )
        for kind, total in totals.items()
    }


def feature_matrix(vectors: list[FeatureVector], names: tuple[str, ...] | None = None) -> np.ndarray:
    """Stack vectors into an ``n x m`` float matrix, columns in ``names`` order."""
    if not vectors:
        return np.zeros((0, len(names or ())))
    names = names or vectors[0].names
    rows = []
    for vec in vectors:
        lookup = vec.as_dict()
        try:
            rows.append([float(lookup[n]) for n in names])
        except KeyError as exc:
            raise FeatureError(f"feature {exc.args[0]!r} missing from vector {vec.label!r}") from None
    return np.array(rows, dtype=float)
