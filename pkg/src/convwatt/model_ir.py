"""In-memory ConvNet description and the JSON model-spec format.

A network is an ordered list of self-contained layer records. Each record
declares its own input dimensions; nothing is chained from one layer to the
next, so branching topologies (inception modules, concats) need no graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

CONV = "Conv"
DEPTHWISE_CONV = "DepthwiseConv"
FC = "Fc"
MAX_POOL = "MaxPool"
AVG_POOL = "AvgPool"
OTHER = "Other"

CONV_FAMILY = (CONV, DEPTHWISE_CONV, FC)
POOL_KINDS = (MAX_POOL, AVG_POOL)
KNOWN_KINDS = CONV_FAMILY + POOL_KINDS + (OTHER,)


class ModelSpecError(ValueError):
    """Raised for malformed or inconsistent model specifications."""


Dims3 = tuple[int, int, int]


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network, batch size 1.

    ``kind`` is one of :data:`KNOWN_KINDS`. Layers of kind ``"Other"`` carry a
    free-text ``label`` (``"LRN"``, ``"ReLU"``, ...) and no kernel.
    ``output_dims`` is ``None`` until :func:`infer_shapes` fills it in.
    """

    name: str
    kind: str
    input_dims: Dims3
    out_channels: int
    kernel: tuple[int, int] | None = None
    stride: int = 1
    padding: int = 0
    groups: int = 1
    output_dims: Dims3 | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        _validate_layer(self)

    @property
    def kind_name(self) -> str:
        """The kind used for reporting: the label for ``Other`` layers."""
        if self.kind == OTHER:
            return self.label or OTHER
        return self.kind

    @property
    def resolved(self) -> bool:
        # An Fc layer also needs its implicit full-input kernel filled in.
        return self.output_dims is not None and (self.kind != FC or self.kernel is not None)


@dataclass(frozen=True)
class ConvNetModel:
    name: str
    layers: tuple[LayerSpec, ...]
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for layer in self.layers:
            if layer.name in seen:
                raise ModelSpecError(f"duplicate layer name {layer.name!r} in model {self.name!r}")
            seen.add(layer.name)

    def __iter__(self):
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def count(self, kind: str) -> int:
        return sum(1 for layer in self.layers if layer.kind_name == kind)


def _positive(value: Any, what: str, layer: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelSpecError(f"layer {layer!r}: {what} must be an integer, got {value!r}")
    if value <= 0:
        raise ModelSpecError(f"layer {layer!r}: non-positive {what} ({value})")


def _validate_layer(layer: LayerSpec) -> None:
    name = layer.name
    if not isinstance(name, str) or not name:
        raise ModelSpecError("layer name must be a non-empty string")
    if layer.kind not in KNOWN_KINDS:
        raise ModelSpecError(
            f"layer {name!r}: unknown layer kind {layer.kind!r} (tag it 'Other' with a label)"
        )
    if len(layer.input_dims) != 3:
        raise ModelSpecError(f"layer {name!r}: input must have 3 dimensions")
    for axis, v in zip("xyz", layer.input_dims):
        _positive(v, f"input dimension I{axis}", name)
    _positive(layer.out_channels, "output channels", name)
    _positive(layer.stride, "stride", name)
    _positive(layer.groups, "groups", name)
    if isinstance(layer.padding, bool) or not isinstance(layer.padding, int) or layer.padding < 0:
        raise ModelSpecError(f"layer {name!r}: padding must be a non-negative integer")

    if layer.kernel is not None:
        if len(layer.kernel) != 2:
            raise ModelSpecError(f"layer {name!r}: kernel must have 2 dimensions")
        for axis, v in zip("xy", layer.kernel):
            _positive(v, f"kernel dimension K{axis}", name)
        ix, iy, _ = layer.input_dims
        kx, ky = layer.kernel
        if kx > ix + 2 * layer.padding or ky > iy + 2 * layer.padding:
            raise ModelSpecError(
                f"layer {name!r}: kernel {kx}x{ky} exceeds padded input "
                f"{ix + 2 * layer.padding}x{iy + 2 * layer.padding}"
            )
    elif layer.kind in (CONV, DEPTHWISE_CONV) + POOL_KINDS:
        raise ModelSpecError(f"layer {name!r}: {layer.kind} layer requires a kernel")

    if layer.groups > 1:
        iz, oz = layer.input_dims[2], layer.out_channels
        if iz % layer.groups or oz % layer.groups:
            raise ModelSpecError(
                f"layer {name!r}: groups={layer.groups} does not divide Iz={iz} and Oz={oz}"
            )

    if layer.output_dims is not None:
        if len(layer.output_dims) != 3:
            raise ModelSpecError(f"layer {name!r}: output must have 3 dimensions")
        for axis, v in zip("xyz", layer.output_dims):
            _positive(v, f"output dimension O{axis}", name)


def output_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    """Number of whole kernel placements along one axis.

    >>> output_extent(227, 11, 4, 0)
    55
    """
    return (size + 2 * padding - kernel) // stride + 1


def resolve_layer(layer: LayerSpec) -> LayerSpec:
    """Return ``layer`` with ``output_dims`` computed (and checked if declared)."""
    ix, iy, iz = layer.input_dims
    oz = layer.out_channels
    if layer.kind == FC:
        kx, ky = layer.kernel if layer.kernel is not None else (ix, iy)
        ox = output_extent(ix, kx, layer.stride, layer.padding)
        oy = output_extent(iy, ky, layer.stride, layer.padding)
        if (ox, oy) != (1, 1):
            raise ModelSpecError(
                f"layer {layer.name!r}: fully-connected kernel {kx}x{ky} over input "
                f"{ix}x{iy} does not reduce to 1x1"
            )
        computed = (1, 1, oz)
        if layer.kernel is None:
            layer = replace(layer, kernel=(ix, iy))
    elif layer.kernel is not None:
        kx, ky = layer.kernel
        computed = (
            output_extent(ix, kx, layer.stride, layer.padding),
            output_extent(iy, ky, layer.stride, layer.padding),
            oz,
        )
    else:
        # Other layers without a kernel are treated as shape preserving.
        computed = layer.output_dims or (ix, iy, oz)

    if layer.output_dims is not None and tuple(layer.output_dims) != computed:
        raise ModelSpecError(
            f"layer {layer.name!r}: declared output {tuple(layer.output_dims)} "
            f"!= computed {computed}"
        )
    return replace(layer, output_dims=computed)


def infer_shapes(model: ConvNetModel) -> ConvNetModel:
    """Resolve every layer's output dimensions. Idempotent and order preserving."""
    return replace(model, layers=tuple(resolve_layer(layer) for layer in model.layers))


def _dims(value: Any, n: int, what: str, layer: str) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ModelSpecError(f"layer {layer!r}: {what} must be a list of {n} integers")
    return tuple(value)


def layer_from_dict(record: dict[str, Any], index: int = 0) -> LayerSpec:
    if not isinstance(record, dict):
        raise ModelSpecError(f"layers[{index}]: expected an object")
    name = record.get("name")
    if not isinstance(name, str) or not name:
        raise ModelSpecError(f"layers[{index}]: missing layer name")
    kind = record.get("kind")
    label = record.get("label")
    if kind not in KNOWN_KINDS:
        raise ModelSpecError(
            f"layer {name!r}: unknown layer kind {kind!r} (tag it 'Other' with a label)"
        )
    if "input" not in record:
        raise ModelSpecError(f"layer {name!r}: missing input dimensions")
    input_dims = _dims(record["input"], 3, "input", name)
    kernel = record.get("kernel")
    if kernel is not None:
        kernel = _dims(kernel, 2, "kernel", name)
    out_channels = record.get("out_channels", input_dims[2] if kind == OTHER else None)
    if out_channels is None:
        raise ModelSpecError(f"layer {name!r}: missing out_channels")
    output = record.get("output")
    if output is not None:
        output = _dims(output, 3, "output", name)
    return LayerSpec(
        name=name,
        kind=kind,
        input_dims=input_dims,  # type: ignore[arg-type]
        out_channels=out_channels,
        kernel=kernel,  # type: ignore[arg-type]
        stride=record.get("stride", 1),
        padding=record.get("pad", 0),
        groups=record.get("groups", 1),
        output_dims=output,  # type: ignore[arg-type]
        label=label,
    )


def parse_model(spec_text: str) -> ConvNetModel:
    """Parse a JSON model-spec document.

    Layers keep document order. Output dimensions are left as declared;
    call :func:`infer_shapes` to resolve them.

    Raises
    ------
    ModelSpecError
        On syntax errors (with line/column), unknown kinds, non-positive
        dimensions or bad ``groups``.
    """
    try:
        doc = json.loads(spec_text)
    except json.JSONDecodeError as exc:
        raise ModelSpecError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ModelSpecError("model spec must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ModelSpecError("model spec needs a non-empty 'name'")
    layers = doc.get("layers")
    if not isinstance(layers, list):
        raise ModelSpecError("model spec needs a 'layers' list")
    metadata = doc.get("metadata", {})
    return ConvNetModel(
        name=name,
        layers=tuple(layer_from_dict(rec, i) for i, rec in enumerate(layers)),
        metadata=dict(metadata),
    )


def layer_to_dict(layer: LayerSpec) -> dict[str, Any]:
    record: dict[str, Any] = {"name": layer.name, "kind": layer.kind}
    if layer.label is not None:
        record["label"] = layer.label
    record["input"] = list(layer.input_dims)
    if layer.kernel is not None:
        record["kernel"] = list(layer.kernel)
    record["stride"] = layer.stride
    record["pad"] = layer.padding
    record["out_channels"] = layer.out_channels
    if layer.groups != 1:
        record["groups"] = layer.groups
    if layer.output_dims is not None:
        record["output"] = list(layer.output_dims)
    return record


def serialize_model(model: ConvNetModel, indent: int | None = 1) -> str:
    doc: dict[str, Any] = {"name": model.name}
    if model.metadata:
        doc["metadata"] = model.metadata
    doc["layers"] = [layer_to_dict(layer) for layer in model.layers]
    return json.dumps(doc, indent=indent)


def load_model(path) -> ConvNetModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
