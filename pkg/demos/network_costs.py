"""Walk through the cost features of the bundled reference networks.

Loads each bundled model, prints per-layer MACs and data volume for the
convolution and fully connected layers of AlexNet, then the layer-type
aggregates that the whole-network energy models consume.
"""

from __future__ import annotations

from convwatt import conv_macs, data_volume, network_layer_type_aggregate, reference_model
from convwatt.model_ir import CONV, FC

alexnet = reference_model("AlexNet")
print(f"{alexnet.name}: {len(alexnet.layers)} layers")
print(f"{'layer':8} {'kind':5} {'output':>14} {'MACs':>14} {'data volume':>12}")
for layer in alexnet.layers:
    if layer.kind in (CONV, FC):
        dims = "x".join(str(d) for d in layer.output_dims)
        print(f"{layer.name:8} {layer.kind:5} {dims:>14} {conv_macs(layer):>14,} {data_volume(layer):>12,}")

# Whole-network aggregates: MAC_sum for Conv and Fc, Op_sum for pooling.
print()
for name in ("AlexNet", "GoogleNet", "VGG_CNN_S"):
    agg = network_layer_type_aggregate(reference_model(name))
    parts = ", ".join(f"{kind} {fv.names[0]}={fv.values[0]:,}" for kind, fv in agg.items())
    print(f"{name:10} {parts}")
