"""Random layers, networks and energy datasets for tests and demos."""

from __future__ import annotations

import numpy as np

from .energy_trace import EnergyDataset, EnergyRow
from .features import MAC_SUM, FeatureVector, Origin, layer_feature_vector, network_layer_type_aggregate
from .model_ir import CONV, ConvNetModel, LayerSpec, infer_shapes

_KERNELS = (1, 3, 5, 7, 11)
_CHANNELS = (16, 32, 48, 64, 96, 128, 192, 256, 384, 512)


def random_conv_layer(rng: np.random.Generator, name: str = "conv") -> LayerSpec:
    """A resolved, valid standard conv layer with plausible dimensions."""
    k = int(rng.choice(_KERNELS))
    stride = int(rng.integers(1, 5)) if k > 1 else int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    size = int(rng.integers(max(k, 7), 120))
    iz = int(rng.choice((3,) + _CHANNELS))
    oz = int(rng.choice(_CHANNELS))
    layer = LayerSpec(name, CONV, (size, size, iz), oz, kernel=(k, k), stride=stride, padding=pad)
    return infer_shapes(ConvNetModel("tmp", (layer,))).layers[0]


def random_network(rng: np.random.Generator, name: str, n_layers: tuple[int, int] = (4, 20)) -> ConvNetModel:
    layers = tuple(random_conv_layer(rng, f"conv{i}") for i in range(int(rng.integers(*n_layers))))
    return ConvNetModel(name, layers)


def _network_near(rng: np.random.Generator, name: str, target: float, tol: float = 0.02) -> ConvNetModel:
    """Random conv stack whose MAC sum lies within ``tol`` of ``target``."""
    layers: list[LayerSpec] = []
    total = 0
    while total < target * (1 - tol):
        layer = random_conv_layer(rng, f"conv{len(layers)}")
        macs = network_layer_type_aggregate(ConvNetModel("tmp", (layer,)))[CONV].values[0]
        if total + macs <= target * (1 + tol):
            layers.append(layer)
            total += macs
    return ConvNetModel(name, tuple(layers))


def linear_network_dataset(
    rng: np.random.Generator,
    n_networks: int = 12,
    slope: float = 1e-6,
    intercept: float = 500.0,
    noise_frac: float = 0.05,
    mac_range: tuple[float, float] = (0.5e9, 8e9),
    per_network_noise: bool = True,
    stratified: bool = True,
) -> tuple[EnergyDataset, list[ConvNetModel]]:
    """Conv layer-type dataset with energy = slope*MAC_sum + intercept + noise.

    Networks are random conv stacks whose MAC sums are drawn from
    ``mac_range``: one per equal-width band when ``stratified``, otherwise
    independently uniform. Noise is Gaussian with a standard deviation of
    ``noise_frac`` times each network's noiseless energy, or times the mean
    noiseless energy over all networks when ``per_network_noise`` is false.
    """
    lo, hi = mac_range
    if stratified:
        targets = lo + (hi - lo) * (np.arange(n_networks) + rng.uniform(size=n_networks)) / n_networks
    else:
        targets = rng.uniform(lo, hi, size=n_networks)
    models = [_network_near(rng, f"net{i:02d}", t) for i, t in enumerate(targets)]
    macs = np.array([network_layer_type_aggregate(m)[CONV].values[0] for m in models], dtype=float)
    clean = slope * macs + intercept
    sigma = noise_frac * (clean if per_network_noise else clean.mean())
    energy = clean + rng.normal(0.0, 1.0, size=len(models)) * sigma
    rows = [
        EnergyRow(
            m.name,
            CONV,
            f"{m.name}/Conv",
            float(e),
            FeatureVector((MAC_SUM,), (int(x),), origin=Origin.LAYER_TYPE_AGGREGATE, label=CONV),
        )
        for m, x, e in zip(models, macs, energy)
    ]
    return EnergyDataset(rows, "synthetic", (MAC_SUM,)), models


def individual_layer_dataset(
    rng: np.random.Generator,
    n_layers: int = 200,
    coefficients: dict[str, float] | None = None,
    intercept: float = 1.0,
    noise_frac: float = 0.05,
) -> EnergyDataset:
    """Per-layer dataset over the 12 base features with a planted linear response.

    Noise is Gaussian with a standard deviation of ``noise_frac`` times each
    layer's noiseless energy.
    """
    coefficients = coefficients or {"MAC": 2e-8, "output_volume": 3e-6, "stride": 0.5}
    rows = []
    for i in range(n_layers):
        layer = random_conv_layer(rng, f"layer{i:03d}")
        vec = layer_feature_vector(layer, 1)
        rows.append((layer, vec))
    clean = np.array([intercept + sum(c * v[n] for n, c in coefficients.items()) for _, v in rows])
    energy = clean * (1.0 + noise_frac * rng.normal(0.0, 1.0, size=len(rows)))
    energy = np.maximum(energy, 1e-3 * clean)
    out = [
        EnergyRow(f"net{i % 12:02d}", CONV, layer.name, float(e), vec)
        for i, ((layer, vec), e) in enumerate(zip(rows, energy))
    ]
    return EnergyDataset(out, "synthetic", rows[0][1].names)
