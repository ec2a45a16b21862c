from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convwatt.bundled import reference_model
from convwatt.features import (
    BASE_FEATURES,
    MAC_SUM,
    OP_SUM,
    FeatureError,
    Origin,
    base_features,
    conv_macs,
    conv_weights,
    data_volume,
    feature_matrix,
    input_volume,
    layer_feature_vector,
    network_layer_type_aggregate,
    output_volume,
    polynomial_names,
    polynomial_values,
    pool_opcount,
)
from convwatt.model_ir import AVG_POOL, CONV, DEPTHWISE_CONV, FC, MAX_POOL, ConvNetModel, LayerSpec, resolve_layer


def conv(ix, iz, k, oz, stride=1, pad=0, groups=1, kind=CONV):
    return resolve_layer(LayerSpec("l", kind, (ix, ix, iz), oz, kernel=(k, k), stride=stride, padding=pad, groups=groups))


def brute_force_macs(layer: LayerSpec) -> int:
    """Count multiply-accumulates by walking every output element and tap."""
    ox, oy, oz = layer.output_dims
    kx, ky = layer.kernel
    per_group = layer.input_dims[2] // layer.groups
    count = 0
    for _ in itertools.product(range(ox), range(oy), range(oz)):
        for _ in itertools.product(range(kx), range(ky), range(per_group)):
            count += 1
    return count


@st.composite
def conv_layers(draw, max_size=40):
    k = draw(st.integers(1, 7))
    pad = draw(st.integers(0, k // 2))
    ix = draw(st.integers(k, max_size))
    groups = draw(st.sampled_from([1, 2, 4]))
    iz = groups * draw(st.integers(1, 16))
    oz = groups * draw(st.integers(1, 16))
    stride = draw(st.integers(1, 4))
    return conv(ix, iz, k, oz, stride=stride, pad=pad, groups=groups)


# Single-layer cost examples --------------------------------------------------


def test_all_ones_conv():
    layer = conv(1, 1, 1, 1)
    assert conv_macs(layer) == 1
    assert conv_weights(layer) == 1
    assert data_volume(layer) == 3


def test_alexnet_conv1_costs():
    layer = conv(227, 3, 11, 96, stride=4)
    assert layer.output_dims == (55, 55, 96)
    assert conv_macs(layer) == 55 * 55 * 96 * 11 * 11 * 3 == 105_415_200
    assert conv_weights(layer) == 34_848
    assert input_volume(layer) == 154_587
    assert output_volume(layer) == 290_400
    assert data_volume(layer) == 479_835


def test_alexnet_fc7_weights():
    layer = resolve_layer(LayerSpec("fc7", FC, (1, 1, 4096), 4096, kernel=(1, 1)))
    assert conv_weights(layer) == 16_777_216
    assert conv_macs(layer) == 16_777_216


def test_depthwise_block():
    layer = conv(4, 4, 3, 8, kind=DEPTHWISE_CONV)
    assert layer.output_dims == (2, 2, 8)
    assert conv_macs(layer) == 2 * 2 * 3 * 3 * 4 + 4 * 8 * 2 * 2 == 272


def test_small_data_volume():
    assert data_volume(conv(4, 1, 2, 1)) == 16 + 4 + 9 == 29


@pytest.mark.parametrize(
    "ix,k,stride,oz,expected",
    [(4, 3, 1, 1, 32), (5, 1, 1, 3, 0), (55, 3, 2, 96, 559_872)],
)
def test_pool_opcount(ix, k, stride, oz, expected):
    layer = resolve_layer(LayerSpec("p", MAX_POOL, (ix, ix, oz), oz, kernel=(k, k), stride=stride))
    assert pool_opcount(layer) == expected


def test_avg_pool_uses_same_count():
    layer = resolve_layer(LayerSpec("p", AVG_POOL, (7, 7, 1024), 1024, kernel=(7, 7)))
    assert pool_opcount(layer) == 1024 * 48


def test_pool_has_no_mac_count():
    layer = resolve_layer(LayerSpec("p", MAX_POOL, (4, 4, 1), 1, kernel=(2, 2), stride=2))
    with pytest.raises(FeatureError):
        conv_macs(layer)


def test_unresolved_layer_rejected():
    with pytest.raises(FeatureError, match="infer_shapes"):
        conv_macs(LayerSpec("l", CONV, (8, 8, 1), 1, kernel=(3, 3)))


# Properties -------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(conv_layers(max_size=12))
def test_macs_match_brute_force(layer):
    assert conv_macs(layer) == brute_force_macs(layer)


@given(conv_layers())
def test_data_volume_decomposition(layer):
    assert data_volume(layer) - input_volume(layer) - output_volume(layer) == conv_weights(layer)


@given(conv_layers())
def test_doubling_oz_doubles_macs(layer):
    doubled = resolve_layer(LayerSpec("l", CONV, layer.input_dims, 2 * layer.out_channels, kernel=layer.kernel,
                                      stride=layer.stride, padding=layer.padding, groups=layer.groups))
    assert conv_macs(doubled) == 2 * conv_macs(layer)


@given(conv_layers())
def test_larger_stride_never_adds_macs(layer):
    wider = resolve_layer(LayerSpec("l", CONV, layer.input_dims, layer.out_channels, kernel=layer.kernel,
                                    stride=2 * layer.stride, padding=layer.padding, groups=layer.groups))
    assert conv_macs(wider) <= conv_macs(layer)


@given(conv_layers())
def test_ungrouped_formula(layer):
    plain = resolve_layer(LayerSpec("l", CONV, layer.input_dims, layer.out_channels, kernel=layer.kernel,
                                    stride=layer.stride, padding=layer.padding))
    ox, oy, oz = plain.output_dims
    kx, ky = plain.kernel
    assert conv_macs(plain) == ox * oy * oz * kx * ky * plain.input_dims[2]


# Feature vectors -------------------------------------------------------------


def test_degree1_vector_of_all_ones_conv():
    vec = layer_feature_vector(conv(1, 1, 1, 1))
    assert vec.names == BASE_FEATURES and len(vec) == 12
    assert vec["data_volume"] == 3
    assert vec["MAC"] == 1 and vec["weights"] == 1
    assert vec["padding"] == 0 and vec["stride"] == 1
    assert vec.origin is Origin.SINGLE_LAYER


def test_alexnet_conv1_vector():
    vec = layer_feature_vector(conv(227, 3, 11, 96, stride=4))
    assert vec["MAC"] == 105_415_200
    assert vec["weights"] == 34_848
    assert vec["data_volume"] == 479_835
    assert (vec["kernel"], vec["Ix"], vec["Ox"], vec["Oz"], vec["Iz"]) == (11, 227, 55, 96, 3)


def test_degree2_names():
    names = polynomial_names(BASE_FEATURES, 2)
    assert len(names) == 90
    assert names[:12] == BASE_FEATURES
    assert names[12] == "kernel^2" and names[13] == "kernel*padding"
    assert len(set(names)) == 90


def test_degree3_rejected():
    with pytest.raises(FeatureError):
        layer_feature_vector(conv(4, 1, 2, 1), 3)


@settings(deadline=None)
@given(conv_layers())
def test_degree2_products(layer):
    base = layer_feature_vector(layer, 1)
    full = layer_feature_vector(layer, 2)
    assert len(full) == 90
    assert full.values[:12] == base.values
    for name, value in zip(full.names[12:], full.values[12:]):
        if name.endswith("^2"):
            a = name[:-2]
            assert value == base[a] * base[a]
        else:
            a, b = name.split("*")
            assert value == base[a] * base[b]


def test_polynomial_values_on_arrays_matches_tuples():
    rng = np.random.default_rng(3)
    rows = [tuple(int(v) for v in rng.integers(1, 50, size=4)) for _ in range(5)]
    arr = polynomial_values(np.array(rows, dtype=float), 2)
    expected = np.array([polynomial_values(r, 2) for r in rows], dtype=float)
    np.testing.assert_array_equal(arr, expected)


def test_values_are_python_ints():
    vec = layer_feature_vector(conv(227, 3, 11, 96, stride=4), 2)
    assert all(type(v) is int for v in vec.values)


# Aggregates ------------------------------------------------------------------


def test_single_all_ones_conv_aggregate():
    agg = network_layer_type_aggregate(ConvNetModel("n", (conv(1, 1, 1, 1),)))
    assert agg[CONV].names == (MAC_SUM,)
    assert agg[CONV].values == (1,)
    assert agg[CONV].origin is Origin.LAYER_TYPE_AGGREGATE


def test_two_identical_convs_double():
    a = conv(27, 96, 5, 256, pad=2, groups=2)
    b = LayerSpec("m", a.kind, a.input_dims, a.out_channels, kernel=a.kernel, padding=a.padding, groups=a.groups,
                  output_dims=a.output_dims)
    one = network_layer_type_aggregate(ConvNetModel("n", (a,)))[CONV].values[0]
    two = network_layer_type_aggregate(ConvNetModel("n", (a, b)))[CONV].values[0]
    assert two == 2 * one


def test_alexnet_aggregates_match_hand_sums():
    # Per-layer products written out independently of the library.
    conv_layers_ = [
        55 * 55 * 96 * 11 * 11 * 3,
        27 * 27 * 256 * 5 * 5 * 48,
        13 * 13 * 384 * 3 * 3 * 256,
        13 * 13 * 384 * 3 * 3 * 192,
        13 * 13 * 256 * 3 * 3 * 192,
    ]
    fc_layers = [4096 * 6 * 6 * 256, 4096 * 4096, 1000 * 4096]
    pools = [27 * 27 * 96 * 8, 13 * 13 * 256 * 8, 6 * 6 * 256 * 8]
    agg = network_layer_type_aggregate(reference_model("AlexNet"))
    assert agg[CONV].values[0] == sum(conv_layers_) == 665_784_864
    assert agg[FC].values[0] == sum(fc_layers) == 58_621_952
    assert agg[MAX_POOL].names == (OP_SUM,)
    assert agg[MAX_POOL].values[0] == sum(pools) == 979_712


def test_alexnet_parameter_count():
    model = reference_model("AlexNet")
    weights = sum(conv_weights(l) for l in model.layers if l.kind in (CONV, FC))
    assert weights == 60_954_656  # about 61M, biases excluded


@pytest.mark.parametrize("network", ["AlexNet", "GoogleNet", "VGG_CNN_S"])
def test_aggregate_equals_sum_of_layers(network):
    model = reference_model(network)
    agg = network_layer_type_aggregate(model)
    for kind, vec in agg.items():
        if kind in (MAX_POOL, AVG_POOL):
            expected = sum(pool_opcount(l) for l in model.layers if l.kind == kind)
        else:
            expected = sum(conv_macs(l) for l in model.layers if l.kind == kind)
        assert vec.values[0] == expected


def test_googlenet_conv_total():
    agg = network_layer_type_aggregate(reference_model("GoogleNet"))
    assert agg[CONV].values[0] == 1_581_647_872


def test_feature_matrix_column_order():
    vecs = [layer_feature_vector(conv(8, 2, 3, 4)), layer_feature_vector(conv(9, 1, 1, 2))]
    X = feature_matrix(vecs, ("MAC", "kernel"))
    assert X.shape == (2, 2)
    assert X[0, 0] == vecs[0]["MAC"] and X[1, 1] == 1


def test_base_features_order():
    layer = conv(10, 3, 3, 5, stride=1, pad=1)
    assert base_features(layer) == tuple(layer_feature_vector(layer).values)
