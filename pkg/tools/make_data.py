"""Regenerate the bundled data files under src/convwatt/data/.

Model specs are transcribed from the public architectures (Caffe model zoo
deploy files). Measured/predicted energies are transcribed from the published
GoogleNet breakdown tables and the aggregate prediction table.

Run from the repository root:  python tools/make_data.py
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "convwatt" / "data"
sys.path.insert(0, str(ROOT / "src"))


def conv(name, i, k, oz, s=1, p=0, g=1, out=None):
    rec = {"name": name, "kind": "Conv", "input": list(i), "kernel": [k, k], "stride": s, "pad": p, "out_channels": oz}
    if g != 1:
        rec["groups"] = g
    if out is not None:
        rec["output"] = [out, out, oz]
    return rec


def pool(name, i, k, s, p=0, kind="MaxPool", out=None):
    rec = {"name": name, "kind": kind, "input": list(i), "kernel": [k, k], "stride": s, "pad": p, "out_channels": i[2]}
    if out is not None:
        rec["output"] = [out, out, i[2]]
    return rec


def fc(name, i, oz):
    return {"name": name, "kind": "Fc", "input": list(i), "out_channels": oz, "output": [1, 1, oz]}


def other(name, label, i):
    return {"name": name, "kind": "Other", "label": label, "input": list(i), "out_channels": i[2]}


def alexnet():
    L = [
        conv("conv1", (227, 227, 3), 11, 96, s=4, out=55),
        other("relu1", "ReLU", (55, 55, 96)),
        other("norm1", "LRN", (55, 55, 96)),
        pool("pool1", (55, 55, 96), 3, 2, out=27),
        conv("conv2", (27, 27, 96), 5, 256, p=2, g=2, out=27),
        other("relu2", "ReLU", (27, 27, 256)),
        other("norm2", "LRN", (27, 27, 256)),
        pool("pool2", (27, 27, 256), 3, 2, out=13),
        conv("conv3", (13, 13, 256), 3, 384, p=1, out=13),
        other("relu3", "ReLU", (13, 13, 384)),
        conv("conv4", (13, 13, 384), 3, 384, p=1, g=2, out=13),
        other("relu4", "ReLU", (13, 13, 384)),
        conv("conv5", (13, 13, 384), 3, 256, p=1, g=2, out=13),
        other("relu5", "ReLU", (13, 13, 256)),
        pool("pool5", (13, 13, 256), 3, 2, out=6),
        fc("fc6", (6, 6, 256), 4096),
        other("relu6", "ReLU", (1, 1, 4096)),
        other("drop6", "Dropout", (1, 1, 4096)),
        fc("fc7", (1, 1, 4096), 4096),
        other("relu7", "ReLU", (1, 1, 4096)),
        other("drop7", "Dropout", (1, 1, 4096)),
        fc("fc8", (1, 1, 4096), 1000),
        other("prob", "Softmax", (1, 1, 1000)),
    ]
    meta = {
        "source": "BVLC AlexNet (Caffe deploy), grouped conv2/conv4/conv5",
        "note": "ReLU/LRN/Dropout/Softmax carried as Other layers",
    }
    return {"name": "AlexNet", "metadata": meta, "layers": L}


INCEPTION = {
    # name: (in_channels, 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool proj)
    "3a": (192, 64, 96, 128, 16, 32, 32),
    "3b": (256, 128, 128, 192, 32, 96, 64),
    "4a": (480, 192, 96, 208, 16, 48, 64),
    "4b": (512, 160, 112, 224, 24, 64, 64),
    "4c": (512, 128, 128, 256, 24, 64, 64),
    "4d": (512, 112, 144, 288, 32, 64, 64),
    "4e": (528, 256, 160, 320, 32, 128, 128),
    "5a": (832, 256, 160, 320, 32, 128, 128),
    "5b": (832, 384, 192, 384, 48, 128, 128),
}


def inception(tag, size):
    cin, c1, r3, c3, r5, c5, pp = INCEPTION[tag]
    p = f"inception_{tag}/"
    x = (size, size, cin)
    out = c1 + c3 + c5 + pp
    return [
        conv(p + "1x1", x, 1, c1, out=size),
        conv(p + "3x3_reduce", x, 1, r3, out=size),
        conv(p + "3x3", (size, size, r3), 3, c3, p=1, out=size),
        conv(p + "5x5_reduce", x, 1, r5, out=size),
        conv(p + "5x5", (size, size, r5), 5, c5, p=2, out=size),
        pool(p + "pool", x, 3, 1, p=1, out=size),
        conv(p + "pool_proj", x, 1, pp, out=size),
        {"name": p + "output", "kind": "Other", "label": "Concat", "input": [size, size, out], "out_channels": out},
    ]


def googlenet():
    L = [
        conv("conv1/7x7_s2", (224, 224, 3), 7, 64, s=2, p=3, out=112),
        # Stride-2 max pools use pad 1 under floor rounding; this reproduces
        # Caffe's ceil-mode output sizes.
        pool("pool1/3x3_s2", (112, 112, 64), 3, 2, p=1, out=56),
        other("pool1/norm1", "LRN", (56, 56, 64)),
        conv("conv2/3x3_reduce", (56, 56, 64), 1, 64, out=56),
        conv("conv2/3x3", (56, 56, 64), 3, 192, p=1, out=56),
        other("conv2/norm2", "LRN", (56, 56, 192)),
        pool("pool2/3x3_s2", (56, 56, 192), 3, 2, p=1, out=28),
    ]
    L += inception("3a", 28) + inception("3b", 28)
    L.append(pool("pool3/3x3_s2", (28, 28, 480), 3, 2, p=1, out=14))
    for tag in ("4a", "4b", "4c", "4d", "4e"):
        L += inception(tag, 14)
    L.append(pool("pool4/3x3_s2", (14, 14, 832), 3, 2, p=1, out=7))
    L += inception("5a", 7) + inception("5b", 7)
    L.append(pool("pool5/7x7_s1", (7, 7, 1024), 7, 1, kind="AvgPool", out=1))
    L.append(other("pool5/drop_7x7_s1", "Dropout", (1, 1, 1024)))
    L.append(fc("loss3/classifier", (1, 1, 1024), 1000))
    L.append(other("prob", "Softmax", (1, 1, 1000)))
    meta = {
        "source": "BVLC GoogLeNet (Caffe deploy), main branch only, no auxiliary classifiers",
        "note": "ReLU layers omitted; LRN/Concat/Dropout/Softmax carried as Other layers",
    }
    return {"name": "GoogleNet", "metadata": meta, "layers": L}


def vgg_cnn_s():
    L = [
        conv("conv1", (224, 224, 3), 7, 96, s=2, out=109),
        other("norm1", "LRN", (109, 109, 96)),
        # Caffe ceil-mode pooling reproduced with pad 1 under floor rounding.
        pool("pool1", (109, 109, 96), 3, 3, p=1, out=37),
        conv("conv2", (37, 37, 96), 5, 256, out=33),
        pool("pool2", (33, 33, 256), 2, 2, p=1, out=17),
        conv("conv3", (17, 17, 256), 3, 512, p=1, out=17),
        conv("conv4", (17, 17, 512), 3, 512, p=1, out=17),
        conv("conv5", (17, 17, 512), 3, 512, p=1, out=17),
        pool("pool5", (17, 17, 512), 3, 3, p=1, out=6),
        fc("fc6", (6, 6, 512), 4096),
        other("drop6", "Dropout", (1, 1, 4096)),
        fc("fc7", (1, 1, 4096), 4096),
        other("drop7", "Dropout", (1, 1, 4096)),
        fc("fc8", (1, 1, 4096), 1000),
        other("prob", "Softmax", (1, 1, 1000)),
    ]
    meta = {"source": "VGG_CNN_S (Caffe model zoo deploy)", "note": "ReLU layers omitted"}
    return {"name": "VGG_CNN_S", "metadata": meta, "layers": L}


# Aggregate prediction table: provenance -> network -> kind -> (predicted, measured)
TABLE8 = {
    "Eigen-Snapdragon820": {
        "GoogleNet": {"Conv": (604.39, 842.66), "Pool": (54.96, 59.87), "Fc": (9.98, 18.2056)},
        "AlexNet": {"Conv": (281.55, 271.842), "Pool": (5.16, 5.46), "Fc": (599.64, 495.81)},
        "VGG_CNN_S": {"Conv": (1306.34, 966.55), "Pool": (7.89, 6.77), "Fc": (815.36, 985.69)},
    },
    "Eigen-TX1": {
        "GoogleNet": {"Conv": (5783.59, 6325.22), "Pool": (1079.29, 1583.87), "Fc": (182.73, 156.35)},
        "AlexNet": {"Conv": (2476.42, 2875.25), "Pool": (93.24, 104.94), "Fc": (9934.27, 11885.76)},
        "VGG_CNN_S": {"Conv": (10285.35, 9177.43), "Pool": (170.43, 123.86), "Fc": (19537.94, 16331.49)},
    },
    "OpenBLAS-TX1": {
        "GoogleNet": {"Conv": (4534.3, 4883.26), "Pool": (1272.75, 765.16), "Fc": (276.89, 171.4)},
        "AlexNet": {"Conv": (1908.68, 1562.12), "Pool": (67.34, 86.47), "Fc": (17318.97, 11884.87)},
        "VGG_CNN_S": {"Conv": (7285.57, 6837.69), "Pool": (121.1, 213.83), "Fc": (19536.91, 28472.67)},
    },
    "CuDNN-TX1": {
        "GoogleNet": {"Conv": (1471.22, 2579.81), "Pool": (484.53, 409.51), "Fc": (52.04, 84.16)},
        "AlexNet": {"Conv": (619.30, 527.27), "Pool": (35.56, 38.26), "Fc": (2959.56, 3033.99)},
        "VGG_CNN_S": {"Conv": (2363.91, 1362.50), "Pool": (64.70, 78.48), "Fc": (4988.58, 4864.99)},
    },
}

# GoogleNet per-kind breakdowns: provenance -> [(kind, energy_mj, time_s)], published total
BREAKDOWNS = {
    "Eigen-TX1": (
        [
            ("Conv", 7856.84, 1.7354),
            ("Fc", 156.35, 0.0344),
            ("MaxPool", 504.41, 0.1126),
            ("LRN", 637.29, 0.1468),
            ("ReLU", 93.37, 0.021),
            ("AveragePool", 3.59, 0.0008),
            ("Concat", 52.12, 0.0114),
            ("Dropout", 0.0, 0.0),
            ("Softmax", 0.0, 0.0),
        ],
        (9304.00, 2.0624),
    ),
    "Eigen-Snapdragon820": (
        [
            ("Conv", 842.66, 0.3866),
            ("Fc", 18.20, 0.0082),
            ("MaxPool", 59.87, 0.0284),
            ("LRN", 137.62, 0.0646),
            ("ReLU", 23.14, 0.0106),
            ("AveragePool", 0.28, 0.0002),
            ("Concat", 3.00, 0.0014),
            ("Dropout", 0.0, 0.0),
            ("Softmax", 0.48, 0.0002),
        ],
        (1085.28, 0.5002),
    ),
    "OpenBLAS-TX1": (
        [
            ("Conv", 4883.26, 1.52),
            ("InnerProduct", 138.96, 0.04),
            ("Pooling", 761.83, 0.23),
            ("LRN", 1716.78, 0.52),
            ("ReLU", 178.86, 0.05),
            ("Split", 9.00, 0.002),
            ("Concat", 128.59, 0.03),
            ("Dropout", 0.6798, 0.0002),
            ("Softmax", 1.85, 0.0006),
        ],
        (7830.07, 2.43),
    ),
}


def write_specs():
    for builder, fname in ((alexnet, "alexnet.json"), (googlenet, "googlenet.json"), (vgg_cnn_s, "vgg_cnn_s.json")):
        doc = builder()
        (DATA / fname).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def write_table8():
    with open(DATA / "table8_predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["provenance", "network", "layer_kind", "predicted_mj", "measured_mj"])
        for prov, nets in TABLE8.items():
            for net, kinds in nets.items():
                for kind, (pred, meas) in kinds.items():
                    w.writerow([prov, net, kind, pred, meas])


def write_breakdowns():
    with open(DATA / "googlenet_breakdowns.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["provenance", "layer_kind", "energy_mj", "time_s"])
        for prov, (rows, (te, tt)) in BREAKDOWNS.items():
            for kind, e, t in rows:
                w.writerow([prov, kind, e, t])
            w.writerow([prov, "Total", te, tt])


def demo_trace(rows, total, rate_hz=1000):
    """Piecewise-constant power trace whose layer windows reproduce ``rows``.

    Samples fall on a ``rate_hz`` grid plus every segment boundary; a trailing
    unannotated gap carries any published total beyond the summed rows.
    """
    from convwatt.energy_trace import Annotation, AnnotationLog, PowerTrace

    step = int(round(1e6 / rate_hz))
    segments = [(k, e, int(round(t * 1e6))) for k, e, t in rows if t > 0]
    te, tt = total
    gap_t = int(round(tt * 1e6)) - sum(d for _, _, d in segments)
    gap_e = te - sum(e for _, e, _ in segments)
    if gap_t > 0 and gap_e > 0:
        segments.append((None, gap_e, gap_t))

    times = [0]
    power = [0.0]
    annotations = []
    t0 = 0
    for kind, energy, dur in segments:
        p_mw = energy / (dur * 1e-6)
        t1 = t0 + dur
        grid = list(range((t0 // step + 1) * step, t1, step)) + [t1]
        for t in grid:
            times.append(t)
            power.append(p_mw)
        if kind is not None:
            annotations.append(Annotation(f"{kind.lower()}_all", kind, float(t0), float(t1), 0))
        t0 = t1
    return PowerTrace(times, power, nominal_rate=rate_hz), AnnotationLog(tuple(annotations))


def write_demo_traces():
    from convwatt.energy_trace import write_annotations, write_power_trace

    for prov, tag in (("Eigen-TX1", "eigen_tx1"), ("OpenBLAS-TX1", "openblas_tx1")):
        rows, total = BREAKDOWNS[prov]
        trace, log = demo_trace(rows, total)
        with open(DATA / f"googlenet_{tag}_trace.csv", "w", encoding="utf-8") as fh:
            write_power_trace(trace, fh)
        with open(DATA / f"googlenet_{tag}_annotations.csv", "w", encoding="utf-8") as fh:
            write_annotations(log, fh)


def write_layer_type_datasets():
    from convwatt.energy_trace import write_energy_dataset
    from convwatt.model_ir import infer_shapes, load_model
    from convwatt.predictor import layer_type_dataset

    models = {
        m.name: m
        for m in (infer_shapes(load_model(DATA / f)) for f in ("googlenet.json", "alexnet.json", "vgg_cnn_s.json"))
    }
    for prov, nets in TABLE8.items():
        measured = {net: {k: pm[1] for k, pm in kinds.items()} for net, kinds in nets.items()}
        ds = layer_type_dataset(measured, models, prov)
        with open(DATA / f"layer_type_{prov}.csv", "w", encoding="utf-8") as fh:
            write_energy_dataset(ds, fh)


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    write_specs()
    write_table8()
    write_breakdowns()
    write_demo_traces()
    write_layer_type_datasets()
    print("wrote", sorted(p.name for p in DATA.iterdir()))
