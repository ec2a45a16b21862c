"""Paths to the reference data shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model_ir import ConvNetModel, infer_shapes, load_model

PROVENANCES = ("Eigen-Snapdragon820", "Eigen-TX1", "OpenBLAS-TX1", "CuDNN-TX1")
MODEL_FILES = {"AlexNet": "alexnet.json", "GoogleNet": "googlenet.json", "VGG_CNN_S": "vgg_cnn_s.json"}


def data_dir() -> Path:
    return Path(str(resources.files("convwatt") / "data"))


def data_path(name: str) -> Path:
    path = data_dir() / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return path


def reference_model(network: str) -> ConvNetModel:
    """A bundled network spec with shapes resolved, e.g. ``reference_model("AlexNet")``."""
    try:
        fname = MODEL_FILES[network]
    except KeyError:
        raise KeyError(f"unknown bundled network {network!r}; have {sorted(MODEL_FILES)}") from None
    return infer_shapes(load_model(data_path(fname)))
