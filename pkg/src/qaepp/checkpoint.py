"""Model checkpoints stored as tensor containers.

A checkpoint holds one array, ``angles``, the flat parameter vector in
layer-major / qubit / (phi, theta, omega) order, and a metadata record with
``kind`` (``"vqc"`` or ``"qae"``), the architecture fields needed to rebuild
the estimator and any extra entries supplied by the caller (for example the
test accuracy measured after training).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .containers import ContainerError, read_container, write_container
from .qae import QuantumAutoencoder
from .vqc import VQCClassifier

CHECKPOINT_VERSION = 1

_FIELDS = {
    "vqc": ("n_qubits", "n_layers", "n_classes", "batch_size", "learning_rate", "epochs", "seed"),
    "qae": ("n_qubits", "n_layers", "n_trash", "batch_size", "learning_rate", "epochs", "seed"),
}


def _kind(model) -> str:
    if isinstance(model, VQCClassifier):
        return "vqc"
    if isinstance(model, QuantumAutoencoder):
        return "qae"
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_model(path, model, **extra) -> Path:
    kind = _kind(model)
    angles = np.asarray(model.angles_, dtype=np.float64)
    if angles.size != model.n_params:
        raise ValueError(f"model has {angles.size} angles, architecture needs {model.n_params}")
    params = model.get_params()
    meta = {"kind": kind, "checkpoint_version": CHECKPOINT_VERSION, "n_params": int(angles.size)}
    meta.update({k: params[k] for k in _FIELDS[kind]})
    if kind == "qae":
        meta["n_latent"] = model.n_latent
    meta.update(extra)
    return write_container(path, {"angles": angles.ravel()}, meta)


def load_model(path, kind: str | None = None, n_jobs: int = 1):
    """Rebuild a fitted estimator; ``kind`` guards against loading the wrong model."""
    arrays, meta = read_container(path)
    if "angles" not in arrays or meta.get("kind") not in _FIELDS:
        raise ContainerError(f"{path}: not a model checkpoint")
    if kind is not None and meta["kind"] != kind:
        raise ContainerError(f"{path}: expected a {kind} checkpoint, found {meta['kind']}")
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ContainerError(f"{path}: unsupported checkpoint version {meta.get('checkpoint_version')}")
    cls = VQCClassifier if meta["kind"] == "vqc" else QuantumAutoencoder
    model = cls(**{k: meta[k] for k in _FIELDS[meta["kind"]]}, n_jobs=n_jobs)
    model.init_params()
    angles = arrays["angles"]
    if angles.size != model.n_params:
        raise ContainerError(f"{path}: {angles.size} angles for a {model.n_params}-parameter model")
    model.angles_ = angles.reshape(model.n_layers, model.n_qubits, 3).copy()
    return model, meta
