"""IDX ingestion, 28x28 -> 32x32 resizing, splits and mixed evaluation sets."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .containers import array_sha256, read_container, write_container

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
EPSILONS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
ATTACK_KINDS = ("fgsm", "pgd")

IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class DataError(ValueError):
    pass


class BadMagic(DataError):
    pass


class CountMismatch(DataError):
    pass


class TruncatedFile(DataError):
    pass


class BadShape(DataError):
    pass


class BadCount(DataError):
    pass


# ---------------------------------------------------------------------------
# IDX


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        gz = path.with_name(path.name + ".gz")
        if not gz.exists():
            raise TruncatedFile(f"{path}: file not found")
        path = gz
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expected_magic: int) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, no IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    if len(raw) < 4 + 4 * ndim:
        raise TruncatedFile(f"{path}: header cut short")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    n_bytes = int(np.prod(dims))
    body = raw[4 + 4 * ndim :]
    if len(body) < n_bytes:
        raise TruncatedFile(f"{path}: {len(body)} payload bytes, header promises {n_bytes}")
    return np.frombuffer(body[:n_bytes], dtype=np.uint8).reshape(dims)


def write_idx(path, array: np.ndarray) -> Path:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())
    return path


def load_idx_raw(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``uint8`` images ``(N, rows, cols)`` and labels ``(N,)``."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Images flattened to ``(N, rows*cols)`` floats in [0, 1], plus integer labels."""
    images, labels = load_idx_raw(images_path, labels_path)
    return images.reshape(images.shape[0], -1) / 255.0, labels.astype(np.int64)


# ---------------------------------------------------------------------------
# resizing


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    # corner-aligned: output sample i sits at input coordinate i * (n_in-1)/(n_out-1)
    pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
    frac = pos - lo
    w = np.zeros((n_out, n_in))
    w[np.arange(n_out), lo] = 1.0 - frac
    w[np.arange(n_out), lo + 1] += frac
    return w


_W28_32 = _bilinear_weights(28, 32)


def resize_28_to_32(images: np.ndarray) -> np.ndarray:
    """Bilinear resize of flat 784-pixel rows (or a single row) to 1024 pixels."""
    images = np.asarray(images, dtype=float)
    single = images.ndim == 1
    batch = np.atleast_2d(images)
    if batch.shape[-1] != 784:
        raise BadShape(f"expected 784 pixels per image, got {batch.shape[-1]}")
    grid = batch.reshape(-1, 28, 28)
    out = np.einsum("ij,njk,lk->nil", _W28_32, grid, _W28_32).reshape(-1, 1024)
    out = np.clip(out, 0.0, 1.0)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# splits and mixed sets


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    n_validation: int = 2000
    n_test: int = 8000


def split(X: np.ndarray, y: np.ndarray, spec: SplitSpec = SplitSpec()):
    """Seeded shuffle of a test partition into ``(X_val, y_val), (X_test, y_test)``."""
    n = X.shape[0]
    if n != spec.n_validation + spec.n_test or len(y) != n:
        raise BadCount(f"partition has {n} samples, split needs {spec.n_validation} + {spec.n_test}")
    order = np.random.default_rng(spec.seed).permutation(n)
    v, t = order[: spec.n_validation], order[spec.n_validation :]
    return (X[v], y[v]), (X[t], y[t])


def subsample(X: np.ndarray, y: np.ndarray, size: Optional[int], seed: int, stream: int = 1):
    """Seeded subset of ``size`` rows in original order; ``stream`` separates independent draws."""
    if size is None or size >= X.shape[0]:
        return X, y
    idx = np.sort(np.random.default_rng([seed, stream]).choice(X.shape[0], size=size, replace=False))
    return X[idx], y[idx]


def mixed_group_sizes(n: int, n_groups: int = 12) -> tuple[int, list[int]]:
    """One tenth clean, the rest split as evenly as possible across attack groups."""
    n_clean = round(n / 10)
    base, extra = divmod(n - n_clean, n_groups)
    return n_clean, [base + (1 if g < extra else 0) for g in range(n_groups)]


@dataclass
class MixedSet:
    X: np.ndarray
    y: np.ndarray
    kinds: list[str] = field(default_factory=list)
    epsilons: np.ndarray = field(default_factory=lambda: np.zeros(0))
    source_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def groups(self):
        """Yield ``(kind, epsilon, mask)`` for the clean group and every attack group."""
        seen = []
        for k, e in zip(self.kinds, self.epsilons):
            if (k, float(e)) not in seen:
                seen.append((k, float(e)))
        kinds = np.asarray(self.kinds)
        for k, e in seen:
            yield k, e, (kinds == k) & (self.epsilons == e)


def build_mixed_set(
    X: np.ndarray,
    y: np.ndarray,
    classifier,
    seed: int = 0,
    epsilons=EPSILONS,
    kinds=ATTACK_KINDS,
    pgd_steps: int = 10,
) -> MixedSet:
    """Disjoint random partition into a clean group and one group per (attack, epsilon)."""
    from .attacks import AttackConfig, attack

    n = X.shape[0]
    configs = [AttackConfig(k, e, pgd_steps=pgd_steps) for k in kinds for e in epsilons]
    n_clean, sizes = mixed_group_sizes(n, len(configs))
    if n_clean < 1 or min(sizes) < 1:
        raise BadCount(f"{n} samples cannot fill {len(configs)} attack groups plus a clean group")
    order = np.random.default_rng([seed, 2]).permutation(n)
    X_out = np.array(X, dtype=float, copy=True)
    kinds_out = ["clean"] * n
    eps_out = np.zeros(n)
    start = n_clean
    for cfg, size in zip(configs, sizes):
        idx = np.sort(order[start : start + size])
        X_out[idx] = attack(classifier, X[idx], y[idx], cfg)
        for i in idx:
            kinds_out[i] = cfg.kind
        eps_out[idx] = cfg.epsilon
        start += size
    return MixedSet(X_out, np.asarray(y).copy(), kinds_out, eps_out, np.arange(n))


# ---------------------------------------------------------------------------
# dataset containers


def save_dataset(path, X: np.ndarray, y: np.ndarray, **meta) -> Path:
    meta = dict(meta)
    meta.setdefault("n_samples", int(X.shape[0]))
    meta["content_sha256"] = array_sha256(X, y)
    return write_container(path, {"pixels": X, "labels": np.asarray(y, dtype=np.int64)}, meta)


def load_dataset(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Pixels as ``(N, 1024)`` floats in [0, 1], labels, and container metadata.

    Raw 28x28 ``uint8`` containers are scaled and resized on the way in.
    """
    arrays, meta = read_container(path)
    X, y = arrays["pixels"], arrays["labels"]
    if X.dtype == np.uint8:
        X = resize_28_to_32(X.reshape(X.shape[0], -1) / 255.0)
    return np.asarray(X, dtype=float), y, meta


def desk_subset_images():
    """The 5,000-image MNIST sample shipped with mlxtend, as ``uint8`` arrays."""
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    return X.reshape(-1, 28, 28).astype(np.uint8), y.astype(np.uint8)


def write_desk_subset(out_dir, n_test: int = 1500, seed: int = 0) -> dict[str, Path]:
    """Write the mlxtend MNIST sample as IDX files split into train/test partitions."""
    images, labels = desk_subset_images()
    order = np.random.default_rng([seed, 3]).permutation(images.shape[0])
    test, train = np.sort(order[:n_test]), np.sort(order[n_test:])
    out_dir = Path(out_dir)
    paths = {}
    for key, arr in (
        ("train_images", images[train]),
        ("train_labels", labels[train]),
        ("test_images", images[test]),
        ("test_labels", labels[test]),
    ):
        paths[key] = write_idx(out_dir / IDX_FILES[key], arr)
    return paths
