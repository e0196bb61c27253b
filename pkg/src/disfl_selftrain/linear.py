"""Averaged logistic regression over hashed binary features.

Shared by the reference tagger (one example per token) and the reference
judge (one example per sentence). Training is plain online SGD on the
logistic loss with the usual lazy-averaging trick; the returned weights are
the running average.

Model files are a small self-describing binary format so that identical
training runs produce identical bytes::

    b"DSTMODEL" | u32 format version | u64 header length | JSON header
    | per array: nnz x u32 index, nnz x value

The JSON header lists the arrays (name, dtype, size, nnz) in file order.
Arrays are stored sparsely since most hash buckets stay empty.
"""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .rng import stable_seed

logger = logging.getLogger(__name__)

MAGIC = b"DSTMODEL"
FORMAT_VERSION = 1
DEFAULT_HASH_BITS = 20


class ModelError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.1
    batch_size: int = 1
    seed: int = 0
    patience: int = 0
    dev_fraction: float = 0.1
    hash_bits: int = DEFAULT_HASH_BITS

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must lie in [0, 1)")


@njit(cache=True)
def _sgd_epoch(indptr, indices, y, order, w, u, c, lr, batch_size):
    # minibatch of size 1 is plain online SGD
    grads = np.empty(batch_size, dtype=np.float64)
    k = 0
    while k < order.shape[0]:
        end = min(k + batch_size, order.shape[0])
        for b in range(k, end):
            ex = order[b]
            z = 0.0
            for p in range(indptr[ex], indptr[ex + 1]):
                z += w[indices[p]]
            if z >= 0:
                prob = 1.0 / (1.0 + np.exp(-z))
            else:
                ez = np.exp(z)
                prob = ez / (1.0 + ez)
            grads[b - k] = lr * (y[ex] - prob) / (end - k)
        for b in range(k, end):
            g = grads[b - k]
            if g != 0.0:
                ex = order[b]
                for p in range(indptr[ex], indptr[ex + 1]):
                    w[indices[p]] += g
                    u[indices[p]] += c * g
        c += 1.0
        k = end
    return c


@njit(cache=True)
def _scores(indptr, indices, w):
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    for ex in range(n):
        z = 0.0
        for p in range(indptr[ex], indptr[ex + 1]):
            z += w[indices[p]]
        out[ex] = z
    return out


def log_loss(scores: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return float("nan")
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
    signed = np.where(y > 0.5, -scores, scores)
    return float(np.mean(np.logaddexp(0.0, signed)))


def fit(indptr, indices, y, config: TrainConfig, init: Optional[np.ndarray] = None,
        dev=None, stage: str = "train"):
    """Run averaged SGD; returns (weights, history).

    ``dev`` is an optional (indptr, indices, y) triple used for per-epoch
    held-out loss and early stopping.
    """
    dim = 1 << config.hash_bits
    w = np.zeros(dim, dtype=np.float64) if init is None else init.astype(np.float64).copy()
    if w.shape[0] != dim:
        raise ModelError(f"init has {w.shape[0]} weights, expected {dim}")
    u = np.zeros(dim, dtype=np.float64)
    c = 1.0
    y = np.asarray(y, dtype=np.float64)
    history = []

    def averaged():
        return w - u / c

    if dev is not None:
        history.append({"epoch": 0, "dev_loss": log_loss(_scores(dev[0], dev[1], w), dev[2])})
    best, bad = float("inf"), 0
    n = indptr.shape[0] - 1
    for epoch in range(config.epochs):
        rng = np.random.Generator(np.random.PCG64(stable_seed(config.seed, stage, "epoch", epoch)))
        order = rng.permutation(n).astype(np.int64)
        lr = config.learning_rate / (1.0 + epoch)
        c = _sgd_epoch(indptr, indices, y, order, w, u, c, lr, config.batch_size)
        if dev is not None:
            loss = log_loss(_scores(dev[0], dev[1], averaged()), dev[2])
            history.append({"epoch": epoch + 1, "dev_loss": loss})
            logger.info("%s epoch %d dev loss %.4f", stage, epoch + 1, loss)
            if loss < best - 1e-6:
                best, bad = loss, 0
            else:
                bad += 1
                if config.patience and bad >= config.patience:
                    logger.info("%s early stop after epoch %d", stage, epoch + 1)
                    break
    return averaged(), history


def scores(indptr, indices, weights) -> np.ndarray:
    return _scores(indptr, indices, weights)


def fingerprint(weights: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(weights, dtype=np.float64).tobytes()).hexdigest()[:16]


def save_arrays(path, kind: str, header: dict, arrays: dict):
    """Write a model file; every array is stored sparsely (nonzero entries only)."""
    specs = []
    chunks = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = arr.dtype.newbyteorder("<").str
        nz = np.flatnonzero(arr).astype("<u4")
        specs.append({"name": name, "dtype": dtype, "size": int(arr.shape[0]), "nnz": int(nz.shape[0])})
        chunks.append(nz.tobytes())
        chunks.append(arr[nz].astype(dtype).tobytes())
    header = dict(header, kind=kind, arrays=specs)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for chunk in chunks:
            fh.write(chunk)


def load_arrays(path, kind: str):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ModelError(f"{path}: not a model file")
    arrays = {}
    try:
        version, hlen = struct.unpack_from("<IQ", data, 8)
        if version != FORMAT_VERSION:
            raise ModelError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
        off = 8 + 12
        header = json.loads(data[off:off + hlen].decode("utf-8"))
        off += hlen
        for spec in header["arrays"]:
            nnz = spec["nnz"]
            dtype = np.dtype(spec["dtype"])
            idx = np.frombuffer(data, dtype="<u4", count=nnz, offset=off)
            off += 4 * nnz
            vals = np.frombuffer(data, dtype=dtype, count=nnz, offset=off)
            off += dtype.itemsize * nnz
            arr = np.zeros(spec["size"], dtype=dtype.newbyteorder("="))
            arr[idx] = vals
            arrays[spec["name"]] = arr
    except ModelError:
        raise
    except (struct.error, ValueError, KeyError, IndexError, TypeError, UnicodeDecodeError) as exc:
        raise ModelError(f"{path}: corrupt model file ({exc})") from None
    if off != len(data):
        raise ModelError(f"{path}: corrupt model file (trailing or missing bytes)")
    if header.get("kind") != kind:
        raise ModelError(f"{path}: holds a {header.get('kind')!r} model, expected {kind!r}")
    return header, arrays


def config_json(config: TrainConfig) -> dict:
    return asdict(config)
