"""Training corpus of (kernel image, log decay-rate label) pairs.

Binary layout, all little-endian::

    magic      8 bytes  b"RDDIDSET"
    version    uint32
    n_atoms    uint32
    count      uint64
    spacing    2 x float64 (min, max)
    seed       int64
    transform  8 bytes  ASCII label transform id, NUL padded ("ln")
    payload    count records of float64:
               channel0 (N*N, row-major), channel1 (N*N), label (N), spacing (1)
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .eigen import decay_spectrum
from .kernel import DipoleGeometry, build_kernel, to_image

log = logging.getLogger(__name__)

MAGIC = b"RDDIDSET"
VERSION = 1
LABEL_TRANSFORM = "ln"
_HEADER = struct.Struct("<8sIIQddq8s")


class DatasetFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (count, 2, N, N)
    labels: np.ndarray  # (count, N), natural log of ascending decay rates
    spacings: np.ndarray  # (count,)
    spacing_min: float
    spacing_max: float
    seed: int
    transform: str = LABEL_TRANSFORM

    def __len__(self) -> int:
        return len(self.spacings)

    @property
    def n_atoms(self) -> int:
        return self.images.shape[-1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, images=self.images[idx], labels=self.labels[idx], spacings=self.spacings[idx])


def make_sample(geometry: DipoleGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Kernel image and log-rate label for one geometry."""
    kernel = build_kernel(geometry)
    rates = decay_spectrum(kernel).decay_rates
    if np.any(rates <= 0.0):
        raise ArithmeticError(
            f"non-positive decay rate {rates.min():.3e} at spacing {geometry.spacing!r}; log label undefined"
        )
    return to_image(kernel).channels, np.log(rates / geometry.gamma)


def generate(
    n_atoms: int,
    count: int,
    spacing_min: float,
    spacing_max: float,
    seed: int,
    *,
    axis=(1.0, 0.0, 0.0),
    dipole=(0.0, 0.0, 1.0),
) -> Dataset:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count!r}")
    if not 0 < spacing_min <= spacing_max:
        raise ValueError(f"need 0 < spacing_min <= spacing_max, got {spacing_min!r}, {spacing_max!r}")
    rng = np.random.default_rng(seed)
    if spacing_min < spacing_max:
        spacings = rng.uniform(spacing_min, spacing_max, size=count)
    else:
        spacings = np.full(count, float(spacing_min))
    images = np.empty((count, 2, n_atoms, n_atoms))
    labels = np.empty((count, n_atoms))
    for i, d in enumerate(spacings):
        geom = DipoleGeometry(n_atoms, float(d), axis=tuple(axis), dipole=tuple(dipole))
        try:
            images[i], labels[i] = make_sample(geom)
        except Exception as exc:
            raise RuntimeError(f"sample {i} failed at spacing {d!r}: {exc}") from exc
        if (i + 1) % 2000 == 0:
            log.info("generated %d / %d samples", i + 1, count)
    return Dataset(images, labels, spacings, float(spacing_min), float(spacing_max), int(seed))


def split(dataset: Dataset, train_fraction: float = 0.9, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded random partition, no stratification by spacing."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    n = len(dataset)
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} samples at {train_fraction} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def check_integrity(dataset: Dataset, rtol: float = 1e-8) -> None:
    """Every label must satisfy the trace sum rule sum(exp(label)) = N."""
    n = dataset.n_atoms
    sums = np.exp(dataset.labels).sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - n) > rtol * n)
    if bad.size:
        raise DatasetFormatError(f"{bad.size} samples violate the trace sum rule (first index {bad[0]})")
    if np.any(np.diff(dataset.labels, axis=1) < 0):
        raise DatasetFormatError("labels are not ascending")


def save(dataset: Dataset, path) -> None:
    n = dataset.n_atoms
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        n,
        len(dataset),
        dataset.spacing_min,
        dataset.spacing_max,
        dataset.seed,
        dataset.transform.encode("ascii"),
    )
    records = np.concatenate(
        [
            dataset.images.reshape(len(dataset), 2 * n * n),
            dataset.labels,
            dataset.spacings[:, None],
        ],
        axis=1,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.astype("<f8").tobytes())


def load(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, version, n, count, smin, smax, seed, transform = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    width = 2 * n * n + n + 1
    payload = raw[_HEADER.size :]
    if len(payload) != count * width * 8:
        raise DatasetFormatError(
            f"{path}: header declares {count} samples ({count * width * 8} bytes) but payload has {len(payload)} bytes"
        )
    rec = np.frombuffer(payload, dtype="<f8").reshape(count, width).astype(float)
    return Dataset(
        images=rec[:, : 2 * n * n].reshape(count, 2, n, n).copy(),
        labels=rec[:, 2 * n * n : 2 * n * n + n].copy(),
        spacings=rec[:, -1].copy(),
        spacing_min=smin,
        spacing_max=smax,
        seed=seed,
        transform=transform.rstrip(b"\0").decode("ascii"),
    )
