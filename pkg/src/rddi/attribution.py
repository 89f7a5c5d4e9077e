"""Integrated-gradients attribution of a trained regressor.

The attributed scalar is ``F(z) = -(f_t(z) - f_t(x))**2``: the negative squared
deviation of output ``t`` at an interpolated image ``z`` from its value at the
explained input ``x``. Gradients are summed at right endpoints
``x' + (k/m)(x - x')`` for ``k = 1..m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import EigenSpectrum
from .kernel import KernelImage, noninteracting_baseline, to_image
from .neuralnet import Model

# Interpolated images per forward/backward pass.
_CHUNK = 500


@dataclass
class AttributionMap:
    per_channel: np.ndarray  # (2, N, N)
    target_index: int  # 0-based output coordinate
    steps: int
    baseline: str
    delta: float  # F(x) - F(x')
    completeness_residual: float

    @property
    def collapsed(self) -> np.ndarray:
        return self.per_channel[0] + self.per_channel[1]

    @property
    def n_atoms(self) -> int:
        return self.per_channel.shape[-1]


def _channels(image) -> np.ndarray:
    return np.asarray(getattr(image, "channels", image), dtype=float)


def integrated_gradients(
    model: Model,
    image: KernelImage | np.ndarray,
    target_index: int,
    steps: int = 1000,
    baseline: KernelImage | np.ndarray | None = None,
    baseline_name: str | None = None,
) -> AttributionMap:
    """Right-endpoint Riemann approximation of integrated gradients along the straight path."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps!r}")
    x = _channels(image)
    n = model.n_atoms
    if not 0 <= target_index < n:
        raise IndexError(f"target_index {target_index} out of range for N = {n}")
    if baseline is None:
        xb = to_image(noninteracting_baseline(n)).channels
        baseline_name = baseline_name or "noninteracting"
    else:
        xb = _channels(baseline)
        baseline_name = baseline_name or "custom"
    if x.shape != (2, n, n) or xb.shape != x.shape:
        raise ValueError(f"input {x.shape} and baseline {xb.shape} must both be (2, {n}, {n})")

    reference = model.forward(x)[target_index]
    diff = x - xb
    total = np.zeros_like(x)
    for k0 in range(1, steps + 1, _CHUNK):
        ks = np.arange(k0, min(k0 + _CHUNK, steps + 1))
        path = xb[None] + (ks / steps)[:, None, None, None] * diff[None]
        total += model.input_gradient(path, target_index, reference).sum(axis=0)
    ig = total * diff / steps

    f_base = -((model.forward(xb)[target_index] - reference) ** 2)
    delta = 0.0 - f_base
    residual = abs(float(ig.sum()) - delta)
    return AttributionMap(ig, target_index, steps, baseline_name, float(delta), residual)


def crossover_indices(spectrum: EigenSpectrum, gamma: float = 1.0) -> tuple[int, int, int]:
    """1-based (most subradiant, closest to natural rate, most superradiant) mode indices."""
    rates = np.asarray(spectrum.decay_rates)
    # argmin returns the first index achieving the minimum
    return 1, int(np.argmin(np.abs(rates - gamma))) + 1, len(rates)


def band_fraction(amap: AttributionMap | np.ndarray, bandwidth: int) -> float:
    """Share of total absolute attribution within ``bandwidth`` of the diagonal."""
    if bandwidth < 0:
        raise ValueError("bandwidth must be >= 0")
    a = np.abs(amap.collapsed if isinstance(amap, AttributionMap) else np.asarray(amap))
    total = a.sum()
    if total == 0.0:
        return 1.0
    i, j = np.indices(a.shape)
    return float(a[np.abs(i - j) <= bandwidth].sum() / total)


def magnitude_summary(maps) -> list[float]:
    """Maximum absolute collapsed attribution of each map."""
    maps = list(maps)
    if not maps:
        raise ValueError("no maps given")
    return [float(np.max(np.abs(m.collapsed if isinstance(m, AttributionMap) else m))) for m in maps]
