"""Resonant dipole-dipole interaction kernels for 1-D equidistant atomic arrays.

All rates and shifts are in units of the single-atom decay rate ``gamma``;
lengths are in units of the transition wavelength.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Below this xi the bracketed near-field combinations are evaluated by series.
SERIES_THRESHOLD = 0.1


class GreensPair(NamedTuple):
    f: float  # pairwise decay rate F
    g: float  # pairwise frequency shift G


@dataclass(frozen=True)
class DipoleGeometry:
    n_atoms: int
    spacing: float
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    dipole: tuple[float, float, float] = (0.0, 0.0, 1.0)
    gamma: float = 1.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not self.spacing > 0 or not np.isfinite(self.spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        for name in ("axis", "dipole"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must have unit norm, got |{name}| = {np.linalg.norm(v)!r}")
        object.__setattr__(self, "axis", tuple(float(x) for x in self.axis))
        object.__setattr__(self, "dipole", tuple(float(x) for x in self.dipole))
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def cos_theta(self) -> float:
        """Projection of the dipole on the array axis, shared by every pair."""
        return float(np.dot(self.axis, self.dipole))

    def xi(self, separation: int) -> float:
        return 2.0 * np.pi * self.spacing * separation


@dataclass
class InteractionKernel:
    matrix: np.ndarray
    geometry: DipoleGeometry | None = field(default=None, compare=False)

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[0]


@dataclass
class KernelImage:
    """Two real channels, Re(M) then Im(M), shape ``(2, N, N)``."""

    channels: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.channels.shape[-1]

    def reassemble(self) -> np.ndarray:
        return self.channels[0] + 1j * self.channels[1]


def _near_field_terms(xi: float) -> tuple[float, float]:
    """Return (cos/xi^2 - sin/xi^3, sin/xi^2 + cos/xi^3)."""
    if xi < SERIES_THRESHOLD:
        x2 = xi * xi
        # cos/xi^2 - sin/xi^3 = sum_k>=1 (-1)^k 2k xi^(2k-2) / (2k+1)!
        a = -1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 * (-1.0 / 840.0 + x2 * (1.0 / 45360.0 - x2 / 3991680.0)))
        # sin/xi^2 + cos/xi^3 = xi^-3 + sum_k>=1 (-1)^k (1-2k) xi^(2k-3) / (2k)!
        b = 1.0 / (x2 * xi) + 0.5 / xi + xi * (-1.0 / 8.0 + x2 * (1.0 / 144.0 + x2 * (-1.0 / 5760.0 + x2 / 403200.0)))
        return a, b
    s, c = np.sin(xi), np.cos(xi)
    return c / xi**2 - s / xi**3, s / xi**2 + c / xi**3


def pairwise_rates(xi: float, cos_theta: float, gamma: float = 1.0) -> GreensPair:
    """Collective decay rate F and frequency shift G for one pair at ``xi = k r``."""
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi!r}")
    if not -1.0 <= cos_theta <= 1.0:
        raise ValueError(f"cos_theta must lie in [-1, 1], got {cos_theta!r}")
    perp = 1.0 - cos_theta**2
    near = 1.0 - 3.0 * cos_theta**2
    a, b = _near_field_terms(xi)
    f = 1.5 * gamma * (perp * np.sin(xi) / xi + near * a)
    g = 0.75 * gamma * (-perp * np.cos(xi) / xi + near * b)
    return GreensPair(float(f), float(g))


def build_kernel(geometry: DipoleGeometry) -> InteractionKernel:
    n = geometry.n_atoms
    c = geometry.cos_theta
    # rates depend only on |mu - nu|, so evaluate one value per separation
    per_sep = np.zeros(n, dtype=complex)
    for k in range(1, n):
        f, g = pairwise_rates(geometry.xi(k), c, geometry.gamma)
        per_sep[k] = complex(-0.5 * f, g)
    idx = np.arange(n)
    m = per_sep[np.abs(idx[:, None] - idx[None, :])]
    np.fill_diagonal(m, complex(-0.5 * geometry.gamma, 0.0))
    return InteractionKernel(m, geometry)


def decay_matrix(geometry: DipoleGeometry) -> np.ndarray:
    """Full real matrix [F_mu,nu] including the diagonal F_mu,mu = gamma."""
    return -2.0 * build_kernel(geometry).matrix.real


def to_image(kernel: InteractionKernel) -> KernelImage:
    m = kernel.matrix
    return KernelImage(np.stack([m.real.copy(), m.imag.copy()]))


def noninteracting_baseline(n_atoms: int, gamma: float = 1.0) -> InteractionKernel:
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms!r}")
    m = np.zeros((n_atoms, n_atoms), dtype=complex)
    np.fill_diagonal(m, -0.5 * gamma)
    return InteractionKernel(m, None)
