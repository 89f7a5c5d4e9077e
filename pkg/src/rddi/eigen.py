"""Dense complex eigenvalues and the collective decay spectrum.

The solver follows the classical route: diagonal balancing, Householder
reduction to upper Hessenberg form, then implicitly shifted complex QR
sweeps with Wilkinson shifts and deflation on small subdiagonals.
Only eigenvalues are computed.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass

import numpy as np

from .kernel import InteractionKernel

_RADIX = 2.0


class ConvergenceError(RuntimeError):
    """QR iteration failed to deflate an eigenvalue within the sweep budget."""

    def __init__(self, window: tuple[int, int], sweeps: int):
        self.window = window
        self.sweeps = sweeps
        super().__init__(
            f"QR iteration did not converge: deflation window rows {window[0]}..{window[1]} "
            f"still coupled after {sweeps} sweeps"
        )


@dataclass
class EigenSpectrum:
    eigenvalues: np.ndarray  # complex, in solver order
    decay_rates: np.ndarray  # ascending
    shifts: np.ndarray  # Im(lambda), co-sorted with decay_rates

    def __len__(self) -> int:
        return len(self.decay_rates)


def balance(a: np.ndarray) -> np.ndarray:
    """Diagonal similarity scaling by powers of two (Parlett-Reinsch)."""
    a = a.copy()
    n = a.shape[0]
    converged = False
    while not converged:
        converged = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / _RADIX
            f = 1.0
            s = c + r
            while c < g:
                f *= _RADIX
                c *= _RADIX * _RADIX
            g = r * _RADIX
            while c > g:
                f /= _RADIX
                c /= _RADIX * _RADIX
            if (c + r) / f < 0.95 * s:
                converged = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Reduce to upper Hessenberg form with Householder reflections."""
    h = np.array(a, dtype=complex, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        # H <- P H P with P = I - 2 v v^H
        h[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    """Eigenvalue of [[a, b], [c, d]] closer to d."""
    half = 0.5 * (a - d)
    disc = cmath.sqrt(half * half + b * c)
    mu1 = d - b * c / (half + disc) if half + disc != 0 else d
    mu2 = d - b * c / (half - disc) if half - disc != 0 else d
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def _qr_sweep(h: np.ndarray, lo: int, hi: int, mu: complex) -> None:
    """One implicit single-shift QR step on the window h[lo:hi+1, lo:hi+1]."""
    g = np.empty((2, 2), dtype=complex)
    for k in range(lo, hi):
        if k == lo:
            x = complex(h[lo, lo]) - mu
            y = complex(h[lo + 1, lo])
        else:
            x = complex(h[k, k - 1])
            y = complex(h[k + 1, k - 1])
        ax, ay = abs(x), abs(y)
        if ay == 0.0:
            continue
        r = (ax * ax + ay * ay) ** 0.5
        if ax == 0.0:
            c, s = 0.0, 1.0 + 0j
        else:
            c = ax / r
            s = (x / ax) * y.conjugate() / r
        # unitary G = [[c, s], [-conj(s), c]] zeroes y against x
        g[0, 0] = c
        g[0, 1] = s
        g[1, 0] = -s.conjugate()
        g[1, 1] = c
        j0 = lo if k == lo else k - 1
        h[k : k + 2, j0 : hi + 1] = g @ h[k : k + 2, j0 : hi + 1]
        i1 = min(k + 2, hi) + 1
        h[lo:i1, k : k + 2] = h[lo:i1, k : k + 2] @ g.conj().T
        if k > lo:
            h[k + 1, k - 1] = 0.0


def eigenvalues_dense(matrix, tol: float = 1e-12, max_sweeps: int | None = None) -> np.ndarray:
    """All eigenvalues of a square complex matrix.

    Parameters
    ----------
    matrix
        ``(N, N)`` array, real or complex.
    tol
        Relative deflation threshold on subdiagonal entries.
    max_sweeps
        Budget of QR sweeps for any single deflation; defaults to ``30 * N``.

    Raises
    ------
    ConvergenceError
        If a window fails to deflate within ``max_sweeps``.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    n = a.shape[0]
    if max_sweeps is None:
        max_sweeps = 30 * n
    if n == 1:
        return np.array([complex(a[0, 0])])

    h = hessenberg(balance(a.astype(complex)))
    scale = np.max(np.abs(h))
    eig = np.empty(n, dtype=complex)
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if s == 0.0:
                s = scale
            if abs(h[lo, lo - 1]) <= tol * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        if its >= max_sweeps:
            raise ConvergenceError((lo, hi), its)
        its += 1
        if its % 11 == 0:
            # exceptional shift to break cycles
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1].real) + 0.75j * abs(h[hi, hi - 1].imag)
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        _qr_sweep(h, lo, hi, mu)
    return eig


def decay_spectrum(kernel: InteractionKernel | np.ndarray, **solver_kw) -> EigenSpectrum:
    """Eigen-decay rates ``-2 Re(lambda)`` in ascending order, with co-sorted shifts."""
    m = kernel.matrix if isinstance(kernel, InteractionKernel) else np.asarray(kernel)
    lam = eigenvalues_dense(m, **solver_kw)
    rates = -2.0 * lam.real
    shifts = lam.imag
    # ties: ascending shift, then original index
    order = np.lexsort((np.arange(len(lam)), shifts, rates))
    return EigenSpectrum(lam, rates[order], shifts[order])


# --- independent oracle -------------------------------------------------------
# Pure-Python complex arithmetic; deliberately shares nothing with the QR path.


def _charpoly(rows: list[list[complex]]) -> list[complex]:
    """Monic characteristic polynomial coefficients, highest degree first (Faddeev-LeVerrier)."""
    n = len(rows)

    def matmul(x, y):
        return [[sum(x[i][k] * y[k][j] for k in range(n)) for j in range(n)] for i in range(n)]

    coeffs = [1 + 0j]
    mk = [[0j] * n for _ in range(n)]
    for k in range(1, n + 1):
        am = matmul(rows, mk)
        mk = [[am[i][j] + (coeffs[-1] if i == j else 0) for j in range(n)] for i in range(n)]
        amk = matmul(rows, mk)
        coeffs.append(-sum(amk[i][i] for i in range(n)) / k)
    return coeffs


def _polyval(coeffs: list[complex], z: complex) -> complex:
    acc = 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


def _newton_polish(coeffs: list[complex], z: complex, iters: int = 8) -> complex:
    deriv = [c * (len(coeffs) - 1 - i) for i, c in enumerate(coeffs[:-1])]
    for _ in range(iters):
        d = _polyval(deriv, z)
        if d == 0:
            break
        step = _polyval(coeffs, z) / d
        z -= step
        if abs(step) <= 1e-17 * max(1.0, abs(z)):
            break
    return z


def _durand_kerner(coeffs: list[complex], max_iter: int = 2000) -> list[complex]:
    n = len(coeffs) - 1
    bound = 1 + max(abs(c) for c in coeffs[1:])
    roots = [bound * (0.4 + 0.9j) ** k for k in range(n)]
    for _ in range(max_iter):
        delta = 0.0
        new = []
        for i, zi in enumerate(roots):
            denom = 1 + 0j
            for j, zj in enumerate(roots):
                if j != i:
                    denom *= zi - zj
            step = _polyval(coeffs, zi) / denom
            new.append(zi - step)
            delta = max(delta, abs(step))
        roots = new
        if delta <= 1e-15 * bound:
            break
    return roots


def charpoly_oracle(matrix) -> list[complex]:
    """Eigenvalues of an ``N <= 4`` matrix as roots of its characteristic polynomial."""
    rows = [[complex(v) for v in row] for row in matrix]
    n = len(rows)
    if n < 1 or any(len(r) != n for r in rows):
        raise ValueError("expected a nonempty square matrix")
    if n > 4:
        raise ValueError(f"charpoly_oracle supports N <= 4, got N = {n}")
    coeffs = _charpoly(rows)
    if n == 1:
        return [-coeffs[1]]
    if n == 2:
        b, c = coeffs[1], coeffs[2]
        disc = cmath.sqrt(b * b - 4 * c)
        # avoid cancellation: pick the larger-magnitude root first
        q = -0.5 * (b + disc) if abs(b + disc) >= abs(b - disc) else -0.5 * (b - disc)
        if q == 0:
            return [0j, 0j]
        return [q, c / q]
    return [_newton_polish(coeffs, z) for z in _durand_kerner(coeffs)]


def match_multisets(a, b) -> float:
    """Smallest achievable max-abs difference over pairings of two small multisets."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ValueError("multisets differ in size")
    return min(max(abs(x - y) for x, y in zip(a, perm)) for perm in itertools.permutations(b))
