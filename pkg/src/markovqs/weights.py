"""Convolution weights: Fourier coefficients of a flat-zero convex profile.

The profile ``f(x) = exp(2 - 1/|x - 1/2|)`` on ``[0, 1]`` is convex,
symmetric about 1/2 and vanishes to infinite order there.  Its Fourier
coefficients are nonnegative and sum to ``f(0) = 1``; convolution by them has
no nonzero finitely supported image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .finsets import FinSet

# one-sided derivative jump of f at 0 on the circle is f'(0+) - f'(1-) = -8;
# 4 * B2({x}) carries the same kink and has coefficients 2 / (pi^2 n^2)
_KINK_WEIGHT = 4.0


class ConvergenceError(RuntimeError):
    def __init__(self, index: int, deviation: float):
        super().__init__(f"coefficient a_{index} moved by {deviation:.3e} between resolutions")
        self.index = index
        self.deviation = deviation


@dataclass(frozen=True)
class WeightSequence:
    """Real weights ``a_n`` for ``n`` in ``[-K, K]``."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size % 2 == 0:
            raise ValueError("weights need an odd-length window centred at 0")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return (self.values.size - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, n: int) -> float:
        if abs(n) > self.K:
            return 0.0
        return float(self.values[n + self.K])

    def items(self):
        """Pairs ``(n, a_n)`` with nonzero weight."""
        return [(int(n), float(a)) for n, a in zip(self.indices, self.values) if a != 0.0]

    def total(self) -> float:
        return math.fsum(self.values)

    def truncate(self, K: int) -> "WeightSequence":
        if K > self.K:
            raise ValueError(f"cannot widen window from {self.K} to {K}")
        return WeightSequence(self.values[self.K - K : self.K + K + 1])

    @classmethod
    def delta(cls, n: int = 0, K: int | None = None) -> "WeightSequence":
        K = abs(n) if K is None else K
        v = np.zeros(2 * K + 1)
        v[n + K] = 1.0
        return cls(v, normalized=True)


def eval_f(x):
    """The profile ``exp(2 - 1/|x - 1/2|)`` with ``f(1/2) = 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("f is defined on [0, 1]")
    d = np.abs(arr - 0.5)
    safe = np.where(d == 0, 1.0, d)
    out = np.where(d == 0, 0.0, np.exp(2.0 - 1.0 / safe))
    return out if out.ndim else float(out)


def _raw_coefficients(K: int, resolution: int) -> np.ndarray:
    x = np.arange(resolution) / resolution
    bernoulli2 = x * x - x + 1.0 / 6.0
    smooth = eval_f(x) - _KINK_WEIGHT * bernoulli2
    c = np.fft.fft(smooth) / resolution
    n = np.arange(-K, K + 1)
    nz = np.where(n == 0, 1, n)
    kink = np.where(n == 0, 0.0, _KINK_WEIGHT / (2 * np.pi**2 * nz.astype(float) ** 2))
    return c[n % resolution] + kink


def fourier_coefficients(K: int, resolution: int = 1 << 12, tol: float = 1e-10) -> WeightSequence:
    """Coefficients ``a_n = int_0^1 f(x) exp(-2 pi i n x) dx`` for ``|n| <= K``.

    Computed from uniform samples after subtracting the Bernoulli polynomial
    that carries the kink of ``f`` at 0, so aliasing decays like
    ``resolution**-4``.  The result is recomputed at twice the resolution and
    every coefficient must agree within ``tol``.
    """
    if resolution < 1 << 12 or resolution & (resolution - 1):
        raise ValueError("resolution must be a power of two >= 2**12")
    if resolution <= 2 * K:
        raise ValueError("resolution too small for the requested window")
    coarse = _raw_coefficients(K, resolution)
    fine = _raw_coefficients(K, 2 * resolution)
    dev = np.abs(coarse - fine)
    worst = int(np.argmax(dev))
    if dev[worst] > tol:
        raise ConvergenceError(worst - K, float(dev[worst]))
    if np.max(np.abs(fine.imag)) > 1e-12:
        raise ConvergenceError(int(np.argmax(np.abs(fine.imag))) - K, float(np.max(np.abs(fine.imag))))
    a = fine.real
    # f is even about 1/2, so a_n = a_{-n}; symmetrize the rounding
    a = 0.5 * (a + a[::-1])
    return WeightSequence(a)


def normalize(a: WeightSequence) -> WeightSequence:
    total = a.total()
    if not total > 0:
        raise ValueError("cannot normalize weights with nonpositive sum")
    v = a.values / total
    # push the last rounding residue onto the largest weight
    k = int(np.argmax(v))
    v[k] += 1.0 - math.fsum(v)
    return WeightSequence(v, normalized=True)


def geometric_weights(K: int) -> WeightSequence:
    """One-sided weights ``a_n = 2**-(n+1)`` for ``0 <= n <= K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    v = np.zeros(2 * K + 1)
    v[K:] = 0.5 ** (np.arange(K + 1) + 1)
    return WeightSequence(v)


def normalized_weights(K: int, resolution: int = 1 << 12) -> WeightSequence:
    """Coefficients of the flat-zero profile, truncated at ``K`` and renormalized."""
    return normalize(fourier_coefficients(K, resolution))


def convolution_operator(a: WeightSequence, in_window: tuple[int, int], out_window: tuple[int, int]) -> np.ndarray:
    """Toeplitz matrix ``C[k, m] = a_{k-m}``; rows index ``out_window``, columns ``in_window``."""
    ilo, ihi = in_window
    olo, ohi = out_window
    if ihi < ilo or ohi < olo:
        raise ValueError("empty window")
    if olo > ilo - a.K or ohi < ihi + a.K:
        raise ValueError(f"output window {out_window} does not contain {in_window} dilated by {a.K}")
    rows = np.arange(olo, ohi + 1)[:, None]
    cols = np.arange(ilo, ihi + 1)[None, :]
    diff = rows - cols
    inside = np.abs(diff) <= a.K
    return np.where(inside, a.values[np.clip(diff + a.K, 0, 2 * a.K)], 0.0)


def injectivity_margin(a: WeightSequence, support_half_width: int, forbidden: FinSet | None = None) -> float:
    """Smallest singular value of ``x -> a * x`` for ``x`` supported on ``[-m, m]``.

    Rows listed in ``forbidden`` are dropped: the convolution is only required
    to vanish off that set.  A positive value means no nonzero ``x`` in the
    window has ``a * x`` supported inside ``forbidden``.
    """
    m = support_half_width
    out = (-m - a.K, m + a.K)
    C = convolution_operator(a, (-m, m), out)
    keep = np.ones(C.shape[0], dtype=bool)
    if forbidden is not None:
        for s in forbidden:
            if out[0] <= s <= out[1]:
                keep[s - out[0]] = False
    if not keep.any():
        raise ValueError("no rows left after removing the forbidden set")
    return float(scipy.linalg.svdvals(C[keep])[-1]) if keep.sum() >= C.shape[1] else 0.0
