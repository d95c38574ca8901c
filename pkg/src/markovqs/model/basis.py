"""Character basis of ``L^2(Z_N x {0,1}^W)`` and its grid realization.

A basis element is a base character ``e_j(x) = exp(2 pi i j x / N)`` times a
Walsh character ``(-1)^{A(i)}`` with ``A(i) = sum_{t in A} i_t``.  Dense
arrays index it as ``j * 2**L + mask(A)``, where bit ``t + M`` of ``mask``
marks coordinate ``t``.  Grid points ``(x, i)`` use the same layout with
``mask`` replaced by the bit pattern of ``i``.

Grid functions are stored as their values, and norms use the uniform
probability measure, so characters have unit norm and constants are all-ones.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np
import scipy.linalg

from ..finsets import FinSet
from .config import ModelConfig


def roots_of_unity(N: int) -> np.ndarray:
    """``exp(2 pi i k / N)`` for ``k in range(N)``, exact at quarter turns."""
    k = np.arange(N)
    w = np.exp(2j * np.pi * k / N)
    exact = {0: 1.0, 1: 1j, 2: -1.0, 3: -1j}
    for kk in k:
        if (4 * kk) % N == 0:
            w[kk] = exact[(4 * kk) // N]
    return w


def phase(cfg: ModelConfig, j, steps) -> np.ndarray:
    """Factor picked up by ``e_j`` under composition with ``x -> x + steps``."""
    return roots_of_unity(cfg.N)[(np.asarray(j) * np.asarray(steps)) % cfg.N]


class CharacterIndex(NamedTuple):
    j: int
    A: FinSet | None  # None is the base-only sector

    def index(self, cfg: ModelConfig) -> int:
        return (self.j % cfg.N) * (1 << cfg.L) + (mask_of(self.A, cfg) if self.A is not None else 0)


def mask_of(A: FinSet | None, cfg: ModelConfig) -> int:
    if A is None:
        return 0
    if not A.within(-cfg.M, cfg.M):
        raise ValueError(f"{A!r} leaves the window [-{cfg.M}, {cfg.M}]")
    return sum(1 << (t + cfg.M) for t in A)


def set_of(mask: int, cfg: ModelConfig) -> FinSet | None:
    if mask == 0:
        return None
    return FinSet(b - cfg.M for b in range(cfg.L) if mask >> b & 1)


def index_to_character(idx: int, cfg: ModelConfig) -> CharacterIndex:
    j, mask = divmod(int(idx), 1 << cfg.L)
    return CharacterIndex(j, set_of(mask, cfg))


def split_index(cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``(j, mask)`` for every basis index in order."""
    idx = np.arange(cfg.dim, dtype=np.int64)
    return idx >> cfg.L, idx & ((1 << cfg.L) - 1)


def window_mask(lo: int, hi: int, cfg: ModelConfig) -> int:
    """Bitmask of positions ``[lo, hi]`` clipped to the window."""
    lo, hi = max(lo, -cfg.M), min(hi, cfg.M)
    if hi < lo:
        return 0
    return ((1 << (hi - lo + 1)) - 1) << (lo + cfg.M)


def safe_columns(cfg: ModelConfig, include_empty: bool = True) -> np.ndarray:
    """Boolean mask of basis indices whose set lies in the safe window."""
    _, masks = split_index(cfg)
    lo, hi = cfg.safe_window
    ok = (masks & ~np.int64(window_mask(lo, hi, cfg))) == 0
    if not include_empty:
        ok &= masks != 0
    return ok


def empty_sector(cfg: ModelConfig) -> np.ndarray:
    _, masks = split_index(cfg)
    return masks == 0


class ModelVector:
    """Finitely supported coefficients over :class:`CharacterIndex`."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict[CharacterIndex, complex] | None = None):
        self.coeffs: dict[CharacterIndex, complex] = {}
        for key, c in (coeffs or {}).items():
            self.add(key, c)

    def add(self, key: CharacterIndex, c: complex) -> None:
        if c != 0:
            self.coeffs[key] = self.coeffs.get(key, 0j) + complex(c)

    def __getitem__(self, key: CharacterIndex) -> complex:
        return self.coeffs.get(key, 0j)

    def items(self):
        return self.coeffs.items()

    def __len__(self) -> int:
        return len(self.coeffs)

    def __add__(self, other: "ModelVector") -> "ModelVector":
        out = ModelVector(self.coeffs)
        for k, c in other.items():
            out.add(k, c)
        return out

    def __rmul__(self, scalar: complex) -> "ModelVector":
        return ModelVector({k: scalar * c for k, c in self.items()})

    def __sub__(self, other: "ModelVector") -> "ModelVector":
        return self + (-1.0) * other

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values())))

    def sets(self) -> set:
        return {k.A for k in self.coeffs}

    def base_function(self, A: FinSet | None, N: int) -> np.ndarray:
        """Values over ``Z_N`` of the coefficient function ``f_A``."""
        w = roots_of_unity(N)
        x = np.arange(N)
        out = np.zeros(N, dtype=complex)
        for (j, B), c in self.coeffs.items():
            if B == A:
                out += c * w[(j * x) % N]
        return out

    def to_array(self, cfg: ModelConfig) -> np.ndarray:
        v = np.zeros(cfg.dim, dtype=complex)
        for key, c in self.coeffs.items():
            v[key.index(cfg)] += c
        return v

    @classmethod
    def from_array(cls, v: np.ndarray, cfg: ModelConfig, tol: float = 0.0) -> "ModelVector":
        out = cls()
        for idx in np.flatnonzero(np.abs(v) > tol):
            out.add(index_to_character(idx, cfg), v[idx])
        return out

    @classmethod
    def character(cls, j: int, A: Iterable[int] | FinSet | None) -> "ModelVector":
        if A is not None and not isinstance(A, FinSet):
            A = FinSet(A)
        return cls({CharacterIndex(j, A): 1.0})

    def __repr__(self) -> str:
        return f"ModelVector({len(self)} terms, norm={self.norm():.6g})"


_DENSE_WALSH_MAX_L = 8


@lru_cache(maxsize=8)
def _hadamard(L: int) -> np.ndarray:
    return scipy.linalg.hadamard(1 << L).astype(float)


def _walsh(a: np.ndarray, L: int) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along axis 1 of shape (N, 2**L, batch)."""
    if L <= _DENSE_WALSH_MAX_L:
        # Sylvester order: H[a, b] = (-1)^popcount(a & b)
        return np.matmul(_hadamard(L), a)
    N, _, batch = a.shape
    h = np.array(a, dtype=complex, copy=True)
    for k in range(L):
        v = h.reshape(N, 1 << (L - k - 1), 2, 1 << k, batch)
        lo = v[:, :, 0].copy()
        v[:, :, 0] += v[:, :, 1]
        v[:, :, 1] = lo - v[:, :, 1]
    return h


def character_values(cols: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Grid values of the basis characters with the given indices, one per column."""
    cols = np.asarray(cols, dtype=np.int64)
    j, masks = cols >> cfg.L, cols & ((1 << cfg.L) - 1)
    x = np.arange(cfg.N)
    bits = np.arange(1 << cfg.L, dtype=np.int64)
    base = roots_of_unity(cfg.N)[np.outer(x, j) % cfg.N]  # (N, c)
    walsh = 1.0 - 2.0 * (np.bitwise_count((bits[:, None] & masks[None, :]).astype(np.uint64)) & 1)
    return (base[:, None, :] * walsh[None, :, :]).reshape(cfg.dim, cols.size)


def _as_coeff_array(v, cfg: ModelConfig) -> np.ndarray:
    if isinstance(v, ModelVector):
        v = v.to_array(cfg)
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != cfg.dim:
        raise ValueError(f"expected leading dimension {cfg.dim}, got {v.shape[0]}")
    return v


def to_grid(v, cfg: ModelConfig) -> np.ndarray:
    """Function values on the grid from character coefficients (batched on axis 1)."""
    v = _as_coeff_array(v, cfg)
    single = v.ndim == 1
    c = v.reshape(cfg.N, 1 << cfg.L, -1)
    # sum_j c_j exp(2 pi i j x / N)
    g = np.fft.ifft(c, axis=0) * cfg.N
    g = _walsh(g, cfg.L).reshape(cfg.dim, -1)
    return g[:, 0] if single else g


def from_grid(g, cfg: ModelConfig) -> np.ndarray:
    """Character coefficients of grid values; inverse of :func:`to_grid`."""
    g = np.asarray(g, dtype=complex)
    if g.shape[0] != cfg.dim:
        raise ValueError(f"grid dimension {g.shape[0]} does not match {cfg.dim}")
    single = g.ndim == 1
    c = g.reshape(cfg.N, 1 << cfg.L, -1)
    c = np.fft.fft(c, axis=0) / cfg.N
    c = _walsh(c, cfg.L).reshape(cfg.dim, -1) / (1 << cfg.L)
    return c[:, 0] if single else c


def grid_norm(g) -> float:
    g = np.asarray(g)
    return float(np.sqrt(np.mean(np.abs(g) ** 2)))
