"""Koopman operators of the two skew products and the maps ``I_n``.

Two realizations are built for every operator:

* character level: sparse matrices in the basis of :mod:`.basis`, assembled
  from the closed-form action on characters, plus the same action on
  :class:`ModelVector` dictionaries for windows too wide for matrices;
* grid level: composition operators ``F -> F o g`` for explicit point maps
  ``g`` of ``Z_N x {0,1}^W``, used as oracles.

Coordinates a map would read from outside ``W`` are filled with 0 in the
oracle maps; characters that would read them are outside the operator's
domain and their columns are left empty.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..finsets import FinSet, hat, tilde
from ..weights import WeightSequence
from .basis import CharacterIndex, ModelVector, phase, roots_of_unity, split_index
from .config import ModelConfig

_PRUNE = 1e-14


# ---------------------------------------------------------------- bitmasks


def _pad(cfg: ModelConfig, n: int = 0) -> int:
    pad = (62 - cfg.L) // 2
    if pad < max(cfg.K, abs(n)) + 2:
        raise ValueError(f"window M={cfg.M} with shift {n} does not fit 64-bit set masks")
    return pad


def _in_window(ext: np.ndarray, cfg: ModelConfig, pad: int) -> np.ndarray:
    outside = ~np.int64(((1 << cfg.L) - 1) << pad)
    return (ext & outside) == 0


def _shift_ext(ext: np.ndarray, n: int) -> np.ndarray:
    return ext << n if n >= 0 else ext >> (-n)


def mask_hat_shift(masks: np.ndarray, n: int, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Masks of ``hat(A) + n`` and whether they stay inside ``W``."""
    pad = _pad(cfg, n)
    ext = masks.astype(np.int64) << pad
    zero_bit = cfg.M + pad  # position 0
    low = ext & np.int64((1 << (zero_bit + 1)) - 1)
    high = ext >> (zero_bit + 1)
    hatted = low | (high << (zero_bit + 2))
    moved = _shift_ext(hatted, n)
    ok = _in_window(moved, cfg, pad)
    return np.where(ok, moved >> pad, 0), ok


def mask_tilde_shift(masks: np.ndarray, n: int, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masks of ``tilde(B - n)``; also flags for ``n + 1 in B`` and window fit."""
    pad = _pad(cfg, n)
    ext = masks.astype(np.int64) << pad
    moved = _shift_ext(ext, -n)
    one_bit = cfg.M + pad + 1  # position 1
    killed = (moved >> one_bit) & 1 == 1
    low = moved & np.int64((1 << one_bit) - 1)
    high = moved >> (one_bit + 1)
    tilded = low | (high << one_bit)
    ok = _in_window(tilded, cfg, pad) & ~killed
    return np.where(ok, tilded >> pad, 0), killed, ok


def mask_shift(masks: np.ndarray, n: int, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    pad = _pad(cfg, n)
    moved = _shift_ext(masks.astype(np.int64) << pad, n)
    ok = _in_window(moved, cfg, pad)
    return np.where(ok, moved >> pad, 0), ok


# ------------------------------------------------------- character level


def _monomial(cfg: ModelConfig, rows, cols, vals) -> sp.csr_matrix:
    return sp.csr_matrix((vals, (rows, cols)), shape=(cfg.dim, cfg.dim))


def _compose(j: np.ndarray, masks: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    return (j << cfg.L) | masks


def domain_In(n: int, cfg: ModelConfig) -> np.ndarray:
    _, masks = split_index(cfg)
    return mask_hat_shift(masks, n, cfg)[1]


def domain_In_adjoint(n: int, cfg: ModelConfig) -> np.ndarray:
    _, masks = split_index(cfg)
    _, killed, ok = mask_tilde_shift(masks, n, cfg)
    return killed | ok


def domain_Sbar(power: int, cfg: ModelConfig) -> np.ndarray:
    _, masks = split_index(cfg)
    return mask_shift(masks, power, cfg)[1]


def isometry_In(n: int, cfg: ModelConfig) -> sp.csr_matrix:
    """``e_j (-1)^A -> e_j(S^n .) (-1)^{hat(A) + n}`` on its domain."""
    j, masks = split_index(cfg)
    target, ok = mask_hat_shift(masks, n, cfg)
    cols = np.flatnonzero(ok)
    rows = _compose(j[cols], target[cols], cfg)
    return _monomial(cfg, rows, cols, phase(cfg, j[cols], n * cfg.s))


def adjoint_In(n: int, cfg: ModelConfig) -> sp.csr_matrix:
    """``e_j (-1)^A -> 0`` if ``n + 1 in A``, else ``e_j(S^-n .) (-1)^{tilde(A - n)}``."""
    j, masks = split_index(cfg)
    target, _, ok = mask_tilde_shift(masks, n, cfg)
    cols = np.flatnonzero(ok)
    rows = _compose(j[cols], target[cols], cfg)
    return _monomial(cfg, rows, cols, phase(cfg, j[cols], -n * cfg.s))


def koopman_Sbar(cfg: ModelConfig, power: int = 1) -> sp.csr_matrix:
    """``e_j (-1)^A -> e_j(S^p .) (-1)^{A + p}`` for ``p = power``."""
    j, masks = split_index(cfg)
    target, ok = mask_shift(masks, power, cfg)
    cols = np.flatnonzero(ok)
    rows = _compose(j[cols], target[cols], cfg)
    return _monomial(cfg, rows, cols, phase(cfg, j[cols], power * cfg.s))


def cocycle_patterns(cfg: ModelConfig, which: int) -> np.ndarray:
    """For each ``x``, the mask of coordinates ``t`` whose increment is 1.

    ``which=1``: coordinate ``t`` gains ``phi(x + t s)``.
    ``which=2``: as 1 for ``t <= 0``; ``t >= 1`` gains ``phi(x + (t+1) s)``.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    pats = np.zeros(cfg.N, dtype=np.int64)
    for x in range(cfg.N):
        for t in range(-cfg.M, cfg.M + 1):
            u = t + 1 if (which == 2 and t >= 1) else t
            if cfg.phi[(x + u * cfg.s) % cfg.N]:
                pats[x] |= 1 << (t + cfg.M)
    return pats


def _parity(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a.astype(np.uint64)) & 1


def _sign_spectra(masks: np.ndarray, cfg: ModelConfig, which: int) -> np.ndarray:
    """``shat_A(m) = N^-1 sum_x (-1)^{phi_A(x)} exp(-2 pi i m x / N)`` per mask."""
    pats = cocycle_patterns(cfg, which)
    signs = 1.0 - 2.0 * _parity(masks[:, None] & pats[None, :])
    return np.fft.fft(signs, axis=1) / cfg.N


def koopman_skew(cfg: ModelConfig, which: int) -> sp.csr_matrix:
    """Koopman operator of ``T_which`` in the character basis.

    ``U(e_j (-1)^A) = e_j(. + 1) (-1)^{phi_A} (-1)^A``, expanded over base
    characters: block entry ``(j', j)`` is ``shat_A(j' - j) exp(2 pi i j / N)``.
    """
    all_masks = np.arange(1 << cfg.L, dtype=np.int64)
    spectra = _sign_spectra(all_masks, cfg, which)
    w = roots_of_unity(cfg.N)
    jj, jp = np.meshgrid(np.arange(cfg.N), np.arange(cfg.N), indexing="ij")
    block_vals = spectra[:, (jp - jj) % cfg.N] * w[jj][None]  # (mask, j, j')
    keep = np.abs(block_vals) > _PRUNE
    m_idx, j_idx, jp_idx = np.nonzero(keep)
    cols = _compose(j_idx.astype(np.int64), m_idx, cfg)
    rows = _compose(jp_idx.astype(np.int64), m_idx, cfg)
    return _monomial(cfg, rows, cols, block_vals[keep])


def koopman_T1(cfg: ModelConfig) -> sp.csr_matrix:
    return koopman_skew(cfg, 1)


def koopman_T2(cfg: ModelConfig) -> sp.csr_matrix:
    return koopman_skew(cfg, 2)


def _check_weights(a: WeightSequence, cfg: ModelConfig, require_normalized: bool):
    if require_normalized and abs(a.total() - 1.0) > 1e-15:
        raise ValueError(f"weights must sum to 1 (sum = {a.total()!r})")
    if any(abs(n) > cfg.K for n, _ in a.items()):
        raise ValueError(f"weight support exceeds K={cfg.K}")


def markov_J(a: WeightSequence, cfg: ModelConfig, require_normalized: bool = True) -> sp.csr_matrix:
    """``J = sum_n a_n U_{I_n}``."""
    _check_weights(a, cfg, require_normalized)
    out = sp.csr_matrix((cfg.dim, cfg.dim), dtype=complex)
    for n, an in a.items():
        out = out + an * isometry_In(n, cfg)
    return out


def markov_J_adjoint(a: WeightSequence, cfg: ModelConfig, require_normalized: bool = True) -> sp.csr_matrix:
    """``J^* = sum_n a_n U^*_{I_n}``."""
    _check_weights(a, cfg, require_normalized)
    out = sp.csr_matrix((cfg.dim, cfg.dim), dtype=complex)
    for n, an in a.items():
        out = out + an * adjoint_In(n, cfg)
    return out


def domain_J(a: WeightSequence, cfg: ModelConfig) -> np.ndarray:
    ok = np.ones(cfg.dim, dtype=bool)
    for n, _ in a.items():
        ok &= domain_In(n, cfg)
    return ok


def domain_J_adjoint(a: WeightSequence, cfg: ModelConfig) -> np.ndarray:
    ok = np.ones(cfg.dim, dtype=bool)
    for n, _ in a.items():
        ok &= domain_In_adjoint(n, cfg)
    return ok


# ------------------------------------------- character level, dictionaries


def _fits(A: FinSet | None, cfg: ModelConfig) -> bool:
    return A is None or A.within(-cfg.M, cfg.M)


def apply_In(v: ModelVector, n: int, cfg: ModelConfig) -> ModelVector:
    w = roots_of_unity(cfg.N)
    out = ModelVector()
    for (j, A), c in v.items():
        B = None if A is None else hat(A) + n
        if _fits(B, cfg):
            out.add(CharacterIndex(j, B), c * w[(j * n * cfg.s) % cfg.N])
    return out


def apply_In_adjoint(v: ModelVector, n: int, cfg: ModelConfig) -> ModelVector:
    w = roots_of_unity(cfg.N)
    out = ModelVector()
    for (j, A), c in v.items():
        if A is not None and n + 1 in A:
            continue
        B = None if A is None else tilde(A - n)
        if _fits(B, cfg):
            out.add(CharacterIndex(j, B), c * w[(-j * n * cfg.s) % cfg.N])
    return out


def apply_Sbar(v: ModelVector, power: int, cfg: ModelConfig) -> ModelVector:
    w = roots_of_unity(cfg.N)
    out = ModelVector()
    for (j, A), c in v.items():
        B = None if A is None else A + power
        if _fits(B, cfg):
            out.add(CharacterIndex(j, B), c * w[(j * power * cfg.s) % cfg.N])
    return out


def apply_J(v: ModelVector, a: WeightSequence, cfg: ModelConfig) -> ModelVector:
    out = ModelVector()
    for n, an in a.items():
        out = out + an * apply_In(v, n, cfg)
    return out


def apply_J_adjoint(v: ModelVector, a: WeightSequence, cfg: ModelConfig) -> ModelVector:
    out = ModelVector()
    for n, an in a.items():
        out = out + an * apply_In_adjoint(v, n, cfg)
    return out


@lru_cache(maxsize=64)
def _set_sign_spectrum(cfg: ModelConfig, which: int, A: FinSet | None) -> np.ndarray:
    signs = np.ones(cfg.N)
    if A is not None:
        for x in range(cfg.N):
            total = 0
            for t in A:
                u = t + 1 if (which == 2 and t >= 1) else t
                total += cfg.phi[(x + u * cfg.s) % cfg.N]
            signs[x] = -1.0 if total % 2 else 1.0
    return np.fft.fft(signs) / cfg.N


def apply_skew(v: ModelVector, cfg: ModelConfig, which: int) -> ModelVector:
    w = roots_of_unity(cfg.N)
    out = ModelVector()
    for (j, A), c in v.items():
        spec = _set_sign_spectrum(cfg, which, A)
        for jp in range(cfg.N):
            val = spec[(jp - j) % cfg.N] * w[j % cfg.N]
            if abs(val) > _PRUNE:
                out.add(CharacterIndex(jp, A), c * val)
    return out


# ------------------------------------------------------------- grid level


def _grid_coords(cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    g = np.arange(cfg.dim, dtype=np.int64)
    return g >> cfg.L, g & ((1 << cfg.L) - 1)


def _remap_bits(bits: np.ndarray, sources: dict[int, int | None], cfg: ModelConfig) -> np.ndarray:
    """New bit pattern whose coordinate ``t`` copies coordinate ``sources[t]`` (0 if None)."""
    out = np.zeros_like(bits)
    for t, src in sources.items():
        if src is None or not -cfg.M <= src <= cfg.M:
            continue
        out |= ((bits >> (src + cfg.M)) & 1) << (t + cfg.M)
    return out


def _point_index(x: np.ndarray, bits: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    return ((x % cfg.N) << cfg.L) | bits


def grid_skew(cfg: ModelConfig, which: int) -> np.ndarray:
    """Image index of every grid point under ``T_which``."""
    x, bits = _grid_coords(cfg)
    pats = cocycle_patterns(cfg, which)
    return _point_index(x + 1, bits ^ pats[x], cfg)


def grid_T1(cfg: ModelConfig) -> np.ndarray:
    return grid_skew(cfg, 1)


def grid_T2(cfg: ModelConfig) -> np.ndarray:
    return grid_skew(cfg, 2)


def _In_sources(n: int, cfg: ModelConfig) -> dict[int, int]:
    return {t: (n + t if t <= 0 else n + t + 1) for t in range(-cfg.M, cfg.M + 1)}


def grid_In(n: int, cfg: ModelConfig) -> np.ndarray:
    """``I_n`` with out-of-window reads replaced by 0 (not a bijection)."""
    x, bits = _grid_coords(cfg)
    return _point_index(x + n * cfg.s, _remap_bits(bits, _In_sources(n, cfg), cfg), cfg)


def grid_In_completed(n: int, cfg: ModelConfig) -> np.ndarray:
    """A bijection of the grid agreeing with ``I_n`` on coordinates it can read.

    Destination coordinates whose ``I_n`` source lies outside ``W`` are fed,
    in increasing order, from the window coordinates ``I_n`` does not read.
    """
    src = _In_sources(n, cfg)
    W = range(-cfg.M, cfg.M + 1)
    used = {v for v in src.values() if -cfg.M <= v <= cfg.M}
    spare = iter(t for t in W if t not in used)
    full = {t: (v if -cfg.M <= v <= cfg.M else next(spare)) for t, v in src.items()}
    x, bits = _grid_coords(cfg)
    return _point_index(x + n * cfg.s, _remap_bits(bits, full, cfg), cfg)


def grid_Sbar(cfg: ModelConfig, power: int = 1) -> np.ndarray:
    """``Sbar^power``: coordinate ``t`` reads ``t + power`` (0 outside ``W``)."""
    x, bits = _grid_coords(cfg)
    sources = {t: t + power for t in range(-cfg.M, cfg.M + 1)}
    return _point_index(x + power * cfg.s, _remap_bits(bits, sources, cfg), cfg)


def grid_koopman(image: np.ndarray) -> sp.csr_matrix:
    """Composition operator ``(U F)(p) = F(image[p])``."""
    n = image.size
    return sp.csr_matrix((np.ones(n), (np.arange(n), image)), shape=(n, n))


def grid_In_adjoint(n: int, cfg: ModelConfig) -> sp.csr_matrix:
    """Averaging form of ``U^*_{I_n}``: free coordinate ``n + 1``, others shifted back.

    ``(U^* F)(x, i) = 1/2 sum_b F(S^-n x, i')`` with ``i'_m = i_{m-n}`` for
    ``m <= n``, ``i'_{n+1} = b`` and ``i'_m = i_{m-n-1}`` for ``m >= n + 2``.
    """
    x, bits = _grid_coords(cfg)
    sources = {m: (m - n if m <= n else m - n - 1) for m in range(-cfg.M, cfg.M + 1) if m != n + 1}
    base = _remap_bits(bits, sources, cfg)
    rows, cols = [], []
    for b in (0, 1):
        free = base
        if b and -cfg.M <= n + 1 <= cfg.M:
            free = base | (1 << (n + 1 + cfg.M))
        rows.append(np.arange(cfg.dim))
        cols.append(_point_index(x - n * cfg.s, free, cfg))
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.full(rows.size, 0.5), (rows, cols)), shape=(cfg.dim, cfg.dim))


def grid_markov_J(a: WeightSequence, cfg: ModelConfig) -> sp.csr_matrix:
    """``sum_n a_n`` times the completed ``I_n`` composition operators."""
    _check_weights(a, cfg, require_normalized=False)
    out = sp.csr_matrix((cfg.dim, cfg.dim))
    for n, an in a.items():
        out = out + an * grid_koopman(grid_In_completed(n, cfg))
    return out
