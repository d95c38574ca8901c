"""Numerical checks of the character-model identities at finite truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..finsets import FinSet, subsets_of_window, tilde
from ..markov import MarkovReport, markov_report
from ..weights import WeightSequence, geometric_weights
from . import operators as ops
from .basis import CharacterIndex, ModelVector, character_values, from_grid, safe_columns
from .config import ModelConfig


def skew_ergodic(cfg: ModelConfig) -> bool:
    """Whether ``(x, g) -> (x + 1, g + phi(x))`` is one cycle on ``Z_N x Z_2``."""
    seen = set()
    x, g = 0, 0
    while (x, g) not in seen:
        seen.add((x, g))
        x, g = (x + 1) % cfg.N, (g + cfg.phi[x]) % 2
    return len(seen) == 2 * cfg.N


# ----------------------------------------------------------- consistency


def grid_oracle_in_characters(grid_op, cols: np.ndarray, cfg: ModelConfig, batch: int = 1024) -> np.ndarray:
    """Columns ``cols`` of a grid operator expressed in the character basis."""
    out = np.empty((cfg.dim, cols.size), dtype=complex)
    for start in range(0, cols.size, batch):
        sl = slice(start, start + batch)
        out[:, sl] = from_grid(grid_op @ character_values(cols[sl], cfg), cfg)
    return out


def oracle_deviation(char_op, grid_op, domain: np.ndarray, cfg: ModelConfig) -> float:
    """Max entry deviation between a character-level operator and its grid oracle on ``domain``."""
    cols = np.flatnonzero(domain)
    if cols.size == 0:
        return 0.0
    oracle = grid_oracle_in_characters(grid_op, cols, cfg)
    return float(np.max(np.abs(char_op[:, cols].toarray() - oracle)))


def grid_consistency(cfg: ModelConfig, ns=None) -> dict[str, float]:
    """Deviation of every model operator from its grid oracle."""
    ns = range(-cfg.K, cfg.K + 1) if ns is None else ns
    full = np.ones(cfg.dim, dtype=bool)
    gT1 = ops.grid_koopman(ops.grid_T1(cfg))
    gT2 = ops.grid_koopman(ops.grid_T2(cfg))
    T1, T2 = ops.koopman_T1(cfg), ops.koopman_T2(cfg)
    out = {
        "U_T1": oracle_deviation(T1, gT1, full, cfg),
        "U_T2": oracle_deviation(T2, gT2, full, cfg),
        "U_T1_adjoint": oracle_deviation(T1.conj().T.tocsr(), gT1.T.tocsr(), full, cfg),
        "U_T2_adjoint": oracle_deviation(T2.conj().T.tocsr(), gT2.T.tocsr(), full, cfg),
        "U_Sbar": oracle_deviation(ops.koopman_Sbar(cfg), ops.grid_koopman(ops.grid_Sbar(cfg)), ops.domain_Sbar(1, cfg), cfg),
        "U_Sbar_inverse": oracle_deviation(
            ops.koopman_Sbar(cfg, -1), ops.grid_koopman(ops.grid_Sbar(cfg, -1)), ops.domain_Sbar(-1, cfg), cfg
        ),
    }
    for n in ns:
        out[f"U_I{n}"] = oracle_deviation(ops.isometry_In(n, cfg), ops.grid_koopman(ops.grid_In(n, cfg)), ops.domain_In(n, cfg), cfg)
        out[f"U_I{n}_adjoint"] = oracle_deviation(
            ops.adjoint_In(n, cfg), ops.grid_In_adjoint(n, cfg), ops.domain_In_adjoint(n, cfg), cfg
        )
    return out


# ----------------------------------------------------------- intertwining


@dataclass
class IntertwiningReport:
    residual: float  # operator norm on the safe subspace
    max_entry: float
    safe_dim: int

    def to_dict(self) -> dict:
        return {"residual": self.residual, "max_entry": self.max_entry, "safe_dim": self.safe_dim}


def _restricted_norm(D: sp.spmatrix) -> float:
    D = D.tocsr()
    rows = np.flatnonzero(np.diff(D.indptr))
    if rows.size == 0:
        return 0.0
    return float(scipy.linalg.norm(D[rows].toarray(), 2))


def verify_intertwining(J, cfg: ModelConfig, U1=None, U2=None) -> IntertwiningReport:
    """``|| U_T1 J - J U_T2 ||`` restricted to characters inside the safe window."""
    U1 = ops.koopman_T1(cfg) if U1 is None else U1
    U2 = ops.koopman_T2(cfg) if U2 is None else U2
    cols = np.flatnonzero(safe_columns(cfg))
    D = (U1 @ J - J @ U2)[:, cols]
    max_entry = float(np.max(np.abs(D.data))) if D.nnz else 0.0
    return IntertwiningReport(_restricted_norm(D), max_entry, int(cols.size))


# ------------------------------------------------------------------ Markov


def verify_markov(op, cfg: ModelConfig | None = None, trials: int = 100, seed: int = 0) -> MarkovReport:
    """Markov axioms of a grid-basis operator under the uniform measure."""
    if cfg is not None and op.shape != (cfg.dim, cfg.dim):
        raise ValueError(f"expected a grid operator of shape {(cfg.dim, cfg.dim)}, got {op.shape}")
    return markov_report(op, trials=trials, seed=seed)


# ------------------------------------------------------------------ kernels


def kernel_margin(op, sector: np.ndarray) -> float:
    """Smallest singular value of ``op`` restricted to the columns in ``sector``."""
    cols = np.flatnonzero(sector)
    if cols.size == 0:
        raise ValueError("empty sector")
    sub = sp.csc_matrix(op)[:, cols].tocsr() if sp.issparse(op) else sp.csr_matrix(np.asarray(op)[:, cols])
    rows = np.flatnonzero(np.diff(sub.indptr))
    if rows.size < cols.size:
        return 0.0
    return float(scipy.linalg.svdvals(sub[rows].toarray())[-1])


def base_values(F: ModelVector, A: FinSet | None, cfg: ModelConfig) -> np.ndarray:
    return F.base_function(A, cfg.N)


def _compose_S(values: np.ndarray, steps: int, cfg: ModelConfig) -> np.ndarray:
    """``x -> f(x + steps * s)`` on ``Z_N``."""
    x = np.arange(cfg.N)
    return values[(x + steps * cfg.s) % cfg.N]


def _coefficient_fn(F: ModelVector, A: FinSet | None, cfg: ModelConfig) -> np.ndarray:
    if A is not None and not A.within(-cfg.M, cfg.M):
        return np.zeros(cfg.N, dtype=complex)
    return F.base_function(A, cfg.N)


def xi_identity_check(F: ModelVector, B: FinSet, a: WeightSequence, cfg: ModelConfig) -> float:
    """Max deviation of ``(JF)_{B+k} = [a * xi^B(S^k .)]_k`` over admissible ``k``.

    ``xi^B_{-m}(x) = f_{tilde(B-m)}(S^m x)`` when ``m + 1 not in B``, else 0.
    """
    if B.min != 0:
        raise ValueError("B must be the canonical (min 0) representative")
    JF = ops.apply_J(F, a, cfg)

    def xi(index: int, y_steps: int) -> np.ndarray:
        m = -index
        if m + 1 in B:
            return np.zeros(cfg.N, dtype=complex)
        return _compose_S(_coefficient_fn(F, tilde(B - m), cfg), m + y_steps, cfg)

    worst = 0.0
    for k in range(-cfg.M - B.min, cfg.M - B.max + 1):
        lhs = _coefficient_fn(JF, B + k, cfg)
        rhs = sum(an * xi(k - n, k) for n, an in a.items())
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def zeta_identity_check(F: ModelVector, A: FinSet, a: WeightSequence, cfg: ModelConfig) -> float:
    """Max deviation of ``(J^*F)_{tilde(A-k)} = [a * zeta^A(S^-k .)]_k``.

    ``zeta^A(x)_l = f_{A-l}(S^l x)``; ``k`` ranges over shifts with
    ``k + 1 not in A`` and ``tilde(A - k)`` inside the window.
    """
    if A.min != 0:
        raise ValueError("A must be the canonical (min 0) representative")
    JsF = ops.apply_J_adjoint(F, a, cfg)

    def zeta(l: int, y_steps: int) -> np.ndarray:
        return _compose_S(_coefficient_fn(F, A - l, cfg), l + y_steps, cfg)

    worst = 0.0
    for k in range(-2 * cfg.M - 2, 2 * cfg.M + 3):
        if k + 1 in A:
            continue
        target = tilde(A - k)
        if not target.within(-cfg.M, cfg.M):
            continue
        lhs = _coefficient_fn(JsF, target, cfg)
        rhs = sum(an * zeta(k - n, -k) for n, an in a.items())
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ----------------------------------------------------------- counterexample


@dataclass
class CounterexampleReport:
    K: int
    G_norm: float
    F_norm: float
    JstarF_norm: float
    bound: float
    boundary_term_deviation: float
    weight_sum: float
    weight_deficit: float

    @property
    def nonzero_ok(self) -> bool:
        return self.F_norm >= 0.5 * self.G_norm

    @property
    def bound_ok(self) -> bool:
        return self.JstarF_norm <= self.bound + 1e-12

    @property
    def passed(self) -> bool:
        return self.nonzero_ok and self.bound_ok

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "G_norm": self.G_norm,
            "F_norm": self.F_norm,
            "JstarF_norm": self.JstarF_norm,
            "bound": self.bound,
            "boundary_term_deviation": self.boundary_term_deviation,
            "weight_sum": self.weight_sum,
            "weight_deficit": self.weight_deficit,
            "nonzero_ok": self.nonzero_ok,
            "bound_ok": self.bound_ok,
            "passed": self.passed,
        }


def counterexample_o7(K: int, cfg: ModelConfig, G: ModelVector | None = None) -> CounterexampleReport:
    """One-sided geometric weights: ``F = G - G o Sbar^-1 / 2`` is almost killed by ``J^*``.

    For ``G`` in the kernel of ``U^*_{I_0}`` the sum telescopes, leaving
    ``J^* F = -2^-(K+2) U^*_{I_0}(G o Sbar^-(K+1))``.
    """
    G = ModelVector.character(1, [1]) if G is None else G
    for key in G.coeffs:
        A = key.A
        if A is None or not A.within(-cfg.M + K + 1, cfg.M):
            raise ValueError(f"window M={cfg.M} cannot hold Sbar-shifts up to {K + 1} of {A!r}")
    if ops.apply_In_adjoint(G, 0, cfg).norm() != 0.0:
        raise ValueError("G is not in the kernel of U*_{I_0}")
    a = geometric_weights(K)
    F = G - 0.5 * ops.apply_Sbar(G, -1, cfg)
    JsF = ops.apply_J_adjoint(F, a, cfg)
    boundary = (-(0.5 ** (K + 2))) * ops.apply_In_adjoint(ops.apply_Sbar(G, -(K + 1), cfg), 0, cfg)
    return CounterexampleReport(
        K=K,
        G_norm=G.norm(),
        F_norm=F.norm(),
        JstarF_norm=JsF.norm(),
        bound=0.5 ** (K + 2) * G.norm(),
        boundary_term_deviation=(JsF - boundary).norm(),
        weight_sum=a.total(),
        weight_deficit=1.0 - a.total(),
    )


def random_model_vector(cfg: ModelConfig, rng: np.random.Generator, window: tuple[int, int] | None = None, terms: int = 12) -> ModelVector:
    """Random finitely supported vector with sets inside ``window`` (default: safe window)."""
    lo, hi = cfg.safe_window if window is None else window
    width = hi - lo + 1
    F = ModelVector()
    for _ in range(terms):
        mask = int(rng.integers(0, 1 << width))
        A = None if mask == 0 else FinSet(lo + b for b in range(width) if mask >> b & 1)
        F.add(CharacterIndex(int(rng.integers(cfg.N)), A), complex(rng.standard_normal(), rng.standard_normal()))
    return F


def dense_small_vector(cfg: ModelConfig, rng: np.random.Generator, max_size: int = 3) -> ModelVector:
    """Random coefficients on every character whose set has at most ``max_size`` points in the window."""
    F = ModelVector()
    for A in subsets_of_window(-cfg.M, cfg.M, include_empty=True):
        if A is not None and len(A) > max_size:
            continue
        for j in range(cfg.N):
            F.add(CharacterIndex(j, A), complex(rng.standard_normal(), rng.standard_normal()))
    return F
