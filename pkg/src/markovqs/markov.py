"""Markov-operator axioms between weighted finite ``L^2`` spaces.

An operator ``P`` maps functions on a space with probability weights
``p_in`` to functions on a space with weights ``p_out``; it is Markov when
it fixes constants, its weighted adjoint fixes constants, it maps
nonnegative functions to nonnegative functions, and it is a contraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_NORM_MAX = 1024


@dataclass
class MarkovReport:
    constants_deviation: float
    adjoint_constants_deviation: float
    min_output: float
    min_entry: float
    norm: float
    constants_ok: bool
    adjoint_constants_ok: bool
    positivity_ok: bool
    contraction_ok: bool

    @property
    def passed(self) -> bool:
        return self.constants_ok and self.adjoint_constants_ok and self.positivity_ok and self.contraction_ok

    def to_dict(self) -> dict:
        return {
            "constants_deviation": self.constants_deviation,
            "adjoint_constants_deviation": self.adjoint_constants_deviation,
            "min_output": self.min_output,
            "min_entry": self.min_entry,
            "norm": self.norm,
            "constants_ok": self.constants_ok,
            "adjoint_constants_ok": self.adjoint_constants_ok,
            "positivity_ok": self.positivity_ok,
            "contraction_ok": self.contraction_ok,
            "passed": self.passed,
        }


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def weighted_adjoint(op, p_in, p_out):
    """Adjoint of ``op: L^2(p_in) -> L^2(p_out)``: ``D_in^-1 op^H D_out``."""
    p_in, p_out = np.asarray(p_in, float), np.asarray(p_out, float)
    if sp.issparse(op):
        return sp.diags(1.0 / p_in) @ op.conj().T @ sp.diags(p_out)
    return (np.asarray(op).conj().T * p_out[None, :]) / p_in[:, None]


def weighted_norm(op, p_in, p_out) -> float:
    p_in, p_out = np.asarray(p_in, float), np.asarray(p_out, float)
    if sp.issparse(op):
        scaled = sp.diags(np.sqrt(p_out)) @ op @ sp.diags(1.0 / np.sqrt(p_in))
        if max(scaled.shape) <= DENSE_NORM_MAX:
            return float(np.linalg.norm(scaled.toarray(), 2))
        return float(spla.svds(scaled.astype(complex), k=1, return_singular_vectors=False, random_state=0)[0])
    scaled = np.sqrt(p_out)[:, None] * np.asarray(op) / np.sqrt(p_in)[None, :]
    return float(np.linalg.norm(scaled, 2))


def markov_report(op, p_in=None, p_out=None, trials: int = 100, seed: int = 0, tol: float = 1e-12, norm_tol: float = 1e-10) -> MarkovReport:
    n_out, n_in = op.shape
    p_in = _uniform(n_in) if p_in is None else np.asarray(p_in, float)
    p_out = _uniform(n_out) if p_out is None else np.asarray(p_out, float)
    const = op @ np.ones(n_in)
    c_dev = float(np.max(np.abs(const - 1.0)))
    adj = weighted_adjoint(op, p_in, p_out)
    a_dev = float(np.max(np.abs(adj @ np.ones(n_out) - 1.0)))
    rng = np.random.default_rng(seed)
    F = rng.random((n_in, trials))
    out = op @ F
    min_out = float(np.min(np.real(out))) if np.iscomplexobj(out) else float(np.min(out))
    imag = float(np.max(np.abs(np.imag(out)))) if np.iscomplexobj(out) else 0.0
    entries = op.data if sp.issparse(op) else np.asarray(op).ravel()
    min_entry = float(np.min(np.real(entries))) if entries.size else 0.0
    norm = weighted_norm(op, p_in, p_out)
    return MarkovReport(
        constants_deviation=c_dev,
        adjoint_constants_deviation=a_dev,
        min_output=min_out,
        min_entry=min_entry,
        norm=norm,
        constants_ok=c_dev <= tol,
        adjoint_constants_ok=a_dev <= tol,
        positivity_ok=min_out >= -tol and imag <= tol,
        contraction_ok=norm <= 1.0 + norm_tol,
    )
