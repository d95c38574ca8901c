"""Spectral measures and spectral profiles of finite unitary operators.

A spectral measure here is atomic: one atom per eigenspace, with angles in
fractions of a turn.  The spectral profile (angle, multiplicity) list plays
the role of maximal spectral type together with the multiplicity function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    ANGLE_TOL,
    as_operator,
    as_vector,
    check_unitary,
    circular_distance,
    injectivity_margin,
    krylov_span,
    range_margin,
    unitary_eigensystem,
)

MASS_TOL = 1e-12
CERTIFICATE_TRIALS = 64


@dataclass(frozen=True)
class SpectralMeasure:
    """Atomic measure on the circle; masses are complex for cross measures."""

    angles: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if self.angles.shape != self.masses.shape:
            raise ValueError("angles and masses differ in length")
        if np.any(np.diff(self.angles) <= 0):
            raise ValueError("angles must be strictly increasing")

    @property
    def total_mass(self) -> complex:
        return complex(np.sum(self.masses))

    def fourier(self, n) -> np.ndarray:
        """Coefficients ``sum_k mass_k exp(2 pi i n angle_k)``."""
        n = np.atleast_1d(np.asarray(n))
        return np.exp(2j * np.pi * np.outer(n, self.angles)) @ self.masses

    def atoms(self) -> list[tuple[float, complex]]:
        return list(zip(self.angles.tolist(), self.masses.tolist()))


def _measure(U, left, right) -> SpectralMeasure:
    angles, masses = [], []
    for space in unitary_eigensystem(U):
        E = space.basis
        m = np.vdot(E.conj().T @ right, E.conj().T @ left)
        if abs(m) >= MASS_TOL:
            angles.append(space.angle)
            masses.append(m)
    return SpectralMeasure(np.array(angles, dtype=float), np.array(masses, dtype=complex))


def _check_dims(U, *vecs):
    U = check_unitary(U)
    vecs = [as_vector(v) for v in vecs]
    for v in vecs:
        if v.shape[0] != U.shape[0]:
            raise ValueError(f"dimension mismatch: operator {U.shape[0]}, vector {v.shape[0]}")
    return U, vecs


def spectral_measure(U, x) -> SpectralMeasure:
    """Measure whose Fourier coefficients are ``<U^n x, x>``."""
    U, (x,) = _check_dims(U, x)
    m = _measure(U, x, x)
    return SpectralMeasure(m.angles, m.masses.real.copy())


def cross_spectral_measure(U, x, y) -> SpectralMeasure:
    """Complex measure whose Fourier coefficients are ``<U^n x, y>``."""
    U, (x, y) = _check_dims(U, x, y)
    return _measure(U, x, y)


def absolutely_continuous(sigma1: SpectralMeasure, sigma2: SpectralMeasure, tol: float = ANGLE_TOL) -> bool:
    """Support containment: every atom of ``sigma1`` sits on an atom of ``sigma2``."""
    support2 = [a for a, m in zip(sigma2.angles, sigma2.masses) if abs(m) >= MASS_TOL]
    for a, m in zip(sigma1.angles, sigma1.masses):
        if abs(m) < MASS_TOL:
            continue
        if not any(circular_distance(a, b) <= tol for b in support2):
            return False
    return True


@dataclass(frozen=True)
class SpectralProfile:
    lines: tuple[tuple[float, int], ...]

    @property
    def dim(self) -> int:
        return sum(m for _, m in self.lines)

    @property
    def max_multiplicity(self) -> int:
        return max((m for _, m in self.lines), default=0)

    def matches(self, other: "SpectralProfile", tol: float = ANGLE_TOL) -> bool:
        if len(self.lines) != len(other.lines):
            return False
        unused = list(other.lines)
        for angle, mult in self.lines:
            hit = next(
                (k for k, (b, m) in enumerate(unused) if m == mult and circular_distance(angle, b) <= tol),
                None,
            )
            if hit is None:
                return False
            unused.pop(hit)
        return True

    def to_dict(self) -> list[dict]:
        return [{"angle": a, "multiplicity": m} for a, m in self.lines]


def spectral_profile(U) -> SpectralProfile:
    return SpectralProfile(tuple((e.angle, e.dim) for e in unitary_eigensystem(U)))


def spectrally_equivalent(U1, U2) -> bool:
    U1, U2 = as_operator(U1), as_operator(U2)
    if U1.shape != U2.shape:
        return False
    return spectral_profile(U1).matches(spectral_profile(U2))


@dataclass
class MultiplicityResult:
    value: int
    certified: bool
    trials_used: int
    generators: np.ndarray | None = field(default=None, repr=False)


def _gaussian_vectors(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)


def max_spectral_multiplicity(U, seed: int = 0, trials: int = CERTIFICATE_TRIALS) -> MultiplicityResult:
    """Largest eigenvalue multiplicity, with a random cyclic-generator certificate.

    The certificate is a set of ``value`` Gaussian vectors whose cyclic span
    is the whole space.  If none is found within ``trials`` draws the value is
    still returned but flagged uncertified.
    """
    U = check_unitary(U)
    n = U.shape[0]
    value = spectral_profile(U).max_multiplicity
    rng = np.random.default_rng(seed)
    for t in range(1, trials + 1):
        Y = _gaussian_vectors(rng, n, value)
        if krylov_span(U, Y.T).shape[1] == n:
            return MultiplicityResult(value, True, t, Y)
    return MultiplicityResult(value, False, trials, None)


@dataclass
class QuasiSimilarityReport:
    forward_residual: float  # ||V U1 - U2 V||
    backward_residual: float  # ||W U2 - U1 W||
    forward_range_margin: float
    backward_range_margin: float
    hypotheses_hold: bool
    spectrally_equivalent: bool | None
    profile1: SpectralProfile | None = None
    profile2: SpectralProfile | None = None

    @property
    def certified(self) -> bool:
        return self.hypotheses_hold and bool(self.spectrally_equivalent)

    def to_dict(self) -> dict:
        return {
            "forward_residual": self.forward_residual,
            "backward_residual": self.backward_residual,
            "forward_range_margin": self.forward_range_margin,
            "backward_range_margin": self.backward_range_margin,
            "hypotheses_hold": self.hypotheses_hold,
            "spectrally_equivalent": self.spectrally_equivalent,
            "certified": self.certified,
            "profile1": self.profile1.to_dict() if self.profile1 else None,
            "profile2": self.profile2.to_dict() if self.profile2 else None,
        }


def certify_quasi_similarity(U1, U2, V, W, residual_tol: float = 1e-8, margin_tol: float = 1e-10) -> QuasiSimilarityReport:
    """Check that ``V: H1 -> H2`` and ``W: H2 -> H1`` are dense-range intertwiners.

    When both hypotheses hold, the spectral profiles are compared; a certified
    report means the pair is quasi-similar *and* spectrally equivalent.
    """
    U1, U2, V, W = (as_operator(A) for A in (U1, U2, V, W))
    fwd = float(np.linalg.norm(V @ U1 - U2 @ V, 2))
    bwd = float(np.linalg.norm(W @ U2 - U1 @ W, 2))
    # W has dense range iff W^* is one-to-one
    m_fwd = range_margin(V)
    m_bwd = injectivity_margin(W.conj().T)
    ok = fwd <= residual_tol and bwd <= residual_tol and m_fwd > margin_tol and m_bwd > margin_tol
    equiv = None
    p1 = p2 = None
    if ok:
        p1, p2 = spectral_profile(U1), spectral_profile(U2)
        equiv = p1.matches(p2)
    return QuasiSimilarityReport(fwd, bwd, m_fwd, m_bwd, ok, equiv, p1, p2)
