"""Dense finite-dimensional operator helpers.

Operators are plain complex ``numpy`` arrays; vectors are 1-d arrays.  The
functions here never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

ANGLE_TOL = 1e-8
UNITARY_TOL = 1e-10


def as_operator(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"operator must be 2-d, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    return A


def as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1:
        raise ValueError(f"vector must be 1-d, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def adjoint(A) -> np.ndarray:
    return as_operator(A).conj().T


def singular_values(A) -> np.ndarray:
    """Singular values in descending order, ``min(rows, cols)`` of them."""
    A = as_operator(A)
    if 0 in A.shape:
        return np.zeros(0)
    return scipy.linalg.svdvals(A)


def unitarity_defect(U) -> float:
    U = as_operator(U)
    if U.shape[0] != U.shape[1]:
        return np.inf
    return float(np.linalg.norm(U @ U.conj().T - np.eye(U.shape[0]), 2))


def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    U = as_operator(U)
    if U.shape[0] != U.shape[1]:
        raise ValueError(f"unitary operator must be square, got {U.shape}")
    defect = unitarity_defect(U)
    if defect > tol:
        raise ValueError(f"operator is not unitary (defect {defect:.3e} > {tol:.0e})")
    return U


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class Eigenspace:
    angle: float  # fraction of a turn in [0, 1)
    basis: np.ndarray  # columns are orthonormal

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def eigenvalue(self) -> complex:
        return np.exp(2j * np.pi * self.angle)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


def _cluster_angles(angles: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(angles)
    groups: list[list[int]] = []
    for idx in order:
        if groups and angles[idx] - angles[groups[-1][-1]] <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    # the circle wraps: a group hugging 1 joins the group at 0
    if len(groups) > 1 and angles[groups[0][0]] + 1.0 - angles[groups[-1][-1]] <= tol:
        groups[0] = groups.pop() + groups[0]
    return [np.array(g) for g in groups]


def unitary_eigensystem(U, tol: float = ANGLE_TOL) -> list[Eigenspace]:
    """Eigenspaces of a unitary matrix, sorted by angle.

    Uses the complex Schur form: for a normal matrix the triangular factor is
    diagonal up to round-off, so the Schur vectors of a cluster of equal
    eigenvalues are an orthonormal basis of that eigenspace.
    """
    U = check_unitary(U)
    n = U.shape[0]
    if n == 0:
        return []
    T, Z = scipy.linalg.schur(U, output="complex")
    angles = np.mod(np.angle(np.diag(T)) / (2 * np.pi), 1.0)
    spaces = []
    for group in _cluster_angles(angles, tol):
        members = angles[group]
        # average on the circle so clusters straddling 0 stay near 0
        angle = float(np.mod(np.angle(np.mean(np.exp(2j * np.pi * members))) / (2 * np.pi), 1.0))
        if angle > 1.0 - tol:
            angle = 0.0
        spaces.append(Eigenspace(angle, Z[:, group]))
    spaces.sort(key=lambda e: e.angle)
    return spaces


def reconstruct(spaces: list[Eigenspace], dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    for e in spaces:
        out += e.eigenvalue * e.projector()
    return out


def _orthonormal_complement(block: np.ndarray, tol: float) -> np.ndarray:
    if block.shape[1] == 0:
        return block
    u, s, _ = np.linalg.svd(block, full_matrices=False)
    return u[:, s > tol]


def krylov_span(U, generators, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of the cyclic subspace of ``generators``.

    Block Arnoldi with two rounds of Gram-Schmidt; a new direction is kept
    when its residual norm exceeds ``tol`` times the generator scale.
    """
    U = as_operator(U)
    n = U.shape[0]
    gens = [as_vector(g) for g in generators]
    if not gens:
        return np.zeros((n, 0), dtype=complex)
    G = np.column_stack(gens)
    scale = max(1.0, float(np.max(np.linalg.norm(G, axis=0))))
    thresh = tol * scale
    Q = _orthonormal_complement(G, thresh)
    new = Q
    while new.shape[1] and Q.shape[1] < n:
        W = U @ new
        for _ in range(2):
            W = W - Q @ (Q.conj().T @ W)
        new = _orthonormal_complement(W, thresh)
        if new.shape[1]:
            Q = np.column_stack([Q, new])
    return Q


def range_margin(A) -> float:
    """Smallest singular value if ``A`` can be onto, else 0."""
    A = as_operator(A)
    if A.shape[0] > A.shape[1]:
        return 0.0
    s = singular_values(A)
    return float(s[-1]) if s.size else 0.0


def injectivity_margin(A) -> float:
    """Smallest singular value if ``A`` can be one-to-one, else 0."""
    A = as_operator(A)
    if A.shape[1] > A.shape[0]:
        return 0.0
    s = singular_values(A)
    return float(s[-1]) if s.size else 0.0


def intertwiner_space(U1, U2) -> np.ndarray:
    """Basis of all ``V`` with ``V @ U1 == U2 @ V``, shape (k, n2, n1)."""
    U1 = as_operator(U1)
    U2 = as_operator(U2)
    n1, n2 = U1.shape[0], U2.shape[0]
    # row-major vec: vec(V U1) = (I kron U1^T) vec(V), vec(U2 V) = (U2 kron I) vec(V)
    L = np.kron(np.eye(n2), U1.T) - np.kron(U2, np.eye(n1))
    null = scipy.linalg.null_space(L, rcond=1e-10)
    return np.stack([null[:, k].reshape(n2, n1) for k in range(null.shape[1])]) if null.shape[1] else np.zeros((0, n2, n1), dtype=complex)


def permutation_unitary(perm) -> np.ndarray:
    """Koopman matrix ``(U f)(x) = f(perm[x])``."""
    perm = np.asarray(perm, dtype=int)
    n = perm.size
    U = np.zeros((n, n), dtype=complex)
    U[np.arange(n), perm] = 1.0
    return U


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
