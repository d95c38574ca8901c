"""Joinings of finite measure-preserving systems and their Markov operators.

A finite system is a permutation of ``{0, ..., n-1}`` with an invariant,
strictly positive probability vector.  Functions are value vectors and the
``L^2`` inner product is weighted by ``p``.  A joining is an ``n1 x n2``
nonnegative matrix with marginals ``p1``, ``p2`` that is invariant under the
product permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from .hilbert import range_margin
from .markov import MarkovReport, markov_report, weighted_norm

TOL = 1e-12


def _parse_prob(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, str)):
        return Fraction(v)
    return float(v)


@dataclass(frozen=True)
class FiniteMPS:
    perm: tuple[int, ...]
    p: tuple

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        p = tuple(_parse_prob(v) for v in self.p)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "p", p)
        n = len(perm)
        if sorted(perm) != list(range(n)):
            raise ValueError("perm is not a bijection of {0, ..., n-1}")
        if len(p) != n:
            raise ValueError("p and perm differ in length")
        if any(v <= 0 for v in p):
            raise ValueError("p must be strictly positive")
        if self.exact:
            if sum(p) != 1:
                raise ValueError(f"p sums to {sum(p)}, not 1")
            if any(p[perm[x]] != p[x] for x in range(n)):
                raise ValueError("p is not invariant under perm")
        else:
            if abs(sum(float(v) for v in p) - 1.0) > 1e-15:
                raise ValueError("p does not sum to 1")
            if any(abs(float(p[perm[x]]) - float(p[x])) > 1e-15 for x in range(n)):
                raise ValueError("p is not invariant under perm")

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.p)

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(v) for v in self.p])

    def koopman(self) -> np.ndarray:
        """``(U f)(x) = f(perm[x])``."""
        U = np.zeros((self.n, self.n))
        U[np.arange(self.n), self.perm] = 1.0
        return U

    @classmethod
    def rotation(cls, n: int, step: int = 1) -> "FiniteMPS":
        return cls(tuple((x + step) % n for x in range(n)), (Fraction(1, n),) * n)

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteMPS":
        perm = d.get("permutation", d.get("perm"))
        if "n" in d and len(perm) != int(d["n"]):
            raise ValueError("n does not match the permutation length")
        p = d.get("p")
        if p is None:
            p = [Fraction(1, len(perm))] * len(perm)
        return cls(tuple(perm), tuple(p))

    def to_dict(self) -> dict:
        return {"n": self.n, "permutation": list(self.perm), "p": [str(v) for v in self.p]}


def product_joining(sys1: FiniteMPS, sys2: FiniteMPS) -> np.ndarray:
    return np.outer(sys1.probs, sys2.probs)


def diagonal_joining(sys: FiniteMPS) -> np.ndarray:
    return np.diag(sys.probs)


def graph_joining(pi, sys1: FiniteMPS, sys2: FiniteMPS) -> np.ndarray:
    lam = np.zeros((sys1.n, sys2.n))
    lam[np.arange(sys1.n), np.asarray(pi)] = sys1.probs
    return lam


@dataclass
class JoiningReport:
    min_entry: float
    marginal1_deviation: float
    marginal2_deviation: float
    invariance_deviation: float
    tol: float = TOL

    @property
    def nonnegative(self) -> bool:
        return self.min_entry >= -self.tol

    @property
    def marginals_ok(self) -> bool:
        return self.marginal1_deviation <= self.tol and self.marginal2_deviation <= self.tol

    @property
    def invariant(self) -> bool:
        return self.invariance_deviation <= self.tol

    @property
    def valid(self) -> bool:
        return self.nonnegative and self.marginals_ok and self.invariant


def validate_joining(lam, sys1: FiniteMPS, sys2: FiniteMPS, tol: float = TOL) -> JoiningReport:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (sys1.n, sys2.n):
        raise ValueError(f"joining has shape {lam.shape}, expected {(sys1.n, sys2.n)}")
    moved = lam[np.ix_(sys1.perm, sys2.perm)]
    return JoiningReport(
        min_entry=float(lam.min()),
        marginal1_deviation=float(np.max(np.abs(lam.sum(axis=1) - sys1.probs))),
        marginal2_deviation=float(np.max(np.abs(lam.sum(axis=0) - sys2.probs))),
        invariance_deviation=float(np.max(np.abs(moved - lam))),
        tol=tol,
    )


def markov_from_joining(lam, sys1: FiniteMPS, sys2: FiniteMPS) -> np.ndarray:
    """``(Phi f)(y) = sum_x lam(x, y) f(x) / p2(y)``, an operator ``L^2(p1) -> L^2(p2)``."""
    if not validate_joining(lam, sys1, sys2).valid:
        raise ValueError("not a joining of the given systems")
    lam = np.asarray(lam, dtype=float)
    return lam.T / sys2.probs[:, None]


def pairing_deviation(Phi, lam, sys1: FiniteMPS, sys2: FiniteMPS) -> float:
    """Max over basis ``f, g`` of ``|<Phi f, g>_{p2} - sum f(x) g(y) lam(x, y)|``."""
    # with indicator f = 1_x, g = 1_y both sides are entries of n1 x n2 matrices
    lhs = (np.asarray(Phi) * sys2.probs[:, None]).T
    return float(np.max(np.abs(lhs - np.asarray(lam))))


def equivariance_deviation(Phi, sys1: FiniteMPS, sys2: FiniteMPS) -> float:
    """``max |Phi U_T1 - U_T2 Phi|``."""
    Phi = np.asarray(Phi)
    return float(np.max(np.abs(Phi @ sys1.koopman() - sys2.koopman() @ Phi)))


def markov_check(Phi, sys1: FiniteMPS, sys2: FiniteMPS, seed: int = 0) -> MarkovReport:
    return markov_report(np.asarray(Phi), sys1.probs, sys2.probs, seed=seed)


def joining_from_markov(Phi, sys1: FiniteMPS, sys2: FiniteMPS) -> np.ndarray:
    """The unique joining ``lam(x, y) = p2(y) (Phi 1_x)(y)``."""
    Phi = np.asarray(Phi)
    if Phi.shape != (sys2.n, sys1.n):
        raise ValueError(f"operator has shape {Phi.shape}, expected {(sys2.n, sys1.n)}")
    if not markov_check(Phi, sys1, sys2).passed:
        raise ValueError("operator is not Markov")
    if equivariance_deviation(Phi, sys1, sys2) > TOL:
        raise ValueError("operator does not intertwine the Koopman operators")
    return np.real(Phi).T * sys2.probs[None, :]


@dataclass
class JoiningSpace:
    """Joinings as ``particular + span(basis)``, cut out by ``lam >= 0``."""

    particular: np.ndarray
    basis: list[np.ndarray]
    exact_basis: list[sympy.Matrix] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)


def _homogeneous_system(sys1: FiniteMPS, sys2: FiniteMPS) -> sympy.Matrix:
    n1, n2 = sys1.n, sys2.n

    def var(x, y):
        return x * n2 + y

    rows = []
    for x in range(n1):
        r = [0] * (n1 * n2)
        for y in range(n2):
            r[var(x, y)] = 1
        rows.append(r)
    for y in range(n2):
        r = [0] * (n1 * n2)
        for x in range(n1):
            r[var(x, y)] = 1
        rows.append(r)
    for x in range(n1):
        for y in range(n2):
            r = [0] * (n1 * n2)
            r[var(sys1.perm[x], sys2.perm[y])] += 1
            r[var(x, y)] -= 1
            if any(r):
                rows.append(r)
    return sympy.Matrix(rows)


def joining_space(sys1: FiniteMPS, sys2: FiniteMPS) -> JoiningSpace:
    """Affine hull of the joining polytope.

    The homogeneous constraints (zero marginals, invariance) have integer
    coefficients, so the null space is computed exactly over the rationals;
    dimension 0 certifies the product measure as the only joining.
    """
    null = _homogeneous_system(sys1, sys2).nullspace()
    shape = (sys1.n, sys2.n)
    exact = [v.reshape(*shape) for v in null]
    basis = [np.array(v.tolist(), dtype=float).reshape(shape) for v in null]
    return JoiningSpace(product_joining(sys1, sys2), basis, exact)


def _exact_rank(M: sympy.Matrix) -> int:
    return M.rank() if M.rows and M.cols else 0


def is_indecomposable(lam, sys1: FiniteMPS, sys2: FiniteMPS, space: JoiningSpace | None = None, tol: float = TOL) -> bool:
    """Extreme-point test for the joining polytope.

    ``lam`` is extreme iff no nonzero direction of the affine hull vanishes on
    every entry where ``lam`` is zero: such a direction would allow moving in
    both senses while staying nonnegative.
    """
    lam = np.asarray(lam, dtype=float)
    if not validate_joining(lam, sys1, sys2).valid:
        raise ValueError("not a joining of the given systems")
    space = joining_space(sys1, sys2) if space is None else space
    if space.dim == 0:
        return True
    zero = [(x, y) for x in range(sys1.n) for y in range(sys2.n) if lam[x, y] <= tol]
    if not zero:
        return False
    D = sympy.Matrix([[b[x, y] for b in space.exact_basis] for x, y in zero])
    return _exact_rank(D) == space.dim


def markov_from_factor_map(pi, sys1: FiniteMPS, sys2: FiniteMPS) -> tuple[np.ndarray, np.ndarray]:
    """``U_pi f = f o pi`` (an isometry ``L^2(p2) -> L^2(p1)``) and its adjoint.

    The adjoint is conditional expectation onto fibres of ``pi``.
    """
    pi = [int(v) for v in pi]
    if len(pi) != sys1.n or any(not 0 <= v < sys2.n for v in pi):
        raise ValueError("pi must map {0..n1-1} into {0..n2-1}")
    if any(pi[sys1.perm[x]] != sys2.perm[pi[x]] for x in range(sys1.n)):
        raise ValueError("pi does not intertwine the two permutations")
    push = [sum((sys1.p[x] for x in range(sys1.n) if pi[x] == y), start=0 * sys1.p[0]) for y in range(sys2.n)]
    if sys1.exact and sys2.exact:
        if push != list(sys2.p):
            raise ValueError("pi does not push p1 forward to p2")
    elif np.max(np.abs(np.array(push, dtype=float) - sys2.probs)) > 1e-15:
        raise ValueError("pi does not push p1 forward to p2")
    U = np.zeros((sys1.n, sys2.n))
    U[np.arange(sys1.n), pi] = 1.0
    adj = (U.T * sys1.probs[None, :]) / sys2.probs[:, None]
    return U, adj


def constants_projection(sys_in: FiniteMPS, sys_out: FiniteMPS) -> np.ndarray:
    """``f -> (integral of f) * 1``."""
    return np.outer(np.ones(sys_out.n), sys_in.probs)


def distance_from_trivial(op, sys_in: FiniteMPS, sys_out: FiniteMPS) -> float:
    return weighted_norm(np.asarray(op) - constants_projection(sys_in, sys_out), sys_in.probs, sys_out.probs)


def weighted_range_margin(op, sys_in: FiniteMPS, sys_out: FiniteMPS) -> float:
    scaled = np.sqrt(sys_out.probs)[:, None] * np.asarray(op) / np.sqrt(sys_in.probs)[None, :]
    return range_margin(scaled)


@dataclass
class Composition:
    op: np.ndarray
    markov: MarkovReport
    phi_range_margin: float
    psi_distance: float
    distance: float
    margin_tol: float = 1e-10

    @property
    def nontrivial(self) -> bool:
        return self.distance > self.margin_tol

    @property
    def hypotheses(self) -> bool:
        return self.phi_range_margin > self.margin_tol and self.psi_distance > self.margin_tol

    @property
    def conclusion_holds(self) -> bool:
        """Dense-range ``Phi`` and non-trivial ``Psi`` give a non-trivial composition."""
        return self.markov.passed and (not self.hypotheses or self.nontrivial)


def compose_markov(Psi, Phi, sys1: FiniteMPS, sys2: FiniteMPS, sys3: FiniteMPS) -> Composition:
    """``Psi o Phi`` for Markov ``Phi: L^2(p1) -> L^2(p2)`` and ``Psi: L^2(p2) -> L^2(p3)``."""
    Psi, Phi = np.asarray(Psi), np.asarray(Phi)
    if Phi.shape != (sys2.n, sys1.n) or Psi.shape != (sys3.n, sys2.n):
        raise ValueError(f"incompatible shapes {Psi.shape} o {Phi.shape}")
    for name, op, a, b in (("Phi", Phi, sys1, sys2), ("Psi", Psi, sys2, sys3)):
        if not markov_check(op, a, b).passed:
            raise ValueError(f"{name} is not Markov")
    op = Psi @ Phi
    return Composition(
        op=op,
        markov=markov_check(op, sys1, sys3),
        phi_range_margin=weighted_range_margin(Phi, sys1, sys2),
        psi_distance=distance_from_trivial(Psi, sys2, sys3),
        distance=distance_from_trivial(op, sys1, sys3),
    )
