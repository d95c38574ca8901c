from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    """Finite base system ``Z_N`` with ``T = +1``, ``S = +s`` and a 0/1 cocycle.

    Coordinates of the ``Z_2`` extension are truncated to ``W = [-M, M]``.
    ``K`` bounds the support of the convolution weights, and the safe window
    ``[-M + safe_margin, M - safe_margin]`` is where every ``I_n`` with
    ``|n| <= K`` stays inside ``W``.
    """

    N: int = 8
    s: int = 1
    phi: tuple[int, ...] | None = None
    M: int = 4
    K: int = 2
    safe_margin: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        phi = tuple(int(v) for v in (self.phi if self.phi is not None else [1] + [0] * (self.N - 1)))
        if len(phi) != self.N or any(v not in (0, 1) for v in phi):
            raise ValueError("phi must be a 0/1 sequence of length N")
        object.__setattr__(self, "phi", phi)
        if math.gcd(self.s, self.N) != 1:
            raise ValueError(f"s={self.s} is not coprime to N={self.N}")
        if self.M < 0 or self.K < 0:
            raise ValueError("M and K must be nonnegative")
        sm = self.K + 1 if self.safe_margin is None else self.safe_margin
        object.__setattr__(self, "safe_margin", sm)
        if sm < self.K + 1:
            raise ValueError(f"safe_margin {sm} < K + 1 leaves I_n unsafe")
        if sm > self.M:
            raise ValueError(f"safe_margin {sm} > M={self.M} leaves an empty safe window")

    @property
    def L(self) -> int:
        """Number of truncated coordinates."""
        return 2 * self.M + 1

    @property
    def window(self) -> tuple[int, int]:
        return (-self.M, self.M)

    @property
    def safe_window(self) -> tuple[int, int]:
        return (-self.M + self.safe_margin, self.M - self.safe_margin)

    @property
    def dim(self) -> int:
        return self.N << self.L

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "s": self.s,
            "phi": list(self.phi),
            "M": self.M,
            "K": self.K,
            "safe_margin": self.safe_margin,
        }
