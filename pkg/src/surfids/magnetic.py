"""Closed-form layer for constant magnetic fields.

Canonical invariants of an antisymmetric field matrix, the Landau ladder,
the free integrated density of states and its convolution with the
eigenvalue counting measure of the longitudinal operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AboveEssentialFloor, CapTooLarge, NotAntisymmetric, ZeroField

__all__ = [
    "MagneticStructure",
    "LandauLadder",
    "CountingMeasure",
    "canonicalize_field",
    "canonical_matrix",
    "landau_ladder",
    "unit_ball_volume",
    "free_ids",
    "semiclassical_coefficient",
    "convolve_with_counting",
    "karamata_coefficient",
    "beta_function",
]

DEFAULT_LADDER_BUDGET = 2_000_000


@dataclass(frozen=True)
class MagneticStructure:
    """Invariants ``(m, n, b, beta)`` of a constant field ``B``.

    ``b`` holds the magnitudes of the nonzero eigenvalues ``±i b_j`` of
    ``B``, sorted descending.
    """

    b: tuple[float, ...]
    m: int
    n: int
    beta: float

    def __post_init__(self):
        if len(self.b) != self.m:
            raise ValueError("len(b) must equal m")
        if any(x <= 0 for x in self.b):
            raise ValueError("b_j must be positive")
        if any(self.b[i] < self.b[i + 1] for i in range(self.m - 1)):
            raise ValueError("b must be sorted descending")
        if self.n < 0:
            raise ValueError("n must be nonnegative")

    @classmethod
    def from_frequencies(cls, b, n=0):
        b = tuple(sorted((float(x) for x in b), reverse=True))
        return cls(b=b, m=len(b), n=int(n), beta=float(sum(b)))

    @property
    def d(self) -> int:
        return 2 * self.m + self.n

    @property
    def landau_density(self) -> float:
        """Per-area degeneracy ``b_1...b_m / (2 pi)^m`` of one Landau level."""
        return float(np.prod(self.b)) / (2 * math.pi) ** self.m


def canonicalize_field(B, tol_asym: float = 1e-12) -> MagneticStructure:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"B must be a square matrix, got shape {B.shape}")
    d = B.shape[0]
    scale = max(1.0, float(np.abs(B).max())) if B.size else 1.0
    asym = np.abs(B + B.T)
    if asym.size and asym.max() > tol_asym * scale:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise NotAntisymmetric(int(min(i, j)), int(max(i, j)), float(asym[i, j]))
    # iB is Hermitian with spectrum {±b_j} ∪ {0}
    ev = np.linalg.eigvalsh(1j * 0.5 * (B - B.T))
    zero_tol = 1e-10 * scale
    pos = np.sort(ev[ev > zero_tol])[::-1]
    m = len(pos)
    return MagneticStructure(b=tuple(float(x) for x in pos), m=m, n=d - 2 * m,
                             beta=float(pos.sum()))


def canonical_matrix(b, n=0) -> np.ndarray:
    """Block form ``⊕_j [[0, b_j], [-b_j, 0]] ⊕ 0_n``."""
    b = sorted((float(x) for x in b), reverse=True)
    d = 2 * len(b) + n
    B = np.zeros((d, d))
    for j, bj in enumerate(b):
        B[2 * j, 2 * j + 1] = bj
        B[2 * j + 1, 2 * j] = -bj
    return B


@dataclass(frozen=True)
class LandauLadder:
    levels: tuple[tuple[float, int], ...]
    cap: float

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv for lv, _ in self.levels])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([mu for _, mu in self.levels], dtype=int)


def _lattice_sums(b, cap, budget):
    """All values ``2 Σ b_j l_j <= cap`` over ``l ∈ Z_+^m`` (with multiplicity)."""
    tol = 1e-9 * max(1.0, max(b))
    sums = np.zeros(1)
    for bj in b:
        top = int(math.floor((cap + tol) / (2 * bj)))
        if sums.size * (top + 1) > budget:
            raise CapTooLarge(
                f"enumerating Landau levels up to {cap} needs more than {budget} lattice points"
            )
        sums = (sums[:, None] + 2 * bj * np.arange(top + 1)[None, :]).ravel()
        sums = sums[sums <= cap + tol]
    return np.sort(sums), tol


def landau_ladder(ms: MagneticStructure, cap: float,
                  budget: int = DEFAULT_LADDER_BUDGET) -> LandauLadder:
    """Distinct Landau levels ``Λ_q <= cap`` with their lattice multiplicities."""
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    if ms.m == 0:
        raise ZeroField("Landau ladder is undefined for B = 0")
    sums, tol = _lattice_sums(ms.b, cap, budget)
    # merge floating-point copies of the same level
    breaks = np.flatnonzero(np.diff(sums) > tol) + 1
    groups = np.split(sums, breaks)
    levels = tuple((float(g[0]), int(g.size)) for g in groups)
    return LandauLadder(levels=levels, cap=float(cap))


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def semiclassical_coefficient(d: int) -> float:
    """``ω_d / (2π)^d``, the large-energy limit of ``E^{-d/2} N_0(E)``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return unit_ball_volume(d) / (2 * math.pi) ** d


def _landau_sum(b, E, power, budget):
    """``Σ_l (E - 2Σ b_j l_j)_+^power`` with the convention ``x_+^0 = 1_{x>0}``."""
    if E <= 0:
        return 0.0
    *head, last = b
    if head:
        prefix, _ = _lattice_sums(head, E, budget)
        prefix = prefix[prefix < E]
    else:
        prefix = np.zeros(1)
    rem = E - prefix
    if power == 0:
        # number of l >= 0 with 2*last*l < rem
        return float(np.ceil(rem / (2 * last)).sum())
    top = int(math.ceil(E / (2 * last)))
    if prefix.size * (top + 1) > budget:
        raise CapTooLarge(f"free IDS at E={E} exceeds the enumeration budget")
    vals = rem[:, None] - 2 * last * np.arange(top + 1)[None, :]
    vals = np.clip(vals, 0.0, None)
    return float((vals ** power).sum())


def free_ids(ms: MagneticStructure, E: float, budget: int = DEFAULT_LADDER_BUDGET) -> float:
    """Integrated density of states ``N_0(E)`` of the shifted free magnetic operator.

    Left-continuous: a Landau level ``Λ_q`` contributes only for ``Λ_q < E``.
    """
    E = float(E)
    if E <= 0:
        return 0.0
    if ms.m == 0:
        return semiclassical_coefficient(ms.n) * E ** (ms.n / 2)
    if ms.n == 0:
        return ms.landau_density * _landau_sum(ms.b, E, 0, budget)
    return (ms.landau_density * semiclassical_coefficient(ms.n)
            * _landau_sum(ms.b, E, ms.n / 2, budget))


@dataclass(frozen=True)
class CountingMeasure:
    """Jumps of the eigenvalue counting function of the longitudinal operator.

    ``complete_below`` bounds the energies for which the jump list is
    exhaustive; it defaults to ``essential_floor``.
    """

    jumps: tuple[tuple[float, int], ...]
    essential_floor: float = math.inf
    complete_below: float | None = field(default=None)

    def __post_init__(self):
        for e, w in self.jumps:
            if not e < self.essential_floor:
                raise ValueError(f"jump {e} is not below the essential floor")
            if w < 1:
                raise ValueError("weights must be positive integers")
        es = [e for e, _ in self.jumps]
        if es != sorted(es):
            raise ValueError("jumps must be sorted")

    @classmethod
    def from_levels(cls, levels, essential_floor=math.inf, complete_below=None, tol=1e-9):
        es = np.sort(np.asarray(levels, dtype=float))
        jumps = []
        for e in es:
            if jumps and abs(e - jumps[-1][0]) <= tol * max(1.0, abs(e)):
                jumps[-1] = (jumps[-1][0], jumps[-1][1] + 1)
            else:
                jumps.append((float(e), 1))
        return cls(tuple(jumps), float(essential_floor), complete_below)

    @property
    def limit(self) -> float:
        return self.essential_floor if self.complete_below is None else self.complete_below

    def __call__(self, E: float) -> int:
        """``ρ(E)``: weighted number of jumps strictly below ``E``."""
        return int(sum(w for e, w in self.jumps if e < E))


def convolve_with_counting(ms: MagneticStructure, rho: CountingMeasure, E: float) -> float:
    """``(N_0 * dρ)(E) = Σ_j weight_j N_0(E - E_j)``."""
    if E >= rho.essential_floor:
        raise AboveEssentialFloor(f"E={E} is not below the essential floor {rho.essential_floor}")
    if E > rho.limit:
        raise AboveEssentialFloor(
            f"E={E} exceeds the range {rho.limit} where the counting measure is complete"
        )
    return float(sum(w * free_ids(ms, E - e) for e, w in rho.jumps if e < E))


def beta_function(x: float, y: float) -> float:
    return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def karamata_coefficient(d: int, theta: float, C: float) -> float:
    """Leading coefficient of the surface IDS when ``ρ(E) ~ C E^θ``.

    The surface IDS then grows like ``coeff * E^{d/2 + θ}``.
    """
    if d < 1 or theta <= 0 or C <= 0:
        raise ValueError("need d >= 1, theta > 0, C > 0")
    return (C * d * theta / (d + 2 * theta) * beta_function(d / 2, theta)
            * semiclassical_coefficient(d))
