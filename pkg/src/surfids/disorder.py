"""Alloy-type random surface potentials.

Couplings ``λ_ξ`` are produced by a keyed hash of ``(seed, ξ)`` pushed
through the inverse distribution function, so the value at a site does
not depend on how the lattice is enumerated and integer translations of
the keys are exact.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import HaloTooSmall
from .hamiltonians import LatticeWindow

__all__ = [
    "CouplingLaw",
    "LongitudinalFactor",
    "SingleSiteProfile",
    "power_law_profile",
    "gaussian_profile",
    "compact_profile",
    "DisorderRealization",
    "hash_uniform",
    "derive_seed",
    "sample_couplings",
    "realization_for_window",
    "choose_halo",
    "transverse_field",
    "evaluate_potential",
    "reduce_site",
    "reduce_on_grid",
    "reduced_field",
    "sup_bound",
    "DEFAULT_TAIL_TOL",
]

DEFAULT_TAIL_TOL = 1e-6  # relative to E_0
_TWO64 = float(2**64)


@dataclass(frozen=True)
class CouplingLaw:
    """Distribution ``F(E) = (E/E_0)^κ`` on ``[0, E_0]``; ``uniform`` is ``κ = 1``."""

    kind: str = "uniform"
    E0: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "power"):
            raise ValueError(f"unknown coupling law {self.kind!r}")
        if self.E0 <= 0 or self.kappa <= 0:
            raise ValueError("E0 and kappa must be positive")
        if self.kind == "uniform" and self.kappa != 1.0:
            raise ValueError("the uniform law has kappa = 1")

    def cdf(self, E):
        E = np.clip(np.asarray(E, dtype=float) / self.E0, 0.0, 1.0)
        return E ** self.kappa

    def ppf(self, u):
        return self.E0 * np.asarray(u, dtype=float) ** (1.0 / self.kappa)


@dataclass(frozen=True)
class LongitudinalFactor:
    """Factor ``g(y) >= 0`` of a separable single-site potential ``v = a(x) g(y)``."""

    kind: str = "constant"
    width: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "indicator", "gaussian"):
            raise ValueError(f"unknown longitudinal factor {self.kind!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def __call__(self, y):
        y = np.asarray(y, dtype=float) - self.center
        r = np.abs(y) if y.ndim <= 1 else np.linalg.norm(y, axis=-1)
        if self.kind == "constant":
            return np.ones_like(r)
        if self.kind == "indicator":
            return (r <= self.width).astype(float)
        return np.exp(-(r / self.width) ** 2)

    @property
    def sup(self) -> float:
        return 1.0


@dataclass(frozen=True)
class SingleSiteProfile:
    """Single-site potential ``v(x, y) = a(x) g(y)``.

    ``kind`` selects ``a``:

    * ``power``:    ``amplitude (1 + |x|)^{-kappa}``, with ``kappa > d``;
    * ``gaussian``: ``amplitude exp(-rate |x|^beta)``;
    * ``compact``:  ``amplitude`` on the open cube of side ``side``.
    """

    kind: str
    amplitude: float = 1.0
    kappa: float = 0.0
    rate: float = 1.0
    beta: float = 2.0
    side: float = 1.0
    longitudinal: LongitudinalFactor | None = None

    def __post_init__(self):
        if self.kind not in ("power", "gaussian", "compact"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.kind == "compact" and self.side <= 0:
            raise ValueError("side must be positive")
        if self.kind == "gaussian" and (self.rate <= 0 or self.beta <= 0):
            raise ValueError("rate and beta must be positive")

    def transverse(self, z) -> np.ndarray:
        """``a`` at displacements ``z`` of shape ``(N, d)``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.kind == "compact":
            return self.amplitude * (np.abs(z).max(axis=1) < self.side / 2).astype(float)
        r = np.linalg.norm(z, axis=1)
        if self.kind == "power":
            return self.amplitude * (1.0 + r) ** (-self.kappa)
        return self.amplitude * np.exp(-self.rate * r ** self.beta)

    def g(self, y) -> np.ndarray | None:
        return None if self.longitudinal is None else self.longitudinal(y)

    def __call__(self, z, y):
        """``v(z, y)`` as an ``(N_z, N_y)`` array."""
        a = self.transverse(z)
        g = np.ones(np.atleast_1d(y).shape[0]) if self.longitudinal is None else self.longitudinal(y)
        return np.outer(a, g)

    @property
    def sup_longitudinal(self) -> float:
        return 1.0 if self.longitudinal is None else self.longitudinal.sup

    def scaled(self, c: float) -> "SingleSiteProfile":
        return replace(self, amplitude=self.amplitude * c)

    def lower_bound(self, d: int) -> tuple[float, float]:
        """``(c_minus, radius)`` with ``a >= c_minus`` on the ball of that radius."""
        if self.kind == "compact":
            return self.amplitude, self.side / 2
        r = 0.5
        return float(self.transverse(np.full((1, d), r / math.sqrt(d)))[0]), r

    def tail_bound(self, R: float, d: int) -> float:
        """Upper bound for ``Σ a(x - ξ)`` over lattice sites with ``|x - ξ|_∞ > R``, any ``x``."""
        if self.kind == "compact":
            return 0.0 if R >= self.side / 2 else math.inf
        # each site owns a unit cube within √d/2 of it
        r0 = R - math.sqrt(d) / 2
        if r0 <= 0:
            return math.inf
        area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
        s = math.sqrt(d) / 2
        if self.kind == "power":
            if self.kappa <= d:
                return math.inf
            f = lambda r: r ** (d - 1) * (1.0 + max(r - s, 0.0)) ** (-self.kappa)
        else:
            f = lambda r: r ** (d - 1) * math.exp(-self.rate * max(r - s, 0.0) ** self.beta)
        val, _ = integrate.quad(f, r0, math.inf, limit=200)
        return self.amplitude * area * val


def power_law_profile(kappa, amplitude=1.0, longitudinal=None):
    return SingleSiteProfile("power", amplitude=amplitude, kappa=kappa, longitudinal=longitudinal)


def gaussian_profile(rate=1.0, beta=2.0, amplitude=1.0, longitudinal=None):
    return SingleSiteProfile("gaussian", amplitude=amplitude, rate=rate, beta=beta,
                             longitudinal=longitudinal)


def compact_profile(side=1.0, amplitude=1.0, longitudinal=None):
    return SingleSiteProfile("compact", amplitude=amplitude, side=side, longitudinal=longitudinal)


# --- counter-based couplings -----------------------------------------------

def _key(seed: int) -> bytes:
    return int(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")


def hash_uniform(seed: int, site) -> float:
    """Uniform number in ``(0, 1)`` that is a pure function of ``(seed, site)``."""
    data = struct.pack(f"<{len(site)}q", *(int(s) for s in site))
    word = int.from_bytes(hashlib.blake2b(data, digest_size=8, key=_key(seed)).digest(), "little")
    return (word + 0.5) / _TWO64


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for realization ``index`` of a base ``seed``."""
    data = struct.pack("<q", int(index))
    digest = hashlib.blake2b(data, digest_size=8, key=_key(seed), person=b"realize").digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class DisorderRealization:
    """Couplings on a finite set of lattice sites.

    ``values[i]`` belongs to ``sites[i]`` and equals the keyed hash of
    ``(seed, sites[i] + key_shift)``.
    """

    sites: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    seed: int
    law: CouplingLaw
    key_shift: tuple[int, ...] | None = None
    halo: float = 0.0

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in s): float(v) for s, v in zip(self.sites, self.values)}

    def manifest(self) -> dict:
        """Key-value record that regenerates this realization (values are not stored)."""
        lo = self.sites.min(axis=0) if len(self.sites) else []
        hi = self.sites.max(axis=0) if len(self.sites) else []
        return {
            "seed": int(self.seed),
            "law": self.law.kind,
            "E0": self.law.E0,
            "kappa": self.law.kappa,
            "lattice_lo": [int(x) for x in lo],
            "lattice_hi": [int(x) for x in hi],
            "halo": self.halo,
            "key_shift": list(self.key_shift) if self.key_shift else None,
        }


def sample_couplings(law: CouplingLaw, sites, seed: int, key_shift=None,
                     halo: float = 0.0) -> DisorderRealization:
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim == 1:
        sites = sites[:, None]
    shift = np.zeros(sites.shape[1], dtype=np.int64) if key_shift is None else np.asarray(key_shift, dtype=np.int64)
    u = np.array([hash_uniform(seed, s + shift) for s in sites])
    vals = law.ppf(u) if len(u) else np.zeros(0)
    ks = None if key_shift is None else tuple(int(x) for x in key_shift)
    return DisorderRealization(sites=sites, values=vals, seed=int(seed), law=law, key_shift=ks,
                               halo=float(halo))


def _site_bounds(window: LatticeWindow, halo: float):
    lo = window.origin + window.h - halo
    hi = window.origin + window.L - window.h + halo
    return np.ceil(lo - 1e-9).astype(int), np.floor(hi + 1e-9).astype(int)


def realization_for_window(window: LatticeWindow, halo: float, law: CouplingLaw, seed: int,
                           key_shift=None) -> DisorderRealization:
    """Couplings on every site within sup-distance ``halo`` of some grid point of ``window``."""
    lo, hi = _site_bounds(window, halo)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    sites = np.stack([g.ravel() for g in grids], axis=1)
    return sample_couplings(law, sites, seed, key_shift, halo)


def choose_halo(profile: SingleSiteProfile, d: int, E0: float,
                tail_tol: float = DEFAULT_TAIL_TOL, r_max: float = 200.0) -> float:
    """Smallest integer-or-half halo with ``E_0 * tail_bound <= tail_tol * E_0``."""
    if profile.kind == "compact":
        return float(math.ceil(profile.side / 2 * 2) / 2)
    R = 0.5
    while R <= r_max:
        if profile.tail_bound(R, d) <= tail_tol:
            return R
        R += 0.5
    raise HaloTooSmall(f"no halo below {r_max} meets tail_tol={tail_tol}")


def _check_halo(profile, d, law, halo, tail_tol):
    if tail_tol is None:
        return
    if profile.tail_bound(halo, d) * law.E0 > tail_tol * law.E0:
        raise HaloTooSmall(
            f"tail bound {profile.tail_bound(halo, d):.3e} at halo {halo} exceeds tail_tol {tail_tol}"
        )


def _aligned_offsets(window: LatticeWindow):
    """Integer grid offsets of lattice sites relative to the window origin, or None."""
    k = 1.0 / window.h
    if abs(k - round(k)) > 1e-9:
        return None
    s = window.origin / window.h
    if np.any(np.abs(s - np.round(s)) > 1e-7):
        return None
    return int(round(k)), np.round(s).astype(np.int64)


def transverse_field(real: DisorderRealization, profile: SingleSiteProfile,
                     window: LatticeWindow, halo: float | None = None,
                     tail_tol: float | None = DEFAULT_TAIL_TOL) -> np.ndarray:
    """``Σ_ξ λ_ξ a(x - ξ)`` on the grid of ``window``, truncated to ``|x - ξ|_∞ <= halo``.

    On grids aligned with the integer lattice the sum is accumulated from
    one precomputed kernel, which makes integer translations bit-exact.
    """
    halo = real.halo if halo is None else halo
    d = window.d
    _check_halo(profile, d, real.law, halo, tail_tol)
    out = np.zeros(window.shape)
    aligned = _aligned_offsets(window)
    n = window.n
    if aligned is not None:
        k, origin_idx = aligned
        r = int(math.floor(halo * k + 1e-9))
        offs = np.arange(-r, r + 1)
        zs = np.meshgrid(*([offs * window.h] * d), indexing="ij")
        kernel = profile.transverse(np.stack([z.ravel() for z in zs], axis=1)).reshape((2 * r + 1,) * d)
        for site, lam in zip(real.sites, real.values):
            if lam == 0.0:
                continue
            # grid index i has coordinate origin + h (i + 1)
            c = site * k - origin_idx - 1
            dst, src = [], []
            for a in range(d):
                i0, i1 = max(c[a] - r, 0), min(c[a] + r, n - 1)
                if i0 > i1:
                    break
                dst.append(slice(i0, i1 + 1))
                src.append(slice(i0 - c[a] + r, i1 - c[a] + r + 1))
            else:
                out[tuple(dst)] += lam * kernel[tuple(src)]
        return out.ravel()
    pts = window.points()
    flat = out.ravel()
    for site, lam in zip(real.sites, real.values):
        if lam == 0.0:
            continue
        z = pts - site
        near = np.abs(z).max(axis=1) <= halo + 1e-12
        flat[near] += lam * profile.transverse(z[near])
    return flat


def evaluate_potential(real: DisorderRealization, profile: SingleSiteProfile, x, y=None,
                       halo: float | None = None,
                       tail_tol: float | None = DEFAULT_TAIL_TOL) -> np.ndarray:
    """``V(x, y)`` at transverse points ``x`` (shape ``(N, d)``) and longitudinal ``y``.

    Returns shape ``(N,)`` when ``y`` is None (i.e. ``g`` omitted), else ``(N, N_y)``.
    """
    halo = real.halo if halo is None else halo
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_halo(profile, x.shape[1], real.law, halo, tail_tol)
    vals = np.zeros(x.shape[0])
    for site, lam in zip(real.sites, real.values):
        z = x - site
        near = np.abs(z).max(axis=1) <= halo + 1e-12
        if near.any():
            vals[near] += lam * profile.transverse(z[near])
    if y is None:
        return vals
    g = profile.g(y)
    g = np.ones(np.atleast_1d(y).shape[0]) if g is None else g
    return np.outer(vals, g)


def reduce_site(profile: SingleSiteProfile, psi, hy: float, y) -> SingleSiteProfile:
    """``w_j(x) = Σ_y v(x, y) ψ_j(y)^2 h_y^ℓ`` for a separable profile.

    ``psi`` is normalized with the same quadrature weight.  The result is
    again a transverse profile (no longitudinal factor).
    """
    psi = np.asarray(psi, dtype=float)
    g = profile.g(y)
    weight = float(np.sum(psi**2) * hy) if g is None else float(np.sum(g * psi**2) * hy)
    return replace(profile.scaled(weight), longitudinal=None)


def reduce_on_grid(v_values, psi, hy: float) -> np.ndarray:
    """Reduce a sampled ``v(x, y)`` array of shape ``(N_x, N_y)`` against ``ψ``."""
    return np.asarray(v_values) @ (np.asarray(psi) ** 2) * hy


def reduced_field(real: DisorderRealization, w: SingleSiteProfile, window: LatticeWindow,
                  halo: float | None = None, tail_tol: float | None = DEFAULT_TAIL_TOL) -> np.ndarray:
    """``W_j(x) = Σ_ξ λ_ξ w_j(x - ξ)`` on the grid of ``window``."""
    return transverse_field(real, replace(w, longitudinal=None), window, halo, tail_tol)


def _cell_sum(profile, halo, cell_points):
    d = cell_points.shape[1]
    r = int(math.ceil(halo)) + 1
    offs = np.arange(-r, r + 1)
    gs = np.meshgrid(*([offs] * d), indexing="ij")
    sites = np.stack([g.ravel() for g in gs], axis=1)
    total = np.zeros(cell_points.shape[0])
    for s in sites:
        z = cell_points - s
        near = np.abs(z).max(axis=1) <= halo + 1e-12
        total[near] += profile.transverse(z[near])
    return total


def sup_bound(profile: SingleSiteProfile, law: CouplingLaw, halo: float, d: int,
              window: LatticeWindow | None = None, resolution: int = 40) -> float:
    """``M = E_0 sup_x Σ_ξ a(x - ξ) sup_y g(y)`` over one unit cell.

    With ``window`` the supremum runs over the residues of its grid points
    modulo the lattice, which bounds the sampled potential exactly.
    """
    if window is not None:
        axes = [np.unique(np.round(np.mod(window.axis(a), 1.0), 12)) for a in range(d)]
    else:
        axes = [np.arange(resolution) / resolution] * d
    gs = np.meshgrid(*axes, indexing="ij")
    cell = np.stack([g.ravel() for g in gs], axis=1)
    return float(law.E0 * _cell_sum(profile, halo, cell).max() * profile.sup_longitudinal)
